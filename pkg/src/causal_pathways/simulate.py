"""Structural vector-autoregressive models: definition, simulation, implied graphs."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .dataset import TimeSeriesDataset
from .estimators import parallel_map
from .fileio import FormatError, atomic_write
from .tsgraph import TimeSeriesGraph


class ModelError(ValueError):
    pass


LINEAR, PRODUCT = "linear", "product-pair"


@dataclass(frozen=True)
class Term:
    """One additive contribution to a target variable.

    ``factors`` is ``((var, lag),)`` for a linear term and two distinct
    ``(var, lag)`` pairs for a product term.
    """

    factors: tuple
    coefficient: float
    form: str = LINEAR

    def __post_init__(self):
        factors = tuple((int(v), int(l)) for v, l in self.factors)
        if self.form not in (LINEAR, PRODUCT):
            raise ModelError(f"unknown term form {self.form!r}")
        if len(factors) != (1 if self.form == LINEAR else 2):
            raise ModelError(f"{self.form} term needs {1 if self.form == LINEAR else 2} factor(s)")
        if self.form == PRODUCT and factors[0] == factors[1]:
            raise ModelError("product-pair factors must be distinct nodes")
        for _, lag in factors:
            if lag < 1:
                raise ModelError(f"term lag {lag} < 1")
        if not np.isfinite(self.coefficient):
            raise ModelError("term coefficient must be finite")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "coefficient", float(self.coefficient))


def linear(parent: int, lag: int, coefficient: float) -> Term:
    return Term(((parent, lag),), coefficient, LINEAR)


def product(first: tuple, second: tuple, coefficient: float) -> Term:
    return Term((first, second), coefficient, PRODUCT)


@dataclass(frozen=True)
class StructuralModel:
    """Per-variable structural equations with additive Gaussian innovations.

    ``terms[j]`` lists the terms of variable ``j``. ``noise_corr`` is an
    optional innovation correlation matrix, which produces contemporaneous
    links in the implied graph.
    """

    n_vars: int
    terms: tuple
    noise_std: tuple
    names: Optional[tuple] = None
    noise_corr: Optional[np.ndarray] = None
    noise_kind: str = "gaussian"

    def __post_init__(self):
        if self.n_vars < 1:
            raise ModelError("n_vars must be >= 1")
        terms = tuple(tuple(ts) for ts in self.terms)
        if len(terms) != self.n_vars:
            raise ModelError(f"terms given for {len(terms)} variables, n_vars={self.n_vars}")
        for ts in terms:
            for term in ts:
                for v, _ in term.factors:
                    if not 0 <= v < self.n_vars:
                        raise ModelError(f"parent index {v} out of range")
        std = tuple(float(s) for s in self.noise_std)
        if len(std) != self.n_vars or not all(s > 0 and np.isfinite(s) for s in std):
            raise ModelError("noise_std needs one positive finite value per variable")
        names = tuple(self.names) if self.names is not None else tuple(f"V{i}" for i in range(self.n_vars))
        if len(names) != self.n_vars or len(set(names)) != self.n_vars:
            raise ModelError("names must be n_vars unique labels")
        corr = None
        if self.noise_corr is not None:
            corr = np.array(self.noise_corr, dtype=float)
            if corr.shape != (self.n_vars, self.n_vars) or not np.allclose(corr, corr.T):
                raise ModelError("noise_corr must be a symmetric n_vars x n_vars matrix")
            if not np.allclose(np.diag(corr), 1.0):
                raise ModelError("noise_corr must have a unit diagonal")
            if np.linalg.eigvalsh(corr).min() <= 0:
                raise ModelError("noise_corr must be positive definite")
            corr.setflags(write=False)
        if self.noise_kind != "gaussian":
            raise ModelError(f"unsupported noise kind {self.noise_kind!r}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "noise_std", std)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "noise_corr", corr)

    @property
    def is_linear(self) -> bool:
        return all(t.form == LINEAR for ts in self.terms for t in ts)

    def max_lag(self) -> int:
        return max((l for ts in self.terms for t in ts for _, l in t.factors), default=0)

    def innovation_cov(self) -> np.ndarray:
        s = np.array(self.noise_std)
        corr = np.eye(self.n_vars) if self.noise_corr is None else self.noise_corr
        return corr * np.outer(s, s)

    def lag_matrices(self) -> np.ndarray:
        """Coefficient matrices ``A[l-1][target, parent]`` of the linear part."""
        L = max(self.max_lag(), 1)
        A = np.zeros((L, self.n_vars, self.n_vars))
        for j, ts in enumerate(self.terms):
            for t in ts:
                if t.form == LINEAR:
                    (v, lag), = t.factors
                    A[lag - 1, j, v] += t.coefficient
        return A

    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(companion_matrix(self.lag_matrices()))).max())


def companion_matrix(A: np.ndarray) -> np.ndarray:
    L, N, _ = A.shape
    C = np.zeros((L * N, L * N))
    C[:N] = np.concatenate(list(A), axis=1)
    C[N:, :-N] = np.eye((L - 1) * N)
    return C


def check_stable(m: StructuralModel) -> None:
    rho = m.spectral_radius()
    if not rho < 1:
        raise ModelError(f"linear part is unstable: spectral radius {rho:.6g} >= 1")


# ---------------------------------------------------------------------------
# built-in models


def model_xwy(alpha: float, a: float, b: float, c: float, sigmas: Sequence[float] = (1.0, 1.0, 1.0)) -> StructuralModel:
    """Source X drives Y directly at lag 2 and via W (lag 1 each)."""
    X, W, Y = 0, 1, 2
    terms = (
        (linear(X, 1, alpha),),
        (linear(W, 1, alpha), linear(X, 1, a)),
        (linear(Y, 1, alpha), linear(X, 2, c), linear(W, 1, b)),
    )
    return StructuralModel(3, terms, tuple(sigmas), ("X", "W", "Y"))


def model_xwy_nonlinear(alpha: float, a: float, b: float, c: float,
                        sigmas: Sequence[float] = (1.0, 1.0, 1.0)) -> StructuralModel:
    """As :func:`model_xwy` but Y depends on the product X(t-2) * W(t-1)."""
    X, W, Y = 0, 1, 2
    terms = (
        (linear(X, 1, alpha),),
        (linear(W, 1, alpha), linear(X, 1, a)),
        (linear(Y, 1, alpha), product((X, 2), (W, 1), c * b)),
    )
    return StructuralModel(3, terms, tuple(sigmas), ("X", "W", "Y"))


def model_four_station(auto: Sequence[float] = (0.8, 0.6, 0.5, 0.7), cross: float = 0.7,
                       contemporaneous: float = 0.3) -> StructuralModel:
    """Four-variable loop A <- B <- D -> C with contemporaneous A-C and B-D links.

    Parents per variable: A {A1, B1}, B {B1, D1}, C {C1, D1}, D {D1}.
    """
    A, B, C, D = range(4)
    terms = (
        (linear(A, 1, auto[0]), linear(B, 1, cross)),
        (linear(B, 1, auto[1]), linear(D, 1, cross)),
        (linear(C, 1, auto[2]), linear(D, 1, cross)),
        (linear(D, 1, auto[3]),),
    )
    corr = np.eye(4)
    corr[A, C] = corr[C, A] = contemporaneous
    corr[B, D] = corr[D, B] = contemporaneous
    return StructuralModel(4, terms, (1.0,) * 4, ("A", "B", "C", "D"), corr)


# ---------------------------------------------------------------------------
# simulation


def _term_arrays(m: StructuralModel):
    lin, prod = [], []
    for j, ts in enumerate(m.terms):
        for t in ts:
            if t.form == LINEAR:
                (v, lag), = t.factors
                lin.append((j, v, lag, t.coefficient))
            else:
                (v1, l1), (v2, l2) = t.factors
                prod.append((j, v1, l1, v2, l2, t.coefficient))
    lin_i = np.array([r[:3] for r in lin], dtype=np.int64).reshape(-1, 3)
    lin_c = np.array([r[3] for r in lin], dtype=float)
    prod_i = np.array([r[:5] for r in prod], dtype=np.int64).reshape(-1, 5)
    prod_c = np.array([r[5] for r in prod], dtype=float)
    return lin_i, lin_c, prod_i, prod_c


@njit(cache=True)
def _run(x, start, lin_i, lin_c, prod_i, prod_c, limit):
    # x holds the innovations on entry and the trajectory on exit
    n_steps = x.shape[0]
    for t in range(start, n_steps):
        for r in range(lin_i.shape[0]):
            x[t, lin_i[r, 0]] += lin_c[r] * x[t - lin_i[r, 2], lin_i[r, 1]]
        for r in range(prod_i.shape[0]):
            x[t, prod_i[r, 0]] += (prod_c[r] * x[t - prod_i[r, 2], prod_i[r, 1]]
                                   * x[t - prod_i[r, 4], prod_i[r, 3]])
        for j in range(x.shape[1]):
            if not abs(x[t, j]) < limit:
                return t
    return -1


def simulate(m: StructuralModel, T: int, seed: int = 0, burn_in: int = 1000,
             overflow_limit: float = 1e100) -> TimeSeriesDataset:
    """Simulate ``T`` steps after discarding ``burn_in`` transient steps."""
    if T < 1:
        raise ModelError(f"T must be >= 1, got {T}")
    if burn_in < 0:
        raise ModelError(f"burn_in must be >= 0, got {burn_in}")
    check_stable(m)
    L = m.max_lag()
    n_steps = L + burn_in + T
    rng = np.random.default_rng(seed)
    eta = rng.standard_normal((n_steps, m.n_vars))
    chol = np.linalg.cholesky(m.innovation_cov())
    x = np.ascontiguousarray(eta @ chol.T)
    x[:L] = 0.0
    failed = _run(x, L, *_term_arrays(m), overflow_limit)
    if failed >= 0:
        raise ModelError(f"trajectory diverged at step {failed - L - burn_in} (burn-in steps negative)")
    return TimeSeriesDataset(x[L + burn_in:], m.names)


def implied_graph(m: StructuralModel, tau_max: Optional[int] = None, tol: float = 1e-12) -> TimeSeriesGraph:
    """Directed links of every nonzero term; contemporaneous links from innovations.

    Dashed pairs follow nonzero innovation covariance, solid pairs nonzero
    entries of its inverse.
    """
    directed = set()
    for j, ts in enumerate(m.terms):
        for t in ts:
            if t.coefficient != 0:
                for v, lag in t.factors:
                    directed.add((v, lag, j))
    solid, dashed = set(), None
    if m.noise_corr is not None:
        cov = m.innovation_cov()
        prec = np.linalg.inv(cov)
        dashed = set()
        for i in range(m.n_vars):
            for j in range(i + 1, m.n_vars):
                if abs(cov[i, j]) > tol:
                    dashed.add((i, j))
                if abs(prec[i, j]) > tol * abs(prec).max():
                    solid.add((i, j))
    tm = tau_max or max(m.max_lag(), 1)
    return TimeSeriesGraph(m.n_vars, tm, frozenset(directed), frozenset(solid),
                           None if dashed is None else frozenset(dashed), m.names)


def ensemble_stats(m: StructuralModel, measure_spec: Callable, n_ens: int, T: int,
                   seed: int = 0, burn_in: int = 1000):
    """Mean and sample std of ``measure_spec(dataset)`` over independent runs.

    ``measure_spec`` returns a scalar or a dict of scalars. Replica ``i`` is
    simulated with seed ``[seed, i]``.
    """
    if n_ens < 2:
        raise ModelError("n_ens must be >= 2")

    def one(i):
        ds = simulate(m, T, seed=[seed, i], burn_in=burn_in)
        try:
            return measure_spec(ds)
        except Exception as exc:
            raise type(exc)(f"replica {i}: {exc}") from exc

    values = parallel_map(one, range(n_ens))
    if isinstance(values[0], dict):
        return {key: _mean_std([v[key] for v in values]) for key in values[0]}
    return _mean_std(values)


def _mean_std(vals):
    arr = np.asarray(vals, dtype=float)
    return float(arr.mean()), float(arr.std(ddof=1))


# ---------------------------------------------------------------------------
# model spec file
#
#   variables: X, W, Y
#   noise: X 1.0
#   link: X 2 -> Y 0.5
#   product: X 2 * W 1 -> Y 0.25
#   corr: X W 0.3


def write_model(m: StructuralModel, path) -> None:
    n = m.names
    lines = [f"variables: {', '.join(n)}"]
    lines += [f"noise: {n[j]} {m.noise_std[j]!r}" for j in range(m.n_vars)]
    for j, ts in enumerate(m.terms):
        for t in ts:
            if t.form == LINEAR:
                (v, lag), = t.factors
                lines.append(f"link: {n[v]} {lag} -> {n[j]} {t.coefficient!r}")
            else:
                (v1, l1), (v2, l2) = t.factors
                lines.append(f"product: {n[v1]} {l1} * {n[v2]} {l2} -> {n[j]} {t.coefficient!r}")
    if m.noise_corr is not None:
        for i in range(m.n_vars):
            for j in range(i + 1, m.n_vars):
                if m.noise_corr[i, j] != 0:
                    lines.append(f"corr: {n[i]} {n[j]} {float(m.noise_corr[i, j])!r}")
    atomic_write(path, "\n".join(lines) + "\n")


def read_model(path) -> StructuralModel:
    path = Path(path)
    if not path.is_file():
        raise ModelError(f"{path}: no such file")
    names = None
    noise, terms, corrs = {}, [], []

    def var(tok, lineno):
        if names is None:
            raise FormatError(path, lineno, "'variables:' must come first")
        if tok not in names:
            raise FormatError(path, lineno, f"unknown variable {tok!r}")
        return names.index(tok)

    def num(tok, lineno, kind=float):
        try:
            return kind(tok)
        except ValueError:
            raise FormatError(path, lineno, f"expected a number, got {tok!r}") from None

    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, body = line.partition(":")
        if not sep:
            raise FormatError(path, lineno, "expected 'key: value'")
        key, toks = key.strip(), body.replace("->", " -> ").replace("*", " * ").split()
        if key == "variables":
            names = [s.strip() for s in body.split(",") if s.strip()]
        elif key == "noise":
            if len(toks) != 2:
                raise FormatError(path, lineno, "expected 'noise: VAR STD'")
            noise[var(toks[0], lineno)] = num(toks[1], lineno)
        elif key == "link":
            if len(toks) != 5 or toks[2] != "->":
                raise FormatError(path, lineno, "expected 'link: PARENT LAG -> TARGET COEFF'")
            try:
                term = Term(((var(toks[0], lineno), num(toks[1], lineno, int)),), num(toks[4], lineno))
            except ModelError as exc:
                raise FormatError(path, lineno, str(exc)) from None
            terms.append((var(toks[3], lineno), term))
        elif key == "product":
            if len(toks) != 8 or toks[2] != "*" or toks[5] != "->":
                raise FormatError(path, lineno, "expected 'product: P1 LAG1 * P2 LAG2 -> TARGET COEFF'")
            factors = ((var(toks[0], lineno), num(toks[1], lineno, int)),
                       (var(toks[3], lineno), num(toks[4], lineno, int)))
            try:
                term = Term(factors, num(toks[7], lineno), PRODUCT)
            except ModelError as exc:
                raise FormatError(path, lineno, str(exc)) from None
            terms.append((var(toks[6], lineno), term))
        elif key == "corr":
            if len(toks) != 3:
                raise FormatError(path, lineno, "expected 'corr: VAR1 VAR2 RHO'")
            corrs.append((var(toks[0], lineno), var(toks[1], lineno), num(toks[2], lineno)))
        else:
            raise FormatError(path, lineno, f"unknown key {key!r}")
    if names is None:
        raise ModelError(f"{path}: missing 'variables:' line")
    n = len(names)
    per_target = [[] for _ in range(n)]
    for j, term in terms:
        per_target[j].append(term)
    corr = None
    if corrs:
        corr = np.eye(n)
        for i, j, rho in corrs:
            corr[i, j] = corr[j, i] = rho
    return StructuralModel(n, tuple(tuple(ts) for ts in per_target),
                           tuple(noise.get(j, 1.0) for j in range(n)), tuple(names), corr)
