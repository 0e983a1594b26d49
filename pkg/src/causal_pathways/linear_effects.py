"""Linear causal effects and exact Gaussian quantities of linear models.

``PopulationGaussian`` wraps a stable linear model and serves the exact
covariance of any set of lagged nodes; the measures module accepts it in
place of a dataset to obtain population values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .dataset import TimeSeriesDataset, lagged_matrix
from .simulate import ModelError, StructuralModel, check_stable, companion_matrix
from .tsgraph import NodeRef, TimeSeriesGraph, causal_paths, parents, parents_of_set, sidepath_neighbors


class EffectError(ValueError):
    pass


# ---------------------------------------------------------------------------
# stationary moments


def _require_linear(m: StructuralModel):
    if not m.is_linear:
        raise ModelError("linear models only")
    check_stable(m)


def autocovariance(m: StructuralModel, max_lag: int) -> np.ndarray:
    """``G[h] = E[x_t x_{t-h}^T]`` for ``h = 0..max_lag``."""
    _require_linear(m)
    A = m.lag_matrices()
    L, N, _ = A.shape
    C = companion_matrix(A)
    Q = np.zeros((L * N, L * N))
    Q[:N, :N] = m.innovation_cov()
    S = solve_discrete_lyapunov(C, Q)
    G = np.zeros((max(max_lag, L - 1) + 1, N, N))
    for h in range(L):
        G[h] = S[:N, h * N:(h + 1) * N]
    for h in range(L, G.shape[0]):
        G[h] = sum(A[l] @ G[h - l - 1] for l in range(L))
    return G[: max_lag + 1]


def stationary_variance(m: StructuralModel, variable: int) -> float:
    return float(autocovariance(m, 0)[0][variable, variable])


class PopulationGaussian:
    """Exact second moments of a stable linear Gaussian model.

    Offers ``covariance(nodes)`` so that information measures can be
    evaluated in closed form instead of from samples.
    """

    def __init__(self, model: StructuralModel):
        _require_linear(model)
        self.model = model
        self.names = model.names
        self._G = autocovariance(model, 0)

    @property
    def N(self) -> int:
        return self.model.n_vars

    def _gamma(self, h: int) -> np.ndarray:
        if h >= self._G.shape[0]:
            self._G = autocovariance(self.model, max(h, 2 * self._G.shape[0]))
        return self._G[h]

    def covariance(self, nodes: Sequence[NodeRef]) -> np.ndarray:
        n = len(nodes)
        out = np.empty((n, n))
        for i, (vi, li) in enumerate(nodes):
            for j, (vj, lj) in enumerate(nodes):
                # E[x_{t-li} x_{t-lj}^T] depends only on lj - li
                h = lj - li
                out[i, j] = self._gamma(h)[vi, vj] if h >= 0 else self._gamma(-h)[vj, vi]
        return out


# ---------------------------------------------------------------------------
# closed forms for the three-variable model


def analytic_mitp_triple(a, b, c, sx, sw, sy) -> float:
    """Population MITP from X(t-2) to Y(t) in the X -> W -> Y model with direct link c."""
    return 0.5 * math.log1p((c + a * b) ** 2 * sx**2 / (b**2 * sw**2 + sy**2))


def analytic_mii_triple(a, b, c, sx, sw, sy) -> float:
    """Population MII of mediator W for the same interaction; negative when W counteracts."""
    return analytic_mitp_triple(a, b, c, sx, sw, sy) - 0.5 * math.log1p(
        c**2 * sx**2 * sw**2 / ((sw**2 + a**2 * sx**2) * sy**2)
    )


# ---------------------------------------------------------------------------
# regressions


@dataclass(frozen=True)
class LinearEffectResult:
    kind: str
    value: float
    source: NodeRef
    target: NodeRef
    mediators: tuple = ()
    regressors: tuple = ()
    stderr: Optional[float] = None
    n_samples: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def lag(self) -> int:
        return self.source.lag - self.target.lag


def _standardized_ols(y: np.ndarray, X: np.ndarray, labels: Sequence[str]):
    """Coefficients and standard errors of ``y`` on standardized ``X``.

    Raises if the design is numerically singular, naming the columns that
    take part in the linear dependency.
    """
    n, p = X.shape
    if n <= p + 1:
        raise EffectError(f"only {n} samples for {p} regressors")
    Xs = X - X.mean(axis=0)
    sd = Xs.std(axis=0)
    ys = y - y.mean()
    ysd = ys.std()
    if ysd == 0:
        raise EffectError("target column has zero variance")
    dead = [labels[j] for j in range(p) if sd[j] == 0]
    if dead:
        raise EffectError(f"singular regression: constant regressor(s) {', '.join(dead)}")
    Xs = Xs / sd
    ys = ys / ysd
    _, s, Vt = np.linalg.svd(Xs, full_matrices=False)
    if s[-1] < 1e-10 * s[0]:
        null = np.abs(Vt[-1])
        culprits = [labels[j] for j in range(p) if null[j] > 1e-6]
        raise EffectError(f"singular regression: collinear parents {', '.join(culprits)}")
    beta, *_ = np.linalg.lstsq(Xs, ys, rcond=None)
    resid = ys - Xs @ beta
    sigma2 = resid @ resid / (n - p - 1)
    cov = sigma2 * np.linalg.inv(Xs.T @ Xs)
    return beta, np.sqrt(np.diag(cov))


def _node_label(names, node: NodeRef) -> str:
    base = names[node.variable]
    return f"{base}(t)" if node.lag == 0 else f"{base}(t-{node.lag})"


def _regress(ds: TimeSeriesDataset, target: NodeRef, regressors: Sequence[NodeRef]):
    nodes = [target] + list(regressors)
    data = lagged_matrix(ds, nodes)
    labels = [_node_label(ds.names, n) for n in regressors]
    beta, se = _standardized_ols(data[:, 0], data[:, 1:], labels)
    return beta, se, data.shape[0]


def path_coefficient(ds: TimeSeriesDataset, g: TimeSeriesGraph, link: tuple) -> LinearEffectResult:
    """Standardized coefficient of ``link = (source, lag, target)`` regressing target on its parents.

    A link absent from ``g`` is added to the regressors.
    """
    i, tau, j = link
    target = NodeRef(j, 0)
    source = NodeRef(i, tau)
    regs = sorted(parents(g, target) | {source})
    beta, se, n = _regress(ds, target, regs)
    k = regs.index(source)
    return LinearEffectResult("path_coefficient", float(beta[k]), source, target,
                              regressors=tuple(regs), stderr=float(se[k]), n_samples=n)


def _check_no_sidepaths(g, source, target):
    side = sidepath_neighbors(g, source, target)
    if side:
        raise EffectError(
            "contemporaneous sidepaths present via "
            + ", ".join(g.node_name(n) for n in sorted(side))
        )


def causal_effect(ds: TimeSeriesDataset, g: TimeSeriesGraph, source: NodeRef,
                  target: NodeRef = NodeRef(0, 0)) -> LinearEffectResult:
    """Standardized total effect: coefficient of source regressing target on source and its parents."""
    if source.lag <= target.lag:
        raise EffectError("causal effect needs a lagged source")
    _check_no_sidepaths(g, source, target)
    regs = [source] + sorted(parents(g, source))
    beta, se, n = _regress(ds, target, regs)
    return LinearEffectResult("CE", float(beta[0]), source, target, regressors=tuple(regs),
                              stderr=float(se[0]), n_samples=n)


def mediator_nodes(g: TimeSeriesGraph, source: NodeRef, target: NodeRef, mediator_variables) -> list:
    """Every causal-path occurrence of the mediator variable(s), source excluded."""
    if isinstance(mediator_variables, int):
        mediator_variables = (mediator_variables,)
    _, path_nodes = causal_paths(g, source, target)
    out = []
    for v in mediator_variables:
        hits = sorted(n for n in path_nodes if n.variable == v and n != source)
        if not hits:
            raise EffectError(f"mediator {g.var_name(v)} not on any causal path")
        out.extend(hits)
    return out


def mediated_causal_effect(ds: TimeSeriesDataset, g: TimeSeriesGraph, source: NodeRef,
                           target: NodeRef, mediator_variable) -> LinearEffectResult:
    """Part of the total effect that passes through the mediator variable."""
    W = mediator_nodes(g, source, target, mediator_variable)
    ce = causal_effect(ds, g, source, target)
    extra = (set(W) | parents_of_set(g, W)) - {source} - set(ce.regressors)
    regs = list(ce.regressors) + sorted(extra)
    beta, se, n = _regress(ds, target, regs)
    direct = float(beta[0])
    return LinearEffectResult("MCE", ce.value - direct, source, target, mediators=tuple(W),
                              regressors=tuple(regs), n_samples=n,
                              extra={"ce": ce.value, "excluding_mediator": direct})


def path_sum_effect(g: TimeSeriesGraph, coefficients: Mapping, source: NodeRef,
                    target: NodeRef) -> LinearEffectResult:
    """Sum over causal paths of the product of link coefficients.

    ``coefficients`` maps ``(source_var, lag, target_var)`` to a value.
    """
    paths, _ = causal_paths(g, source, target)
    total = 0.0
    for p in paths:
        prod = 1.0
        for u, v in zip(p, p[1:]):
            key = (u.variable, u.lag - v.lag, v.variable)
            if key not in coefficients:
                raise EffectError(f"missing coefficient for link {g.node_name(u)} -> {g.node_name(v)}")
            prod *= coefficients[key]
        total += prod
    return LinearEffectResult("path_sum", total, source, target, extra={"n_paths": len(paths)})


def model_path_coefficients(m: StructuralModel) -> dict:
    """Standardized structural coefficients ``coef * sd(parent) / sd(target)``."""
    var = np.diag(autocovariance(m, 0)[0])
    out = {}
    for j, ts in enumerate(m.terms):
        for t in ts:
            (v, lag), = t.factors
            out[(v, lag, j)] = out.get((v, lag, j), 0.0) + t.coefficient * math.sqrt(var[v] / var[j])
    return out
