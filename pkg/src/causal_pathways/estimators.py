"""(Conditional) mutual information estimators.

Two estimator kinds are provided:

* ``knn`` -- the nearest-neighbour CMI estimator in max-norm with hyper-cubes
  sized by the distance to the k-th neighbour in the joint space,

      I(X;Y|Z) = psi(k) - < psi(k_xz + 1) + psi(k_yz + 1) - psi(k_z + 1) >

  where the counts are the numbers of other points strictly inside the cube in
  the respective subspaces. With empty Z this is the classic KSG MI estimator.
* ``gaussian`` -- the partial-correlation (log-determinant) formula, exact for
  jointly Gaussian variables and used as an analytic oracle.

All values are in nats.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

EULER_GAMMA = 0.57721566490153286061
BRUTE_FORCE_BELOW = 256


class EstimatorError(ValueError):
    """Invalid estimator input (too few samples, shape mismatch, bad config)."""


@dataclass(frozen=True)
class EstimatorConfig:
    kind: str = "knn"
    k: int = 10
    # per-column unit variance makes estimates unit-free; False keeps relative
    # units and divides every column by one common scale
    standardize: bool = True
    # relative to the scaled columns
    tie_noise_amplitude: float = 1e-8
    seed: int = 0
    shuffle_count: int = 0
    bootstrap_count: int = 0
    ci_level: float = 0.68

    def __post_init__(self):
        if self.kind not in ("knn", "gaussian"):
            raise EstimatorError(f"unknown estimator kind {self.kind!r}")
        if int(self.k) < 1:
            raise EstimatorError("k must be >= 1")
        if self.tie_noise_amplitude < 0:
            raise EstimatorError("tie_noise_amplitude must be >= 0")
        if self.shuffle_count < 0 or self.bootstrap_count < 0:
            raise EstimatorError("shuffle_count and bootstrap_count must be >= 0")

    def with_(self, **changes) -> "EstimatorConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class CmiEstimate:
    value: float
    n_samples: int
    k_used: int
    p_value: Optional[float] = None
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None


# ---------------------------------------------------------------------------
# digamma


def digamma(x):
    """Digamma function for positive real arguments (scalar or array).

    Shifts the argument above 6 with psi(x) = psi(x + 1) - 1/x and then uses
    the asymptotic series in 1/x^2; absolute error is below 1e-13.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("digamma is only implemented for positive arguments")
    z = arr.copy()
    shift = np.zeros_like(z)
    small = z < 6.0
    while np.any(small):
        shift[small] += 1.0 / z[small]
        z[small] += 1.0
        small = z < 6.0
    inv2 = 1.0 / (z * z)
    series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (
        1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12.0))))))
    out = np.log(z) - 0.5 / z - series - shift
    if np.ndim(x) == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# helpers


def _as_2d(a, name: str) -> np.ndarray:
    if a is None:
        return np.empty((0, 0))
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise EstimatorError(f"{name} must be a column or a sample matrix")
    return arr


def _check_inputs(x, y, z, cfg: EstimatorConfig):
    x = _as_2d(x, "x")
    y = _as_2d(y, "y")
    n = x.shape[0]
    z = np.empty((n, 0)) if z is None else _as_2d(z, "z")
    if z.size == 0:
        z = np.empty((n, 0))
    if x.shape[1] == 0 or y.shape[1] == 0:
        raise EstimatorError("x and y must have at least one column")
    if y.shape[0] != n or z.shape[0] != n:
        raise EstimatorError(
            f"dimension mismatch: x has {n} rows, y {y.shape[0]}, z {z.shape[0]}"
        )
    if cfg.kind == "knn" and n <= cfg.k:
        raise EstimatorError(f"too few samples: {n} rows for k={cfg.k}")
    if cfg.kind == "gaussian" and n < 2:
        raise EstimatorError("too few samples for the gaussian estimator")
    for name, arr in (("x", x), ("y", y), ("z", z)):
        if not np.all(np.isfinite(arr)):
            raise EstimatorError(f"non-finite values in {name}")
    return x, y, z


def _swap_first(x: np.ndarray, y: np.ndarray) -> bool:
    """Deterministic order of the two arguments, independent of call order."""
    if x.shape[1] != y.shape[1]:
        return y.shape[1] < x.shape[1]
    return y.tobytes() < x.tobytes()


def _jitter(blocks, cfg: EstimatorConfig, symmetric_pair: bool = True):
    """Scale the columns of ``blocks`` (a list of arrays) and add small uniform noise.

    The first two blocks are the symmetric pair: the noise stream given to
    each depends only on their contents, so swapping them commutes with
    the jitter.
    """
    blocks = _scale(blocks, cfg.standardize)
    if cfg.tie_noise_amplitude == 0:
        return blocks
    order = list(range(len(blocks)))
    if symmetric_pair and _swap_first(blocks[0], blocks[1]):
        order[0], order[1] = 1, 0
    rng = np.random.default_rng(cfg.seed)
    n = blocks[0].shape[0]
    width = sum(b.shape[1] for b in blocks)
    noise = rng.uniform(-1.0, 1.0, size=(n, width))
    out = [None] * len(blocks)
    col = 0
    for i in order:
        b = blocks[i]
        out[i] = b + noise[:, col: col + b.shape[1]] * cfg.tie_noise_amplitude
        col += b.shape[1]
    return out


def _zscore(b: np.ndarray) -> np.ndarray:
    """Unit-variance columns, so the max-norm does not depend on units."""
    if b.shape[1] == 0:
        return b.copy()
    scale = b.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (b - b.mean(axis=0)) / scale


def _scale(blocks, standardize: bool) -> list:
    if standardize:
        return [_zscore(b) for b in blocks]
    stds = np.concatenate([b.std(axis=0) for b in blocks])
    common = float(np.sqrt(np.mean(stds**2))) if stds.size else 1.0
    common = common if common > 0 else 1.0
    return [(b - b.mean(axis=0)) / common for b in blocks]


def _kth_neighbor_distance(points: np.ndarray, k: int) -> np.ndarray:
    """Max-norm distance to the k-th nearest other point, exact."""
    n = points.shape[0]
    if n < BRUTE_FORCE_BELOW:
        dist = np.max(np.abs(points[:, None, :] - points[None, :, :]), axis=2)
        return np.partition(dist, k, axis=1)[:, k]
    dist, _ = cKDTree(points).query(points, k=k + 1, p=np.inf)
    return dist[:, -1]


@njit(cache=True, nogil=True)
def _count_strict(sub, eps):
    """Number of other points within max-norm distance < eps[i] of point i."""
    n, d = sub.shape
    order = np.argsort(sub[:, 0], kind="mergesort")
    s = np.empty_like(sub)
    for a in range(n):
        s[a] = sub[order[a]]
    counts = np.zeros(n, np.int64)
    for a in range(n):
        e = eps[order[a]]
        x0 = s[a, 0]
        c = 0
        b = a - 1
        while b >= 0 and x0 - s[b, 0] < e:
            ok = True
            for j in range(1, d):
                if abs(s[b, j] - s[a, j]) >= e:
                    ok = False
                    break
            if ok:
                c += 1
            b -= 1
        b = a + 1
        while b < n and s[b, 0] - x0 < e:
            ok = True
            for j in range(1, d):
                if abs(s[b, j] - s[a, j]) >= e:
                    ok = False
                    break
            if ok:
                c += 1
            b += 1
        counts[order[a]] = c
    return counts


def _subspace_counts(sub: np.ndarray, eps: np.ndarray) -> np.ndarray:
    if sub.shape[1] == 0:
        return np.full(sub.shape[0], sub.shape[0] - 1, dtype=np.int64)
    return _count_strict(np.ascontiguousarray(sub), eps)


def _knn_cmi(x: np.ndarray, y: np.ndarray, z: np.ndarray, k: int, tie_margin: float = 0.0) -> float:
    joint = np.hstack([x, y, z])
    # the margin keeps jittered copies of one column from counting as inside eps
    eps = np.maximum(_kth_neighbor_distance(joint, k) - tie_margin, 0.0)
    k_xz = _subspace_counts(np.hstack([x, z]), eps)
    k_yz = _subspace_counts(np.hstack([y, z]), eps)
    k_z = _subspace_counts(z, eps)
    terms = digamma(k_xz + 1.0) + digamma(k_yz + 1.0) - digamma(k_z + 1.0)
    return float(digamma(float(k)) - np.mean(terms))


def gaussian_cmi_from_cov(cov: np.ndarray, ix, iy, iz=()) -> float:
    """I(X;Y|Z) of a Gaussian vector with covariance ``cov`` (index lists)."""
    ix, iy, iz = list(ix), list(iy), list(iz)

    def logdet(idx):
        if not idx:
            return 0.0
        sign, val = np.linalg.slogdet(cov[np.ix_(idx, idx)])
        if sign <= 0:
            raise EstimatorError("singular covariance in gaussian CMI")
        return val

    return 0.5 * (logdet(ix + iz) + logdet(iy + iz) - logdet(iz) - logdet(ix + iy + iz))


def _gaussian_cmi(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> float:
    data = np.hstack([x, y, z])
    cov = np.atleast_2d(np.cov(data, rowvar=False))
    dx, dy = x.shape[1], y.shape[1]
    ix = list(range(dx))
    iy = list(range(dx, dx + dy))
    iz = list(range(dx + dy, data.shape[1]))
    return gaussian_cmi_from_cov(cov, ix, iy, iz)


def _raw_cmi(x, y, z, cfg: EstimatorConfig) -> float:
    if cfg.kind == "gaussian":
        return _gaussian_cmi(x, y, z)
    return _knn_cmi(x, y, z, cfg.k, 4.0 * cfg.tie_noise_amplitude)


# ---------------------------------------------------------------------------
# public API


def estimate_cmi(x, y, z=None, cfg: EstimatorConfig = EstimatorConfig()) -> CmiEstimate:
    """Estimate I(X;Y|Z) in nats; an empty ``z`` gives the mutual information.

    Shuffle p-values and bootstrap intervals are attached when the config asks
    for them (``shuffle_count`` / ``bootstrap_count`` > 0).
    """
    x, y, z = _check_inputs(x, y, z, cfg)
    if cfg.kind == "knn":
        xj, yj, zj = _jitter([x, y, z], cfg)
    else:
        xj, yj, zj = x, y, z
    value = _raw_cmi(xj, yj, zj, cfg)
    n = x.shape[0]
    p_value = ci_low = ci_high = None
    if cfg.shuffle_count > 0:
        p_value = _shuffle_p(value, xj, yj, zj, cfg)
    if cfg.bootstrap_count > 0:
        lo, hi = bootstrap_ci(
            lambda idx: _raw_cmi(xj[idx], yj[idx], zj[idx], cfg),
            n, cfg.bootstrap_count, cfg.ci_level, seed=cfg.seed,
        )
        ci_low, ci_high = centered_interval(value, lo, hi)
    return CmiEstimate(value, n, cfg.k if cfg.kind == "knn" else 0, p_value, ci_low, ci_high)


def estimate_interaction_information(x, y, w, z=None, cfg: EstimatorConfig = EstimatorConfig()) -> CmiEstimate:
    """I(X;Y|Z) - I(X;Y|W,Z) on one sample alignment and one jitter draw.

    Positive values mean W carries (mediates) shared information between X and
    Y; negative values mean conditioning on W reveals more dependence.
    """
    x, y, z = _check_inputs(x, y, z, cfg)
    w = _as_2d(w, "w")
    if w.shape[0] != x.shape[0]:
        raise EstimatorError("dimension mismatch between w and x")
    if w.shape[1] == 0:
        raise EstimatorError("w must be nonempty")
    if not np.all(np.isfinite(w)):
        raise EstimatorError("non-finite values in w")
    if cfg.kind == "knn":
        xj, yj, wj, zj = _jitter([x, y, w, z], cfg)
    else:
        xj, yj, wj, zj = x, y, w, z

    def both(idx=None):
        if idx is None:
            a, b, c, d = xj, yj, wj, zj
        else:
            a, b, c, d = xj[idx], yj[idx], wj[idx], zj[idx]
        return _raw_cmi(a, b, d, cfg) - _raw_cmi(a, b, np.hstack([c, d]), cfg)

    value = both()
    ci_low = ci_high = None
    if cfg.bootstrap_count > 0:
        lo, hi = bootstrap_ci(both, x.shape[0], cfg.bootstrap_count, cfg.ci_level, seed=cfg.seed)
        ci_low, ci_high = centered_interval(value, lo, hi)
    return CmiEstimate(value, x.shape[0], cfg.k if cfg.kind == "knn" else 0, None, ci_low, ci_high)


def _shuffle_p(value, x, y, z, cfg: EstimatorConfig) -> float:
    def surrogate(i):
        rng = np.random.default_rng([cfg.seed, 1, i])
        perm = rng.permutation(x.shape[0])
        return _raw_cmi(x[perm], y, z, cfg)

    null = np.array(parallel_map(surrogate, range(cfg.shuffle_count)))
    return float((1 + np.sum(null >= value)) / (cfg.shuffle_count + 1))


def shuffle_significance(x, y, z=None, cfg: EstimatorConfig = EstimatorConfig(shuffle_count=99)) -> float:
    """Permutation p-value of I(X;Y|Z): x rows are permuted, y and z fixed."""
    if cfg.shuffle_count < 19:
        raise EstimatorError("shuffle_count must be >= 19")
    x, y, z = _check_inputs(x, y, z, cfg)
    if cfg.kind == "knn":
        x, y, z = _jitter([x, y, z], cfg)
    value = _raw_cmi(x, y, z, cfg)
    return _shuffle_p(value, x, y, z, cfg)


def bootstrap_ci(measure_closure: Callable[[np.ndarray], float], n_rows: int, n: int,
                 level: float = 0.68, seed: int = 0):
    """Percentile interval of ``measure_closure`` over ``n`` row resamples.

    ``measure_closure`` receives an index array (resampling with replacement of
    ``range(n_rows)``) and returns a float or a 1-D array; for arrays the
    interval is computed per component. Replica ``i`` draws from its own
    stream so results do not depend on the thread count.
    """
    if n < 100:
        raise EstimatorError("bootstrap needs n >= 100 resamples")
    if not 0 < level < 1:
        raise EstimatorError("level must be in (0, 1)")

    def one(i):
        idx = np.random.default_rng([seed, 2, i]).integers(0, n_rows, size=n_rows)
        try:
            return measure_closure(idx)
        except Exception as exc:
            raise RuntimeError(f"bootstrap resample {i} failed: {exc}") from exc

    values = np.array(parallel_map(one, range(n)), dtype=float)
    alpha = (1.0 - level) / 2.0
    lo = np.quantile(values, alpha, axis=0)
    hi = np.quantile(values, 1.0 - alpha, axis=0)
    if values.ndim == 1:
        return float(lo), float(hi)
    return lo, hi


def centered_interval(value, lo, hi):
    """Interval of the bootstrap half-width centred on the point estimate."""
    half = 0.5 * (np.asarray(hi) - np.asarray(lo))
    low, high = value - half, value + half
    if np.ndim(low) == 0:
        return float(low), float(high)
    return low, high


def rescale_to_correlation(i_nats):
    """Map nats onto the (partial) correlation scale, sqrt(1 - exp(-2 I)).

    Negative estimates are clipped to zero first.
    """
    arr = np.maximum(np.asarray(i_nats, dtype=float), 0.0)
    out = np.sqrt(-np.expm1(-2.0 * arr))
    if np.ndim(i_nats) == 0:
        return float(out)
    return out


def gaussian_mi_from_correlation(rho: float) -> float:
    return -0.5 * math.log1p(-rho * rho)


def thread_count() -> int:
    env = os.environ.get("CAUSAL_PATHWAYS_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


def parallel_map(fn, items):
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
