import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, strategies as st

from causal_pathways.estimators import (
    EstimatorConfig,
    EstimatorError,
    bootstrap_ci,
    digamma,
    estimate_cmi,
    estimate_interaction_information,
    gaussian_mi_from_correlation,
    rescale_to_correlation,
    shuffle_significance,
)

RHO06_MI = 0.22314355131420976  # -0.5 * log(1 - 0.36)


def ksg_bruteforce(x, y, z, k):
    """Independent O(n^2) max-norm KSG oracle on z-scored columns."""
    x, y, z = ((a - a.mean(axis=0)) / a.std(axis=0) if a.shape[1] else a for a in (x, y, z))
    def cheb(a):
        if a.shape[1] == 0:
            return np.zeros((a.shape[0], a.shape[0]))
        return np.max(np.abs(a[:, None, :] - a[None, :, :]), axis=2)

    n = x.shape[0]
    dxz, dyz, dz = cheb(np.hstack([x, z])), cheb(np.hstack([y, z])), cheb(z)
    joint = np.maximum(np.maximum(cheb(x), cheb(y)), dz)
    total = 0.0
    for i in range(n):
        eps = np.sort(np.delete(joint[i], i))[k - 1]
        others = np.arange(n) != i
        nxz = np.sum((dxz[i] < eps) & others)
        nyz = np.sum((dyz[i] < eps) & others)
        nz = np.sum((dz[i] < eps) & others) if z.shape[1] else n - 1
        total += scipy.special.digamma(nxz + 1) + scipy.special.digamma(nyz + 1) - scipy.special.digamma(nz + 1)
    return scipy.special.digamma(k) - total / n


def gaussian_pair(rng, rho, T):
    x = rng.normal(size=T)
    y = rho * x + math.sqrt(1 - rho * rho) * rng.normal(size=T)
    return x, y


@pytest.mark.parametrize("x", [1e-3, 0.37, 1.0, 2.5, 7.0, 50.0, 1e4, 1e7])
def test_digamma_matches_scipy(x):
    assert abs(digamma(x) - scipy.special.digamma(x)) < 1e-10


def test_digamma_vectorized():
    xs = np.linspace(0.1, 300, 1000)
    np.testing.assert_allclose(digamma(xs), scipy.special.digamma(xs), atol=1e-10, rtol=0)


@pytest.mark.parametrize("n, dz, k", [(120, 0, 3), (300, 1, 5), (400, 2, 1), (300, 0, 10)])
def test_knn_matches_bruteforce_oracle(rng, n, dz, k):
    x = rng.normal(size=(n, 1))
    z = rng.normal(size=(n, dz))
    y = 0.5 * x + (z.sum(axis=1, keepdims=True) if dz else 0) + rng.normal(size=(n, 1))
    cfg = EstimatorConfig(k=k, tie_noise_amplitude=0.0)
    got = estimate_cmi(x, y, z if dz else None, cfg).value
    assert got == pytest.approx(ksg_bruteforce(x, y, z, k), abs=1e-10)


def test_independent_gaussians_near_zero(rng):
    x, y = rng.normal(size=10000), rng.normal(size=10000)
    assert abs(estimate_cmi(x, y, cfg=EstimatorConfig(k=10)).value) < 0.01


def test_correlated_gaussian_mi(rng):
    x, y = gaussian_pair(rng, 0.6, 10000)
    assert abs(estimate_cmi(x, y, cfg=EstimatorConfig(k=10)).value - RHO06_MI) < 0.02


def test_conditioning_removes_common_driver(rng):
    z = rng.normal(size=10000)
    y = 0.8 * z + rng.normal(size=10000)
    x = z.copy()
    est = estimate_cmi(x, y, z, EstimatorConfig(k=10))
    assert abs(est.value) < 0.02


def test_symmetry_bit_exact(rng):
    x, y = gaussian_pair(rng, 0.4, 2000)
    z = rng.normal(size=(2000, 2))
    cfg = EstimatorConfig(k=5, seed=7)
    assert estimate_cmi(x, y, z, cfg).value == estimate_cmi(y, x, z, cfg).value


@given(st.integers(0, 2 ** 31), st.integers(1, 8))
def test_symmetry_property(seed, k):
    r = np.random.default_rng(seed)
    x = r.normal(size=(60, 1))
    y = x + r.normal(size=(60, 1))
    z = r.normal(size=(60, 1))
    cfg = EstimatorConfig(k=k, seed=seed % 1000)
    assert estimate_cmi(x, y, z, cfg).value == estimate_cmi(y, x, z, cfg).value


def test_reproducible_for_seed(rng):
    x, y = gaussian_pair(rng, 0.3, 500)
    cfg = EstimatorConfig(k=4, seed=3)
    assert estimate_cmi(x, y, cfg=cfg).value == estimate_cmi(x, y, cfg=cfg).value


def test_input_errors(rng):
    with pytest.raises(EstimatorError, match="too few"):
        estimate_cmi(np.zeros(5), np.zeros(5), cfg=EstimatorConfig(k=5))
    with pytest.raises(EstimatorError, match="mismatch"):
        estimate_cmi(np.zeros(20), np.zeros(21))
    with pytest.raises(EstimatorError):
        EstimatorConfig(k=0)
    with pytest.raises(EstimatorError):
        EstimatorConfig(kind="binning")


def test_discrete_data_ties_handled(rng):
    x = rng.integers(0, 3, size=2000).astype(float)
    y = (x + rng.integers(0, 2, size=2000)).astype(float)
    assert math.isfinite(estimate_cmi(x, y).value)


def test_gaussian_kind_matches_partial_correlation(rng):
    T = 5000
    z = rng.normal(size=(T, 2))
    x = z @ [0.5, -0.3] + rng.normal(size=T)
    y = 0.4 * x + z @ [0.2, 0.7] + rng.normal(size=T)
    # independent route: correlation of regression residuals
    Z1 = np.column_stack([np.ones(T), z])
    rx = x - Z1 @ np.linalg.lstsq(Z1, x, rcond=None)[0]
    ry = y - Z1 @ np.linalg.lstsq(Z1, y, rcond=None)[0]
    rho = np.corrcoef(rx, ry)[0, 1]
    got = estimate_cmi(x, y, z, EstimatorConfig(kind="gaussian")).value
    assert got == pytest.approx(gaussian_mi_from_correlation(rho), abs=1e-12)


def test_knn_agrees_with_gaussian_truth_over_replicas():
    values = []
    for seed in range(20):
        r = np.random.default_rng(seed)
        x, y = gaussian_pair(r, 0.6, 10000)
        values.append(estimate_cmi(x, y, cfg=EstimatorConfig(k=10)).value)
    se = np.std(values, ddof=1)
    assert abs(np.mean(values) - RHO06_MI) < 3 * se + 0.01


def test_affine_rescaling_within_noise():
    deltas, base = [], []
    for seed in range(20):
        r = np.random.default_rng(100 + seed)
        x, y = gaussian_pair(r, 0.5, 2000)
        z = r.normal(size=2000)
        cfg = EstimatorConfig(k=10)
        a = estimate_cmi(x, y, z, cfg).value
        b = estimate_cmi(3.0 * x - 7.0, 0.01 * y + 2.0, 50.0 * z, cfg).value
        deltas.append(b - a)
        base.append(a)
    assert abs(np.mean(deltas)) < 2 * np.std(base, ddof=1) / np.sqrt(len(base))


def test_model_units_invariant_to_common_affine_map(rng):
    x, y = gaussian_pair(rng, 0.5, 2000)
    z = rng.normal(size=2000)
    cfg = EstimatorConfig(k=10, standardize=False)
    a = estimate_cmi(x, y, z, cfg).value
    b = estimate_cmi(4.0 * x + 1.0, 4.0 * y - 3.0, 4.0 * z, cfg).value
    assert b == pytest.approx(a, abs=1e-6)


def test_model_units_matches_standardized_for_unit_variance(rng):
    x, y = gaussian_pair(rng, 0.6, 5000)
    a = estimate_cmi(x, y, cfg=EstimatorConfig(k=10)).value
    b = estimate_cmi(x, y, cfg=EstimatorConfig(k=10, standardize=False)).value
    assert b == pytest.approx(a, abs=0.01)
    assert b == pytest.approx(RHO06_MI, abs=0.02)


def test_interaction_information_examples(rng):
    T = 10000
    cfg = EstimatorConfig(k=10)
    x, y, w = rng.normal(size=(3, T))
    assert abs(estimate_interaction_information(x, y, w, cfg=cfg).value) < 0.02
    collider = estimate_interaction_information(x, y, x + y, cfg=cfg).value
    assert collider < -0.1
    wc = 0.5 * x + rng.normal(size=T)
    yc = 0.5 * wc + rng.normal(size=T)
    ii = estimate_interaction_information(x, yc, wc, cfg=cfg)
    mi = estimate_cmi(x, yc, cfg=cfg)
    assert ii.value > 0
    assert abs(ii.value - mi.value) < 0.02


def test_interaction_information_is_difference_of_cmis(rng):
    x, y, w, z = rng.normal(size=(4, 800))
    y = y + x + w
    cfg = EstimatorConfig(k=5, tie_noise_amplitude=0.0)
    ii = estimate_interaction_information(x, y, w, z, cfg).value
    a = estimate_cmi(x, y, z, cfg).value
    b = estimate_cmi(x, y, np.column_stack([w, z]), cfg).value
    assert ii == pytest.approx(a - b, abs=1e-12)


def test_shuffle_significance(rng):
    cfg = EstimatorConfig(k=5, shuffle_count=99)
    x = rng.normal(size=500)
    assert shuffle_significance(x, x + 1e-3 * rng.normal(size=500), cfg=cfg) == pytest.approx(0.01)
    with pytest.raises(EstimatorError):
        shuffle_significance(x, x, cfg=cfg.with_(shuffle_count=5))
    p = shuffle_significance(np.ones(500), x, cfg=cfg)
    assert 0 < p <= 1


def test_shuffle_null_calibration():
    rejections = 0
    for seed in range(200):
        r = np.random.default_rng(seed)
        x, y = r.normal(size=(2, 150))
        p = shuffle_significance(x, y, cfg=EstimatorConfig(k=5, shuffle_count=19, seed=seed))
        rejections += p <= 0.05
    assert rejections / 200 <= 0.08


def test_bootstrap_constant_closure():
    assert bootstrap_ci(lambda idx: 1.5, 50, 200) == (1.5, 1.5)


def test_bootstrap_errors():
    with pytest.raises(EstimatorError):
        bootstrap_ci(lambda idx: 0.0, 10, 50)
    with pytest.raises(EstimatorError):
        bootstrap_ci(lambda idx: 0.0, 10, 100, level=1.0)

    def bad(idx):
        raise ValueError("boom")

    with pytest.raises(RuntimeError, match="resample 0"):
        bootstrap_ci(bad, 10, 100)


def test_bootstrap_ci_attached_and_ordered(rng):
    x, y = gaussian_pair(rng, 0.6, 1000)
    est = estimate_cmi(x, y, cfg=EstimatorConfig(k=10, bootstrap_count=200))
    assert est.ci_low <= est.value <= est.ci_high


def test_bootstrap_coverage():
    cover = 0
    for seed in range(30):
        r = np.random.default_rng(500 + seed)
        x, y = gaussian_pair(r, 0.6, 1000)
        est = estimate_cmi(x, y, cfg=EstimatorConfig(k=10, bootstrap_count=200, seed=seed))
        cover += est.ci_low <= RHO06_MI <= est.ci_high
    assert cover / 30 >= 0.5


def test_rescale_examples():
    assert rescale_to_correlation(0.0) == 0.0
    assert rescale_to_correlation(RHO06_MI) == pytest.approx(0.6, abs=1e-12)
    assert rescale_to_correlation(-0.01) == 0.0


@given(st.floats(0, 20), st.floats(0, 20))
def test_rescale_monotone_and_bounded(a, b):
    ra, rb = rescale_to_correlation(a), rescale_to_correlation(b)
    assert 0 <= ra <= 1
    if a <= b:
        assert ra <= rb


@given(st.floats(-0.999, 0.999))
def test_rescale_inverts_gaussian_mi(rho):
    assert rescale_to_correlation(gaussian_mi_from_correlation(rho)) == pytest.approx(abs(rho), abs=1e-9)
