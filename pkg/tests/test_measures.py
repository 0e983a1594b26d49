import csv
import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from causal_pathways.dataset import TimeSeriesDataset
from causal_pathways.estimators import EstimatorConfig, estimate_interaction_information, rescale_to_correlation
from causal_pathways.linear_effects import PopulationGaussian, analytic_mitp_triple
from causal_pathways.measures import (
    CSV_HEADER,
    NO_CAUSAL_PATH,
    NOT_LAG_SPECIFIC,
    MeasureError,
    interaction_measure,
    lag_function,
    transfer_measure,
    write_results,
)
from causal_pathways.simulate import StructuralModel, implied_graph, linear, model_xwy, simulate
from causal_pathways.tsgraph import NodeRef, NoCausalPath, TimeSeriesGraph
from causal_pathways.validation import random_stable_linear_model

X, W, Y = 0, 1, 2
SRC, TGT = NodeRef(X, 2), NodeRef(Y, 0)
KNN = EstimatorConfig(k=10)


@pytest.fixture(scope="module")
def triple():
    m = model_xwy(0.5, 0.5, 0.5, 0.5)
    return m, implied_graph(m), simulate(m, 10000, seed=21)


def test_mitp_near_closed_form_small_ensemble():
    m = model_xwy(0.5, 0.5, 0.5, 0.5)
    g = implied_graph(m)
    vals = [transfer_measure(simulate(m, 10000, seed=[3, i]), g, "MITP", SRC, TGT, KNN).value for i in range(5)]
    assert np.mean(vals) == pytest.approx(analytic_mitp_triple(0.5, 0.5, 0.5, 1, 1, 1), abs=0.03)


def test_mitp_vanishes_on_cancellation_manifold():
    m = model_xwy(0.5, 0.5, 0.5, -0.25)
    g = implied_graph(m)
    assert transfer_measure(PopulationGaussian(m), g, "MITP", SRC, TGT).value == pytest.approx(0, abs=1e-12)
    assert abs(transfer_measure(simulate(m, 10000, seed=4), g, "MITP", SRC, TGT, KNN).value) < 0.02


def test_ity_independent_variables():
    m = StructuralModel(2, ((linear(0, 1, 0.5),), (linear(1, 1, 0.5),)), (1.0, 1.0))
    g = implied_graph(m)
    r = transfer_measure(simulate(m, 10000, seed=5), g, "ITY", NodeRef(0, 1), NodeRef(1, 0), KNN)
    assert abs(r.value) < 0.02


def test_result_fields(triple):
    _, g, ds = triple
    r = transfer_measure(ds, g, "MITP", SRC, TGT, KNN.with_(bootstrap_count=100))
    assert r.kind == "MITP" and r.lag == 2
    assert set(r.conditions) == {NodeRef(X, 3), NodeRef(W, 2), NodeRef(Y, 1)}
    assert r.n_samples == 10000 - 3
    assert r.rescaled == rescale_to_correlation(r.value)
    assert r.ci_low <= r.value <= r.ci_high
    lo, hi = r.rescaled_interval()
    assert lo <= r.rescaled <= hi


def test_mitp_no_path_error(triple):
    _, g, ds = triple
    with pytest.raises(NoCausalPath):
        transfer_measure(ds, g, "MITP", NodeRef(X, 1), TGT)
    with pytest.raises(MeasureError):
        transfer_measure(ds, g, "XYZ", SRC, TGT)


def test_mii_equals_mitp_without_direct_link():
    m = model_xwy(0.5, 0.5, 0.5, 0.0)
    g = implied_graph(m)
    pop = PopulationGaussian(m)
    assert interaction_measure(pop, g, "MII", SRC, TGT, W).value == pytest.approx(
        transfer_measure(pop, g, "MITP", SRC, TGT).value, abs=1e-12)
    ds = simulate(m, 10000, seed=6)
    mii = interaction_measure(ds, g, "MII", SRC, TGT, W, KNN).value
    mitp = transfer_measure(ds, g, "MITP", SRC, TGT, KNN).value
    assert mii == pytest.approx(mitp, abs=0.02)


def test_mii_negative_when_counteracting():
    m = model_xwy(0.5, 0.5, 0.5, -0.75)
    g = implied_graph(m)
    assert interaction_measure(PopulationGaussian(m), g, "MII", SRC, TGT, W).value == pytest.approx(
        0.5 * np.log(1.2) - 0.5 * np.log(1.45), abs=1e-12)


def test_mediator_off_path(triple):
    _, g, ds = triple
    with pytest.raises(MeasureError, match="not on any causal path"):
        interaction_measure(ds, g, "IIX", SRC, TGT, Y)


def test_mediator_vector_collects_every_lag(triple):
    _, g, ds = triple
    r = interaction_measure(ds, g, "IIX", NodeRef(X, 3), TGT, W, KNN)
    assert set(r.mediators) == {NodeRef(W, 1), NodeRef(W, 2)}
    assert not set(r.mediators) & set(r.conditions)


def test_joint_mediators():
    m = model_xwy(0.5, 0.5, 0.5, 0.5)
    g = implied_graph(m)
    r = interaction_measure(PopulationGaussian(m), g, "IIX", NodeRef(X, 3), TGT, [W, X])
    assert NodeRef(X, 2) in r.mediators and NodeRef(W, 1) in r.mediators


def test_lag_function_mit_peaks_at_two(triple):
    _, g, ds = triple
    res = lag_function(ds, g, "MIT", X, Y, [1, 2, 3], KNN)
    values = [r.value for r in res]
    assert int(np.argmax(values)) == 1


def test_lag_function_markers(triple):
    _, g, ds = triple
    te = lag_function(ds, g, "TE", X, Y, None, KNN)
    assert len(te) == g.tau_max
    assert len({r.value for r in te}) == 1 and all(r.note == NOT_LAG_SPECIFIC for r in te)
    mitp = lag_function(ds, g, "MITP", X, Y, [1, 2], KNN)
    assert mitp[0].note == NO_CAUSAL_PATH and np.isnan(mitp[0].value)
    assert mitp[1].note == ""


def test_lag_function_independent_near_zero():
    m = StructuralModel(2, ((linear(0, 1, 0.5),), (linear(1, 1, 0.5),)), (1.0, 1.0))
    g = TimeSeriesGraph(2, 3, implied_graph(m).directed)
    res = lag_function(simulate(m, 5000, seed=7), g, "ITY", 0, 1, None, KNN)
    assert all(abs(r.value) < 0.02 for r in res)


@given(st.integers(0, 2 ** 32 - 1))
def test_measure_inequalities_population(seed):
    rng = np.random.default_rng(seed)
    m = random_stable_linear_model(rng, n_vars=3, tau_max=2, with_contemporaneous=False)
    g = implied_graph(m)
    pop = PopulationGaussian(m)
    for i, j, tau in itertools.product(range(3), range(3), (1, 2, 3)):
        src, tgt = NodeRef(i, tau), NodeRef(j, 0)
        try:
            mitp = transfer_measure(pop, g, "MITP", src, tgt).value
        except NoCausalPath:
            continue
        itx = transfer_measure(pop, g, "ITX", src, tgt).value
        assert itx <= mitp + 1e-10
        for k in range(3):
            try:
                iix = interaction_measure(pop, g, "IIX", src, tgt, k).value
                mii = interaction_measure(pop, g, "MII", src, tgt, k).value
            except MeasureError:
                continue
            assert iix <= itx + 1e-10
            assert mii <= mitp + 1e-10


@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75])
def test_mitp_autonomous_of_autodependency_population(alpha):
    m = model_xwy(alpha, 0.5, 0.5, 0.5)
    mitp = transfer_measure(PopulationGaussian(m), implied_graph(m), "MITP", SRC, TGT).value
    assert mitp == pytest.approx(analytic_mitp_triple(0.5, 0.5, 0.5, 1, 1, 1), abs=1e-12)


def test_itx_depends_on_autodependency_population():
    itx = [transfer_measure(PopulationGaussian(m), implied_graph(m), "ITX", SRC, TGT).value
           for m in (model_xwy(a, 0.5, 0.5, 0.5) for a in (0.0, 0.75))]
    assert itx[0] - itx[1] > 0.05


def test_interaction_information_symmetric_in_first_three():
    rng = np.random.default_rng(8)
    z = rng.normal(size=(3000, 2))
    x = z @ [0.3, 0.1] + rng.normal(size=3000)
    w = 0.6 * x + rng.normal(size=3000)
    y = 0.4 * w - 0.3 * x + z @ [0.2, 0.5] + rng.normal(size=3000)
    cfg = EstimatorConfig(kind="gaussian")
    vals = [estimate_interaction_information(a, b, c, z, cfg).value
            for a, b, c in itertools.permutations([x, y, w])]
    assert max(vals) - min(vals) < 1e-10


def test_iix_bounded_by_itx_up_to_noise(triple):
    _, g, ds = triple
    itx = transfer_measure(ds, g, "ITX", SRC, TGT, KNN).value
    iix = interaction_measure(ds, g, "IIX", SRC, TGT, W, KNN).value
    assert iix <= itx + 0.02


def test_dimension_warning():
    n = 12
    g = TimeSeriesGraph(n, 2, frozenset((i, tau, 0) for i in range(n) for tau in (1, 2)))
    ds = TimeSeriesDataset(np.random.default_rng(0).normal(size=(200, n)), tuple(f"V{i}" for i in range(n)))
    with pytest.warns(RuntimeWarning, match="conditioning dimension"):
        transfer_measure(ds, g, "MIT", NodeRef(1, 1), NodeRef(0, 0), EstimatorConfig(k=5))


def test_write_results(tmp_path, triple):
    _, g, ds = triple
    res = lag_function(ds, g, "MITP", X, Y, [1, 2], KNN)
    res.append(interaction_measure(ds, g, "IIX", SRC, TGT, W, KNN))
    write_results(tmp_path / "r.csv", res, ds.names)
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1][CSV_HEADER.index("note")] == NO_CAUSAL_PATH
    assert rows[2][CSV_HEADER.index("conditions")] == "X(t-3);W(t-2);Y(t-1)"
    assert rows[3][CSV_HEADER.index("mediators")] == "W(t-1)"
    assert float(rows[2][CSV_HEADER.index("rescaled")]) == pytest.approx(res[1].rescaled)
