import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from causal_pathways.estimators import EstimatorConfig
from causal_pathways.linear_effects import PopulationGaussian
from causal_pathways.netmetrics import (
    CSV_HEADER,
    ITX_FLOOR,
    BetweennessError,
    cib,
    cib_table,
    mediated_triples,
    write_cib_table,
)
from causal_pathways.simulate import StructuralModel, implied_graph, linear, model_xwy, simulate
from causal_pathways.tsgraph import TimeSeriesGraph

X, W, Y = 0, 1, 2
KNN = EstimatorConfig(k=10)


def chain_model(a=0.6, b=0.6):
    terms = ((), (linear(X, 1, a),), (linear(W, 1, b),))
    return StructuralModel(3, terms, (1.0, 1.0, 1.0), ("X", "W", "Y"))


def test_chain_mediator_positive_and_source_mediates_nothing():
    m = chain_model()
    g = implied_graph(m, tau_max=2)
    ds = simulate(m, 4000, seed=1)
    r = cib(ds, g, W, cfg=KNN)
    assert r.value > 0
    assert r.cardinality == len(r.contributing_triples) == 1
    assert r.contributing_triples[0][:3] == (X, Y, 2)
    with pytest.raises(BetweennessError, match="mediates no interaction"):
        cib(ds, g, X, cfg=KNN)


def test_chain_population_value_is_exact_mean():
    m = chain_model()
    g = implied_graph(m, tau_max=2)
    r = cib(PopulationGaussian(m), g, W)
    assert r.value == pytest.approx(np.mean([e[-1] for e in r.contributing_triples]), abs=1e-15)
    # no autodependence: IIX equals I(X(t-2); Y(t)) with the chain's Gaussian correlation
    a = b = 0.6
    rho2 = a * a * b * b / (1 + b * b * (1 + a * a))
    assert r.value == pytest.approx(-0.5 * math.log(1 - rho2), abs=1e-12)


def test_total_mediation_normalizes_to_one():
    # no autodependence, so conditioning on W(t-1) opens no collider path
    m = model_xwy(0.0, 0.5, 0.5, 0.0)
    g = implied_graph(m)
    assert cib(PopulationGaussian(m), g, W, normalized=True).value == pytest.approx(1.0, abs=1e-9)
    runs = [cib(simulate(m, 10000, seed=[4, i]), g, W, cfg=KNN, normalized=True) for i in range(5)]
    assert all(r.normalized and r.n_skipped == 0 for r in runs)
    assert np.mean([r.value for r in runs]) == pytest.approx(1.0, abs=0.1)


def test_autodependent_mediator_opens_collider():
    # W(t-1) is a collider on X(t-2) -> W(t-1) <- W(t-2) -> Y(t-1) -> Y(t)
    m = model_xwy(0.5, 0.5, 0.5, 0.0)
    r = cib(PopulationGaussian(m), implied_graph(m), W, normalized=True)
    assert 0 < r.value < 1


def test_sole_mediator_population_normalized_is_one():
    m = chain_model(0.7, 0.5)
    g = implied_graph(m, tau_max=2)
    r = cib(PopulationGaussian(m), g, W, normalized=True)
    assert r.value == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_disconnected_graph_errors_for_every_variable(k):
    g = TimeSeriesGraph(4, 2)
    assert mediated_triples(g, k) == []
    with pytest.raises(BetweennessError):
        cib(None, g, k)


def test_unknown_variable_rejected():
    with pytest.raises(ValueError):
        cib(None, TimeSeriesGraph(2, 1), 5)


def test_mediated_triples_are_ordered_pairs_excluding_k():
    m = model_xwy(0.5, 0.5, 0.5, 0.5)
    g = implied_graph(m)
    triples = mediated_triples(g, W)
    assert triples == [(X, Y, 2)]
    for i, j, tau in triples:
        assert i != j and W not in (i, j) and 1 <= tau <= g.tau_max


def _random_linear(seed):
    rng = np.random.default_rng(seed)
    n = 4
    terms = []
    for j in range(n):
        row = [linear(j, 1, float(rng.uniform(0.1, 0.4)))]
        for i in range(n):
            if i != j and rng.random() < 0.4:
                row.append(linear(i, int(rng.integers(1, 3)), float(rng.uniform(-0.4, 0.4))))
        terms.append(tuple(row))
    return StructuralModel(n, tuple(terms), (1.0,) * n)


@given(st.integers(0, 10_000), st.integers(0, 3), st.booleans())
def test_cib_is_nonnegative(seed, k, normalized):
    m = _random_linear(seed)
    g = implied_graph(m, tau_max=2)
    try:
        r = cib(PopulationGaussian(m), g, k, normalized=normalized)
    except BetweennessError:
        return
    if not math.isnan(r.value):
        assert r.value >= 0
    assert all(e[-1] >= 0 for e in r.contributing_triples)
    assert r.cardinality + r.n_skipped == len(mediated_triples(g, k))


def test_unlinked_variable_changes_nothing():
    m = model_xwy(0.5, 0.5, 0.5, 0.5)
    g = implied_graph(m)
    ds = simulate(m, 3000, seed=8)
    extra = np.random.default_rng(0).standard_normal(ds.T)
    g2, ds2 = g.with_variable("Z"), ds.add_variable("Z", extra)
    for normalized in (False, True):
        before = cib(ds, g, W, cfg=KNN, normalized=normalized)
        after = cib(ds2, g2, W, cfg=KNN, normalized=normalized)
        assert after.value == before.value
        assert after.contributing_triples == before.contributing_triples
    with pytest.raises(BetweennessError):
        cib(ds2, g2, 3, cfg=KNN)


def test_unlinked_variable_population():
    m = _random_linear(3)
    terms = m.terms + ((linear(4, 1, 0.5),),)
    m2 = StructuralModel(5, terms, (1.0,) * 5)
    g, g2 = implied_graph(m, tau_max=2), implied_graph(m2, tau_max=2)
    for k in range(4):
        try:
            a = cib(PopulationGaussian(m), g, k)
        except BetweennessError:
            with pytest.raises(BetweennessError):
                cib(PopulationGaussian(m2), g2, k)
            continue
        assert cib(PopulationGaussian(m2), g2, k).value == pytest.approx(a.value, abs=1e-12)


def test_small_itx_triples_are_skipped_in_normalized_mode():
    # the direct link cancels the mediated one, so ITX is tiny but IIX is not
    terms = ((linear(X, 1, 0.5),), (linear(W, 1, 0.5), linear(X, 1, 0.5)),
             (linear(Y, 1, 0.5), linear(X, 2, -0.25), linear(W, 1, 0.5)))
    m = StructuralModel(3, terms, (1.0, 1.0, 1.0), ("X", "W", "Y"))
    g = implied_graph(m)
    pop = PopulationGaussian(m)
    raw = cib(pop, g, W)
    norm = cib(pop, g, W, normalized=True)
    assert raw.cardinality == 1 and raw.value > 0
    assert norm.n_skipped == 1 and norm.cardinality == 0
    assert math.isnan(norm.value)
    assert ITX_FLOOR == 0.01


def test_sign_split_means():
    m = model_xwy(0.5, 0.5, 0.5, -0.75)
    g = implied_graph(m)
    r = cib(PopulationGaussian(m), g, W)
    assert math.isnan(r.mean_positive)
    assert r.mean_negative < 0


def test_table_and_csv(tmp_path):
    m = chain_model()
    g = implied_graph(m, tau_max=2)
    rows = cib_table(PopulationGaussian(m), g)
    assert [row[0] for row in rows] == ["X", "W", "Y"]
    assert rows[0][1] == "" and rows[2][1] == ""
    assert rows[1][1] == pytest.approx(cib(PopulationGaussian(m), g, W).value)
    assert rows[1][2] == pytest.approx(1.0, abs=1e-9)
    assert rows[1][3] == 1 and rows[1][4] == 0
    path = tmp_path / "cib.csv"
    write_cib_table(path, rows)
    with open(path, newline="") as f:
        read = list(csv.reader(f))
    assert tuple(read[0]) == CSV_HEADER
    assert read[2][0] == "W" and float(read[2][1]) == rows[1][1]
    assert read[1][1] == ""
