"""Acceptance criteria, one test each; every test prints a PASS/FAIL line with measured vs expected.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines appear even without ``-s``.
"""
import pytest

from causal_pathways import validation as v


@pytest.fixture
def report(capsys):
    def emit(check):
        with capsys.disabled():
            print("\n" + check.line())
        assert check.passed, check.line()

    return emit


def test_01_estimator_calibration(report):
    report(v._timed(v.check_estimator_calibration))


def test_02_mitp_closed_form(report):
    report(v._timed(lambda: v.check_mitp_oracle(n_ens=30, T=10000)))


def test_03_cancellation_manifold(report):
    report(v._timed(lambda: v.check_cancellation(n_ens=30, T=10000)))


def test_04_coupling_strength_autonomy(report):
    report(v._timed(lambda: v.check_autonomy(n_ens=20, T=10000)))


def test_05_mii_closed_form(report):
    report(v._timed(lambda: v.check_mii_oracle(n_ens=30, T=10000)))


def test_06_inequalities(report):
    report(v._timed(lambda: v.check_inequalities(n_models=10, tol=1e-10)))


def test_07_graph_semantics(report):
    report(v._timed(lambda: v.check_graph_semantics(n_graphs=200)))


def test_08_markov_property(report):
    report(v._timed(lambda: v.check_markov(n_queries=40)))


def test_09_linear_effects(report):
    report(v._timed(v.check_linear_effects))


def test_10_nonlinear_alpha_dependence(report):
    report(v._timed(lambda: v.check_nonlinear(n_ens=10, T=10000)))


def test_11_four_station_pipeline(report):
    report(v._timed(lambda: v.check_pipeline(T=1268, bootstrap=1000)))
