"""Graph-based transfer and interaction measures.

Every measure is a conditional mutual information between lagged nodes,
with the conditioning set read off the time series graph. The data source
is either a :class:`TimeSeriesDataset` (finite-sample estimation) or a
:class:`PopulationGaussian` (exact values of a linear model).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .dataset import lagged_matrix
from .estimators import (
    EstimatorConfig,
    estimate_cmi,
    estimate_interaction_information,
    gaussian_cmi_from_cov,
    rescale_to_correlation,
)
from .fileio import write_csv_rows
from .linear_effects import EffectError, PopulationGaussian, mediator_nodes
from .tsgraph import GraphError, NodeRef, NoCausalPath, TimeSeriesGraph, condition_set

TRANSFER_KINDS = ("TE", "ITY", "MIT", "ITX", "MITP")
INTERACTION_KINDS = {"IIX": "ITX", "MII": "MITP"}
MAX_CONDITION_DIM = 20

NOT_LAG_SPECIFIC = "not lag-specific"
NO_CAUSAL_PATH = "no causal path"


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class MeasureResult:
    """One evaluated measure. ``n_samples == 0`` marks an exact population value."""

    kind: str
    source: NodeRef
    target: NodeRef
    value: float
    conditions: tuple
    n_samples: int
    mediators: tuple = ()
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None
    p_value: Optional[float] = None
    note: str = ""

    @property
    def rescaled(self) -> float:
        return rescale_to_correlation(self.value) if math.isfinite(self.value) else math.nan

    @property
    def lag(self) -> int:
        return self.source.lag - self.target.lag

    def rescaled_interval(self):
        if self.ci_low is None:
            return None
        return rescale_to_correlation(self.ci_low), rescale_to_correlation(self.ci_high)


def _guard_dimension(n_dims: int, kind: str):
    if n_dims > MAX_CONDITION_DIM:
        warnings.warn(
            f"{kind}: conditioning dimension {n_dims} > {MAX_CONDITION_DIM}; "
            "expect strong estimator bias at small sample sizes",
            RuntimeWarning,
            stacklevel=3,
        )


def _cmi(source, x_nodes, y_nodes, z_nodes, w_nodes, cfg: EstimatorConfig):
    """CMI of x and y given z, or interaction information of w if given."""
    nodes = list(x_nodes) + list(y_nodes) + list(w_nodes or ()) + list(z_nodes)
    dx, dy, dw = len(x_nodes), len(y_nodes), len(w_nodes or ())
    ix = list(range(dx))
    iy = list(range(dx, dx + dy))
    iw = list(range(dx + dy, dx + dy + dw))
    iz = list(range(dx + dy + dw, len(nodes)))
    if isinstance(source, PopulationGaussian):
        cov = source.covariance(nodes)
        base = gaussian_cmi_from_cov(cov, ix, iy, iz)
        if w_nodes:
            base -= gaussian_cmi_from_cov(cov, ix, iy, iw + iz)
        return base, 0, None, None, None
    data = lagged_matrix(source, nodes)
    x, y, w, z = data[:, ix], data[:, iy], data[:, iw], data[:, iz]
    if w_nodes:
        est = estimate_interaction_information(x, y, w, z, cfg)
    else:
        est = estimate_cmi(x, y, z, cfg)
    return est.value, est.n_samples, est.ci_low, est.ci_high, est.p_value


def transfer_measure(ds, g: TimeSeriesGraph, kind: str, source: NodeRef, target: NodeRef,
                     cfg: EstimatorConfig = EstimatorConfig()) -> MeasureResult:
    """Evaluate TE, ITY, MIT, ITX or MITP from ``source`` to ``target``.

    For TE the source lag is ignored: all lags 1..tau_max of the source
    variable form the first argument.
    """
    kind = kind.upper()
    if kind not in TRANSFER_KINDS:
        raise MeasureError(f"unknown transfer measure {kind!r}")
    conds = sorted(condition_set(g, kind, source, target))
    if kind == "TE":
        x_nodes = [NodeRef(source.variable, target.lag + l) for l in range(1, g.tau_max + 1)]
        note = NOT_LAG_SPECIFIC
    else:
        x_nodes = [source]
        note = ""
    _guard_dimension(len(conds), kind)
    value, n, lo, hi, p = _cmi(ds, x_nodes, [target], conds, None, cfg)
    return MeasureResult(kind, source, target, float(value), tuple(conds), n,
                         ci_low=lo, ci_high=hi, p_value=p, note=note)


def interaction_measure(ds, g: TimeSeriesGraph, kind: str, source: NodeRef, target: NodeRef,
                        mediator_variable, cfg: EstimatorConfig = EstimatorConfig()) -> MeasureResult:
    """IIX or MII: the base measure minus the same CMI also conditioned on the mediator.

    The mediator vector holds every causal-path occurrence of the mediator
    variable; several variables are conditioned on jointly.
    """
    kind = kind.upper()
    if kind not in INTERACTION_KINDS:
        raise MeasureError(f"unknown interaction measure {kind!r}")
    if source.lag <= target.lag:
        raise MeasureError(f"{kind} needs a lagged source")
    try:
        W = mediator_nodes(g, source, target, mediator_variable)
    except EffectError as exc:
        raise MeasureError(str(exc)) from None
    conds = sorted(condition_set(g, INTERACTION_KINDS[kind], source, target) - set(W))
    _guard_dimension(len(conds) + len(W), kind)
    value, n, lo, hi, p = _cmi(ds, [source], [target], conds, W, cfg)
    return MeasureResult(kind, source, target, float(value), tuple(conds), n, mediators=tuple(W),
                         ci_low=lo, ci_high=hi, p_value=p)


def _undefined(kind, source, target, note):
    return MeasureResult(kind, source, target, math.nan, (), 0, note=note)


def lag_function(ds, g: TimeSeriesGraph, kind: str, source_variable: int, target_variable: int,
                 lags: Optional[Iterable[int]] = None,
                 cfg: EstimatorConfig = EstimatorConfig()) -> list:
    """One result per lag; lags where the measure is undefined carry a note instead of a value."""
    kind = kind.upper()
    lags = list(range(1, g.tau_max + 1)) if lags is None else list(lags)
    target = NodeRef(target_variable, 0)
    if kind == "TE":
        te = transfer_measure(ds, g, "TE", NodeRef(source_variable, 1), target, cfg)
        return [MeasureResult("TE", NodeRef(source_variable, lag), target, te.value, te.conditions,
                              te.n_samples, ci_low=te.ci_low, ci_high=te.ci_high, p_value=te.p_value,
                              note=NOT_LAG_SPECIFIC) for lag in lags]
    out = []
    for lag in lags:
        source = NodeRef(source_variable, lag)
        try:
            out.append(transfer_measure(ds, g, kind, source, target, cfg))
        except NoCausalPath:
            out.append(_undefined(kind, source, target, NO_CAUSAL_PATH))
        except (GraphError, MeasureError) as exc:
            out.append(_undefined(kind, source, target, str(exc)))
    return out


# ---------------------------------------------------------------------------
# CSV output

CSV_HEADER = ("kind", "source", "lag", "target", "mediators", "value_nats", "rescaled", "n_samples",
              "ci_low", "ci_high", "p_value", "conditions", "note")


def node_name(names: Sequence[str], node: NodeRef) -> str:
    base = names[node.variable]
    return f"{base}(t)" if node.lag == 0 else f"{base}(t-{node.lag})"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return repr(float(v))


def result_row(r: MeasureResult, names: Sequence[str]) -> list:
    return [
        r.kind,
        names[r.source.variable],
        str(r.lag),
        names[r.target.variable],
        ";".join(node_name(names, n) for n in r.mediators),
        _fmt(r.value),
        _fmt(r.rescaled),
        str(r.n_samples),
        _fmt(r.ci_low),
        _fmt(r.ci_high),
        _fmt(r.p_value),
        ";".join(node_name(names, n) for n in r.conditions),
        r.note,
    ]


def write_results(path, results: Iterable[MeasureResult], names: Sequence[str]) -> None:
    write_csv_rows(path, CSV_HEADER, [result_row(r, names) for r in results])
