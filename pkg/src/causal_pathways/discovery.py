"""Two-step graph reconstruction from data.

Step one prunes lagged parent candidates per variable with conditional
independence tests against a growing set of the strongest other candidates,
then tests contemporaneous neighbours given both nodes' parents. Step two
keeps the links whose MIT exceeds the threshold.

The candidate ordering and stopping rule are this package's own explicit
choices; they are a stand-in for the iteration of the original algorithm.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dataset import TimeSeriesDataset, lagged_matrix
from .estimators import EstimatorConfig, estimate_cmi, parallel_map
from .fileio import write_csv_rows
from .tsgraph import NodeRef, TimeSeriesGraph


class DiscoveryError(ValueError):
    pass


@dataclass(frozen=True)
class DiscoveryConfig:
    tau_max: int = 4
    threshold_nats: float = 0.015
    estimator: EstimatorConfig = field(default_factory=lambda: EstimatorConfig(k=100))
    max_conds: Optional[int] = None

    def __post_init__(self):
        if self.tau_max < 1:
            raise DiscoveryError("tau_max must be >= 1")
        if not self.threshold_nats >= 0:
            raise DiscoveryError("threshold must be >= 0")
        if self.max_conds is not None and self.max_conds < 0:
            raise DiscoveryError("max_conds must be >= 0")


@dataclass
class DiscoveryResult:
    parents: dict
    neighbors: dict
    report: list

    def write_report(self, path, names) -> None:
        rows = []
        for stage, src, tgt, value, conds, decision in self.report:
            rows.append([stage, names[src.variable], src.lag, names[tgt.variable], repr(float(value)),
                         ";".join(_name(names, c) for c in conds), decision])
        write_csv_rows(path, ("stage", "source", "lag", "target", "cmi_nats", "conditions", "decision"), rows)


def _name(names, node):
    return f"{names[node.variable]}(t)" if node.lag == 0 else f"{names[node.variable]}(t-{node.lag})"


def _stream_seed(base: int, *keys: int) -> int:
    return int(np.random.SeedSequence([base, *keys]).generate_state(1)[0])


def _test(ds, x: NodeRef, y: NodeRef, conds, cfg: EstimatorConfig) -> float:
    data = lagged_matrix(ds, [x, y, *conds])
    return estimate_cmi(data[:, 0], data[:, 1], data[:, 2:], cfg).value


def _parents_of(ds, target: int, cfg: DiscoveryConfig):
    t_node = NodeRef(target, 0)
    candidates = [NodeRef(v, lag) for v in range(ds.N) for lag in range(1, cfg.tau_max + 1)]
    strength = {c: math.inf for c in candidates}
    report = []
    p = 0
    while True:
        if p > len(candidates) - 1 or (cfg.max_conds is not None and p > cfg.max_conds):
            break
        est = cfg.estimator.with_(seed=_stream_seed(cfg.estimator.seed, target, p))
        order = sorted(candidates, key=lambda c: (-strength[c], c.variable, c.lag))
        removed = set()
        new_strength = {}
        for c in candidates:
            conds = [o for o in order if o != c][:p]
            value = _test(ds, c, t_node, conds, est)
            keep = value > cfg.threshold_nats
            report.append(("parents", c, t_node, value, tuple(conds), "keep" if keep else "remove"))
            if keep:
                new_strength[c] = value
            else:
                removed.add(c)
        candidates = [c for c in candidates if c not in removed]
        strength = new_strength
        p += 1
    return set(candidates), report


def estimate_parents_neighbors(ds: TimeSeriesDataset, cfg: DiscoveryConfig = DiscoveryConfig()) -> DiscoveryResult:
    """Preliminary parents and contemporaneous neighbours of every variable."""
    if ds.T < 50 * (cfg.tau_max + 1):
        warnings.warn(f"T={ds.T} is short for tau_max={cfg.tau_max}; estimates may be unreliable",
                      RuntimeWarning, stacklevel=2)
    results = parallel_map(lambda j: _parents_of(ds, j, cfg), range(ds.N))
    parents = {j: res[0] for j, res in enumerate(results)}
    report = [row for res in results for row in res[1]]
    neighbors = {j: set() for j in range(ds.N)}
    est = cfg.estimator.with_(seed=_stream_seed(cfg.estimator.seed, ds.N, 0))
    for i in range(ds.N):
        for j in range(i + 1, ds.N):
            conds = sorted(parents[i] | parents[j])
            value = _test(ds, NodeRef(i, 0), NodeRef(j, 0), conds, est)
            keep = value > cfg.threshold_nats
            report.append(("neighbors", NodeRef(i, 0), NodeRef(j, 0), value, tuple(conds),
                           "keep" if keep else "remove"))
            if keep:
                neighbors[i].add(NodeRef(j, 0))
                neighbors[j].add(NodeRef(i, 0))
    return DiscoveryResult(parents, neighbors, report)


def build_graph(ds: TimeSeriesDataset, cfg: DiscoveryConfig = DiscoveryConfig(),
                preliminary: Optional[DiscoveryResult] = None):
    """Graph of preliminary links whose MIT exceeds the threshold.

    Returns ``(graph, result)``; ``result.report`` also lists the MIT tests.
    """
    prelim = preliminary or estimate_parents_neighbors(ds, cfg)
    P, Nb = prelim.parents, prelim.neighbors
    report = list(prelim.report)
    est = cfg.estimator.with_(seed=_stream_seed(cfg.estimator.seed, ds.N + 1, 0))

    def shifted(nodes, lag):
        return {NodeRef(n.variable, n.lag + lag) for n in nodes}

    directed = set()
    for j in range(ds.N):
        for src in sorted(P[j]):
            conds = sorted((P[j] - {src}) | shifted(P[src.variable], src.lag))
            value = _test(ds, src, NodeRef(j, 0), conds, est)
            keep = value > cfg.threshold_nats
            report.append(("mit", src, NodeRef(j, 0), value, tuple(conds), "keep" if keep else "remove"))
            if keep:
                directed.add((src.variable, src.lag, j))
    solid, dashed = set(), set()
    for i in range(ds.N):
        for nb in sorted(Nb[i]):
            j = nb.variable
            if j <= i:
                continue
            base = P[i] | P[j]
            others = {n for n in Nb[i] | Nb[j] if n.variable not in (i, j)}
            full = sorted(base | others | {p for o in others for p in shifted(P[o.variable], 0)})
            value = _test(ds, NodeRef(i, 0), NodeRef(j, 0), full, est)
            keep = value > cfg.threshold_nats
            report.append(("mit_contemporaneous", NodeRef(i, 0), NodeRef(j, 0), value, tuple(full),
                           "keep" if keep else "remove"))
            if keep:
                solid.add((i, j))
            value = _test(ds, NodeRef(i, 0), NodeRef(j, 0), sorted(base), est)
            keep = value > cfg.threshold_nats
            report.append(("mit_no_neighbors", NodeRef(i, 0), NodeRef(j, 0), value, tuple(sorted(base)),
                           "keep" if keep else "remove"))
            if keep:
                dashed.add((i, j))
    has_pairs = any(Nb.values())
    g = TimeSeriesGraph(ds.N, cfg.tau_max, frozenset(directed), frozenset(solid),
                        frozenset(dashed) if has_pairs else None, ds.names)
    return g, DiscoveryResult(P, Nb, report)
