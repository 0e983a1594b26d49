"""Causal interaction betweenness: how much a variable mediates transfer between others."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .estimators import EstimatorConfig, parallel_map
from .fileio import write_csv_rows
from .measures import interaction_measure, transfer_measure
from .tsgraph import NodeRef, TimeSeriesGraph, causal_paths

ITX_FLOOR = 0.01


class BetweennessError(ValueError):
    pass


@dataclass(frozen=True)
class BetweennessResult:
    """Mean absolute interaction information over the triples mediated by ``variable``.

    ``contributing_triples`` holds ``(i, j, tau, entry)`` where the entry is
    ``|IIX|`` or ``|IIX| / ITX`` in normalized mode.
    """

    variable: int
    value: float
    contributing_triples: tuple
    n_skipped: int
    mean_positive: float
    mean_negative: float
    normalized: bool

    @property
    def cardinality(self) -> int:
        return len(self.contributing_triples)


def mediated_triples(g: TimeSeriesGraph, k: int, tau_max: Optional[int] = None) -> list:
    """Ordered ``(i, j, tau)`` with ``i != j``, both not ``k``, where ``k`` lies on a causal path."""
    tau_max = tau_max or g.tau_max
    out = []
    for i in range(g.n_vars):
        for j in range(g.n_vars):
            if i == j or k in (i, j):
                continue
            for tau in range(1, tau_max + 1):
                _, nodes = causal_paths(g, NodeRef(i, tau), NodeRef(j, 0))
                if any(n.variable == k for n in nodes):
                    out.append((i, j, tau))
    return out


def _triple_values(ds, g, k, triples, cfg, use_mii):
    kind, base = ("MII", "MITP") if use_mii else ("IIX", "ITX")

    def one(triple):
        i, j, tau = triple
        src, tgt = NodeRef(i, tau), NodeRef(j, 0)
        inter = interaction_measure(ds, g, kind, src, tgt, k, cfg).value
        ref = transfer_measure(ds, g, base, src, tgt, cfg).value
        return inter, ref

    return parallel_map(one, triples)


def _mean(vals):
    return sum(vals) / len(vals) if vals else math.nan


def cib(ds, g: TimeSeriesGraph, k: int, tau_max: Optional[int] = None,
        cfg: EstimatorConfig = EstimatorConfig(), normalized: bool = False,
        use_mii: bool = False) -> BetweennessResult:
    """Causal interaction betweenness of variable ``k``.

    Normalized mode divides each ``|IIX|`` by its ITX and skips triples
    whose ITX is below ``ITX_FLOOR``.
    """
    g._check_var(k)
    triples = mediated_triples(g, k, tau_max)
    if not triples:
        raise BetweennessError(f"{g.var_name(k)} mediates no interaction")
    values = _triple_values(ds, g, k, triples, cfg, use_mii)
    entries, skipped = [], 0
    for (i, j, tau), (inter, ref) in zip(triples, values):
        if normalized:
            if not ref >= ITX_FLOOR:
                skipped += 1
                continue
            entries.append((i, j, tau, abs(inter) / ref))
        else:
            entries.append((i, j, tau, abs(inter)))
    signed = [inter for inter, _ in values]
    return BetweennessResult(
        k,
        _mean([e[-1] for e in entries]),
        tuple(entries),
        skipped,
        _mean([v for v in signed if v > 0]),
        _mean([v for v in signed if v < 0]),
        normalized,
    )


CSV_HEADER = ("variable", "cib", "cib_normalized", "n_triples", "n_skipped", "mean_positive", "mean_negative")


def cib_table(ds, g: TimeSeriesGraph, tau_max: Optional[int] = None,
              cfg: EstimatorConfig = EstimatorConfig(), use_mii: bool = False) -> list:
    """One row per variable; variables that mediate nothing get empty values."""
    rows = []
    for k in range(g.n_vars):
        triples = mediated_triples(g, k, tau_max)
        if not triples:
            rows.append([g.var_name(k), "", "", 0, 0, "", ""])
            continue
        values = _triple_values(ds, g, k, triples, cfg, use_mii)
        raw = [abs(inter) for inter, _ in values]
        norm = [abs(inter) / ref for inter, ref in values if ref >= ITX_FLOOR]
        signed = [inter for inter, _ in values]
        rows.append([
            g.var_name(k), _mean(raw), _mean(norm), len(triples), len(triples) - len(norm),
            _mean([v for v in signed if v > 0]), _mean([v for v in signed if v < 0]),
        ])
    return rows


def write_cib_table(path, rows) -> None:
    def fmt(v):
        if isinstance(v, float):
            return "nan" if math.isnan(v) else repr(v)
        return v

    write_csv_rows(path, CSV_HEADER, [[fmt(v) for v in row] for row in rows])
