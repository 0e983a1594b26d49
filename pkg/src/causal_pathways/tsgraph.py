"""Time series graphs: lagged links, contemporaneous links and path queries.

A node ``NodeRef(v, l)`` stands for variable ``v`` at time ``t - l``. Links
are stored once per pattern and repeat at every ``t``:

* ``directed`` holds ``(source, lag, target)`` with ``lag >= 1``, meaning
  ``source(t - lag) -> target(t)``;
* ``contemporaneous_solid`` holds unordered pairs linked at equal times
  (partial-correlation type links);
* ``contemporaneous_dashed`` optionally holds the covariance-type pairs.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

from .fileio import FormatError, atomic_write


class GraphError(ValueError):
    pass


class NodeRef(NamedTuple):
    variable: int
    lag: int

    def shifted(self, by: int) -> "NodeRef":
        return NodeRef(self.variable, self.lag + by)


def _pair(i: int, j: int) -> frozenset:
    return frozenset((int(i), int(j)))


@dataclass(frozen=True)
class TimeSeriesGraph:
    n_vars: int
    tau_max: int
    directed: frozenset = frozenset()
    contemporaneous_solid: frozenset = frozenset()
    contemporaneous_dashed: Optional[frozenset] = None
    names: Optional[tuple] = None
    _parents: dict = field(default=None, init=False, repr=False, compare=False)
    _children: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_vars < 1:
            raise GraphError("n_vars must be >= 1")
        if self.tau_max < 1:
            raise GraphError("tau_max must be >= 1")
        directed = frozenset((int(i), int(tau), int(j)) for i, tau, j in self.directed)
        for i, tau, j in directed:
            self._check_var(i)
            self._check_var(j)
            if not 1 <= tau <= self.tau_max:
                raise GraphError(f"directed lag {tau} outside [1, {self.tau_max}]")
        solid = frozenset(_pair(*p) for p in self.contemporaneous_solid)
        for p in solid:
            if len(p) != 2:
                raise GraphError("contemporaneous link with identical endpoints")
            for v in p:
                self._check_var(v)
        dashed = None
        if self.contemporaneous_dashed is not None:
            dashed = frozenset(_pair(*p) for p in self.contemporaneous_dashed)
            for p in dashed:
                if len(p) != 2:
                    raise GraphError("contemporaneous link with identical endpoints")
                for v in p:
                    self._check_var(v)
        names = None
        if self.names is not None:
            names = tuple(self.names)
            if len(names) != self.n_vars or len(set(names)) != self.n_vars:
                raise GraphError("names must be n_vars unique labels")
        parents = {j: [] for j in range(self.n_vars)}
        children = {i: [] for i in range(self.n_vars)}
        for i, tau, j in sorted(directed):
            parents[j].append((i, tau))
            children[i].append((j, tau))
        object.__setattr__(self, "directed", directed)
        object.__setattr__(self, "contemporaneous_solid", solid)
        object.__setattr__(self, "contemporaneous_dashed", dashed)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "_parents", parents)
        object.__setattr__(self, "_children", children)

    def _check_var(self, v: int):
        if not 0 <= v < self.n_vars:
            raise GraphError(f"variable index {v} out of range for n_vars={self.n_vars}")

    # -- naming ---------------------------------------------------------
    def var_name(self, v: int) -> str:
        return self.names[v] if self.names else f"V{v}"

    def node_name(self, node: NodeRef) -> str:
        base = self.var_name(node.variable)
        return f"{base}(t)" if node.lag == 0 else f"{base}(t-{node.lag})"

    # -- structure ------------------------------------------------------
    def sidepath_links(self) -> frozenset:
        """Contemporaneous pairs used for sidepath purposes.

        When dashed links are supplied a pair counts only if it appears in
        both sets.
        """
        if self.contemporaneous_dashed is None:
            return self.contemporaneous_solid
        return self.contemporaneous_solid & self.contemporaneous_dashed

    def max_lag(self) -> int:
        return max((tau for _, tau, _ in self.directed), default=0)

    def without_links(self, links: Iterable) -> "TimeSeriesGraph":
        drop = set(links)
        return TimeSeriesGraph(
            self.n_vars, self.tau_max, self.directed - drop, self.contemporaneous_solid,
            self.contemporaneous_dashed, self.names,
        )

    def with_variable(self, name: Optional[str] = None) -> "TimeSeriesGraph":
        names = None if self.names is None else self.names + (name or f"V{self.n_vars}",)
        return TimeSeriesGraph(
            self.n_vars + 1, self.tau_max, self.directed, self.contemporaneous_solid,
            self.contemporaneous_dashed, names,
        )


# ---------------------------------------------------------------------------
# parents, neighbours, paths


def parents(g: TimeSeriesGraph, node: NodeRef) -> set:
    g._check_var(node.variable)
    return {NodeRef(i, node.lag + tau) for i, tau in g._parents[node.variable]}


def children(g: TimeSeriesGraph, node: NodeRef) -> set:
    g._check_var(node.variable)
    return {NodeRef(j, node.lag - tau) for j, tau in g._children[node.variable] if node.lag - tau >= 0}


def neighbors(g: TimeSeriesGraph, node: NodeRef, links: Optional[frozenset] = None) -> set:
    g._check_var(node.variable)
    links = g.contemporaneous_solid if links is None else links
    out = set()
    for p in links:
        if node.variable in p:
            (other,) = p - {node.variable}
            out.add(NodeRef(other, node.lag))
    return out


def parents_of_set(g: TimeSeriesGraph, nodes: Iterable[NodeRef]) -> set:
    out = set()
    for n in nodes:
        out |= parents(g, n)
    return out


def _reaches(g: TimeSeriesGraph, start: NodeRef, target: NodeRef) -> bool:
    @lru_cache(maxsize=None)
    def go(node: NodeRef) -> bool:
        if node == target:
            return True
        if node.lag <= target.lag:
            return False
        return any(go(c) for c in children(g, node))

    return go(start)


def causal_paths(g: TimeSeriesGraph, source: NodeRef, target: NodeRef):
    """All directed paths from ``source`` to ``target`` and their node set.

    Returns ``(paths, path_nodes)``: paths are tuples of NodeRefs from source
    to target inclusive; ``path_nodes`` is the source plus every intermediate
    node, excluding the target (empty if no path exists).
    """
    if source.lag <= target.lag:
        raise GraphError("source must lie strictly before the target")
    if source == target:
        raise GraphError("source and target coincide")
    memo: dict = {}

    def reach(node: NodeRef) -> bool:
        if node not in memo:
            if node == target:
                memo[node] = True
            elif node.lag <= target.lag:
                memo[node] = False
            else:
                memo[node] = any(reach(c) for c in sorted(children(g, node)))
        return memo[node]

    paths = []

    def walk(node: NodeRef, prefix: tuple):
        if node == target:
            paths.append(prefix)
            return
        for c in sorted(children(g, node), key=lambda n: (-n.lag, n.variable)):
            if reach(c):
                walk(c, prefix + (c,))

    if reach(source):
        walk(source, (source,))
    path_nodes = set()
    for p in paths:
        path_nodes.update(p[:-1])
    return paths, path_nodes


def sidepath_neighbors(g: TimeSeriesGraph, source: NodeRef, target: NodeRef) -> set:
    """Contemporaneous neighbours of ``source`` that open a sidepath to ``target``.

    A neighbour W qualifies if, without passing through ``source``, a chain of
    zero or more further contemporaneous links from W followed by a directed
    path reaches ``target``.
    """
    links = g.sidepath_links()
    if source.lag <= target.lag:
        return set()
    out = set()
    for w in sorted(neighbors(g, source, links)):
        seen = {source, w}
        queue = deque([w])
        found = False
        while queue and not found:
            node = queue.popleft()
            if any(_reaches(g, c, target) for c in children(g, node)):
                found = True
                break
            for nb in neighbors(g, node, links):
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
        if found:
            out.add(w)
    return out


# ---------------------------------------------------------------------------
# separation

HEAD, TAIL, LINE = "head", "tail", "line"


def unrolled_edges(g: TimeSeriesGraph, window: int):
    """Edge list of the graph unrolled over lags ``0..window``.

    Each edge is ``(a, b, end_at_a, end_at_b)``; dashed links carry arrowheads
    at both ends.
    """
    edges = []
    for lag in range(window + 1):
        for i, tau, j in sorted(g.directed):
            if lag + tau <= window:
                edges.append((NodeRef(i, lag + tau), NodeRef(j, lag), TAIL, HEAD))
        for p in sorted(g.contemporaneous_solid, key=sorted):
            a, b = sorted(p)
            edges.append((NodeRef(a, lag), NodeRef(b, lag), LINE, LINE))
        for p in sorted(g.contemporaneous_dashed or (), key=sorted):
            a, b = sorted(p)
            edges.append((NodeRef(a, lag), NodeRef(b, lag), HEAD, HEAD))
    return edges


def is_collider(end_in: str, end_out: str) -> bool:
    """Motif classification at a middle node from the two edge ends touching it."""
    ends = {end_in, end_out}
    return HEAD in ends and (end_in == end_out or LINE in ends)


def motif_open(end_in: str, end_out: str, conditioned: bool) -> bool:
    return is_collider(end_in, end_out) == conditioned


def default_window(g: TimeSeriesGraph, *nodes: NodeRef) -> int:
    return 3 * (g.tau_max + max((n.lag for n in nodes), default=0))


def is_separated(g: TimeSeriesGraph, u: NodeRef, v: NodeRef, S: Iterable[NodeRef] = (),
                 window: Optional[int] = None) -> bool:
    """True iff every walk between ``u`` and ``v`` is blocked given ``S``.

    Walks may revisit nodes; a middle node is open if it is an unconditioned
    non-collider or a conditioned collider. Evaluated on the graph unrolled
    over ``window`` lags.
    """
    S = frozenset(S)
    if u in S or v in S:
        raise GraphError("query nodes must not be in the conditioning set")
    if u == v:
        raise GraphError("query nodes coincide")
    if window is None:
        window = default_window(g, u, v, *S)
    need = max([u.lag, v.lag] + [s.lag for s in S])
    if window < need:
        raise GraphError(f"window {window} too small for query nodes up to lag {need}")
    adj: dict = {}
    for a, b, ea, eb in unrolled_edges(g, window):
        adj.setdefault(a, []).append((b, ea, eb))
        adj.setdefault(b, []).append((a, eb, ea))
    # state: (node, end type of the arriving edge at node)
    start = [(b, eb) for b, _, eb in adj.get(u, [])]
    seen = set(start)
    queue = deque(start)
    while queue:
        node, arrived = queue.popleft()
        if node == v:
            return False
        for nxt, end_here, end_there in adj.get(node, []):
            if motif_open(arrived, end_here, node in S):
                state = (nxt, end_there)
                if state not in seen:
                    seen.add(state)
                    queue.append(state)
    return True


# ---------------------------------------------------------------------------
# conditioning sets

MEASURE_KINDS = ("TE", "ITY", "MIT", "ITX", "MITP")


class NoCausalPath(GraphError):
    pass


def condition_set(g: TimeSeriesGraph, kind: str, source: NodeRef, target: NodeRef) -> set:
    """Conditioning nodes of a transfer measure from ``source`` to ``target``."""
    kind = kind.upper()
    if kind not in MEASURE_KINDS:
        raise GraphError(f"unknown measure kind {kind!r}")
    if kind == "TE":
        conds = {NodeRef(v, lag) for v in range(g.n_vars) if v != source.variable
                 for lag in range(target.lag + 1, target.lag + g.tau_max + 1)}
        return conds - {target}
    if kind == "MIT" and source.lag == target.lag:
        others = (neighbors(g, target) | neighbors(g, source)) - {source, target}
        conds = parents(g, target) | parents(g, source) | others
        return conds - {source, target}
    if source.lag <= target.lag:
        raise GraphError(f"{kind} needs a lagged source")
    side = sidepath_neighbors(g, source, target)
    side_terms = side | parents_of_set(g, side)
    if kind == "ITY":
        conds = parents(g, target) - {source}
    elif kind == "ITX":
        conds = parents(g, source) | side_terms
    elif kind == "MIT":
        conds = (parents(g, target) - {source}) | parents(g, source) | side_terms
    else:
        _, path_nodes = causal_paths(g, source, target)
        if not path_nodes:
            raise NoCausalPath(
                f"no causal path from {g.node_name(source)} to {g.node_name(target)}"
            )
        conds = ((parents(g, target) - path_nodes) | (parents_of_set(g, path_nodes) - path_nodes)
                 | side_terms)
    return conds - {source, target}


# ---------------------------------------------------------------------------
# graph file


LINK_TYPES = ("dir", "cont_solid", "cont_dashed")


def write_graph(g: TimeSeriesGraph, path) -> None:
    lines = [f"# variables: {', '.join(g.var_name(v) for v in range(g.n_vars))}",
             f"# tau_max: {g.tau_max}"]
    if g.contemporaneous_dashed is not None:
        # distinguishes an empty dashed set from "no dashed information"
        lines.append("# dashed: given")
    for i, tau, j in sorted(g.directed):
        lines.append(f"{g.var_name(i)}, {g.var_name(j)}, {tau}, dir")
    for p in sorted(g.contemporaneous_solid, key=sorted):
        a, b = sorted(p)
        lines.append(f"{g.var_name(a)}, {g.var_name(b)}, 0, cont_solid")
    for p in sorted(g.contemporaneous_dashed or (), key=sorted):
        a, b = sorted(p)
        lines.append(f"{g.var_name(a)}, {g.var_name(b)}, 0, cont_dashed")
    atomic_write(path, "\n".join(lines) + "\n")


def read_graph(path, names: Optional[Iterable[str]] = None, tau_max: Optional[int] = None) -> TimeSeriesGraph:
    """Parse a graph file of ``source, target, lag, type`` lines.

    Variable order comes from ``names`` if given, else from a ``# variables:``
    header, else from first appearance.
    """
    path = Path(path)
    if not path.is_file():
        raise GraphError(f"{path}: no such file")
    header_names = None
    header_tau = None
    has_dashed = False
    records = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("variables:"):
                header_names = [s.strip() for s in body.split(":", 1)[1].split(",") if s.strip()]
            elif body.startswith("dashed:"):
                has_dashed = True
            elif body.startswith("tau_max:"):
                try:
                    header_tau = int(body.split(":", 1)[1])
                except ValueError:
                    raise FormatError(path, lineno, "tau_max must be an integer") from None
            continue
        parts = [s.strip() for s in line.split(",")]
        if len(parts) != 4:
            raise FormatError(path, lineno, "expected 'source, target, lag, type'")
        src, tgt, lag_s, kind = parts
        try:
            lag = int(lag_s)
        except ValueError:
            raise FormatError(path, lineno, f"lag {lag_s!r} is not an integer") from None
        if kind not in LINK_TYPES:
            raise FormatError(path, lineno, f"link type must be one of {LINK_TYPES}")
        if kind == "dir" and lag < 1:
            raise FormatError(path, lineno, "directed links need lag >= 1")
        if kind != "dir" and lag != 0:
            raise FormatError(path, lineno, "contemporaneous links need lag 0")
        if kind != "dir" and src == tgt:
            raise FormatError(path, lineno, "contemporaneous self-link")
        records.append((lineno, src, tgt, lag, kind))
    order = list(names) if names is not None else header_names
    if order is None:
        order = []
        for _, src, tgt, _, _ in records:
            for n in (src, tgt):
                if n not in order:
                    order.append(n)
    index = {n: k for k, n in enumerate(order)}
    directed, solid, dashed = set(), set(), set()
    for lineno, src, tgt, lag, kind in records:
        for n in (src, tgt):
            if n not in index:
                raise FormatError(path, lineno, f"unknown variable {n!r}")
        if kind == "dir":
            directed.add((index[src], lag, index[tgt]))
        elif kind == "cont_solid":
            solid.add(_pair(index[src], index[tgt]))
        else:
            has_dashed = True
            dashed.add(_pair(index[src], index[tgt]))
    tm = tau_max or header_tau or max([lag for _, lag, _ in directed] + [1])
    return TimeSeriesGraph(len(order), tm, frozenset(directed), frozenset(solid),
                           frozenset(dashed) if has_dashed else None, tuple(order))


def parse_node(text: str, names) -> NodeRef:
    """``"X"`` -> X(t), ``"X(t-2)"`` or ``"X@2"`` -> lag 2."""
    text = text.strip()
    names = list(names)
    lag = 0
    name = text
    if text.endswith(")") and "(" in text:
        name, inner = text[:-1].split("(", 1)
        inner = inner.replace(" ", "")
        if inner == "t":
            lag = 0
        elif inner.startswith("t-"):
            lag = int(inner[2:])
        else:
            raise GraphError(f"cannot parse node {text!r}")
    elif "@" in text:
        name, lag_s = text.split("@", 1)
        lag = int(lag_s)
    if name not in names:
        raise GraphError(f"unknown variable {name!r}")
    return NodeRef(names.index(name), lag)
