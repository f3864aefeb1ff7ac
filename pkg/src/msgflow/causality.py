"""Causality graph construction, trace statistics and pruning."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field, replace
from typing import Iterable

from .errors import EmptyModelError, OverPrunedError
from .model import MessageDictionary, Trace, TraceSet

Edge = tuple[int, int]

ZERO = "zero"
SKIP = "skip"


@dataclass(frozen=True, eq=False)
class CausalityGraph:
    nodes: frozenset[int]
    roots: frozenset[int]
    terminals: frozenset[int]
    edges: tuple[Edge, ...]
    node_support: dict[int, int] = field(default_factory=dict)
    edge_support: dict[Edge, int] = field(default_factory=dict)
    forward_conf: dict[Edge, float] = field(default_factory=dict)
    backward_conf: dict[Edge, float] = field(default_factory=dict)

    def __post_init__(self):
        succ = defaultdict(list)
        for h, t in self.edges:
            succ[h].append(t)
        object.__setattr__(self, "_succ", {h: tuple(sorted(ts)) for h, ts in succ.items()})
        object.__setattr__(self, "_edge_set", frozenset(self.edges))

    def successors(self, node: int) -> tuple[int, ...]:
        return self._succ.get(node, ())

    def has_edge(self, h: int, t: int) -> bool:
        return (h, t) in self._edge_set

    def combined_conf(self, edge: Edge) -> float:
        return (self.forward_conf.get(edge, 0.0) + self.backward_conf.get(edge, 0.0)) / 2

    def topological_order(self) -> list[int]:
        indeg = {n: 0 for n in self.nodes}
        for _, t in self.edges:
            indeg[t] += 1
        ready = sorted(n for n, d in indeg.items() if d == 0)
        order = []
        queue = deque(ready)
        while queue:
            n = queue.popleft()
            order.append(n)
            for t in self.successors(n):
                indeg[t] -= 1
                if indeg[t] == 0:
                    queue.append(t)
        if len(order) != len(self.nodes):
            raise ValueError("causality graph contains a cycle")
        return order


@dataclass(frozen=True, eq=False)
class PrunedGraph(CausalityGraph):
    theta: float = 0.0
    essential_edges: frozenset[Edge] = frozenset()


def _reaches(succ: dict[int, list[int]], start: int, goal: int) -> bool:
    stack, seen = [start], {start}
    while stack:
        n = stack.pop()
        if n == goal:
            return True
        for t in succ.get(n, ()):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return False


def construct_causality_graph(traces: TraceSet, dictionary: MessageDictionary) -> CausalityGraph:
    """Structural skeleton over the messages observed in ``traces``.

    Each observed initial message becomes a root and is expanded breadth
    first through ``causal``; expansion stops at terminal messages and never
    enters another initial message. An edge that would close a cycle is
    dropped at insertion time. Statistics are left empty, see
    :func:`aggregate_statistics`.
    """
    observed = sorted(traces.unique_messages())
    roots = sorted(m for m in observed if m in dictionary.initial)
    if not roots:
        raise EmptyModelError("no initial message occurs in any trace")

    candidates = {
        h: [t for t in observed if t not in dictionary.initial and dictionary.causal(h, t)]
        for h in observed
    }
    succ: dict[int, list[int]] = defaultdict(list)
    edges: list[Edge] = []
    nodes: set[int] = set()
    for root in roots:
        nodes.add(root)
        queue = deque([root])
        expanded = {root}
        while queue:
            h = queue.popleft()
            if h in dictionary.terminal:
                continue
            for t in candidates[h]:
                if t in succ[h]:
                    continue
                if t == h or _reaches(succ, t, h):
                    continue
                succ[h].append(t)
                edges.append((h, t))
                nodes.add(t)
                if t not in expanded:
                    expanded.add(t)
                    queue.append(t)

    return CausalityGraph(
        nodes=frozenset(nodes),
        roots=frozenset(roots),
        terminals=frozenset(n for n in nodes if n in dictionary.terminal),
        edges=tuple(edges),
    )


def node_support(trace: Trace | Iterable[int], m: int) -> int:
    return sum(1 for x in trace if x == m)


def edge_support(trace: Trace | Iterable[int], h: int, t: int) -> int:
    """Number of ``t`` instances matched one-to-one to an earlier ``h``.

    Each ``t`` takes the nearest earlier ``h`` not matched yet.
    """
    pending = 0
    matched = 0
    for x in trace:
        # t before h: when h == t an instance can only serve later ones
        if x == t and pending:
            pending -= 1
            matched += 1
        if x == h:
            pending += 1
    return matched


def forward_confidence(trace, h: int, t: int) -> float:
    ns = node_support(trace, h)
    return edge_support(trace, h, t) / ns if ns else 0.0


def backward_confidence(trace, h: int, t: int) -> float:
    ns = node_support(trace, t)
    return edge_support(trace, h, t) / ns if ns else 0.0


def _trace_statistics(events: tuple[int, ...], nodes, edges):
    positions = defaultdict(list)
    for i, x in enumerate(events):
        positions[x].append(i)
    ns = {n: len(positions.get(n, ())) for n in nodes}
    es = {}
    for h, t in edges:
        ph, pt = positions.get(h, []), positions.get(t, [])
        if not ph or not pt:
            es[(h, t)] = 0
            continue
        # merge walk: count of t's with an unmatched h before them
        i = j = pending = matched = 0
        while j < len(pt):
            if i < len(ph) and ph[i] < pt[j]:
                pending += 1
                i += 1
            else:
                if pending:
                    pending -= 1
                    matched += 1
                j += 1
        es[(h, t)] = matched
    return ns, es


def aggregate_statistics(traces: TraceSet, graph: CausalityGraph, zero_support: str = ZERO) -> CausalityGraph:
    """Attach supports (summed) and confidences (mean of per-trace ratios).

    ``zero_support`` decides what a trace lacking an endpoint contributes:
    ``"zero"`` counts it as 0, ``"skip"`` leaves it out of the mean.
    """
    if zero_support not in (ZERO, SKIP):
        raise ValueError(f"zero_support must be {ZERO!r} or {SKIP!r}")
    if len(traces) == 0:
        raise ValueError("cannot aggregate over an empty trace set")
    total_ns = dict.fromkeys(graph.nodes, 0)
    total_es = dict.fromkeys(graph.edges, 0)
    f_sum = dict.fromkeys(graph.edges, 0.0)
    b_sum = dict.fromkeys(graph.edges, 0.0)
    f_cnt = dict.fromkeys(graph.edges, 0)
    b_cnt = dict.fromkeys(graph.edges, 0)

    for trace in traces:
        ns, es = _trace_statistics(trace.events, graph.nodes, graph.edges)
        for n, c in ns.items():
            total_ns[n] += c
        for (h, t), c in es.items():
            total_es[(h, t)] += c
            if ns[h]:
                f_sum[(h, t)] += c / ns[h]
                f_cnt[(h, t)] += 1
            elif zero_support == ZERO:
                f_cnt[(h, t)] += 1
            if ns[t]:
                b_sum[(h, t)] += c / ns[t]
                b_cnt[(h, t)] += 1
            elif zero_support == ZERO:
                b_cnt[(h, t)] += 1

    fwd = {e: (f_sum[e] / f_cnt[e] if f_cnt[e] else 0.0) for e in graph.edges}
    bwd = {e: (b_sum[e] / b_cnt[e] if b_cnt[e] else 0.0) for e in graph.edges}
    return replace(
        graph,
        node_support=total_ns,
        edge_support=total_es,
        forward_conf=fwd,
        backward_conf=bwd,
    )


def prune(graph: CausalityGraph, theta: float = 0.45, essential: Iterable[Edge] = ()) -> PrunedGraph:
    """Keep edges whose mean of forward and backward confidence reaches
    ``theta``; essential edges are always kept. Nodes that end up off every
    root-to-terminal route are dropped together with their edges."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    essential = frozenset(essential)
    kept = [e for e in graph.edges if e in essential or graph.combined_conf(e) >= theta]

    succ, pred = defaultdict(list), defaultdict(list)
    for h, t in kept:
        succ[h].append(t)
        pred[t].append(h)

    def closure(starts, adj):
        seen = set(starts)
        stack = list(starts)
        while stack:
            n = stack.pop()
            for x in adj.get(n, ()):
                if x not in seen:
                    seen.add(x)
                    stack.append(x)
        return seen

    forward = closure([r for r in graph.roots], succ)
    backward = closure([t for t in graph.terminals], pred)
    live = forward & backward
    roots = frozenset(r for r in graph.roots if r in live)
    if not roots:
        raise OverPrunedError(
            f"theta={theta} disconnects every root from every terminal; try a lower theta"
        )
    edges = tuple(e for e in kept if e[0] in live and e[1] in live)
    return PrunedGraph(
        nodes=frozenset(live),
        roots=roots,
        terminals=frozenset(t for t in graph.terminals if t in live),
        edges=edges,
        node_support={n: graph.node_support.get(n, 0) for n in live},
        edge_support={e: graph.edge_support.get(e, 0) for e in edges},
        forward_conf={e: graph.forward_conf.get(e, 0.0) for e in edges},
        backward_conf={e: graph.backward_conf.get(e, 0.0) for e in edges},
        theta=theta,
        essential_edges=essential & frozenset(graph.edges),
    )


def to_dot(graph: CausalityGraph, dictionary: MessageDictionary, name: str = "causality") -> str:
    lines = [f"digraph {name} {{"]
    for n in sorted(graph.nodes):
        shape = "doublecircle" if n in graph.terminals else ("box" if n in graph.roots else "ellipse")
        lines.append(f'  {n} [label="{n}: {dictionary.render(n)}", shape={shape}];')
    for h, t in sorted(graph.edges):
        e = (h, t)
        label = (
            f"f={graph.forward_conf.get(e, 0.0):.3f}, "
            f"b={graph.backward_conf.get(e, 0.0):.3f}, "
            f"s={graph.edge_support.get(e, 0)}"
        )
        lines.append(f'  {h} -> {t} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
