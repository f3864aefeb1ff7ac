"""Synthetic interleaved traces from ground-truth flow DAGs.

Flow files reuse the message-definition syntax and add ``flow NAME``
headers and ``h -> t`` edges::

    flow cpu0_read
    1 (cpu0:cache:rd:req)
    2 (cache:cpu0:rd:resp)
    1 -> 2
    initial = {1}
    terminal = {2}

``initial`` defaults to the flow's only source node and ``terminal`` to
its sink nodes.
"""

from __future__ import annotations

import random
import re
from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .errors import DuplicateMessageError, ParseError, UndefinedMessageError
from .mining import FlowModel, Path
from .model import (
    Kind,
    Message,
    MessageDictionary,
    Trace,
    TraceSet,
    _DIRECTIVE_LINE,
    _MESSAGE_LINE,
    _parse_id_list,
    _strip_comment,
)

_FLOW_HEADER = re.compile(r"^flow\s+(?P<name>[A-Za-z0-9_]+)$")
_EDGE_LINE = re.compile(r"^(?P<h>\d+)\s*->\s*(?P<t>\d+)$")


@dataclass(frozen=True)
class FlowSpec:
    id: str
    nodes: frozenset[int]
    edges: frozenset[tuple[int, int]]
    initial: int
    terminals: frozenset[int]

    def __post_init__(self):
        succ = {n: [] for n in self.nodes}
        for h, t in self.edges:
            if h not in self.nodes or t not in self.nodes:
                raise ValueError(f"flow {self.id}: edge {h}->{t} leaves the node set")
            succ[h].append(t)
        if self.initial not in self.nodes:
            raise ValueError(f"flow {self.id}: initial {self.initial} is not a node")
        if any(h in self.terminals for h, _ in self.edges):
            raise ValueError(f"flow {self.id}: terminal messages must not have successors")
        # every node reachable from the root, every maximal path ends at a terminal
        seen, stack = {self.initial}, [self.initial]
        while stack:
            for t in succ[stack.pop()]:
                if t not in seen:
                    seen.add(t)
                    stack.append(t)
        if seen != set(self.nodes):
            raise ValueError(f"flow {self.id}: nodes {sorted(set(self.nodes) - seen)} unreachable")
        for n in self.nodes:
            if not succ[n] and n not in self.terminals:
                raise ValueError(f"flow {self.id}: dead end at non-terminal {n}")
        object.__setattr__(self, "_succ", {n: tuple(sorted(ts)) for n, ts in succ.items()})
        self.paths()  # raises on cycles

    def successors(self, node: int) -> tuple[int, ...]:
        return self._succ[node]

    def paths(self) -> list[tuple[int, ...]]:
        out = []

        def walk(path):
            last = path[-1]
            if last in self.terminals:
                out.append(tuple(path))
                return
            for t in self._succ[last]:
                if t in path:
                    raise ValueError(f"flow {self.id} is cyclic")
                walk(path + [t])

        walk([self.initial])
        return sorted(out)


@dataclass(frozen=True)
class FlowLibrary:
    dictionary: MessageDictionary
    flows: tuple[FlowSpec, ...]

    def select(self, names: Sequence[str]) -> "FlowLibrary":
        by_name = {f.id: f for f in self.flows}
        missing = [n for n in names if n not in by_name]
        if missing:
            raise KeyError(f"unknown flows {missing}")
        flows = tuple(by_name[n] for n in names)
        used = set().union(*(f.nodes for f in flows))
        d = self.dictionary
        dictionary = MessageDictionary(
            {k: v for k, v in d.messages.items() if k in used},
            frozenset(f.initial for f in flows),
            frozenset().union(*(f.terminals for f in flows)),
        )
        return FlowLibrary(dictionary, flows)


def parse_flow_specs(text: str) -> FlowLibrary:
    messages: dict[int, Message] = {}
    blocks: list[dict] = []
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        if m := _FLOW_HEADER.match(line):
            current = {"name": m["name"], "nodes": set(), "edges": set(), "initial": [], "terminal": [], "line": lineno}
            blocks.append(current)
            continue
        if m := _MESSAGE_LINE.match(line):
            mid = int(m["id"])
            try:
                msg = Message(mid, m["src"], m["dest"], m["cmd"], Kind.parse(m["kind"]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if mid in messages and messages[mid].quadruple != msg.quadruple:
                raise DuplicateMessageError(f"message {mid} redeclared differently", lineno)
            messages[mid] = msg
            if current is not None:
                current["nodes"].add(mid)
            continue
        if current is None:
            raise ParseError("edges and directives must follow a 'flow NAME' header", lineno)
        if m := _EDGE_LINE.match(line):
            h, t = int(m["h"]), int(m["t"])
            current["edges"].add((h, t))
            current["nodes"].update((h, t))
            continue
        if m := _DIRECTIVE_LINE.match(line):
            current[m["name"].lower()].extend(_parse_id_list(m["ids"], lineno))
            continue
        raise ParseError(f"cannot parse {line!r}", lineno)

    flows = []
    for b in blocks:
        for mid in b["nodes"] | set(b["initial"]) | set(b["terminal"]):
            if mid not in messages:
                raise UndefinedMessageError(f"flow {b['name']} uses undeclared message {mid}", b["line"])
        nodes = b["nodes"] | set(b["initial"])
        targets = {t for _, t in b["edges"]}
        sources = {h for h, _ in b["edges"]}
        initial = b["initial"] or sorted(nodes - targets)
        if len(initial) != 1:
            raise ParseError(f"flow {b['name']} needs exactly one initial message", b["line"])
        terminals = b["terminal"] or sorted(nodes - sources)
        try:
            flows.append(
                FlowSpec(b["name"], frozenset(nodes), frozenset(b["edges"]), initial[0], frozenset(terminals))
            )
        except ValueError as exc:
            raise ParseError(str(exc), b["line"]) from None
    if not flows:
        raise ParseError("no flows declared")
    used = set().union(*(f.nodes for f in flows))
    dictionary = MessageDictionary(
        {k: v for k, v in messages.items() if k in used},
        frozenset(f.initial for f in flows),
        frozenset().union(*(f.terminals for f in flows)),
    )
    return FlowLibrary(dictionary, tuple(flows))


def load_flow_specs(path) -> FlowLibrary:
    with open(path, encoding="utf-8") as fh:
        return parse_flow_specs(fh.read())


def load_fixture() -> FlowLibrary:
    text = resources.files("msgflow").joinpath("data/soc10.flows").read_text(encoding="utf-8")
    return parse_flow_specs(text)


@dataclass(frozen=True)
class GenerationConfig:
    flows: tuple[FlowSpec, ...]
    instances_per_flow: int | tuple[int, ...] = 1
    interleave_seed: int = 0
    max_concurrent: int = 4
    drop_rule: tuple[int, float] | None = None
    n_traces: int = 1

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        if not self.flows:
            raise ValueError("at least one flow is required")
        counts = self.instances_per_flow
        if isinstance(counts, int):
            counts = (counts,) * len(self.flows)
        counts = tuple(counts)
        if len(counts) != len(self.flows):
            raise ValueError("instances_per_flow needs one count per flow")
        if any(c < 1 for c in counts):
            raise ValueError("instances_per_flow must be >= 1")
        object.__setattr__(self, "_counts", counts)
        if self.max_concurrent < 1:
            raise ValueError("max_concurrent must be >= 1")
        if self.n_traces < 1:
            raise ValueError("n_traces must be >= 1")
        if self.drop_rule is not None and not 0.0 <= self.drop_rule[1] <= 1.0:
            raise ValueError("drop probability must lie in [0, 1]")


@dataclass(frozen=True)
class Preset:
    flows: tuple[str, ...]
    instances_per_flow: int
    n_traces: int
    max_concurrent: int = 4


CPU_FLOWS = ("cpu0_read", "cpu0_write", "cpu1_read", "cpu1_write")
ALL_FLOWS = CPU_FLOWS + (
    "dma_read",
    "dma_write",
    "uart_irq",
    "timer_irq",
    "l2_writeback",
    "gpu_read",
)

# Trace counts put each preset near the message totals of the reference
# corpora: small-20 ~3680, large-10 ~4360, large-20 ~10900.
PRESETS = {
    "small-20": Preset(CPU_FLOWS, 20, 12),
    "large-10": Preset(ALL_FLOWS, 10, 12),
    "large-20": Preset(ALL_FLOWS, 20, 15),
    # fault-injection corpus: one CPU flow, DMA and both interrupt flows
    "mixed-10": Preset(("cpu0_read", "dma_read", "uart_irq", "timer_irq"), 10, 12),
}


def preset_config(name: str, seed: int = 0, library: FlowLibrary | None = None, drop_rule=None) -> GenerationConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    preset = PRESETS[name]
    library = (library or load_fixture()).select(preset.flows)
    return GenerationConfig(
        flows=library.flows,
        instances_per_flow=preset.instances_per_flow,
        interleave_seed=seed,
        max_concurrent=preset.max_concurrent,
        drop_rule=drop_rule,
        n_traces=preset.n_traces,
    )


def ground_truth(flows: Sequence[FlowSpec]) -> FlowModel:
    paths = []
    for flow in flows:
        paths.extend(Path(p) for p in flow.paths())
    return FlowModel(tuple(paths))


@dataclass
class _Execution:
    path: tuple[int, ...]
    pos: int = 0


def generate(config: GenerationConfig) -> tuple[TraceSet, FlowModel]:
    """Interleave random executions of every flow.

    Per trace, each flow runs ``instances_per_flow`` times (a single count
    or one count per flow) along a path drawn
    uniformly from its root-to-terminal paths. Up to ``max_concurrent``
    executions are live at once and the next message always comes from a
    uniformly drawn live execution. Drops use their own random stream so a
    drop-injected corpus is the healthy one with messages deleted.
    """
    rng = random.Random(config.interleave_seed)
    drop_rng = random.Random(f"drop-{config.interleave_seed}")
    flow_paths = [f.paths() for f in config.flows]
    traces = []
    for _ in range(config.n_traces):
        order = [i for i, n in enumerate(config._counts) for _ in range(n)]
        rng.shuffle(order)
        pending = deque(_Execution(rng.choice(flow_paths[i])) for i in order)
        live: list[_Execution] = []
        events = []
        while live or pending:
            while pending and len(live) < config.max_concurrent:
                live.append(pending.popleft())
            k = rng.randrange(len(live))
            ex = live[k]
            m = ex.path[ex.pos]
            ex.pos += 1
            if ex.pos == len(ex.path):
                live.pop(k)
            if config.drop_rule is not None and m == config.drop_rule[0]:
                if drop_rng.random() < config.drop_rule[1]:
                    continue
            events.append(m)
        traces.append(Trace(tuple(events)))
    return TraceSet(tuple(traces)), ground_truth(config.flows)


def project_ground_truth_ar(traces: TraceSet, truth: FlowModel) -> float:
    from .acceptor import evaluate

    if len(traces) == 0:
        raise ValueError("trace set is empty")
    return evaluate(traces, truth).acceptance_ratio
