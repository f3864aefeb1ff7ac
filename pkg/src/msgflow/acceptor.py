"""Prefix-tree acceptors for flow models and acceptance-ratio evaluation."""

from __future__ import annotations

import heapq
import warnings
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .essential import strip_emfs
from .model import TraceSet

Transition = tuple[int, int]  # (state, message id)

DEFAULT_INSTANCE_CAP = 10_000


@dataclass(frozen=True, eq=False)
class FlowAcceptor:
    states: frozenset[int]
    q0: int
    alphabet: frozenset[int]
    accepting: frozenset[int]
    transitions: dict[Transition, int]
    depth: dict[int, int]

    def __post_init__(self):
        sources = defaultdict(list)
        outdeg = Counter()
        for (q, m) in self.transitions:
            sources[m].append(q)
            outdeg[q] += 1
        object.__setattr__(self, "_sources", {m: tuple(sorted(qs)) for m, qs in sources.items()})
        object.__setattr__(self, "_leaves", frozenset(q for q in self.states if not outdeg[q]))

    def sources(self, m: int) -> tuple[int, ...]:
        """States with an outgoing transition on ``m``."""
        return self._sources.get(m, ())

    def is_leaf(self, q: int) -> bool:
        return q in self._leaves

    def step(self, q: int, m: int):
        return self.transitions.get((q, m))

    def path_transitions(self, sequence: Sequence[int]) -> list[Transition]:
        q, out = self.q0, []
        for m in sequence:
            nxt = self.transitions.get((q, m))
            if nxt is None:
                raise KeyError(f"sequence {tuple(sequence)} leaves the acceptor at {m}")
            out.append((q, m))
            q = nxt
        return out

    def accepts(self, sequence: Sequence[int]) -> bool:
        q = self.q0
        for m in sequence:
            q = self.transitions.get((q, m))
            if q is None:
                return False
        return q in self.accepting


def compile_acceptor(sequences: Iterable) -> FlowAcceptor:
    """Merge sequences into a trie; each sequence end is accepting."""
    transitions: dict[Transition, int] = {}
    depth = {0: 0}
    accepting = set()
    alphabet = set()
    for item in sequences:
        seq = getattr(item, "sequence", item)
        q = 0
        for m in seq:
            alphabet.add(m)
            nxt = transitions.get((q, m))
            if nxt is None:
                nxt = len(depth)
                transitions[(q, m)] = nxt
                depth[nxt] = depth[q] + 1
            q = nxt
        if q != 0:
            accepting.add(q)
    return FlowAcceptor(
        states=frozenset(depth),
        q0=0,
        alphabet=frozenset(alphabet),
        accepting=frozenset(accepting),
        transitions=transitions,
        depth=depth,
    )


@dataclass
class TraceOutcome:
    length: int
    accepted: int
    removed: int
    unaccepted: Counter
    fired: set
    completed: Counter
    overflow: bool = False

    @property
    def ratio(self) -> float:
        return self.accepted / self.length if self.length else 1.0


@dataclass
class EvaluationResult:
    acceptance_ratio: float
    unaccepted_counts: dict[int, int]
    unused_edges: frozenset[Transition]
    per_trace_ratios: list[float]
    completed_lengths: dict[int, int] = field(default_factory=dict)
    accepted: int = 0
    total: int = 0

    def top_unaccepted(self) -> list[int]:
        """Message ids ordered by descending unaccepted count, then id."""
        return [m for m, _ in sorted(self.unaccepted_counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def run_trace(
    acceptor: FlowAcceptor,
    events: Sequence[int],
    initial: frozenset[int],
    emf_blocks: Sequence[Sequence[int]] = (),
    instance_cap: int = DEFAULT_INSTANCE_CAP,
) -> TraceOutcome:
    """Replay one trace through live acceptor instances.

    Initial messages spawn a new instance. Any other message goes to the
    oldest live instance able to take it. Instances retire at leaf states.
    """
    length = len(events)
    fired: set[Transition] = set()
    completed: Counter = Counter()
    removed = 0
    if emf_blocks:
        events, blocks = strip_emfs(events, emf_blocks)
        for block in blocks:
            removed += len(block)
            completed[len(block)] += 1
            try:
                fired.update(acceptor.path_transitions(block))
            except KeyError:
                pass
    accepted = removed
    unaccepted: Counter = Counter()
    # state -> heap of birth indices of the instances sitting there
    waiting: dict[int, list[int]] = defaultdict(list)
    live = 0
    births = 0
    overflow = False
    q0 = acceptor.q0
    for m in events:
        if overflow:
            unaccepted[m] += 1
            continue
        if m in initial:
            q1 = acceptor.transitions.get((q0, m))
            if q1 is None:
                unaccepted[m] += 1
                continue
            leaf = acceptor.is_leaf(q1)
            if not leaf and live >= instance_cap:
                warnings.warn(
                    f"more than {instance_cap} live flow instances; "
                    "remaining messages of this trace count as unaccepted",
                    RuntimeWarning,
                    stacklevel=2,
                )
                overflow = True
                unaccepted[m] += 1
                continue
            fired.add((q0, m))
            accepted += 1
            if q1 in acceptor.accepting:
                completed[acceptor.depth[q1]] += 1
            if not leaf:
                heapq.heappush(waiting[q1], births)
                births += 1
                live += 1
            continue
        best_birth = best_q = None
        for q in acceptor.sources(m):
            heap = waiting.get(q)
            if heap and (best_birth is None or heap[0] < best_birth):
                best_birth, best_q = heap[0], q
        if best_q is None:
            unaccepted[m] += 1
            continue
        heapq.heappop(waiting[best_q])
        nxt = acceptor.transitions[(best_q, m)]
        fired.add((best_q, m))
        accepted += 1
        if nxt in acceptor.accepting:
            completed[acceptor.depth[nxt]] += 1
        if acceptor.is_leaf(nxt):
            live -= 1
        else:
            heapq.heappush(waiting[nxt], best_birth)
    return TraceOutcome(length, accepted, removed, unaccepted, fired, completed, overflow)


def _run_packed(args):
    return run_trace(*args)


def evaluate(
    traces: TraceSet,
    model,
    emf: Iterable | None = None,
    *,
    initial: Iterable[int] | None = None,
    jobs: int = 1,
    instance_cap: int = DEFAULT_INSTANCE_CAP,
    acceptor: FlowAcceptor | None = None,
    executor=None,
) -> EvaluationResult:
    """Acceptance ratio of ``model`` over ``traces``.

    ``model`` may be a FlowModel or any iterable of sequences. When ``emf``
    is given, contiguous occurrences of those flows are cut from each trace
    first and counted as accepted. ``initial`` defaults to the first
    message of every model path. ``executor`` reuses an existing process
    pool instead of starting one per call when ``jobs > 1``.
    """
    if len(traces) == 0:
        raise ValueError("cannot evaluate against an empty trace set")
    sequences = [tuple(getattr(p, "sequence", p)) for p in getattr(model, "paths", model)]
    if acceptor is None:
        acceptor = compile_acceptor(sequences)
    if initial is None:
        initial = {s[0] for s in sequences if s}
    initial = frozenset(initial)
    blocks = [tuple(getattr(f, "sequence", f)) for f in emf] if emf else []

    work = [(acceptor, t.events, initial, blocks, instance_cap) for t in traces]
    if executor is not None and len(work) > 1:
        outcomes = list(executor.map(_run_packed, work))
    elif jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_packed, work))
    else:
        outcomes = [run_trace(*w) for w in work]

    unaccepted: Counter = Counter()
    fired: set = set()
    completed: Counter = Counter()
    for out in outcomes:
        unaccepted.update(out.unaccepted)
        fired |= out.fired
        completed.update(out.completed)
    ratios = [o.ratio for o in outcomes]
    return EvaluationResult(
        acceptance_ratio=sum(ratios) / len(ratios),
        unaccepted_counts=dict(sorted(unaccepted.items())),
        unused_edges=frozenset(acceptor.transitions) - fired,
        per_trace_ratios=ratios,
        completed_lengths=dict(sorted(completed.items())),
        accepted=sum(o.accepted for o in outcomes),
        total=sum(o.length for o in outcomes),
    )
