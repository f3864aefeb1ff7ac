"""Essential causalities and essential message flow (EMF) removal.

An effect message whose structural causes, among the earlier messages of
the same trace that are still unclaimed, all carry one single message id
is explained by that id alone: the pair is essential.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import MessageDictionary, Trace, TraceSet

Edge = tuple[int, int]

# cause-consumption policies for extract_essential
MESSAGE = "message"
INSTANCE = "instance"


@dataclass(frozen=True)
class EssentialSet:
    pairs: frozenset[Edge]

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __iter__(self):
        return iter(sorted(self.pairs))

    def __len__(self):
        return len(self.pairs)

    def count_in(self, sequence: Sequence[int]) -> int:
        return sum(1 for e in zip(sequence, sequence[1:]) if e in self.pairs)

    def export(self) -> str:
        return "".join(f"{c} -> {e}\n" for c, e in sorted(self.pairs))

    @classmethod
    def parse(cls, text: str) -> "EssentialSet":
        pairs = set()
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            left, _, right = line.partition("->")
            pairs.add((int(left), int(right)))
        return cls(frozenset(pairs))


@dataclass(frozen=True)
class EssentialFlow:
    sequence: tuple[int, ...]

    def __len__(self):
        return len(self.sequence)


def _trace_essentials(events, causes, terminal, initial, consume):
    found = set()
    # unclaimed earlier positions, per message id
    pending: dict[int, list[int]] = defaultdict(list)
    for i, m in enumerate(events):
        if i > 0 and m not in initial:
            live = [v for v in causes.get(m, ()) if pending.get(v)]
            if len(live) == 1:
                v = live[0]
                found.add((v, m))
                if consume == MESSAGE:
                    pending[v].clear()
                else:
                    pending[v].pop()
        if m not in terminal:
            pending[m].append(i)
    return found


def extract_essential(
    traces: TraceSet, dictionary: MessageDictionary, consume: str = MESSAGE
) -> EssentialSet:
    """Union over traces of the unambiguous cause/effect pairs.

    Initial messages are never treated as effects and terminal messages
    never as causes. Once a pair is found its cause is claimed: with
    ``consume="message"`` every earlier unclaimed instance of the cause id
    is claimed, with ``consume="instance"`` only the nearest one.
    """
    if consume not in (MESSAGE, INSTANCE):
        raise ValueError(f"consume must be {MESSAGE!r} or {INSTANCE!r}")
    present = sorted(traces.unique_messages())
    causes = {
        m: tuple(v for v in present if v not in dictionary.terminal and dictionary.causal(v, m))
        for m in present
    }
    pairs: set[Edge] = set()
    for trace in traces:
        pairs |= _trace_essentials(
            trace.events, causes, dictionary.terminal, dictionary.initial, consume
        )
    return EssentialSet(frozenset(pairs))


def essential_flows(
    essential: EssentialSet, dictionary: MessageDictionary, max_len: int = 10
) -> list[EssentialFlow]:
    """Every initial-to-terminal chain made only of essential pairs."""
    succ = defaultdict(list)
    for c, e in sorted(essential.pairs):
        succ[c].append(e)
    flows = []

    def walk(path):
        last = path[-1]
        if last in dictionary.terminal:
            if len(path) >= 2:
                flows.append(EssentialFlow(tuple(path)))
            return
        if len(path) >= max_len:
            return
        for nxt in succ.get(last, ()):
            if nxt not in path:
                path.append(nxt)
                walk(path)
                path.pop()

    for root in sorted(dictionary.initial):
        walk([root])
    return flows


def is_essential_flow(sequence: Sequence[int], essential: EssentialSet, dictionary: MessageDictionary) -> bool:
    return (
        len(sequence) >= 2
        and sequence[0] in dictionary.initial
        and sequence[-1] in dictionary.terminal
        and all(e in essential.pairs for e in zip(sequence, sequence[1:]))
    )


def strip_emfs(events: Sequence[int], flows: Iterable) -> tuple[list[int], list[tuple[int, ...]]]:
    """Delete contiguous occurrences of ``flows`` until none is left.

    The longest flow is always cut first, at its leftmost occurrence.
    Returns the remaining events and the removed blocks in removal order.
    """
    table: dict[int, set[tuple[int, ...]]] = defaultdict(set)
    for f in flows:
        seq = tuple(f.sequence if isinstance(f, EssentialFlow) else f)
        if seq:
            table[len(seq)].add(seq)
    lengths = sorted(table, reverse=True)
    seq = list(events)
    removed: list[tuple[int, ...]] = []
    if not lengths:
        return seq, removed

    def cut(i, n):
        removed.append(tuple(seq[i:i + n]))
        del seq[i:i + n]

    def settle(j, floor):
        # a cut joins seq[j-1] and seq[j]; clear longer matches across the seam
        for n in lengths:
            if n <= floor:
                return j
            for i in range(max(0, j - n + 1), min(j - 1, len(seq) - n) + 1):
                if tuple(seq[i:i + n]) in table[n]:
                    cut(i, n)
                    return settle(i, floor)
        return j

    for n in lengths:
        i = 0
        while i + n <= len(seq):
            if tuple(seq[i:i + n]) in table[n]:
                cut(i, n)
                j = settle(i, n)
                i = max(0, j - n + 1)
                continue
            i += 1
    return seq, removed


def remove_emfs(trace: Trace | Sequence[int], flows: Iterable) -> tuple[Trace, int]:
    events = trace.events if isinstance(trace, Trace) else tuple(trace)
    rest, removed = strip_emfs(events, flows)
    return Trace(tuple(rest)), sum(len(b) for b in removed)
