"""Model selection, path scoring, refinement and the end-to-end miner."""

from __future__ import annotations

import contextlib
import heapq
import logging
import time
import warnings
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

from .acceptor import EvaluationResult, compile_acceptor, evaluate
from .causality import (
    ZERO,
    CausalityGraph,
    PrunedGraph,
    aggregate_statistics,
    construct_causality_graph,
    prune,
)
from .errors import EmptyModelError
from .essential import (
    MESSAGE,
    EssentialSet,
    essential_flows,
    extract_essential,
    is_essential_flow,
)
from .model import MessageDictionary, TraceSet

log = logging.getLogger(__name__)

DEFAULT_ACCURACY = 0.9
DEFAULT_THETA = 0.45
DEFAULT_MAX_LEN = 10
DEFAULT_MAX_PATHS = 100_000
DEFAULT_W_ESSENTIAL = 1.0

# base-model ranking strategies
COVERAGE_FIRST = "coverage"
LENGTH_FIRST = "length"


@dataclass(frozen=True)
class Path:
    sequence: tuple[int, ...]
    forward_score: float = 0.0
    backward_score: float = 0.0
    essential_count: int = 0
    score: float = 0.0

    def __len__(self):
        return len(self.sequence)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return list(zip(self.sequence, self.sequence[1:]))


@dataclass(frozen=True)
class FlowModel:
    paths: tuple[Path, ...] = ()

    def __post_init__(self):
        seen, unique = set(), []
        for p in self.paths:
            if not isinstance(p, Path):
                p = Path(tuple(p))
            if p.sequence not in seen:
                seen.add(p.sequence)
                unique.append(p)
        object.__setattr__(self, "paths", tuple(unique))

    @property
    def size(self) -> int:
        return len(self.paths)

    def __len__(self):
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def __contains__(self, sequence) -> bool:
        seq = tuple(getattr(sequence, "sequence", sequence))
        return any(p.sequence == seq for p in self.paths)

    def sequences(self) -> list[tuple[int, ...]]:
        return [p.sequence for p in self.paths]


def path_score(
    sequence: Sequence[int],
    graph: CausalityGraph,
    essential: EssentialSet | None = None,
    w_essential: float = DEFAULT_W_ESSENTIAL,
) -> float:
    return score_path(sequence, graph, essential, w_essential).score


def score_path(
    sequence: Sequence[int],
    graph: CausalityGraph,
    essential: EssentialSet | None = None,
    w_essential: float = DEFAULT_W_ESSENTIAL,
) -> Path:
    """Mean edge confidences summed and divided by the number of messages,
    plus ``w_essential`` times the share of essential edges."""
    seq = tuple(sequence)
    edges = list(zip(seq, seq[1:]))
    if not edges:
        return Path(seq)
    fwd = sum(graph.forward_conf.get(e, 0.0) for e in edges) / len(edges)
    bwd = sum(graph.backward_conf.get(e, 0.0) for e in edges) / len(edges)
    n_ess = sum(1 for e in edges if essential is not None and e in essential.pairs)
    score = (fwd + bwd) / len(seq) + w_essential * n_ess / len(edges)
    return Path(seq, fwd, bwd, n_ess, score)


def _count_paths(graph: CausalityGraph, max_len: int) -> int:
    @lru_cache(maxsize=None)
    def count(node, budget):
        if node in graph.terminals:
            return 1
        if budget <= 1:
            return 0
        return sum(count(t, budget - 1) for t in graph.successors(node))

    return sum(count(r, max_len) for r in graph.roots)


def _all_paths(graph: CausalityGraph, root: int, max_len: int) -> list[tuple[int, ...]]:
    out = []
    path = [root]

    def walk():
        last = path[-1]
        if last in graph.terminals:
            out.append(tuple(path))
            return
        if len(path) >= max_len:
            return
        for t in graph.successors(last):
            path.append(t)
            walk()
            path.pop()

    walk()
    return out


def _best_paths(graph: CausalityGraph, root: int, max_len: int, budget: int) -> list[tuple[int, ...]]:
    # best-first on the mean combined confidence of the partial path
    out = []
    heap = [(-1.0, (root,), 0.0)]
    while heap and len(out) < budget:
        _, seq, total = heapq.heappop(heap)
        last = seq[-1]
        if last in graph.terminals:
            out.append(seq)
            continue
        if len(seq) >= max_len:
            continue
        for t in graph.successors(last):
            acc = total + graph.combined_conf((last, t))
            heapq.heappush(heap, (-acc / len(seq), seq + (t,), acc))
    return sorted(out)


def enumerate_paths(
    graph: CausalityGraph,
    max_len: int = DEFAULT_MAX_LEN,
    max_paths: int = DEFAULT_MAX_PATHS,
    essential: EssentialSet | None = None,
    w_essential: float = DEFAULT_W_ESSENTIAL,
) -> list[Path]:
    """All root-to-terminal paths with at most ``max_len`` messages.

    Ordered by root id, then lexicographically. When there are more than
    ``max_paths`` of them, each root keeps only its best-scoring share and a
    warning is issued.
    """
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    roots = sorted(graph.roots)
    total = _count_paths(graph, max_len)
    if total == 0:
        raise EmptyModelError("the graph has no root-to-terminal path")
    sequences = []
    if total <= max_paths:
        for r in roots:
            sequences.extend(_all_paths(graph, r, max_len))
    else:
        warnings.warn(
            f"{total} candidate paths exceed max_paths={max_paths}; keeping the best per root",
            RuntimeWarning,
            stacklevel=2,
        )
        share, extra = divmod(max_paths, len(roots))
        for i, r in enumerate(roots):
            sequences.extend(_best_paths(graph, r, max_len, share + (1 if i < extra else 0)))
    return [score_path(s, graph, essential, w_essential) for s in sequences]


def select_base_model(
    graph: PrunedGraph,
    essential: EssentialSet | None = None,
    max_len: int = DEFAULT_MAX_LEN,
    *,
    candidates: Sequence[Path] | None = None,
    strategy: str = COVERAGE_FIRST,
    max_paths: int = DEFAULT_MAX_PATHS,
) -> FlowModel:
    """Greedy cover of the pruned graph, one path per root per round.

    Each root picks, among its paths holding at least one uncovered message,
    the best by (uncovered count, length, essential edges) -- or (length,
    uncovered count, essential edges) with ``strategy="length"`` -- with the
    lexicographically smallest sequence winning ties.
    """
    if strategy not in (COVERAGE_FIRST, LENGTH_FIRST):
        raise ValueError(f"unknown strategy {strategy!r}")
    if not graph.nodes:
        raise EmptyModelError("cannot select a model from an empty graph")
    if candidates is None:
        candidates = enumerate_paths(graph, max_len, max_paths, essential)
    essential = essential or EssentialSet(frozenset())

    by_root: dict[int, list[Path]] = defaultdict(list)
    for p in sorted(candidates, key=lambda p: p.sequence):
        if len(p.sequence) <= max_len:
            by_root[p.sequence[0]].append(p)
    n_ess = {p.sequence: essential.count_in(p.sequence) for ps in by_root.values() for p in ps}

    uncovered = set(graph.nodes)
    chosen: list[Path] = []
    taken: set[tuple[int, ...]] = set()
    progress = True
    while uncovered and progress:
        progress = False
        for root in sorted(by_root):
            best_key, best = None, None
            for p in by_root[root]:
                if p.sequence in taken:
                    continue
                cov = len(uncovered.intersection(p.sequence))
                if not cov:
                    continue
                if strategy == COVERAGE_FIRST:
                    key = (cov, len(p.sequence), n_ess[p.sequence])
                else:
                    key = (len(p.sequence), cov, n_ess[p.sequence])
                if best_key is None or key > best_key:
                    best_key, best = key, p
            if best is not None:
                chosen.append(best)
                taken.add(best.sequence)
                uncovered.difference_update(best.sequence)
                progress = True
    if uncovered:
        warnings.warn(
            f"coverage incomplete: messages {sorted(uncovered)} lie on no selectable path",
            RuntimeWarning,
            stacklevel=2,
        )
    return FlowModel(tuple(chosen))


@dataclass
class Refinement:
    model: FlowModel
    evaluation: EvaluationResult
    iterations: int
    reached: bool
    candidate_count: int
    history: list[float] = field(default_factory=list)


class _Evaluator:
    """Evaluates a model against fixed traces, initial set and EMF policy."""

    def __init__(self, traces, initial, emf_blocks_for, jobs, executor=None):
        self.traces = traces
        self.initial = frozenset(initial)
        self.emf_blocks_for = emf_blocks_for
        self.jobs = jobs
        self.executor = executor

    def __call__(self, model: FlowModel) -> EvaluationResult:
        acceptor = compile_acceptor(model.sequences())
        emf = self.emf_blocks_for(model) if self.emf_blocks_for else None
        return evaluate(
            self.traces,
            model,
            emf,
            initial=self.initial,
            jobs=self.jobs,
            acceptor=acceptor,
            executor=self.executor,
        )


def _paths_with_unused(model: FlowModel, unused) -> set[tuple[int, ...]]:
    if not unused:
        return set()
    acceptor = compile_acceptor(model.sequences())
    return {
        p.sequence for p in model.paths if any(t in unused for t in acceptor.path_transitions(p.sequence))
    }


def refine(
    model: FlowModel,
    traces: TraceSet,
    graph: PrunedGraph,
    essential: EssentialSet | None,
    accuracy: float = DEFAULT_ACCURACY,
    max_len: int = DEFAULT_MAX_LEN,
    *,
    candidates: Sequence[Path] | None = None,
    initial: Iterable[int] | None = None,
    emf_blocks_for=None,
    w_essential: float = DEFAULT_W_ESSENTIAL,
    max_paths: int = DEFAULT_MAX_PATHS,
    jobs: int = 1,
    first_evaluation: EvaluationResult | None = None,
    executor=None,
) -> Refinement:
    """Grow and trim ``model`` until its acceptance ratio reaches ``accuracy``.

    Every round drops model paths that use a transition left unfired by the
    last evaluation, then adds the best-scoring unused candidate containing
    the most frequently unaccepted message (falling back to the next most
    frequent one when no candidate contains it). Stops when the target is
    met or no candidate can be added, and returns the best model seen.
    """
    if not 0.0 < accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in (0, 1], got {accuracy}")
    if candidates is None:
        candidates = enumerate_paths(graph, max_len, max_paths, essential, w_essential)
    if initial is None:
        initial = graph.roots
    run = _Evaluator(traces, initial, emf_blocks_for, jobs, executor)
    pool = sorted(
        (p for p in candidates if len(p.sequence) <= max_len),
        key=lambda p: (-p.score, p.sequence),
    )
    candidate_count = len(pool)
    containing: dict[int, list[int]] = defaultdict(list)
    for idx, p in enumerate(pool):
        for m in set(p.sequence):
            containing[m].append(idx)
    used = [False] * len(pool)

    result = first_evaluation if first_evaluation is not None else run(model)
    best_model, best_result = model, result
    history = [result.acceptance_ratio]
    iterations = 0
    while result.acceptance_ratio < accuracy:
        drop = _paths_with_unused(model, result.unused_edges)
        kept = [p for p in model.paths if p.sequence not in drop]
        present = {p.sequence for p in kept}
        pick = None
        for m in result.top_unaccepted():
            for idx in containing.get(m, ()):
                if not used[idx] and pool[idx].sequence not in present:
                    pick = idx
                    break
            if pick is not None:
                break
        if pick is None:
            break
        used[pick] = True
        model = FlowModel(tuple(kept) + (pool[pick],))
        result = run(model)
        iterations += 1
        history.append(result.acceptance_ratio)
        log.debug("refine %d: +%s AR=%.4f", iterations, pool[pick].sequence, result.acceptance_ratio)
        if result.acceptance_ratio > best_result.acceptance_ratio:
            best_model, best_result = model, result
    return Refinement(
        model=best_model,
        evaluation=best_result,
        iterations=iterations,
        reached=best_result.acceptance_ratio >= accuracy,
        candidate_count=candidate_count,
        history=history,
    )


@dataclass
class MiningResult:
    model: FlowModel
    evaluation: EvaluationResult
    base_model: FlowModel
    base_evaluation: EvaluationResult
    graph: CausalityGraph
    pruned: PrunedGraph
    essential: EssentialSet
    candidates: list[Path]
    iterations: int
    reached: bool
    runtime_seconds: float = 0.0
    history: list[float] = field(default_factory=list)

    def __iter__(self):
        # allows ``model, evaluation = mine(...)``
        return iter((self.model, self.evaluation))


def mine(
    traces: TraceSet,
    dictionary: MessageDictionary,
    accuracy: float = DEFAULT_ACCURACY,
    theta: float = DEFAULT_THETA,
    max_len: int = DEFAULT_MAX_LEN,
    *,
    max_paths: int = DEFAULT_MAX_PATHS,
    w_essential: float = DEFAULT_W_ESSENTIAL,
    emf: bool = True,
    emf_scope: str = "model",
    jobs: int = 1,
    strategy: str = COVERAGE_FIRST,
    zero_support: str = ZERO,
    consume: str = MESSAGE,
) -> MiningResult:
    """Construct, prune, select, evaluate and (if needed) refine.

    With ``emf`` on, model paths made only of essential pairs are cut from
    the traces before each evaluation (``emf_scope="model"``); with
    ``emf_scope="trace"`` every essential initial-to-terminal chain is cut
    regardless of the model.
    """
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {accuracy}")
    if emf_scope not in ("model", "trace"):
        raise ValueError(f"emf_scope must be 'model' or 'trace', got {emf_scope!r}")
    if len(traces) == 0:
        raise EmptyModelError("no traces to mine")
    started = time.perf_counter()
    graph = construct_causality_graph(traces, dictionary)
    essential = extract_essential(traces, dictionary, consume=consume)
    graph = aggregate_statistics(traces, graph, zero_support=zero_support)
    pruned = prune(graph, theta, essential.pairs)
    candidates = enumerate_paths(pruned, max_len, max_paths, essential, w_essential)
    base = select_base_model(pruned, essential, max_len, candidates=candidates, strategy=strategy)

    emf_blocks_for = None
    if emf:
        if emf_scope == "model":
            def emf_blocks_for(model):
                return [p.sequence for p in model.paths if is_essential_flow(p.sequence, essential, dictionary)]
        else:
            chains = [f.sequence for f in essential_flows(essential, dictionary, max_len)]

            def emf_blocks_for(model):
                return chains

    with contextlib.ExitStack() as stack:
        executor = None
        if jobs > 1 and len(traces) > 1:
            executor = stack.enter_context(ProcessPoolExecutor(max_workers=jobs))
        run = _Evaluator(traces, dictionary.initial, emf_blocks_for, jobs, executor)
        base_eval = run(base)
        if accuracy <= 0.0 or base_eval.acceptance_ratio >= accuracy:
            model, evaluation, iterations, reached = base, base_eval, 0, True
            history = [base_eval.acceptance_ratio]
        else:
            ref = refine(
                base,
                traces,
                pruned,
                essential,
                accuracy,
                max_len,
                candidates=candidates,
                initial=dictionary.initial,
                emf_blocks_for=emf_blocks_for,
                w_essential=w_essential,
                jobs=jobs,
                first_evaluation=base_eval,
                executor=executor,
            )
            model, evaluation, iterations, reached = ref.model, ref.evaluation, ref.iterations, ref.reached
            history = ref.history
    return MiningResult(
        model=model,
        evaluation=evaluation,
        base_model=base,
        base_evaluation=base_eval,
        graph=graph,
        pruned=pruned,
        essential=essential,
        candidates=candidates,
        iterations=iterations,
        reached=reached,
        runtime_seconds=time.perf_counter() - started,
        history=history,
    )
