"""Model files, DOT renderings and run reports."""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ParseError
from .mining import FlowModel, MiningResult, Path
from .model import MessageDictionary


def _num(x: float) -> float:
    # fixed precision keeps exports stable across platforms
    return round(float(x), 6)


def model_to_dict(model: FlowModel, dictionary: MessageDictionary | None = None, acceptance_ratio=None) -> dict:
    paths = []
    for p in model.paths:
        entry = {"sequence": list(p.sequence)}
        if dictionary is not None:
            entry["messages"] = [":".join(dictionary.messages[m].quadruple) for m in p.sequence]
        entry.update(
            forward_score=_num(p.forward_score),
            backward_score=_num(p.backward_score),
            essential_count=p.essential_count,
            score=_num(p.score),
        )
        paths.append(entry)
    doc = {"size": model.size}
    if acceptance_ratio is not None:
        doc["acceptance_ratio"] = _num(acceptance_ratio)
    doc["paths"] = paths
    return doc


def dump_model(model: FlowModel, dictionary: MessageDictionary | None = None, acceptance_ratio=None) -> str:
    return yaml.safe_dump(
        model_to_dict(model, dictionary, acceptance_ratio), sort_keys=False, default_flow_style=None
    )


def load_model(text: str) -> tuple[FlowModel, float | None]:
    """Parse a model document; returns the model and its recorded AR, if any."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ParseError(f"malformed model file: {getattr(exc, 'problem', exc)}", line) from None
    if not isinstance(doc, dict) or not isinstance(doc.get("paths"), list):
        raise ParseError("model file must be a mapping with a 'paths' list")
    paths = []
    for i, entry in enumerate(doc["paths"]):
        seq = entry.get("sequence") if isinstance(entry, dict) else entry
        if not isinstance(seq, list) or not seq or not all(isinstance(m, int) for m in seq):
            raise ParseError(f"path {i}: 'sequence' must be a non-empty list of message ids")
        meta = entry if isinstance(entry, dict) else {}
        paths.append(
            Path(
                tuple(seq),
                float(meta.get("forward_score", 0.0)),
                float(meta.get("backward_score", 0.0)),
                int(meta.get("essential_count", 0)),
                float(meta.get("score", 0.0)),
            )
        )
    ar = doc.get("acceptance_ratio")
    return FlowModel(tuple(paths)), (float(ar) if ar is not None else None)


def read_model(path) -> tuple[FlowModel, float | None]:
    with open(path, encoding="utf-8") as fh:
        return load_model(fh.read())


def flows_to_dot(model: FlowModel, dictionary: MessageDictionary) -> dict[int, str]:
    """One digraph per initial message, merging the model paths it starts."""
    groups: dict[int, list[tuple[int, ...]]] = defaultdict(list)
    for seq in model.sequences():
        groups[seq[0]].append(seq)
    out = {}
    for root, seqs in sorted(groups.items()):
        nodes, edges = [], []
        for seq in seqs:
            for m in seq:
                if m not in nodes:
                    nodes.append(m)
            for e in zip(seq, seq[1:]):
                if e not in edges:
                    edges.append(e)
        lines = [f"digraph flow_{root} {{", "  rankdir=TB;"]
        for m in nodes:
            shape = "doublecircle" if m in dictionary.terminal else "box" if m == root else "ellipse"
            lines.append(f'  m{m} [label="{m}: {dictionary.render(m)}", shape={shape}];')
        for h, t in edges:
            lines.append(f"  m{h} -> m{t};")
        lines.append("}")
        out[root] = "\n".join(lines) + "\n"
    return out


@dataclass
class RunReport:
    model_size: int
    acceptance_ratio: float
    runtime_seconds: float
    iterations: int
    histogram: dict[int, int] = field(default_factory=dict)
    base_size: int = 0
    base_acceptance_ratio: float = 0.0
    candidates: int = 0
    reached: bool = False
    accuracy: float = 0.0

    @classmethod
    def from_result(cls, result: MiningResult, accuracy: float) -> "RunReport":
        return cls(
            model_size=result.model.size,
            acceptance_ratio=result.evaluation.acceptance_ratio,
            runtime_seconds=result.runtime_seconds,
            iterations=result.iterations,
            histogram=dict(result.evaluation.completed_lengths),
            base_size=result.base_model.size,
            base_acceptance_ratio=result.base_evaluation.acceptance_ratio,
            candidates=len(result.candidates),
            reached=result.reached,
            accuracy=accuracy,
        )

    def to_text(self, timing: bool = True) -> str:
        lines = [
            f"model size:        {self.model_size}",
            f"acceptance ratio:  {self.acceptance_ratio:.4f}",
            f"target accuracy:   {self.accuracy:.4f} ({'reached' if self.reached else 'not reached'})",
            f"base model:        {self.base_size} paths, AR {self.base_acceptance_ratio:.4f}",
            f"candidates:        {self.candidates}",
            f"iterations:        {self.iterations}",
        ]
        if timing:
            lines.append(f"runtime:           {self.runtime_seconds:.3f} s")
        lines.append("completed instances by length:")
        for length, count in sorted(self.histogram.items()):
            lines.append(f"  {length:>3}  {count}")
        return "\n".join(lines) + "\n"

    def to_json(self, timing: bool = True) -> str:
        doc = asdict(self)
        doc["acceptance_ratio"] = _num(self.acceptance_ratio)
        doc["base_acceptance_ratio"] = _num(self.base_acceptance_ratio)
        doc["histogram"] = {str(k): v for k, v in sorted(self.histogram.items())}
        if timing:
            doc["runtime_seconds"] = round(self.runtime_seconds, 3)
        else:
            del doc["runtime_seconds"]
        return json.dumps(doc, indent=2) + "\n"


@dataclass
class ModelDiff:
    only_a: list[tuple[int, ...]]
    only_b: list[tuple[int, ...]]
    ar_a: float | None
    ar_b: float | None
    implicated: dict[int, int]

    @property
    def empty(self) -> bool:
        return not self.only_a and not self.only_b

    def to_text(self) -> str:
        def fmt(ar):
            return "n/a" if ar is None else f"{ar:.4f}"

        lines = [f"acceptance ratio: A {fmt(self.ar_a)}  B {fmt(self.ar_b)}"]
        lines.append(f"paths only in A ({len(self.only_a)}):")
        lines.extend("  " + " ".join(map(str, s)) for s in self.only_a)
        lines.append(f"paths only in B ({len(self.only_b)}):")
        lines.extend("  " + " ".join(map(str, s)) for s in self.only_b)
        if self.implicated:
            lines.append("messages in paths missing from B (id: paths):")
            lines.extend(f"  {m}: {n}" for m, n in self.implicated.items())
        return "\n".join(lines) + "\n"


def diff_models(a: FlowModel, b: FlowModel, ar_a=None, ar_b=None) -> ModelDiff:
    sa, sb = set(a.sequences()), set(b.sequences())
    only_a = sorted(sa - sb)
    only_b = sorted(sb - sa)
    counts: dict[int, int] = defaultdict(int)
    for seq in only_a:
        for m in set(seq):
            counts[m] += 1
    implicated = dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))
    return ModelDiff(only_a, only_b, ar_a, ar_b, implicated)

