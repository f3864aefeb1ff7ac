"""Messages, traces and the structural-causality predicate.

Message-definition files look like::

    1 (cpu0:cache:rd:req)
    2 (cache:cpu0:rd:resp)
    initial = {1}
    terminal = {2}

Trace files hold one trace per line as whitespace separated message ids.
``#`` starts a comment in both formats.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import (
    DuplicateMessageError,
    EmptyDictionaryError,
    ParseError,
    UndefinedMessageError,
)

TOKEN = re.compile(r"[A-Za-z0-9_]+")

_MESSAGE_LINE = re.compile(
    r"^(?P<id>\d+)\s*\(\s*(?P<src>[^:\s()]+):(?P<dest>[^:\s()]+):"
    r"(?P<cmd>[^:\s()]+):(?P<kind>[^:\s()]+)\s*\)$"
)
_DIRECTIVE_LINE = re.compile(
    r"^(?P<name>initial|terminal)(?:\s+messages)?\s*=\s*\{(?P<ids>[^}]*)\}$",
    re.IGNORECASE,
)


class Kind(enum.Enum):
    REQUEST = "req"
    RESPONSE = "resp"

    @classmethod
    def parse(cls, token: str) -> "Kind":
        token = token.lower()
        if token in ("req", "request"):
            return cls.REQUEST
        if token in ("resp", "response"):
            return cls.RESPONSE
        raise ValueError(f"unknown message type {token!r} (expected req or resp)")


@dataclass(frozen=True, order=True)
class Message:
    id: int
    src: str
    dest: str
    cmd: str
    kind: Kind = field(compare=False)

    def __post_init__(self):
        if self.id <= 0:
            raise ValueError(f"message id must be positive, got {self.id}")
        for name in ("src", "dest", "cmd"):
            value = getattr(self, name)
            if not TOKEN.fullmatch(value):
                raise ValueError(f"invalid {name} token {value!r}")

    @property
    def quadruple(self) -> tuple[str, str, str, str]:
        return (self.src, self.dest, self.cmd, self.kind.value)

    def render(self) -> str:
        return ":".join(self.quadruple)

    def __str__(self):
        return f"{self.id} ({self.render()})"


def causal(a: Message, b: Message) -> bool:
    """True when ``a`` is delivered to the component that emits ``b``."""
    return a.dest == b.src


@dataclass(frozen=True)
class MessageDictionary:
    messages: Mapping[int, Message]
    initial: frozenset[int] = frozenset()
    terminal: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "messages", dict(sorted(self.messages.items())))
        object.__setattr__(self, "initial", frozenset(self.initial))
        object.__setattr__(self, "terminal", frozenset(self.terminal))
        for key, msg in self.messages.items():
            if key != msg.id:
                raise ValueError(f"dictionary key {key} does not match message id {msg.id}")
        unknown = (self.initial | self.terminal) - self.messages.keys()
        if unknown:
            raise UndefinedMessageError(
                f"initial/terminal refer to undeclared ids {sorted(unknown)}"
            )
        both = self.initial & self.terminal
        if both:
            raise ValueError(f"messages {sorted(both)} are both initial and terminal")
        seen = {}
        for msg in self.messages.values():
            if msg.quadruple in seen:
                raise DuplicateMessageError(
                    f"messages {seen[msg.quadruple]} and {msg.id} share quadruple {msg.render()}"
                )
            seen[msg.quadruple] = msg.id

    def __getitem__(self, mid: int) -> Message:
        return self.messages[mid]

    def __contains__(self, mid) -> bool:
        return mid in self.messages

    def __iter__(self) -> Iterator[Message]:
        return iter(self.messages.values())

    def __len__(self) -> int:
        return len(self.messages)

    def ids(self) -> list[int]:
        return list(self.messages)

    def causal(self, a: int, b: int) -> bool:
        return causal(self.messages[a], self.messages[b])

    def render(self, mid: int) -> str:
        return self.messages[mid].render()

    def serialize(self) -> str:
        lines = [str(msg) for msg in self.messages.values()]
        lines.append("initial = {" + ",".join(map(str, sorted(self.initial))) + "}")
        lines.append("terminal = {" + ",".join(map(str, sorted(self.terminal))) + "}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Trace:
    events: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, index):
        return self.events[index]

    def serialize(self) -> str:
        return " ".join(map(str, self.events))


@dataclass(frozen=True)
class TraceSet:
    traces: tuple[Trace, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "traces", tuple(t if isinstance(t, Trace) else Trace(t) for t in self.traces)
        )

    def __len__(self):
        return len(self.traces)

    def __iter__(self):
        return iter(self.traces)

    def __getitem__(self, index):
        return self.traces[index]

    @property
    def total_messages(self) -> int:
        return sum(len(t) for t in self.traces)

    def unique_messages(self) -> set[int]:
        seen = set()
        for trace in self.traces:
            seen.update(trace.events)
        return seen

    def serialize(self) -> str:
        return "".join(t.serialize() + "\n" for t in self.traces)


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_id_list(raw: str, lineno: int) -> list[int]:
    ids = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if not part.isdigit():
            raise ParseError(f"bad message id {part!r} in directive", lineno)
        ids.append(int(part))
    return ids


def parse_message_definitions(text: str | Iterable[str]) -> MessageDictionary:
    lines = text.splitlines() if isinstance(text, str) else list(text)
    messages: dict[int, Message] = {}
    initial: list[int] = []
    terminal: list[int] = []
    directive_lines: dict[int, int] = {}

    for lineno, raw in enumerate(lines, start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _MESSAGE_LINE.match(line)
        if m:
            mid = int(m["id"])
            if mid in messages:
                raise DuplicateMessageError(f"message id {mid} declared twice", lineno)
            try:
                msg = Message(mid, m["src"], m["dest"], m["cmd"], Kind.parse(m["kind"]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            messages[mid] = msg
            continue
        d = _DIRECTIVE_LINE.match(line)
        if d:
            ids = _parse_id_list(d["ids"], lineno)
            for mid in ids:
                directive_lines.setdefault(mid, lineno)
            (initial if d["name"].lower() == "initial" else terminal).extend(ids)
            continue
        raise ParseError(f"cannot parse {line!r}", lineno)

    if not messages:
        raise EmptyDictionaryError("no messages declared")
    for mid in initial + terminal:
        if mid not in messages:
            raise UndefinedMessageError(
                f"message {mid} is listed as initial/terminal but never declared",
                directive_lines.get(mid),
            )
    try:
        return MessageDictionary(messages, frozenset(initial), frozenset(terminal))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def parse_traces(text: str | Iterable[str], dictionary: MessageDictionary) -> TraceSet:
    lines = text.splitlines() if isinstance(text, str) else list(text)
    traces = []
    for lineno, raw in enumerate(lines, start=1):
        body = raw.split("#", 1)[0]
        events = []
        for tok in re.finditer(r"\S+", body):
            column = tok.start() + 1
            if not tok.group().isdigit():
                raise ParseError(f"bad message id {tok.group()!r}", lineno, column)
            mid = int(tok.group())
            if mid not in dictionary:
                raise UndefinedMessageError(f"unknown message id {mid}", lineno, column)
            events.append(mid)
        if events:
            traces.append(Trace(tuple(events)))
    return TraceSet(tuple(traces))


def load_dictionary(path) -> MessageDictionary:
    with open(path, encoding="utf-8") as fh:
        return parse_message_definitions(fh.read())


def load_traces(paths, dictionary: MessageDictionary) -> TraceSet:
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    traces = []
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            traces.extend(parse_traces(fh.read(), dictionary).traces)
    return TraceSet(tuple(traces))
