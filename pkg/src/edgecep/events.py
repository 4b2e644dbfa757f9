"""Event values, interval timestamps, and the textual event notation.

An event is a named record spanning an integer-millisecond interval and
carrying an ordered list of arguments. Arguments are either numbers
(double precision) or symbols (bare identifiers); the two never overlap
textually because a symbol must start with a letter or underscore.

The one-line literal form is::

    temperature_event[2000, 2200](24, Celsius)

``parse_event`` and ``format_event`` round-trip every valid event.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .errors import EmptyInputError, ParseError, TimeOrderError

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"-?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_INT_RE = re.compile(r"\d+")

# A value is a float (Number) or a str (Symbol). Symbols always match
# IDENT_RE, so the two kinds are disjoint in text form.
Value = float | str


def is_identifier(text: str) -> bool:
    return bool(IDENT_RE.fullmatch(text))


def render_number(v: float) -> str:
    """Canonical text for a number: integers without a decimal point,
    everything else in shortest round-trip form."""
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def render_value(v: Value) -> str:
    if isinstance(v, str):
        return v
    return render_number(float(v))


@dataclass(frozen=True, slots=True)
class Event:
    """A named, interval-timestamped record.

    ``seq_id`` is assigned by an engine at ingestion time and is
    excluded from equality so that parse/format round-trips compare
    clean.
    """

    name: str
    start_ms: int
    end_ms: int
    args: tuple[Value, ...] = ()
    seq_id: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if not is_identifier(self.name):
            raise ParseError(f"invalid event name {self.name!r}")
        if self.start_ms < 0 or self.end_ms < 0:
            raise ParseError("timestamps must be non-negative")
        if self.start_ms > self.end_ms:
            raise TimeOrderError(
                f"start {self.start_ms} > end {self.end_ms}"
            )
        for a in self.args:
            if isinstance(a, str):
                if not is_identifier(a):
                    raise ParseError(f"invalid symbol {a!r}")
            elif not math.isfinite(a):
                raise ParseError("event numbers must be finite")

    @property
    def interval(self) -> tuple[int, int]:
        return (self.start_ms, self.end_ms)


def unchecked_event(name: str, start_ms: int, end_ms: int,
                    args: tuple, seq_id: int | None = None) -> Event:
    """Engine-internal constructor that skips revalidation. Callers
    guarantee the fields already satisfy the Event invariants (they
    come from validated events and parsed rule heads)."""
    e = object.__new__(Event)
    object.__setattr__(e, "name", name)
    object.__setattr__(e, "start_ms", start_ms)
    object.__setattr__(e, "end_ms", end_ms)
    object.__setattr__(e, "args", args)
    object.__setattr__(e, "seq_id", seq_id)
    return e


class _Scanner:
    """Offset-tracking cursor over one event literal."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def skip_ws(self):
        # interior newlines are rejected before scanning starts, so
        # consuming them here only affects the line's tail
        while self.pos < len(self.text) and \
                self.text[self.pos] in " \t\r\n":
            self.pos += 1

    def expect(self, ch: str):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            raise ParseError(
                f"expected {ch!r}", offset=self.pos, expected={ch}
            )
        self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, regex: re.Pattern, what: str) -> str:
        self.skip_ws()
        m = regex.match(self.text, self.pos)
        if not m:
            raise ParseError(
                f"expected {what}", offset=self.pos, expected={what}
            )
        self.pos = m.end()
        return m.group(0)


def parse_event(text: str) -> Event:
    """Parse a one-line event literal.

    Raises ParseError (with byte offset) on malformed input and
    TimeOrderError when start > end.
    """
    if "\n" in text.strip():
        raise ParseError("event literal must be a single line",
                         offset=text.index("\n"))
    sc = _Scanner(text)
    name = sc.take(IDENT_RE, "event name")
    sc.expect("[")
    start = int(sc.take(_INT_RE, "start timestamp"))
    sc.expect(",")
    end = int(sc.take(_INT_RE, "end timestamp"))
    sc.expect("]")
    sc.expect("(")
    args: list[Value] = []
    if sc.peek() != ")":
        while True:
            args.append(_parse_value(sc))
            if sc.peek() == ",":
                sc.expect(",")
            else:
                break
    sc.expect(")")
    sc.skip_ws()
    if sc.pos != len(text):
        raise ParseError("trailing input after event", offset=sc.pos)
    if start > end:
        raise TimeOrderError(f"start {start} > end {end}")
    return Event(name, start, end, tuple(args))


def _parse_value(sc: _Scanner) -> Value:
    ch = sc.peek()
    if ch.isdigit() or ch in "-.":
        return float(sc.take(_NUMBER_RE, "number"))
    return sc.take(IDENT_RE, "symbol")


def format_event(e: Event) -> str:
    """Canonical literal: ``name[start, end](a1, a2, ...)``."""
    args = ", ".join(render_value(a) for a in e.args)
    return f"{e.name}[{e.start_ms}, {e.end_ms}]({args})"


def hull(events) -> tuple[int, int]:
    """Smallest interval covering every event: (min start, max end).

    Derived events inherit their interval from this hull.
    """
    events = list(events)
    if not events:
        raise EmptyInputError("hull of zero events")
    return (min(e.start_ms for e in events), max(e.end_ms for e in events))
