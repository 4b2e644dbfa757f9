"""Line-oriented control protocol.

One UTF-8 line per message, at most 8192 bytes. Commands::

    RULE <id> <rule-text>        UNRULE <id>
    EVENT <event-literal>        TIME <ms>
    SUB <event-name|*>           UNSUB <event-name|*>
    ROUTE <event-name> <sink>    UNROUTE <event-name>
    MODEL INFER <model-id> <comma-separated floats>
    PING

Responses: ``OK [detail]``, ``ERR <code> <message>``, ``EMIT <event
literal>``, ``PONG``. Sink specs: ``forward:<host>:<port>``,
``log:<path>``, ``led:<name>``, ``alarm:<url>``, ``activate:<model-id>``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .events import is_identifier

MAX_LINE_BYTES = 8192

VERBS = ("RULE", "UNRULE", "EVENT", "SUB", "UNSUB", "ROUTE", "UNROUTE",
         "TIME", "MODEL", "PING")


class WireError(Exception):
    """Protocol-level rejection with an ERR code."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


@dataclass(frozen=True, slots=True)
class Command:
    verb: str
    arg: str = ""          # id / event name / ms text
    rest: str = ""         # rule text / sink spec / csv floats


def parse_command(line: str) -> Command:
    """Split one command line; detailed payload parsing happens at the
    node (it owns the engine and model pool)."""
    line = line.strip()
    if not line:
        raise WireError("parse", "empty command")
    parts = line.split(None, 1)
    verb = parts[0].upper()
    tail = parts[1].strip() if len(parts) > 1 else ""
    if verb not in VERBS:
        raise WireError("bad-verb", f"unknown verb {parts[0]!r}")
    if verb == "PING":
        if tail:
            raise WireError("parse", "PING takes no arguments")
        return Command("PING")
    if verb in ("EVENT",):
        if not tail:
            raise WireError("parse", "EVENT needs an event literal")
        return Command(verb, rest=tail)
    if verb == "TIME":
        if not tail:
            raise WireError("parse", "TIME needs a millisecond timestamp")
        if not tail.isdigit():
            raise WireError("parse", f"bad timestamp {tail!r}")
        return Command(verb, arg=tail)
    if verb == "MODEL":
        sub = tail.split(None, 2)
        if len(sub) < 2 or sub[0].upper() != "INFER":
            raise WireError("parse", "expected MODEL INFER <id> <floats>")
        model_id = sub[1]
        csv = sub[2].strip() if len(sub) > 2 else ""
        if not csv:
            raise WireError("parse", "MODEL INFER needs input values")
        return Command(verb, arg=model_id, rest=csv)
    if verb in ("UNRULE", "UNROUTE"):
        if not tail or len(tail.split()) != 1:
            raise WireError("parse", f"{verb} takes exactly one name")
        return Command(verb, arg=tail)
    if verb in ("SUB", "UNSUB"):
        if not tail or len(tail.split()) != 1:
            raise WireError("parse", f"{verb} takes one event name or *")
        if tail != "*" and not is_identifier(tail):
            raise WireError("parse", f"bad event name {tail!r}")
        return Command(verb, arg=tail)
    if verb == "RULE":
        sub = tail.split(None, 1)
        if len(sub) < 2:
            raise WireError("parse", "expected RULE <id> <rule-text>")
        return Command(verb, arg=sub[0], rest=sub[1])
    # ROUTE
    sub = tail.split(None, 1)
    if len(sub) < 2:
        raise WireError("parse", "expected ROUTE <event-name> <sink-spec>")
    if not is_identifier(sub[0]):
        raise WireError("parse", f"bad event name {sub[0]!r}")
    return Command(verb, arg=sub[0], rest=sub[1].strip())


def ok(detail: str = "") -> str:
    return f"OK {detail}".rstrip()


def err(code: str, message: str) -> str:
    message = " ".join(str(message).split()) or "error"
    return f"ERR {code} {message}"


def emit(literal: str) -> str:
    return f"EMIT {literal}"
