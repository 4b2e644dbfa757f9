"""One engine node: sessions, command handling, and route dispatch.

All engine mutations funnel through ``handle_line`` under one lock, so
concurrent sessions see a single total order of commands. Responses to
the issuing session are returned; EMIT lines for other subscribed
sessions go through their ``send`` callbacks in emission order.

Model gating: a model becomes gated the moment any ``activate:<id>``
route exists for it; from then on MODEL INFER is refused unless the
activation event arrived within the gate window (default 10 s of
stream time). This is the cascade pattern: a cheap always-on detector
unlocks the expensive model.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .engine import Engine
from .errors import (
    DimensionMismatchError, DuplicateRuleIdError, EdgecepError,
    MissingWindowError, NotAutoencoderError, ParseError,
    TimeRegressionError, TimeOrderError, UnknownRuleIdError,
)
from .events import Event, format_event, parse_event, render_number
from .nn import ModelPool, anomaly_score, infer
from .routes import RouteTable, Sink, TcpForwarder, http_alarm, parse_sink
from .rules.parser import parse_rule
from .wire import (
    Command, MAX_LINE_BYTES, WireError, emit, err, ok, parse_command,
)

_ERROR_CODES = (
    (ParseError, "parse"),
    (TimeOrderError, "parse"),
    (DuplicateRuleIdError, "dup-rule"),
    (UnknownRuleIdError, "unknown-id"),
    (MissingWindowError, "missing-window"),
    (TimeRegressionError, "time-regression"),
    (DimensionMismatchError, "dim-mismatch"),
    (NotAutoencoderError, "not-autoencoder"),
)


def _error_code(exc: Exception) -> str:
    for cls, code in _ERROR_CODES:
        if isinstance(exc, cls):
            return code
    return "internal"


@dataclass(eq=False)
class Session:
    session_id: int
    send: callable                      # delivers one line to the peer
    subscriptions: set[str] = field(default_factory=set)
    all_events: bool = False

    def wants(self, event_name: str) -> bool:
        return self.all_events or event_name in self.subscriptions


class Node:
    def __init__(self, name: str = "node", engine: Engine | None = None,
                 pool: ModelPool | None = None, workdir: str | Path = ".",
                 gate_window_ms: int = 10000,
                 forward_send=None, alarm_send=None):
        self.name = name
        self.engine = engine or Engine()
        self.pool = pool or ModelPool()
        self.routes = RouteTable()
        self.workdir = Path(workdir)
        self.gate_window_ms = gate_window_ms
        self.sessions: dict[int, Session] = {}
        self.lock = threading.RLock()
        self.activations: dict[str, int] = {}      # model_id -> t_ms
        self.action_log: list[tuple[int, str, str]] = []  # (t, sink, text)
        self.diagnostics: list[str] = []
        self._ids = itertools.count(1)
        self._forwarder = TcpForwarder() if forward_send is None else None
        self._forward_send = forward_send or self._forwarder
        self._alarm_send = alarm_send or http_alarm
        # observers get every emission / routed action (the scenario
        # trace taps these)
        self.emission_observers: list = []
        self.action_observers: list = []

    # -- session lifecycle --

    def open_session(self, send=None) -> Session:
        with self.lock:
            session = Session(next(self._ids), send or (lambda line: None))
            self.sessions[session.session_id] = session
            return session

    def close_session(self, session: Session):
        with self.lock:
            self.sessions.pop(session.session_id, None)

    # -- command handling --

    def handle_line(self, session: Session, line: str | bytes) -> list[str]:
        """Process one command line; returns the response lines for the
        issuing session, EMITs included, in order."""
        with self.lock:
            if isinstance(line, bytes):
                if len(line) > MAX_LINE_BYTES:
                    return [err("too-long",
                                f"line exceeds {MAX_LINE_BYTES} bytes")]
                try:
                    line = line.decode("utf-8")
                except UnicodeDecodeError:
                    return [err("parse", "line is not valid UTF-8")]
            elif len(line.encode("utf-8", "replace")) > MAX_LINE_BYTES:
                return [err("too-long",
                            f"line exceeds {MAX_LINE_BYTES} bytes")]
            try:
                cmd = parse_command(line)
            except WireError as exc:
                return [err(exc.code, str(exc))]
            try:
                return self._execute(session, cmd)
            except WireError as exc:
                return [err(exc.code, str(exc))]
            except EdgecepError as exc:
                return [err(_error_code(exc), str(exc))]
            except RecursionError:
                return [err("parse", "input nests too deep")]

    def _execute(self, session: Session, cmd: Command) -> list[str]:
        verb = cmd.verb
        if verb == "PING":
            return ["PONG"]
        if verb == "RULE":
            ast = parse_rule(cmd.rest)
            self.engine.add_rule(cmd.arg, ast)
            return [ok(cmd.arg)]
        if verb == "UNRULE":
            self.engine.remove_rule(cmd.arg)
            return [ok(cmd.arg)]
        if verb == "EVENT":
            event = parse_event(cmd.rest)
            emissions = self.engine.push_event(event)
            return [ok()] + self._deliver(session, emissions)
        if verb == "TIME":
            emissions = self.engine.advance_time(int(cmd.arg))
            return [ok()] + self._deliver(session, emissions)
        if verb == "SUB":
            if cmd.arg == "*":
                session.all_events = True
            else:
                session.subscriptions.add(cmd.arg)
            return [ok(cmd.arg)]
        if verb == "UNSUB":
            if cmd.arg == "*":
                session.all_events = False
            else:
                session.subscriptions.discard(cmd.arg)
            return [ok(cmd.arg)]
        if verb == "ROUTE":
            sink = parse_sink(cmd.rest)
            self.routes.add(cmd.arg, sink)
            return [ok(f"{cmd.arg} -> {sink}")]
        if verb == "UNROUTE":
            if not self.routes.remove(cmd.arg):
                raise WireError("unknown-route",
                                f"no routes for {cmd.arg!r}")
            return [ok(cmd.arg)]
        # MODEL INFER
        return self._model_infer(session, cmd.arg, cmd.rest)

    def _model_infer(self, session: Session, model_id: str,
                     csv: str) -> list[str]:
        entry = self.pool.get(model_id)
        if entry is None:
            raise WireError("unknown-model", f"no model {model_id!r}")
        if model_id in self.routes.activate_targets():
            last = self.activations.get(model_id)
            now = self.engine.watermark_ms
            if last is None or now - last > self.gate_window_ms:
                raise WireError(
                    "model-gated",
                    f"model {model_id!r} needs an activation event within "
                    f"{self.gate_window_ms} ms")
        try:
            values = [float(v) for v in csv.split(",")]
        except ValueError:
            raise WireError("parse", f"bad float list {csv!r}") from None
        if entry.model.is_autoencoder:
            args = (anomaly_score(entry.model, values),)
        else:
            args = tuple(float(v) for v in infer(entry.model, values))
        t = self.engine.watermark_ms
        event = Event(f"{model_id}_score", t, t, args)
        emissions = self.engine.push_event(event)
        return ([ok(format_event(event))]
                + self._deliver(session, emissions))

    # -- emission fan-out and routing --

    def _deliver(self, issuer: Session | None,
                 emissions: list[Event]) -> list[str]:
        own = []
        for event in emissions:
            literal = format_event(event)
            line = emit(literal)
            for s in list(self.sessions.values()):
                if not s.wants(event.name):
                    continue
                if issuer is not None and s.session_id == issuer.session_id:
                    own.append(line)
                else:
                    try:
                        s.send(line)
                    except Exception:
                        self.diagnostics.append(
                            f"session {s.session_id}: send failed")
            for observer in self.emission_observers:
                observer(self, event)
            self._dispatch(event, literal)
        return own

    def _dispatch(self, event: Event, literal: str):
        for sink in self.routes.sinks_for(event.name):
            t = self.engine.watermark_ms
            try:
                if sink.kind == "forward":
                    host, _, port = sink.target.rpartition(":")
                    self._forward_send(host, int(port), f"EVENT {literal}")
                elif sink.kind == "log":
                    path = self.workdir / sink.target
                    path.parent.mkdir(parents=True, exist_ok=True)
                    with open(path, "a", encoding="utf-8") as fh:
                        fh.write(f"{t}\t{literal}\n")
                elif sink.kind == "led":
                    path = self.workdir / f"{sink.target}.led"
                    path.parent.mkdir(parents=True, exist_ok=True)
                    with open(path, "a", encoding="utf-8") as fh:
                        fh.write(f"ON\t{t}\t{literal}\n")
                elif sink.kind == "alarm":
                    self._alarm_send(sink.target, literal)
                else:                    # activate
                    self.activations[sink.target] = t
                self.action_log.append((t, str(sink), literal))
                for observer in self.action_observers:
                    observer(self, t, sink, literal)
            except Exception as exc:
                self.diagnostics.append(
                    f"sink {sink} unreachable for {literal}: {exc}")

    def close(self):
        if self._forwarder is not None:
            self._forwarder.close()
