"""Declarative routing of emitted events to side-effect sinks.

Rule actions ("if warning, request occupancy detection"; "if occupied,
light the lamp") live here rather than in the rule language: the engine
stays pure pattern matching and each emitted event name maps to an
ordered list of sinks. Delivery is at-most-once; a failed sink records
a diagnostic and the stream continues.
"""

from __future__ import annotations

import socket
import urllib.request
from dataclasses import dataclass

from .wire import WireError

SINK_KINDS = ("forward", "log", "led", "alarm", "activate")


@dataclass(frozen=True, slots=True)
class Sink:
    kind: str
    target: str              # "host:port" | path | name | url | model_id

    def __str__(self) -> str:
        return f"{self.kind}:{self.target}"


def parse_sink(spec: str) -> Sink:
    if ":" not in spec:
        raise WireError("parse", f"bad sink spec {spec!r}")
    kind, target = spec.split(":", 1)
    if kind not in SINK_KINDS:
        raise WireError("parse", f"unknown sink kind {kind!r}")
    if not target:
        raise WireError("parse", f"sink {kind!r} needs a target")
    if kind == "forward":
        host, _, port = target.rpartition(":")
        if not host or not port.isdigit():
            raise WireError("parse",
                            f"forward needs host:port, got {target!r}")
    return Sink(kind, target)


class RouteTable:
    """event name -> ordered sink list (registration order)."""

    def __init__(self):
        self._routes: dict[str, list[Sink]] = {}

    def add(self, event_name: str, sink: Sink):
        self._routes.setdefault(event_name, []).append(sink)

    def remove(self, event_name: str) -> bool:
        return self._routes.pop(event_name, None) is not None

    def sinks_for(self, event_name: str) -> list[Sink]:
        return self._routes.get(event_name, [])

    def activate_targets(self) -> set[str]:
        """Model ids that appear in any activate sink; such models are
        gated and only run after a recent activation."""
        return {s.target for sinks in self._routes.values()
                for s in sinks if s.kind == "activate"}

    def items(self):
        return self._routes.items()


class TcpForwarder:
    """Fire-and-forget EVENT forwarding over cached TCP connections."""

    def __init__(self, timeout: float = 2.0):
        self.timeout = timeout
        self._conns: dict[tuple[str, int], socket.socket] = {}

    def __call__(self, host: str, port: int, line: str):
        key = (host, port)
        for attempt in (0, 1):          # one reconnect on a stale socket
            sock = self._conns.get(key)
            try:
                if sock is None:
                    sock = socket.create_connection(key,
                                                    timeout=self.timeout)
                    self._conns[key] = sock
                sock.sendall(line.encode("utf-8") + b"\n")
                return
            except OSError:
                self._conns.pop(key, None)
                if sock is not None:
                    try:
                        sock.close()
                    except OSError:
                        pass
                if attempt:
                    raise

    def close(self):
        for sock in self._conns.values():
            try:
                sock.close()
            except OSError:
                pass
        self._conns.clear()


def http_alarm(url: str, payload: str, timeout: float = 2.0):
    req = urllib.request.Request(
        url, data=payload.encode("utf-8"),
        headers={"Content-Type": "text/plain"})
    with urllib.request.urlopen(req, timeout=timeout):
        pass
