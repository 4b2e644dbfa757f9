"""Throughput benchmarks.

Measures how many events per second the engine sustains for a given
operator kind and rule count. Rules and streams are constructed so
that every event fires every rule exactly once where the operator
allows it (negation fires at maturation; a Kleene terminator fires per
terminator), mirroring how engine throughput is normally measured: a
fixed 10000-event stream, wall-clock timed.

``compare_backends`` runs the same workload under the compiled and the
pure-Python kernels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

from . import _kernels
from .engine import Engine, EngineConfig
from .events import Event
from .rules.parser import parse_rule

BENCH_OPS = ("atom", "and", "seq", "or", "nseq", "kseq", "lambda")

_SPACING_MS = 600
_WINDOW = "[range 1 s]"


@dataclass(frozen=True)
class BenchResult:
    op: str
    rules: int
    events: int
    emissions: int
    elapsed_s: float
    events_per_s: float
    kernel: str

    def csv_row(self) -> str:
        return f"{self.op},{self.rules},{repr(self.events_per_s)}"


def _rules_for(op: str, n_rules: int) -> list[str]:
    bodies = {
        "atom": "sensor[_,_](X)",
        "and": f"a[_,_](X) and b[_,_](Y) {_WINDOW}",
        "seq": f"s[_,_](_) seq s[_,_](_) {_WINDOW}",
        "or": "a[_,_](X) or b[_,_](X)",
        "nseq": f"a[_,_](_) nseq b[_,_](_) {_WINDOW}",
        "kseq": f"a[_,_](_) kseq b[_,_](_) {_WINDOW}",
        "lambda": "lambda { sensor(X), *, Y := avg(X) } [count 5]",
    }
    heads = {
        "atom": "out{k}[_,_](X)",
        "and": "out{k}[_,_](X, Y)",
        "seq": "out{k}[_,_]()",
        "or": "out{k}[_,_](X)",
        "nseq": "out{k}[_,_]()",
        "kseq": "out{k}[_,_]()",
        "lambda": "out{k}[_,_](Y)",
    }
    if op not in bodies:
        raise ValueError(f"unknown bench op {op!r} "
                         f"(one of {', '.join(BENCH_OPS)})")
    return [f"{heads[op].format(k=k)} :- {bodies[op]}"
            for k in range(n_rules)]


def _stream_for(op: str, n_events: int) -> list[Event]:
    out = []
    for i in range(n_events):
        t = i * _SPACING_MS
        if op in ("atom", "lambda"):
            out.append(Event("sensor", t, t, (float(i % 50),)))
        elif op in ("and", "or", "kseq"):
            name = "a" if i % 2 == 0 else "b"
            out.append(Event(name, t, t, (float(i % 50),)))
        elif op == "seq":
            out.append(Event("s", t, t + 100, (float(i % 50),)))
        else:                            # nseq: anchors only
            out.append(Event("a", t, t, (float(i % 50),)))
    return out


def bench_throughput(op: str, n_rules: int, n_events: int = 10000,
                     csv_path: str | Path | None = None) -> BenchResult:
    """Time one (operator, rule count) configuration."""
    if n_rules < 1:
        raise ValueError("n_rules must be >= 1")
    engine = Engine(EngineConfig())
    for k, text in enumerate(_rules_for(op, n_rules)):
        engine.add_rule(f"bench{k}", parse_rule(text))
    stream = _stream_for(op, n_events)

    emissions = 0
    start = time.perf_counter()
    push = engine.push_event
    for event in stream:
        emissions += len(push(event))
    if op == "nseq" and n_events:
        emissions += len(engine.advance_time(
            stream[-1].end_ms + 2000))
    elapsed = time.perf_counter() - start

    events_per_s = (n_events / elapsed) if (n_events and elapsed > 0) \
        else 0.0
    result = BenchResult(op, n_rules, n_events, emissions, elapsed,
                         events_per_s, _kernels.ACTIVE)
    if csv_path is not None:
        write_csv_row(csv_path, result)
    return result


def write_csv_row(path: str | Path, result: BenchResult):
    path = Path(path)
    new = not path.exists()
    with open(path, "a", encoding="utf-8") as fh:
        if new:
            fh.write("op,rules,events_per_s\n")
        fh.write(result.csv_row() + "\n")


def sweep_rule_counts(op: str, counts=(1, 2, 3, 4, 5, 10, 15, 20),
                      n_events: int = 10000, repeats: int = 3,
                      csv_path=None) -> list[BenchResult]:
    """Throughput at each rule count; each point keeps the best of
    ``repeats`` runs to damp scheduler noise."""
    out = []
    for n in counts:
        best = None
        for _ in range(repeats):
            r = bench_throughput(op, n, n_events)
            if best is None or r.events_per_s > best.events_per_s:
                best = r
        out.append(best)
        if csv_path is not None:
            write_csv_row(csv_path, best)
    return out


def compare_backends(op: str, n_rules: int, n_events: int = 10000,
                     repeats: int = 3) -> dict[str, BenchResult]:
    """Same workload under every available kernel backend, alternating
    runs and keeping each backend's best to cancel warm-up effects."""
    results: dict[str, BenchResult] = {}
    original = _kernels.ACTIVE
    try:
        for _ in range(repeats):
            for name in _kernels.available_backends():
                _kernels.activate(name)
                r = bench_throughput(op, n_rules, n_events)
                if name not in results \
                        or r.events_per_s > results[name].events_per_s:
                    results[name] = r
    finally:
        _kernels.activate(original)
    return results
