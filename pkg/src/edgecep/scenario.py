"""Deterministic two-node safety-monitoring simulation.

Node 1 sits on the cooling system: an autoencoder scores each vibration
window, a range-window average smooths the scores, a threshold rule
turns the smoothed score into ``warning`` events, and warnings are
forwarded to node 2. Node 2 gates an occupancy classifier behind those
warnings (cascade activation), classifies presence, lights a lamp when
somebody is on-site, and raises a cloud alarm otherwise. A backup-
cooling rule can be injected mid-run; once ``temperature`` exceeds its
threshold with a recent ``not_occupied``, ``backup`` events start the
standby cooling and the temperature falls.

Everything is driven by the simulated clock and a single seeded RNG,
so a fixed config yields a byte-identical trace.
"""

from __future__ import annotations

import json
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from importlib import resources

from .errors import ConfigError
from .events import format_event
from .nn import (
    Metrics, Trainer, anomaly_score, load_model, preprocess, train_step,
)
from .node import Node

VIB_WINDOW = 16
OCC_FEATURES = 8

AMBIENT_C = 25.0
OVERHEAT_C = 35.0
TEMP_RATE_PER_S = 0.05

ANOMALY_AMPLITUDE = 3.0
FINE_TUNE_STEPS = 300


@dataclass(frozen=True)
class Thresholds:
    warning: float = 1.0
    temperature: float = 30.0
    occupancy_boundary: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    duration_s: int = 300
    anomaly_episodes: tuple[tuple[int, int], ...] = ((40, 100), (170, 280))
    occupancy_schedule: tuple[tuple[int, int, bool], ...] = (
        (0, 150, True), (150, 300, False))
    rule_injections: tuple[tuple[int, str, str], ...] = ()
    thresholds: Thresholds = field(default_factory=Thresholds)
    smoothing_range_s: int = 10
    backup_window_s: int = 1

    def __post_init__(self):
        for start, end in self.anomaly_episodes:
            if not 0 <= start < end <= self.duration_s:
                raise ConfigError(
                    f"anomaly episode ({start}, {end}) outside the run")
        spans = sorted(self.anomaly_episodes)
        for a, b in zip(spans, spans[1:]):
            if b[0] < a[1]:
                raise ConfigError("anomaly episodes overlap")
        occ = sorted((s, e) for s, e, _ in self.occupancy_schedule)
        for (s, e) in occ:
            if not 0 <= s < e <= self.duration_s:
                raise ConfigError(
                    f"occupancy span ({s}, {e}) outside the run")
        for a, b in zip(occ, occ[1:]):
            if b[0] < a[1]:
                raise ConfigError("occupancy schedule overlaps")
        for at_s, rule_id, _ in self.rule_injections:
            if not 0 <= at_s <= self.duration_s:
                raise ConfigError(
                    f"rule injection {rule_id!r} at {at_s}s outside the run")


def default_injection(thresholds: Thresholds | None = None,
                      at_s: int = 210, backup_window_s: int = 1):
    """The mid-run backup-cooling rule in wire-ready text form."""
    th = thresholds or Thresholds()
    text = (f"backup[_,_](Y) :- temperature[_,_](Y) and "
            f"not_occupied[_,_](X) where(Y>{_num(th.temperature)}) "
            f"[range {backup_window_s} s]")
    return (at_s, "r25", text)


def default_config(seed: int = 42) -> ScenarioConfig:
    return ScenarioConfig(
        seed=seed,
        rule_injections=(default_injection(at_s=210),),
    )


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    try:
        thresholds = Thresholds(**doc.get("thresholds", {}))
        timing = doc.get("timing", {})
        injections = tuple(
            (int(r["at_s"]), str(r["rule_id"]), str(r["rule_text"]))
            for r in doc.get("rule_injections", ()))
        cfg = ScenarioConfig(
            seed=int(doc.get("seed", 42)),
            duration_s=int(doc.get("duration_s", 300)),
            anomaly_episodes=tuple(
                (int(e["start_s"]), int(e["end_s"]))
                for e in doc.get("anomaly_episodes", ())),
            occupancy_schedule=tuple(
                (int(e["start_s"]), int(e["end_s"]), bool(e["present"]))
                for e in doc.get("occupancy_schedule", ())),
            rule_injections=injections,
            thresholds=thresholds,
            smoothing_range_s=int(timing.get("smoothing_range_s", 10)),
            backup_window_s=int(timing.get("backup_window_s", 1)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad scenario config: {exc}") from None
    return cfg


# -- signal synthesis ----------------------------------------------------

def in_episode(cfg: ScenarioConfig, t_s: float) -> bool:
    return any(s <= t_s < e for s, e in cfg.anomaly_episodes)


def worker_present(cfg: ScenarioConfig, t_s: float) -> bool | None:
    for s, e, present in cfg.occupancy_schedule:
        if s <= t_s < e:
            return present
    return None


def vibration_window(cfg: ScenarioConfig, t_s: float,
                     rng: np.random.Generator,
                     anomalous: bool | None = None) -> np.ndarray:
    """One accelerometer window: a sinusoid plus seeded noise, with
    triple amplitude while the cooling fan misbehaves."""
    if anomalous is None:
        anomalous = in_episode(cfg, t_s)
    amp = ANOMALY_AMPLITUDE if anomalous else 1.0
    k = np.arange(VIB_WINDOW)
    phase = 2.0 * np.pi * (0.37 * t_s + k / VIB_WINDOW)
    return amp * np.sin(phase) + 0.1 * rng.standard_normal(VIB_WINDOW)


_OCC_DIRECTION = np.array(
    [0.9, -0.7, 0.8, -0.5, 0.6, -0.9, 0.7, -0.6])


def occupancy_features(present: bool,
                       rng: np.random.Generator) -> np.ndarray:
    """Synthetic camera features, linearly separable by presence."""
    sign = 1.0 if present else -1.0
    return sign * _OCC_DIRECTION + 0.25 * rng.standard_normal(OCC_FEATURES)


def temperature_step(temp: float, anomalous: bool,
                     backup_active: bool) -> float:
    """First-order pull toward the phase set-point, 1 s Euler step."""
    target = OVERHEAT_C if (anomalous and not backup_active) else AMBIENT_C
    return temp + TEMP_RATE_PER_S * (target - temp)


def generate_signals(cfg: ScenarioConfig, t_ms: int,
                     rng: np.random.Generator, prev_temp: float | None =
                     None, backup_active: bool = False):
    """(vibration window, occupancy features or None, temperature)."""
    t_s = t_ms / 1000.0
    if not 0 <= t_s <= cfg.duration_s:
        raise ConfigError(f"t={t_s}s outside the {cfg.duration_s}s run")
    vib = vibration_window(cfg, t_s, rng)
    present = worker_present(cfg, t_s)
    occ = None if present is None else occupancy_features(present, rng)
    temp = temperature_step(
        AMBIENT_C if prev_temp is None else prev_temp,
        in_episode(cfg, t_s), backup_active)
    return vib, occ, temp


# -- trace ---------------------------------------------------------------

@dataclass(frozen=True)
class TraceEntry:
    t_ms: int
    node: str
    kind: str           # ingested | emitted | routed | model
    text: str

    def as_json(self) -> str:
        return json.dumps(
            {"t_ms": self.t_ms, "node": self.node, "kind": self.kind,
             "text": self.text},
            separators=(", ", ": "))


@dataclass
class ScenarioResult:
    trace: list[TraceEntry]
    series: dict[str, list[tuple[int, float]]]
    fine_tune: dict[str, float]
    alarms: list[str]
    workdir: Path

    def trace_jsonl(self) -> str:
        return "".join(e.as_json() + "\n" for e in self.trace)


def _load_asset_model(name: str):
    ref = resources.files("edgecep") / "assets" / name
    return load_model(ref.read_bytes())


def fine_tune_autoencoder(model, cfg: ScenarioConfig,
                          rng: np.random.Generator,
                          steps: int = FINE_TUNE_STEPS):
    """The pre-deployment adaptation pass: online updates on normal-
    phase windows only (unsupervised; the target is the input)."""
    trainer = Trainer(learning_rate=0.02)
    metrics = Metrics()
    for i in range(steps):
        x = vibration_window(cfg, 0.618 * i, rng, anomalous=False)
        train_step(model, trainer, metrics, x, preprocess(model, x))
    return metrics


def run_scenario(cfg: ScenarioConfig,
                 workdir: str | Path | None = None) -> ScenarioResult:
    if workdir is None:
        workdir = tempfile.mkdtemp(prefix="edgecep-scenario-")
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    trace: list[TraceEntry] = []
    alarms: list[str] = []
    clock_ms = 0

    ae = _load_asset_model("anomaly_autoencoder.json")
    occ_model = _load_asset_model("occupancy_classifier.json")

    # Pre-deployment fine-tune on this machine's normal vibrations;
    # its effect (normal vs anomalous score separation) is part of the
    # result and asserted by the tests.
    fine_tune_autoencoder(ae, cfg, rng)
    probe_rng = np.random.default_rng(cfg.seed + 1)
    normal_scores = [
        anomaly_score(ae, vibration_window(cfg, 3.3 * i, probe_rng,
                                           anomalous=False))
        for i in range(20)]
    anomalous_scores = [
        anomaly_score(ae, vibration_window(cfg, 3.3 * i, probe_rng,
                                           anomalous=True))
        for i in range(20)]
    fine_tune = {
        "normal_mean": float(np.mean(normal_scores)),
        "anomalous_mean": float(np.mean(anomalous_scores)),
    }

    nodes: dict[str, Node] = {}

    def sim_forward(host: str, port: int, line: str):
        peer = nodes[host]
        assert line.startswith("EVENT ")
        trace.append(TraceEntry(clock_ms, host, "ingested", line[6:]))
        peer.handle_line(ctl[host], line)

    def sim_alarm(url: str, payload: str):
        alarms.append(payload)

    node1 = Node(name="node1", workdir=workdir, forward_send=sim_forward,
                 alarm_send=sim_alarm)
    node2 = Node(name="node2", workdir=workdir, forward_send=sim_forward,
                 alarm_send=sim_alarm)
    nodes["node1"] = node1
    nodes["node2"] = node2
    node1.pool.add(ae)
    node2.pool.add(occ_model)
    ctl = {name: node.open_session() for name, node in nodes.items()}

    def observe(node: Node, event):
        trace.append(TraceEntry(clock_ms, node.name, "emitted",
                                format_event(event)))

    def observe_action(node: Node, t, sink, literal):
        if sink.kind == "forward":
            return                      # the peer logs the ingestion
        trace.append(TraceEntry(clock_ms, node.name, "routed",
                                f"{sink} {literal}"))

    for node in nodes.values():
        node.emission_observers.append(observe)
        node.action_observers.append(observe_action)

    th = cfg.thresholds
    setup = {
        "node1": [
            f"RULE r12 smoothed_anomaly_score[_,_](Y) :- lambda {{ "
            f"anomaly_score(X), *, Y := avg(X) }} "
            f"[range {cfg.smoothing_range_s} s]",
            f"RULE r13 warning[_,_](X) :- smoothed_anomaly_score[_,_](X) "
            f"where(X>{_num(th.warning)})",
            "ROUTE warning forward:node2:0",
        ],
        "node2": [
            "RULE r21 occupancy_request[_,_](Y) :- warning[_,_](Y)",
            f"RULE r22 not_occupied[_,_](X) :- occupancy_score[_,_](X) "
            f"where(X<{_num(th.occupancy_boundary)})",
            f"RULE r23 occupied[_,_](X) :- occupancy_score[_,_](X) "
            f"where(X>{_num(th.occupancy_boundary)})",
            f"ROUTE occupancy_request activate:{occ_model.model_id}",
            "ROUTE occupied led:warn_lamp",
            "ROUTE not_occupied alarm:cloud",
            "ROUTE backup led:backup_cooling",
        ],
    }
    for name, lines in setup.items():
        for line in lines:
            responses = nodes[name].handle_line(ctl[name], line)
            if responses and responses[0].startswith("ERR"):
                raise ConfigError(f"{name} setup failed: {responses[0]} "
                                  f"({line})")

    injections = {at_s: (rule_id, text)
                  for at_s, rule_id, text in cfg.rule_injections}

    series: dict[str, list[tuple[int, float]]] = {
        "anomaly": [], "warning": [], "occupancy": [], "temperature": [],
    }
    temp = AMBIENT_C
    backup_active = False

    for t_s in range(cfg.duration_s):
        clock_ms = t_s * 1000
        for name, node in nodes.items():
            node.handle_line(ctl[name], f"TIME {clock_ms}")

        if t_s in injections:
            rule_id, text = injections[t_s]
            responses = node2.handle_line(ctl["node2"],
                                          f"RULE {rule_id} {text}")
            if responses[0].startswith("ERR"):
                raise ConfigError(
                    f"rule injection failed: {responses[0]}")

        warnings_before = len([e for e in trace
                               if e.kind == "emitted"
                               and e.text.startswith("warning[")])

        # vibration -> anomaly score on node 1 (event 1.1)
        vib = vibration_window(cfg, t_s, rng)
        csv = ",".join(repr(float(v)) for v in vib)
        responses = node1.handle_line(ctl["node1"],
                                      f"MODEL INFER {ae.model_id} {csv}")
        if responses[0].startswith("OK "):
            literal = responses[0][3:]
            trace.append(TraceEntry(clock_ms, "node1", "model", literal))
            score = float(literal.split("(", 1)[1].rstrip(")"))
            series["anomaly"].append((clock_ms, score))

        # occupancy attempt on node 2 (event 2.1, gated by warnings)
        present = worker_present(cfg, t_s)
        if present is not None:
            feats = occupancy_features(present, rng)
            csv = ",".join(repr(float(v)) for v in feats)
            responses = node2.handle_line(
                ctl["node2"], f"MODEL INFER {occ_model.model_id} {csv}")
            if responses[0].startswith("OK "):
                literal = responses[0][3:]
                trace.append(TraceEntry(clock_ms, "node2", "model",
                                        literal))
                value = float(literal.split("(", 1)[1].rstrip(")"))
                series["occupancy"].append(
                    (clock_ms, 1.0 if value > th.occupancy_boundary
                     else 0.0))

        # plant temperature sensor -> node 2
        temp = temperature_step(temp, in_episode(cfg, t_s), backup_active)
        series["temperature"].append((clock_ms, temp))
        literal = f"temperature[{clock_ms}, {clock_ms}]({repr(temp)})"
        trace.append(TraceEntry(clock_ms, "node2", "ingested", literal))
        node2.handle_line(ctl["node2"], f"EVENT {literal}")

        if not backup_active and any(
                e.kind == "emitted" and e.node == "node2"
                and e.text.startswith("backup[") for e in trace):
            backup_active = True        # standby cooling latched on

        warned = len([e for e in trace
                      if e.kind == "emitted"
                      and e.text.startswith("warning[")]) > warnings_before
        series["warning"].append((clock_ms, 1.0 if warned else 0.0))

    return ScenarioResult(trace, series, fine_tune, alarms, workdir)


def write_outputs(result: ScenarioResult, out_dir: str | Path):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.jsonl").write_text(result.trace_jsonl(),
                                     encoding="utf-8")
    for name, rows in result.series.items():
        lines = ["t_ms,value"]
        lines += [f"{t},{repr(v)}" for t, v in rows]
        (out / f"series_{name}.csv").write_text(
            "\n".join(lines) + "\n", encoding="utf-8")
