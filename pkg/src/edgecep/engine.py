"""Incremental stream matcher.

One engine instance holds an ordered set of rules, per-rule operand
buffers, and a monotone watermark clock (the max end timestamp seen).
``push_event`` evaluates every rule against the new event, emits
complex events for each newly complete match, and re-injects emissions
so rules can build on each other (cascading), up to a depth limit.
``advance_time`` moves the watermark without an event, which is what
matures pending negations and expires buffers.

Matching semantics in brief:
  * and/seq/or bodies match tuples of buffered events with consistent
    variable bindings; seq additionally requires the left side's hull
    to end no later than the right side's hull starts.
  * A range window bounds the hull length of the contributing events;
    a count window requires each operand to be among the last n live
    events of its own leaf buffer.
  * ``a nseq b [range w]`` emits per anchor ``a`` once the watermark
    passes ``a.end + w`` with no consistent ``b`` starting inside
    ``(a.end, a.end + w]``.
  * ``a kseq b`` emits once per terminator ``b``, binding the most
    recently arrived qualifying ``a`` and spanning from the earliest
    qualifying ``a``.
  * ``lambda`` aggregates one bound value per qualifying source event
    over a count or range window.

Events are never consumed by a match: every distinct leaf-to-event
assignment emits exactly once. The engine is a single-threaded state
machine; callers serialize access externally.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import _kernels as K
from ._kernels.compile import AGG_CODES, compile_constraints, compile_pattern
from .errors import (
    DuplicateRuleIdError, MissingWindowError, TimeRegressionError,
    UnknownRuleIdError,
)
from .events import Event, format_event, unchecked_event
from .rules.ast import (
    And, Atom, CountWindow, EventPattern, Kseq, Lambda, Nseq, NumberLit,
    Or, RangeWindow, RuleAst, Seq, SymbolLit, Variable, Wildcard,
)
from .rules.parser import validate_rule

DEFAULT_COUNT_RETENTION_MS = 60000


@dataclass
class EngineConfig:
    cascade_depth_limit: int = 8
    default_range_ms: int | None = None
    max_buffer_events: int = 4096
    count_retention_ms: int = DEFAULT_COUNT_RETENTION_MS

    def __post_init__(self):
        if self.cascade_depth_limit < 1:
            raise ValueError("cascade_depth_limit must be >= 1")


@dataclass(frozen=True, slots=True)
class Diagnostic:
    kind: str          # cascade-depth | buffer-overflow
    rule_id: str
    detail: str
    t_ms: int


class _Leaf:
    __slots__ = ("idx", "pattern", "compiled", "buffer")

    def __init__(self, idx: int, pattern: EventPattern):
        self.idx = idx
        self.pattern = pattern
        self.compiled = compile_pattern(pattern)
        self.buffer: list[tuple[Event, dict]] = []


class _Node:
    __slots__ = ("kind", "left", "right", "leaf")

    def __init__(self, kind, left=None, right=None, leaf=None):
        self.kind = kind           # 'leaf' | 'and' | 'seq' | 'or'
        self.left = left
        self.right = right
        self.leaf = leaf


def _build_tree(body, leaves: list[_Leaf]) -> _Node:
    if isinstance(body, Atom):
        leaf = _Leaf(len(leaves), body.pattern)
        leaves.append(leaf)
        return _Node("leaf", leaf=leaf)
    kind = {And: "and", Seq: "seq", Or: "or"}[type(body)]
    left = _build_tree(body.left, leaves)
    right = _build_tree(body.right, leaves)
    return _Node(kind, left, right)


def _compile_head(head: EventPattern):
    ops = []
    for t in head.arg_terms:
        if isinstance(t, Variable):
            ops.append(("var", t.name))
        elif isinstance(t, NumberLit):
            ops.append(("lit", t.value))
        elif isinstance(t, SymbolLit):
            ops.append(("lit", t.text))
        else:
            raise ValueError("wildcard in head arguments")
    return tuple(ops)


class _RuleInstance:
    def __init__(self, rule_id: str, ast: RuleAst, window):
        self.rule_id = rule_id
        self.ast = ast
        self.window = window
        self.head_ops = _compile_head(ast.head)
        self.cprogs = compile_constraints(ast.constraints)
        self.leaves: list[_Leaf] = []
        body = ast.body
        self.kind = "tree"
        self.tree: _Node | None = None
        self.buffered = False
        # nseq state: anchors awaiting their deadline
        self.pending: list[list] = []   # [anchor, binding, deadline, depth]
        # lambda state: admitted samples in arrival order
        self.samples: list[tuple] = []   # (value, start, end, seq)
        self.emitted: set = set()        # dedup keys (lambda range reuse)

        if isinstance(body, (Atom, And, Seq, Or)):
            self.tree = _build_tree(body, self.leaves)
            self.buffered = _tree_has_join(body)
            # the common two-leaf join goes through the kernel scan
            if (self.buffered and len(self.leaves) == 2
                    and self.tree.kind in ("and", "seq")
                    and self.tree.left.kind == "leaf"
                    and self.tree.right.kind == "leaf"):
                self.pair_seq = self.tree.kind == "seq"
            else:
                self.pair_seq = None
        elif isinstance(body, Nseq):
            self.kind = "nseq"
            self.leaves = [_Leaf(0, body.positive), _Leaf(1, body.negated)]
        elif isinstance(body, Kseq):
            self.kind = "kseq"
            self.leaves = [_Leaf(0, body.repeated), _Leaf(1, body.terminator)]
        else:
            self.kind = "lambda"
            self.leaves = [_Leaf(0, body.source)]
            self.agg_code = AGG_CODES[body.agg.fn]
            self.agg_abs = body.agg.use_abs
            self.agg_var = body.agg.var

    def retention_ms(self, engine_count_retention: int) -> int:
        if isinstance(self.window, RangeWindow):
            return self.window.duration_ms
        return engine_count_retention

    # -- per-kind event handling; each returns built head events --

    def on_event(self, ev: Event, engine: "Engine", depth: int) -> list[Event]:
        if self.kind == "tree":
            return self._on_tree_event(ev, engine)
        if self.kind == "nseq":
            return self._on_nseq_event(ev, engine, depth)
        if self.kind == "kseq":
            return self._on_kseq_event(ev, engine)
        return self._on_lambda_event(ev, engine)

    # tree: and/seq/or over atoms

    def _on_tree_event(self, ev: Event, engine: "Engine") -> list[Event]:
        hit = False
        per_leaf_new: dict[int, tuple[Event, dict]] = {}
        for leaf in self.leaves:
            b = K.match_event(leaf.compiled, ev.name, ev.start_ms,
                              ev.end_ms, ev.args)
            if b is None:
                continue
            hit = True
            per_leaf_new[leaf.idx] = (ev, b)
            if self.buffered:
                leaf.buffer.append((ev, b))
                if len(leaf.buffer) > engine.config.max_buffer_events:
                    dropped, _ = leaf.buffer.pop(0)
                    engine._diagnose("buffer-overflow", self.rule_id,
                                     format_event(dropped))
        if not hit:
            return []

        new_seq = ev.seq_id
        if self.pair_seq is not None:
            w = self.window
            range_ms = (w.duration_ms if isinstance(w, RangeWindow)
                        else -1)
            last_l = last_r = None
            if isinstance(w, CountWindow):
                last_l = {e.seq_id
                          for e, _ in self.leaves[0].buffer[-w.n:]}
                last_r = {e.seq_id
                          for e, _ in self.leaves[1].buffer[-w.n:]}
            matches = K.scan_pairs(
                self.leaves[0].buffer, self.leaves[1].buffer, new_seq,
                self.pair_seq, self.cprogs, range_ms, last_l, last_r)
            matches.sort(key=lambda m: m[0])
            return [self._emit(binding, start, end)
                    for _, binding, start, end in matches]

        if self.buffered:
            candidates = lambda leaf: leaf.buffer
        else:
            candidates = lambda leaf: (
                [per_leaf_new[leaf.idx]] if leaf.idx in per_leaf_new else [])
        matches = []
        for items, binding, start, end in self._enumerate(self.tree,
                                                          candidates):
            if self.buffered and all(e.seq_id != new_seq for _, e in items):
                continue
            if not K.eval_constraints(self.cprogs, binding):
                continue
            if not self._window_ok(items, start, end):
                continue
            matches.append((tuple(e.seq_id for _, e in items),
                            binding, start, end))
        matches.sort(key=lambda m: m[0])
        return [self._emit(binding, start, end)
                for _, binding, start, end in matches]

    def _enumerate(self, node: _Node, candidates):
        if node.kind == "leaf":
            leaf = node.leaf
            for e, b in candidates(leaf):
                yield ((leaf.idx, e),), b, e.start_ms, e.end_ms
            return
        if node.kind == "or":
            yield from self._enumerate(node.left, candidates)
            yield from self._enumerate(node.right, candidates)
            return
        for li, lb, ls, le in self._enumerate(node.left, candidates):
            for ri, rb, rs, re_ in self._enumerate(node.right, candidates):
                if node.kind == "seq" and le > rs:
                    continue
                merged = K.merge_bindings(lb, rb)
                if merged is None:
                    continue
                yield (li + ri, merged,
                       ls if ls < rs else rs,
                       le if le > re_ else re_)

    def _window_ok(self, items, start, end) -> bool:
        w = self.window
        if w is None:
            return True
        if isinstance(w, RangeWindow):
            return end - start <= w.duration_ms
        n = w.n
        for idx, e in items:
            buf = self.leaves[idx].buffer
            if not buf:
                continue        # memoryless leaf: the event is the newest
            recent = buf[-n:]
            if not any(be.seq_id == e.seq_id for be, _ in recent):
                return False
        return True

    # nseq

    def _on_nseq_event(self, ev: Event, engine: "Engine",
                       depth: int) -> list[Event]:
        pos, neg = self.leaves
        w = self.window.duration_ms
        b_pos = K.match_event(pos.compiled, ev.name, ev.start_ms,
                              ev.end_ms, ev.args)
        if b_pos is not None and K.eval_constraints(self.cprogs, b_pos):
            deadline = ev.end_ms + w
            witnessed = False
            for ne, nb in neg.buffer:
                if (ev.end_ms < ne.start_ms <= deadline
                        and K.merge_bindings(b_pos, nb) is not None):
                    witnessed = True
                    break
            if not witnessed:
                self.pending.append([ev, b_pos, deadline, depth])
        b_neg = K.match_event(neg.compiled, ev.name, ev.start_ms,
                              ev.end_ms, ev.args)
        if b_neg is not None:
            neg.buffer.append((ev, b_neg))
            if len(neg.buffer) > engine.config.max_buffer_events:
                dropped, _ = neg.buffer.pop(0)
                engine._diagnose("buffer-overflow", self.rule_id,
                                 format_event(dropped))
            survivors = []
            for entry in self.pending:
                anchor, binding, deadline, _ = entry
                if (anchor.end_ms < ev.start_ms <= deadline
                        and K.merge_bindings(binding, b_neg) is not None):
                    continue            # witnessed: drop silently
                survivors.append(entry)
            self.pending = survivors
        return []

    def collect_matured(self, watermark_ms: int) -> list[tuple[Event, int]]:
        """Emissions whose negation deadline has passed, paired with the
        cascade depth they inherit from their anchor."""
        if self.kind != "nseq" or not self.pending:
            return []
        out = []
        survivors = []
        for anchor, binding, deadline, depth in self.pending:
            if watermark_ms > deadline:
                out.append((self._emit(binding, anchor.start_ms, deadline),
                            depth + 1))
            else:
                survivors.append([anchor, binding, deadline, depth])
        self.pending = survivors
        return out

    # kseq

    def _on_kseq_event(self, ev: Event, engine: "Engine") -> list[Event]:
        rep, term = self.leaves
        b_rep = K.match_event(rep.compiled, ev.name, ev.start_ms,
                              ev.end_ms, ev.args)
        if b_rep is not None:
            rep.buffer.append((ev, b_rep))
            if len(rep.buffer) > engine.config.max_buffer_events:
                dropped, _ = rep.buffer.pop(0)
                engine._diagnose("buffer-overflow", self.rule_id,
                                 format_event(dropped))
        b_term = K.match_event(term.compiled, ev.name, ev.start_ms,
                               ev.end_ms, ev.args)
        if b_term is None:
            return []
        qualifying = []
        n_recent = None
        if isinstance(self.window, CountWindow):
            n_recent = {ae.seq_id
                        for ae, _ in rep.buffer[-self.window.n:]}
        for ae, ab in rep.buffer:
            if ae.end_ms > ev.start_ms:
                continue
            if isinstance(self.window, RangeWindow):
                if ae.start_ms < ev.end_ms - self.window.duration_ms:
                    continue
            elif n_recent is not None and ae.seq_id not in n_recent:
                continue
            merged = K.merge_bindings(ab, b_term)
            if merged is None or not K.eval_constraints(self.cprogs, merged):
                continue
            qualifying.append((ae, merged))
        if not qualifying:
            return []
        start = min(ae.start_ms for ae, _ in qualifying)
        _, binding = qualifying[-1]     # most recently arrived
        return [self._emit(binding, start, ev.end_ms)]

    # lambda

    def _on_lambda_event(self, ev: Event, engine: "Engine") -> list[Event]:
        src = self.leaves[0]
        b = K.match_event(src.compiled, ev.name, ev.start_ms, ev.end_ms,
                          ev.args)
        if b is None or not K.eval_constraints(self.cprogs, b):
            return []
        value = b.get(self.agg_var)
        if isinstance(value, str):
            return []                   # symbols don't aggregate
        self.samples.append((value, ev.start_ms, ev.end_ms, ev.seq_id))
        w = self.window
        if isinstance(w, CountWindow):
            if len(self.samples) > w.n:
                del self.samples[: len(self.samples) - w.n]
            if len(self.samples) < w.n:
                return []
            window = self.samples
        else:
            cutoff = engine.watermark_ms - w.duration_ms
            self.samples = [s for s in self.samples if s[2] > cutoff]
            window = self.samples
            if not window:
                return []
        key = tuple(s[3] for s in window)
        if key in self.emitted:
            return []
        self.emitted.add(key)
        agg = K.fold_agg(self.agg_code, self.agg_abs,
                         [s[0] for s in window])
        start = min(s[1] for s in window)
        end = max(s[2] for s in window)
        target = self.ast.body.target.name
        return [self._emit({target: agg}, start, end)]

    # shared

    def _emit(self, binding: dict, start: int, end: int) -> Event:
        args = tuple(binding[payload] if op == "var" else payload
                     for op, payload in self.head_ops)
        if self.kind == "lambda":
            # aggregates can overflow; let the validated constructor
            # reject a non-finite result loudly
            return Event(self.ast.head.name, start, end, args)
        return unchecked_event(self.ast.head.name, start, end, args)

    def evict(self, watermark_ms: int, retention_ms: int):
        cutoff = watermark_ms - retention_ms
        if cutoff <= 0:
            return
        for leaf in self.leaves:
            if any(e.end_ms < cutoff for e, _ in leaf.buffer):
                leaf.buffer = [entry for entry in leaf.buffer
                               if entry[0].end_ms >= cutoff]
        if self.kind == "lambda" and isinstance(self.window, RangeWindow):
            lam_cutoff = watermark_ms - self.window.duration_ms
            self.samples = [s for s in self.samples if s[2] > lam_cutoff]


def _tree_has_join(body) -> bool:
    if isinstance(body, (And, Seq)):
        return True
    if isinstance(body, Or):
        return _tree_has_join(body.left) or _tree_has_join(body.right)
    return False


class Engine:
    """Single-node rule engine. Not thread-safe by design; wrap calls
    in a lock when sharing across threads."""

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or EngineConfig()
        self.rules: dict[str, _RuleInstance] = {}
        self.watermark_ms = 0
        self.next_seq_id = 1
        self.diagnostics: list[Diagnostic] = []
        self._count_retention = self.config.count_retention_ms
        # event name -> rules watching it (insertion order preserved);
        # rules whose leaves don't mention a name can't react to it
        self._watchers: dict[str, list[_RuleInstance]] = {}

    # -- rule management --

    def add_rule(self, rule_id: str, ast: RuleAst):
        if rule_id in self.rules:
            raise DuplicateRuleIdError(f"rule id {rule_id!r} already exists")
        validate_rule(ast)
        window = ast.window
        needs_window = (_tree_has_join(ast.body)
                        or isinstance(ast.body, (Nseq, Kseq, Lambda)))
        if window is None and needs_window:
            if self.config.default_range_ms is not None:
                window = RangeWindow(self.config.default_range_ms)
            else:
                raise MissingWindowError(
                    f"rule {rule_id!r} joins multiple events and needs a "
                    "[count n] or [range t] window")
        self.rules[rule_id] = _RuleInstance(rule_id, ast, window)
        self._recompute_retention()

    def remove_rule(self, rule_id: str):
        if rule_id not in self.rules:
            raise UnknownRuleIdError(f"unknown rule id {rule_id!r}")
        del self.rules[rule_id]
        self._recompute_retention()

    def _recompute_retention(self):
        retention = self.config.count_retention_ms
        watchers: dict[str, list[_RuleInstance]] = {}
        for inst in self.rules.values():
            if isinstance(inst.window, RangeWindow):
                retention = max(retention, inst.window.duration_ms)
            for name in {leaf.pattern.name for leaf in inst.leaves}:
                watchers.setdefault(name, []).append(inst)
        self._count_retention = retention
        self._watchers = watchers

    # -- stream input --

    def push_event(self, event: Event) -> list[Event]:
        """Ingest one event; returns every emission it caused (direct,
        cascaded, and any negations it matured), in generation order."""
        return self._run(event)

    def advance_time(self, t_ms: int) -> list[Event]:
        """Move the watermark forward without an event."""
        if t_ms < self.watermark_ms:
            raise TimeRegressionError(
                f"cannot move watermark back to {t_ms} from "
                f"{self.watermark_ms}")
        self.watermark_ms = t_ms
        return self._run(None)

    def _ingest(self, event: Event) -> Event:
        event = unchecked_event(event.name, event.start_ms, event.end_ms,
                                event.args, self.next_seq_id)
        self.next_seq_id += 1
        if event.end_ms > self.watermark_ms:
            self.watermark_ms = event.end_ms
        return event

    def _run(self, external: Event | None) -> list[Event]:
        out: list[Event] = []
        queue: deque[tuple[Event, int]] = deque()
        if external is not None:
            queue.append((self._ingest(external), 0))
        while True:
            while queue:
                ev, depth = queue.popleft()
                for inst in self._watchers.get(ev.name, ()):
                    rule_id = inst.rule_id
                    for emission in inst.on_event(ev, self, depth):
                        if depth + 1 > self.config.cascade_depth_limit:
                            self._diagnose("cascade-depth", rule_id,
                                           format_event(emission))
                            continue
                        emission = self._ingest(emission)
                        out.append(emission)
                        queue.append((emission, depth + 1))
            progressed = False
            for rule_id, inst in self.rules.items():
                for emission, depth in inst.collect_matured(
                        self.watermark_ms):
                    progressed = True
                    if depth > self.config.cascade_depth_limit:
                        self._diagnose("cascade-depth", rule_id,
                                       format_event(emission))
                        continue
                    emission = self._ingest(emission)
                    out.append(emission)
                    queue.append((emission, depth))
            if not progressed:
                break
        for inst in self.rules.values():
            inst.evict(self.watermark_ms,
                       inst.retention_ms(self._count_retention))
        return out

    def _diagnose(self, kind: str, rule_id: str, detail: str):
        self.diagnostics.append(
            Diagnostic(kind, rule_id, detail, self.watermark_ms))
