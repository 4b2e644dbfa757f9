"""Brute-force matching oracle.

Computes the expected emission set for one rule over a short stream by
exhaustive enumeration of event tuples, applying the normative matching
semantics declaratively. It shares only the AST and Event data types
with the engine: unification, constraint arithmetic, and window logic
are reimplemented here from the semantics, so an engine bug and an
oracle bug would have to coincide to go unnoticed.

The stream model matches the engine's ingestion loop: events arrive in
list order, ``time_advances`` entries ``(after_count, t_ms)`` advance
the watermark after that many events have been pushed, the watermark is
the running max end timestamp, and buffered events are evicted once
their end falls behind ``watermark - retention`` (retention is the
rule's range window, or the 60 s count-rule default).
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import DEFAULT_COUNT_RETENTION_MS
from .errors import StreamTooLargeError
from .events import Event, format_event
from .rules.ast import (
    AbsOp, And, Atom, BinOp, CountWindow, EventPattern, Kseq, Lambda,
    Nseq, NumConst, NumberLit, Or, RangeWindow, RuleAst, Seq, SymbolLit,
    VarRef, Variable, Wildcard,
)

MAX_ORACLE_EVENTS = 12


@dataclass(frozen=True)
class OracleResult:
    emissions: frozenset[str]      # canonical event literals

    def __contains__(self, literal: str) -> bool:
        return literal in self.emissions


def build_steps(stream, time_advances=()):
    """Interleave pushes and advances into one step list.

    ``(after_count, t_ms)`` means: advance to t_ms once ``after_count``
    events have been pushed. Shared with the engine-side trial runner
    so both sides see the identical schedule.
    """
    steps = []
    pending = sorted(time_advances, key=lambda a: a[0])
    ai = 0
    for i in range(len(stream) + 1):
        while ai < len(pending) and pending[ai][0] <= i:
            steps.append(("advance", pending[ai][1]))
            ai += 1
        if i < len(stream):
            steps.append(("push", stream[i]))
    return steps


# -- oracle-local unification and arithmetic ---------------------------

def _veq(a, b) -> bool:
    if isinstance(a, str) != isinstance(b, str):
        return False
    return a == b


def _unify(p: EventPattern, e: Event):
    if e.name != p.name or len(e.args) != len(p.arg_terms):
        return None
    binding: dict = {}

    def bind(term, value) -> bool:
        if isinstance(term, Wildcard):
            return True
        if isinstance(term, Variable):
            if term.name in binding:
                return _veq(binding[term.name], value)
            binding[term.name] = value
            return True
        if isinstance(term, NumberLit):
            return not isinstance(value, str) and value == term.value
        return isinstance(value, str) and value == term.text

    if not bind(p.start_slot, float(e.start_ms)):
        return None
    if not bind(p.end_slot, float(e.end_ms)):
        return None
    for term, value in zip(p.arg_terms, e.args):
        if not bind(term, value):
            return None
    return binding


def _merge(a: dict, b: dict):
    merged = dict(a)
    for k, v in b.items():
        if k in merged:
            if not _veq(merged[k], v):
                return None
        else:
            merged[k] = v
    return merged


def _arith(e, binding):
    """Evaluate where-arithmetic; None means 'fails' (symbol operand,
    unbound variable, or division by zero)."""
    if isinstance(e, NumConst):
        return e.value
    if isinstance(e, VarRef):
        v = binding.get(e.name)
        if v is None or isinstance(v, str):
            return None
        return v
    if isinstance(e, AbsOp):
        v = _arith(e.inner, binding)
        return None if v is None else abs(v)
    if isinstance(e, BinOp):
        lhs = _arith(e.left, binding)
        rhs = _arith(e.right, binding)
        if lhs is None or rhs is None:
            return None
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if rhs == 0:
            return None
        return lhs / rhs
    raise TypeError(f"not arithmetic: {e!r}")


def _constraints_hold(constraints, binding) -> bool:
    for c in constraints:
        lhs = _arith(c.lhs, binding)
        rhs = _arith(c.rhs, binding)
        if lhs is None or rhs is None:
            return False
        ok = {
            "<": lhs < rhs, ">": lhs > rhs, "<=": lhs <= rhs,
            ">=": lhs >= rhs, "==": lhs == rhs, "!=": lhs != rhs,
        }[c.op]
        if not ok:
            return False
    return True


def _head_literal(head: EventPattern, binding, start, end) -> str:
    args = []
    for t in head.arg_terms:
        if isinstance(t, Variable):
            args.append(binding[t.name])
        elif isinstance(t, NumberLit):
            args.append(t.value)
        else:
            args.append(t.text)
    return format_event(Event(head.name, int(start), int(end), tuple(args)))


# -- the oracle itself --------------------------------------------------

class _Timeline:
    """Arrival bookkeeping: per-step watermark and liveness."""

    def __init__(self, steps, retention_ms):
        self.retention = retention_ms
        self.events = []            # (step_index, Event)
        self.w_after = []
        w = 0
        for idx, (kind, payload) in enumerate(steps):
            if kind == "push":
                w = max(w, payload.end_ms)
                self.events.append((idx, payload))
            else:
                assert payload >= w, "advance below watermark"
                w = payload
            self.w_after.append(w)
        self.final_w = w

    def w_before(self, step: int) -> int:
        return self.w_after[step - 1] if step > 0 else 0

    def live_at(self, entry_step: int, at_step: int) -> bool:
        """Was an event pushed at entry_step still buffered when the
        step at_step ran? (Its own arrival step is always live.)"""
        if entry_step >= at_step:
            return True
        _, e = next(x for x in self.events if x[0] == entry_step)
        return e.end_ms >= self.w_before(at_step) - self.retention

    def first_step_after(self, deadline_ms: int, from_step: int = 0):
        """First step at or past from_step whose post-watermark exceeds
        the deadline. A pending negation matures no earlier than its
        anchor's own arrival, however stale the anchor."""
        for idx in range(from_step, len(self.w_after)):
            if self.w_after[idx] > deadline_ms:
                return idx
        return None


def oracle_match(rule: RuleAst, stream, time_advances=()) -> OracleResult:
    """Expected emission set for one rule over one short stream."""
    if len(stream) > MAX_ORACLE_EVENTS:
        raise StreamTooLargeError(
            f"oracle enumerates at most {MAX_ORACLE_EVENTS} events, got "
            f"{len(stream)}")
    steps = build_steps(stream, time_advances)
    retention = (rule.window.duration_ms
                 if isinstance(rule.window, RangeWindow)
                 else DEFAULT_COUNT_RETENTION_MS)
    tl = _Timeline(steps, retention)
    body = rule.body
    if isinstance(body, Nseq):
        emissions = _nseq_emissions(rule, tl)
    elif isinstance(body, Kseq):
        emissions = _kseq_emissions(rule, tl)
    elif isinstance(body, Lambda):
        emissions = _lambda_emissions(rule, tl)
    else:
        emissions = _tree_emissions(rule, tl)
    return OracleResult(frozenset(emissions))


def _leaf_buffer(tl: _Timeline, pattern: EventPattern, at_step: int):
    """Live buffer contents of one leaf pattern when at_step runs,
    including an arrival at at_step itself (insertion precedes
    evaluation)."""
    out = []
    for step, e in tl.events:
        if step > at_step:
            break
        if _unify(pattern, e) is None:
            continue
        if tl.live_at(step, at_step):
            out.append((step, e))
    return out


def _tree_emissions(rule: RuleAst, tl: _Timeline):
    leaves: list[EventPattern] = []

    def collect(node):
        if isinstance(node, Atom):
            leaves.append(node.pattern)
        else:
            collect(node.left)
            collect(node.right)

    collect(rule.body)

    def combos(node):
        """Yield (items, binding, start, end); items = ((leaf_idx, step,
        event), ...)."""
        if isinstance(node, Atom):
            # position by identity: the same pattern text may repeat
            idx = _leaf_index(node, rule.body)
            for step, e in tl.events:
                b = _unify(node.pattern, e)
                if b is not None:
                    yield ((idx, step, e),), b, e.start_ms, e.end_ms
            return
        if isinstance(node, Or):
            yield from combos(node.left)
            yield from combos(node.right)
            return
        for li, lb, ls, le in combos(node.left):
            for ri, rb, rs, re_ in combos(node.right):
                if isinstance(node, Seq) and le > rs:
                    continue
                merged = _merge(lb, rb)
                if merged is None:
                    continue
                yield li + ri, merged, min(ls, rs), max(le, re_)

    emissions = []
    for items, binding, start, end in combos(rule.body):
        if not _constraints_hold(rule.constraints, binding):
            continue
        completion = max(step for _, step, _ in items)
        if not all(tl.live_at(step, completion) for _, step, _ in items):
            continue
        w = rule.window
        if isinstance(w, RangeWindow):
            if end - start > w.duration_ms:
                continue
        elif isinstance(w, CountWindow):
            ok = True
            for leaf_idx, step, e in items:
                buf = _leaf_buffer(tl, leaves[leaf_idx], completion)
                recent = {s for s, _ in buf[-w.n:]}
                if step not in recent:
                    ok = False
                    break
            if not ok:
                continue
        emissions.append(_head_literal(rule.head, binding, start, end))
    return emissions


def _leaf_index(node: Atom, body) -> int:
    """Position of this Atom object in the left-to-right leaf order."""
    counter = [0]
    found = [-1]

    def walk(n):
        if n is node:
            found[0] = counter[0]
            counter[0] += 1
        elif isinstance(n, Atom):
            counter[0] += 1
        elif isinstance(n, (And, Seq, Or)):
            walk(n.left)
            walk(n.right)

    walk(body)
    return found[0]


def _nseq_emissions(rule: RuleAst, tl: _Timeline):
    body: Nseq = rule.body
    w = rule.window.duration_ms
    emissions = []
    for a_step, a in tl.events:
        ba = _unify(body.positive, a)
        if ba is None or not _constraints_hold(rule.constraints, ba):
            continue
        deadline = a.end_ms + w
        matured = tl.first_step_after(deadline, a_step)
        if matured is None:
            continue                    # stream ended before the deadline
        witnessed = False
        for b_step, b in tl.events:
            bb = _unify(body.negated, b)
            if bb is None or _merge(ba, bb) is None:
                continue
            if not (a.end_ms < b.start_ms <= deadline):
                continue
            if b_step < a_step and not tl.live_at(b_step, a_step):
                continue                # witness evicted before the anchor
            if b_step > matured:
                continue                # arrived after the emission
            witnessed = True
            break
        if not witnessed:
            emissions.append(
                _head_literal(rule.head, ba, a.start_ms, deadline))
    return emissions


def _kseq_emissions(rule: RuleAst, tl: _Timeline):
    body: Kseq = rule.body
    emissions = []
    for b_step, b in tl.events:
        bb = _unify(body.terminator, b)
        if bb is None:
            continue
        rep_buf = _leaf_buffer(tl, body.repeated, b_step)
        recent = None
        if isinstance(rule.window, CountWindow):
            recent = {s for s, _ in rep_buf[-rule.window.n:]}
        qualifying = []
        for a_step, a in rep_buf:
            if a.end_ms > b.start_ms:
                continue
            if isinstance(rule.window, RangeWindow):
                if a.start_ms < b.end_ms - rule.window.duration_ms:
                    continue
            elif recent is not None and a_step not in recent:
                continue
            merged = _merge(_unify(body.repeated, a), bb)
            if merged is None:
                continue
            if not _constraints_hold(rule.constraints, merged):
                continue
            qualifying.append((a_step, a, merged))
        if qualifying:
            start = min(a.start_ms for _, a, _ in qualifying)
            _, _, binding = qualifying[-1]     # most recent arrival
            emissions.append(
                _head_literal(rule.head, binding, start, b.end_ms))
    return emissions


def _lambda_emissions(rule: RuleAst, tl: _Timeline):
    body: Lambda = rule.body
    samples = []        # (step, value, start, end)
    for step, e in tl.events:
        b = _unify(body.source, e)
        if b is None or not _constraints_hold(rule.constraints, b):
            continue
        value = b.get(body.agg.var)
        if isinstance(value, str):
            continue
        samples.append((step, value, e.start_ms, e.end_ms))

    emissions = []
    w = rule.window
    for k in range(len(samples)):
        if isinstance(w, CountWindow):
            if k + 1 < w.n:
                continue
            window = samples[k - w.n + 1: k + 1]
        else:
            cutoff = tl.w_after[samples[k][0]] - w.duration_ms
            window = [s for s in samples[: k + 1] if s[3] > cutoff]
            if not window:
                continue
        values = [v for _, v, _, _ in window]
        if body.agg.use_abs:
            values = [abs(v) for v in values]
        if body.agg.fn == "sum":
            agg = float(sum(values))
        elif body.agg.fn == "avg":
            agg = float(sum(values)) / len(values)
        elif body.agg.fn == "min":
            agg = float(min(values))
        else:
            agg = float(max(values))
        start = min(s[2] for s in window)
        end = max(s[3] for s in window)
        emissions.append(_head_literal(
            rule.head, {body.target.name: agg}, start, end))
    return emissions
