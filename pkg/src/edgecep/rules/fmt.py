"""Canonical single-line pretty-printer for rule ASTs.

``parse_rule(format_rule(r))`` is structurally equal to ``r`` for every
valid rule, and formatting is idempotent. Parentheses are emitted only
where the default left-associative, or-loosest reading would otherwise
change the tree.
"""

from __future__ import annotations

from ..events import render_number
from .ast import (
    AbsOp, And, Atom, BinOp, BodyExpr, Constraint, CountWindow,
    EventPattern, Kseq, Lambda, Nseq, NumConst, NumberLit, Or, RangeWindow,
    RuleAst, Seq, SymbolLit, VarRef, Variable, Wildcard, WindowSpec,
)


def format_term(t) -> str:
    if isinstance(t, Wildcard):
        return "_"
    if isinstance(t, Variable):
        return t.name
    if isinstance(t, NumberLit):
        return render_number(t.value)
    if isinstance(t, SymbolLit):
        return t.text
    raise TypeError(f"not a term: {t!r}")


def format_pattern(p: EventPattern, with_timespec: bool = True) -> str:
    args = ", ".join(format_term(t) for t in p.arg_terms)
    if not with_timespec:
        return f"{p.name}({args})"
    return (f"{p.name}[{format_term(p.start_slot)}, "
            f"{format_term(p.end_slot)}]({args})")


_CONJ_OPS = {And: "and", Seq: "seq"}


def format_body(body: BodyExpr) -> str:
    if isinstance(body, Atom):
        return format_pattern(body.pattern)
    if isinstance(body, Or):
        left = format_body(body.left)
        right = format_body(body.right)
        if isinstance(body.right, Or):        # right-nested needs parens
            right = f"({right})"
        return f"{left} or {right}"
    if isinstance(body, (And, Seq)):
        op = _CONJ_OPS[type(body)]
        left = format_body(body.left)
        if isinstance(body.left, Or):
            left = f"({left})"
        right = format_body(body.right)
        if isinstance(body.right, (And, Seq, Or)):
            right = f"({right})"
        return f"{left} {op} {right}"
    if isinstance(body, Nseq):
        return (f"{format_pattern(body.positive)} nseq "
                f"{format_pattern(body.negated)}")
    if isinstance(body, Kseq):
        return (f"{format_pattern(body.repeated)} kseq "
                f"{format_pattern(body.terminator)}")
    if isinstance(body, Lambda):
        inner = body.agg.var
        if body.agg.use_abs:
            inner = f"abs({inner})"
        has_time = not (isinstance(body.source.start_slot, Wildcard)
                        and isinstance(body.source.end_slot, Wildcard))
        src = format_pattern(body.source, with_timespec=has_time)
        return (f"lambda {{ {src}, *, {body.target.name} := "
                f"{body.agg.fn}({inner}) }}")
    raise TypeError(f"not a body expression: {body!r}")


def _format_aexpr(e, parent_level: int = 0) -> str:
    # levels: 1 additive, 2 multiplicative, 3 atomic
    if isinstance(e, NumConst):
        return render_number(e.value)
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, AbsOp):
        return f"abs({_format_aexpr(e.inner)})"
    if isinstance(e, BinOp):
        level = 2 if e.op in "*/" else 1
        left = _format_aexpr(e.left, 0)
        if _level(e.left) < level:
            left = f"({left})"
        right = _format_aexpr(e.right, 0)
        if _level(e.right) <= level:
            right = f"({right})"
        text = f"{left}{e.op}{right}"
        return text
    raise TypeError(f"not an arithmetic expression: {e!r}")


def _level(e) -> int:
    if isinstance(e, BinOp):
        return 2 if e.op in "*/" else 1
    return 3


def format_constraint(c: Constraint) -> str:
    return f"{_format_aexpr(c.lhs)}{c.op}{_format_aexpr(c.rhs)}"


def format_window(w: WindowSpec) -> str:
    if isinstance(w, CountWindow):
        return f"[count {w.n}]"
    if isinstance(w, RangeWindow):
        if w.duration_ms % 1000 == 0:
            return f"[range {w.duration_ms // 1000} s]"
        return f"[range {w.duration_ms} ms]"
    raise TypeError(f"not a window: {w!r}")


def format_rule(r: RuleAst) -> str:
    parts = [format_pattern(r.head), ":-", format_body(r.body)]
    if r.constraints:
        inner = ", ".join(format_constraint(c) for c in r.constraints)
        parts.append(f"where({inner})")
    if r.window is not None:
        parts.append(format_window(r.window))
    return " ".join(parts)
