"""Abstract syntax for the rule language.

A rule is ``head :- body where(...) [window]``. Bodies are binary trees
of ``and``/``seq``/``or`` over event patterns, or one of the special
whole-body forms: ``nseq`` (negation), ``kseq`` (Kleene repetition up
to a terminator), and ``lambda`` (windowed aggregation).

All nodes are immutable dataclasses; structural equality is the
equality used by round-trip tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, slots=True)
class Variable:
    name: str


@dataclass(frozen=True, slots=True)
class Wildcard:
    pass


WILDCARD = Wildcard()


@dataclass(frozen=True, slots=True)
class NumberLit:
    value: float


@dataclass(frozen=True, slots=True)
class SymbolLit:
    text: str


Term = Variable | Wildcard | NumberLit | SymbolLit


@dataclass(frozen=True, slots=True)
class EventPattern:
    """``name[start_slot, end_slot](t1, t2, ...)``.

    Matching requires exact arity: the pattern matches only events with
    exactly ``len(arg_terms)`` arguments.
    """

    name: str
    start_slot: Term = WILDCARD
    end_slot: Term = WILDCARD
    arg_terms: tuple[Term, ...] = ()


@dataclass(frozen=True, slots=True)
class Atom:
    pattern: EventPattern


@dataclass(frozen=True, slots=True)
class And:
    left: "BodyExpr"
    right: "BodyExpr"


@dataclass(frozen=True, slots=True)
class Seq:
    left: "BodyExpr"
    right: "BodyExpr"


@dataclass(frozen=True, slots=True)
class Or:
    left: "BodyExpr"
    right: "BodyExpr"


@dataclass(frozen=True, slots=True)
class Nseq:
    """Emit for each ``positive`` occurrence that is not followed by a
    consistent ``negated`` occurrence within the rule's range window."""

    positive: EventPattern
    negated: EventPattern


@dataclass(frozen=True, slots=True)
class Kseq:
    """One emission per ``terminator`` occurrence preceded by at least
    one qualifying ``repeated`` occurrence inside the window."""

    repeated: EventPattern
    terminator: EventPattern


@dataclass(frozen=True, slots=True)
class AggExpr:
    fn: str                     # sum | avg | min | max
    var: str                    # variable bound by the lambda source
    use_abs: bool = False       # aggregate |x| instead of x


@dataclass(frozen=True, slots=True)
class Lambda:
    source: EventPattern
    agg: AggExpr
    target: Variable


BodyExpr = Atom | And | Seq | Or | Nseq | Kseq | Lambda


# -- where-clause arithmetic -------------------------------------------

@dataclass(frozen=True, slots=True)
class VarRef:
    name: str


@dataclass(frozen=True, slots=True)
class NumConst:
    value: float


@dataclass(frozen=True, slots=True)
class AbsOp:
    inner: "ArithExpr"


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str                     # + - * /
    left: "ArithExpr"
    right: "ArithExpr"


ArithExpr = VarRef | NumConst | AbsOp | BinOp

CMP_OPS = ("<", ">", "<=", ">=", "==", "!=")


@dataclass(frozen=True, slots=True)
class Constraint:
    lhs: ArithExpr
    op: str
    rhs: ArithExpr


# -- windows -----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class CountWindow:
    n: int


@dataclass(frozen=True, slots=True)
class RangeWindow:
    duration_ms: int


WindowSpec = CountWindow | RangeWindow


@dataclass(frozen=True, slots=True)
class RuleAst:
    head: EventPattern
    body: BodyExpr
    constraints: tuple[Constraint, ...] = ()
    window: WindowSpec | None = None


# -- traversal helpers -------------------------------------------------

def pattern_vars(p: EventPattern) -> set[str]:
    """All variable names the pattern binds (argument and slot vars)."""
    out = set()
    for t in (p.start_slot, p.end_slot, *p.arg_terms):
        if isinstance(t, Variable):
            out.add(t.name)
    return out


def pattern_slot_vars(p: EventPattern) -> set[str]:
    out = set()
    for t in (p.start_slot, p.end_slot):
        if isinstance(t, Variable):
            out.add(t.name)
    return out


def iter_leaves(body: BodyExpr):
    """Yield the event patterns of an and/seq/or tree in left-to-right
    order. Special whole-body forms yield their operand patterns."""
    if isinstance(body, Atom):
        yield body.pattern
    elif isinstance(body, (And, Seq, Or)):
        yield from iter_leaves(body.left)
        yield from iter_leaves(body.right)
    elif isinstance(body, Nseq):
        yield body.positive
        yield body.negated
    elif isinstance(body, Kseq):
        yield body.repeated
        yield body.terminator
    elif isinstance(body, Lambda):
        yield body.source


def contains_join(body: BodyExpr) -> bool:
    """True when the body correlates multiple events and therefore
    needs a window to bound its buffers."""
    if isinstance(body, (And, Seq, Nseq, Kseq, Lambda)):
        return True
    if isinstance(body, Or):
        return contains_join(body.left) or contains_join(body.right)
    return False


def arith_vars(e: ArithExpr) -> set[str]:
    if isinstance(e, VarRef):
        return {e.name}
    if isinstance(e, AbsOp):
        return arith_vars(e.inner)
    if isinstance(e, BinOp):
        return arith_vars(e.left) | arith_vars(e.right)
    return set()


def free_variables(node) -> set[str]:
    """Exact set of variable names occurring in a pattern, body
    expression, or constraint."""
    if isinstance(node, EventPattern):
        return pattern_vars(node)
    if isinstance(node, Constraint):
        return arith_vars(node.lhs) | arith_vars(node.rhs)
    if isinstance(node, Atom):
        return pattern_vars(node.pattern)
    if isinstance(node, (And, Seq, Or)):
        return free_variables(node.left) | free_variables(node.right)
    if isinstance(node, Nseq):
        return pattern_vars(node.positive) | pattern_vars(node.negated)
    if isinstance(node, Kseq):
        return pattern_vars(node.repeated) | pattern_vars(node.terminator)
    if isinstance(node, Lambda):
        return pattern_vars(node.source) | {node.agg.var, node.target.name}
    raise TypeError(f"free_variables: unsupported node {type(node)!r}")


def bound_vars(body: BodyExpr) -> set[str]:
    """Variables guaranteed to be bound by a complete match of ``body``.

    An ``or`` binds only what both branches bind; head and constraint
    variables must come from this set.
    """
    if isinstance(body, Atom):
        return pattern_vars(body.pattern)
    if isinstance(body, (And, Seq)):
        return bound_vars(body.left) | bound_vars(body.right)
    if isinstance(body, Or):
        return bound_vars(body.left) & bound_vars(body.right)
    if isinstance(body, Nseq):
        # Negated-pattern variables join against the anchor but never
        # reach the head: the witness is absent in a successful match.
        return pattern_vars(body.positive)
    if isinstance(body, Kseq):
        return pattern_vars(body.repeated) | pattern_vars(body.terminator)
    if isinstance(body, Lambda):
        return {body.target.name}
    raise TypeError(f"bound_vars: unsupported node {type(body)!r}")


def bound_slot_vars(body: BodyExpr) -> set[str]:
    """Variables bound specifically by time-slot positions."""
    if isinstance(body, Atom):
        return pattern_slot_vars(body.pattern)
    if isinstance(body, (And, Seq)):
        return bound_slot_vars(body.left) | bound_slot_vars(body.right)
    if isinstance(body, Or):
        return bound_slot_vars(body.left) & bound_slot_vars(body.right)
    if isinstance(body, Nseq):
        return pattern_slot_vars(body.positive)
    if isinstance(body, Kseq):
        return (pattern_slot_vars(body.repeated)
                | pattern_slot_vars(body.terminator))
    if isinstance(body, Lambda):
        return set()
    raise TypeError(f"bound_slot_vars: unsupported node {type(body)!r}")
