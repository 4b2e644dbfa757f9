"""Cold-path compilers shared by both kernel backends.

Patterns and constraints are compiled once (at add_rule) into flat
tuples of small integer opcodes; the hot per-event functions in the
selected backend interpret those programs.

Pattern position opcodes: 0 wildcard, 1 bind variable, 2 number
literal, 3 symbol literal.

Constraint programs are reverse-Polish: 0 push-const, 1 load-variable,
2 abs, 3 add, 4 sub, 5 mul, 6 div; a final compare opcode 10..15 maps
to < > <= >= == !=.
"""

from __future__ import annotations

from ..rules.ast import (
    AbsOp, BinOp, Constraint, EventPattern, NumConst, NumberLit,
    SymbolLit, VarRef, Variable, Wildcard,
)

P_WILD, P_VAR, P_NUM, P_SYM = 0, 1, 2, 3

R_CONST, R_LOAD, R_ABS, R_ADD, R_SUB, R_MUL, R_DIV = 0, 1, 2, 3, 4, 5, 6
CMP_CODES = {"<": 10, ">": 11, "<=": 12, ">=": 13, "==": 14, "!=": 15}

AGG_CODES = {"sum": 0, "avg": 1, "min": 2, "max": 3}


def _term_op(t):
    if isinstance(t, Wildcard):
        return (P_WILD, None)
    if isinstance(t, Variable):
        return (P_VAR, t.name)
    if isinstance(t, NumberLit):
        return (P_NUM, t.value)
    if isinstance(t, SymbolLit):
        return (P_SYM, t.text)
    raise TypeError(f"not a term: {t!r}")


def compile_pattern(p: EventPattern) -> tuple:
    """(name, arity, slot_ops, arg_ops) ready for match_event."""
    slot_ops = (_term_op(p.start_slot), _term_op(p.end_slot))
    arg_ops = tuple(_term_op(t) for t in p.arg_terms)
    return (p.name, len(arg_ops), slot_ops, arg_ops)


def _compile_aexpr(e, out: list):
    if isinstance(e, NumConst):
        out.append((R_CONST, e.value))
    elif isinstance(e, VarRef):
        out.append((R_LOAD, e.name))
    elif isinstance(e, AbsOp):
        _compile_aexpr(e.inner, out)
        out.append((R_ABS, None))
    elif isinstance(e, BinOp):
        _compile_aexpr(e.left, out)
        _compile_aexpr(e.right, out)
        code = {"+": R_ADD, "-": R_SUB, "*": R_MUL, "/": R_DIV}[e.op]
        out.append((code, None))
    else:
        raise TypeError(f"not an arithmetic expression: {e!r}")


# The compiled backend evaluates on a fixed-size stack; bound program
# depth here so both backends accept exactly the same rules.
MAX_STACK_DEPTH = 60


def _stack_depth(prog) -> int:
    depth = peak = 0
    for code, _ in prog:
        if code in (R_CONST, R_LOAD):
            depth += 1
            peak = max(peak, depth)
        elif code in (R_ADD, R_SUB, R_MUL, R_DIV):
            depth -= 1
        elif code >= 10:
            depth -= 2
    return peak


def compile_constraints(constraints) -> tuple:
    """Each constraint becomes one RPN program ending in a compare op."""
    progs = []
    for c in constraints:
        prog: list = []
        _compile_aexpr(c.lhs, prog)
        _compile_aexpr(c.rhs, prog)
        prog.append((CMP_CODES[c.op], None))
        if _stack_depth(prog) > MAX_STACK_DEPTH:
            from ..errors import ParseError
            raise ParseError("constraint expression nests too deep")
        progs.append(tuple(prog))
    return tuple(progs)
