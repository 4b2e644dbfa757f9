"""Rule language: abstract syntax, parser, and canonical formatter."""

from .ast import (
    AbsOp, AggExpr, And, ArithExpr, Atom, BinOp, BodyExpr, Constraint,
    CountWindow, EventPattern, Kseq, Lambda, Nseq, NumConst, NumberLit,
    Or, RangeWindow, RuleAst, Seq, SymbolLit, Term, VarRef, Variable,
    WILDCARD, Wildcard, WindowSpec, bound_slot_vars, bound_vars,
    contains_join, free_variables, iter_leaves, pattern_slot_vars,
    pattern_vars,
)
from .fmt import (
    format_body, format_constraint, format_pattern, format_rule,
    format_term, format_window,
)
from .parser import MAX_RULE_BYTES, parse_rule, validate_rule

__all__ = [
    "AbsOp", "AggExpr", "And", "ArithExpr", "Atom", "BinOp", "BodyExpr",
    "Constraint", "CountWindow", "EventPattern", "Kseq", "Lambda",
    "MAX_RULE_BYTES", "Nseq", "NumConst", "NumberLit", "Or", "RangeWindow",
    "RuleAst", "Seq", "SymbolLit", "Term", "VarRef", "Variable", "WILDCARD",
    "Wildcard", "WindowSpec", "bound_slot_vars", "bound_vars",
    "contains_join", "format_body", "format_constraint", "format_pattern",
    "format_rule", "format_term", "format_window", "free_variables",
    "iter_leaves", "parse_rule", "pattern_slot_vars", "pattern_vars",
    "validate_rule",
]
