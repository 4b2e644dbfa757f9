"""Tokenizer, recursive-descent parser, and validator for rule text.

Grammar (authoritative EBNF, ``%`` starts a comment, whitespace and
newlines are insignificant)::

    rule        := pattern ":-" body where? window? "."?
    body        := disj
    disj        := conj ( "or" conj )*
    conj        := unit ( ("and" | "seq" | "nseq" | "kseq") unit )*
    unit        := pattern | "(" body ")" | lambda
    lambda      := "lambda" "{" lpattern "," "*" "," VAR ":=" agg "}"
    lpattern    := NAME timespec? "(" termlist? ")"
    pattern     := NAME timespec "(" termlist? ")"
    timespec    := "[" slot "," slot "]"
    slot        := "_" | IDENT
    termlist    := term ( "," term )*
    term        := "_" | VAR | NUMBER | SYMBOL
    where       := "where" "(" constraint ( "," constraint )* ")"
    constraint  := aexpr CMP aexpr
    aexpr       := VAR | NUMBER | "abs" "(" aexpr ")"
                 | aexpr ("+"|"-"|"*"|"/") aexpr | "(" aexpr ")"
    agg         := ("sum"|"avg"|"min"|"max") "(" (VAR | "abs" "(" VAR ")") ")"
    window      := "[" ( "count" INT | "range" INT ("s"|"ms") ) "]"
    CMP         := "<" | ">" | "<=" | ">=" | "==" | "!="

Uppercase-initial identifiers are variables; lowercase-initial ones are
symbols, except in time-slot positions (where any identifier is a
variable, matching the usual lowercase t1/t2 style) and inside
where-arithmetic (where any identifier refers to a bound variable).
``nseq``, ``kseq``, and ``lambda`` must form the entire body; ``and``,
``seq``, and ``or`` nest freely and associate left.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ArityError, ParseError, UnboundVariableError, WindowError
from .ast import (
    AbsOp, AggExpr, And, ArithExpr, Atom, BinOp, BodyExpr, CMP_OPS,
    Constraint, CountWindow, EventPattern, Kseq, Lambda, Nseq, NumConst,
    NumberLit, Or, RangeWindow, RuleAst, Seq, SymbolLit, Term, VarRef,
    Variable, WILDCARD, Wildcard, WindowSpec,
    arith_vars, bound_slot_vars, bound_vars, pattern_vars,
)

MAX_RULE_BYTES = 4096

# Keywords that may start or continue a body; reserved so that operator
# positions stay unambiguous. Everything else (count, range, abs, agg
# names, s, ms) is contextual.
RESERVED = {"and", "seq", "or", "nseq", "kseq", "lambda", "where"}

AGG_FNS = ("sum", "avg", "min", "max")

_TOKEN_RE = re.compile(
    r"""
      (?P<ws>\s+|%[^\n]*)
    | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    | (?P<num>(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?)
    | (?P<op>:-|:=|<=|>=|==|!=|[<>\[\](){},.*+\-/])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str       # 'name' | 'num' | literal operator text | 'eof'
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", offset=pos)
        if m.lastgroup != "ws":
            kind = {"name": "name", "num": "num"}.get(m.lastgroup, m.group(0))
            if kind == "op":
                kind = m.group(0)
            tokens.append(Token(kind, m.group(0), pos))
        pos = m.end()
    tokens.append(Token("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    # -- token plumbing --

    @property
    def cur(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at(self, kind: str) -> bool:
        return self.cur.kind == kind

    def at_name(self, text: str) -> bool:
        return self.cur.kind == "name" and self.cur.text == text

    def expect(self, kind: str) -> Token:
        if self.cur.kind != kind:
            raise ParseError(
                f"expected {kind!r}, found {self.cur.text or 'end of input'!r}",
                offset=self.cur.offset, expected={kind},
            )
        return self.advance()

    def fail(self, message: str, expected=None):
        raise ParseError(message, offset=self.cur.offset, expected=expected)

    # -- grammar --

    def rule(self) -> RuleAst:
        head = self.pattern(timespec_required=True)
        self.expect(":-")
        body = self.disj()
        constraints: tuple[Constraint, ...] = ()
        if self.at_name("where"):
            constraints = self.where()
        window = None
        if self.at("["):
            window = self.window()
        if self.at("."):
            self.advance()
        if not self.at("eof"):
            self.fail(f"trailing input {self.cur.text!r}")
        return RuleAst(head, body, constraints, window)

    def disj(self) -> BodyExpr:
        node = self.conj()
        while self.at_name("or"):
            self._reject_whole_body(node, "or")
            self.advance()
            right = self.conj()
            self._reject_whole_body(right, "or")
            node = Or(node, right)
        return node

    def conj(self) -> BodyExpr:
        node = self.unit()
        while self.cur.kind == "name" and self.cur.text in (
                "and", "seq", "nseq", "kseq"):
            op = self.advance().text
            if op in ("and", "seq"):
                self._reject_whole_body(node, op)
                right = self.unit()
                self._reject_whole_body(right, op)
                node = And(node, right) if op == "and" else Seq(node, right)
            else:
                if not isinstance(node, Atom):
                    self.fail(f"left operand of {op!r} must be a plain "
                              "event pattern")
                right = self.unit()
                if not isinstance(right, Atom):
                    self.fail(f"right operand of {op!r} must be a plain "
                              "event pattern")
                cls = Nseq if op == "nseq" else Kseq
                node = cls(node.pattern, right.pattern)
        return node

    def _reject_whole_body(self, node: BodyExpr, op: str):
        if isinstance(node, (Nseq, Kseq, Lambda)):
            kind = type(node).__name__.lower()
            self.fail(f"{kind} must form the entire rule body; it cannot "
                      f"be an operand of {op!r}")

    def unit(self) -> BodyExpr:
        if self.at("("):
            self.advance()
            node = self.disj()
            self.expect(")")
            return node
        if self.at_name("lambda"):
            return self.lambda_expr()
        if self.cur.kind == "name" and self.cur.text in RESERVED:
            self.fail(f"keyword {self.cur.text!r} cannot start an event "
                      "pattern")
        return Atom(self.pattern(timespec_required=True))

    def pattern(self, timespec_required: bool) -> EventPattern:
        name = self.expect("name").text
        start = end = WILDCARD
        if self.at("["):
            self.advance()
            start = self.slot()
            self.expect(",")
            end = self.slot()
            self.expect("]")
        elif timespec_required:
            self.fail("expected '[' (pattern timespec)", expected={"["})
        self.expect("(")
        terms: list[Term] = []
        if not self.at(")"):
            terms.append(self.term())
            while self.at(","):
                self.advance()
                terms.append(self.term())
        self.expect(")")
        return EventPattern(name, start, end, tuple(terms))

    def slot(self) -> Term:
        tok = self.cur
        if tok.kind == "name":
            self.advance()
            if tok.text == "_":
                return WILDCARD
            # Any identifier is a variable in slot position (t1, t2, T).
            return Variable(tok.text)
        self.fail("expected '_' or a slot variable")

    def term(self) -> Term:
        tok = self.cur
        if tok.kind == "name":
            self.advance()
            if tok.text == "_":
                return WILDCARD
            if tok.text[0].isupper():
                return Variable(tok.text)
            return SymbolLit(tok.text)
        if tok.kind == "num":
            self.advance()
            return NumberLit(float(tok.text))
        if tok.kind == "-":
            self.advance()
            num = self.expect("num")
            return NumberLit(-float(num.text))
        self.fail("expected a term ('_', variable, number, or symbol)")

    def lambda_expr(self) -> Lambda:
        self.advance()                       # 'lambda'
        self.expect("{")
        source = self.pattern(timespec_required=False)
        self.expect(",")
        self.expect("*")
        self.expect(",")
        target_tok = self.expect("name")
        if not target_tok.text[0].isupper():
            raise ParseError(
                "aggregation target must be an uppercase variable",
                offset=target_tok.offset)
        self.expect(":=")
        agg = self.agg()
        self.expect("}")
        return Lambda(source, agg, Variable(target_tok.text))

    def agg(self) -> AggExpr:
        fn_tok = self.expect("name")
        if fn_tok.text == "abs":
            raise ParseError(
                "abs is not a windowed aggregation; compose it, e.g. "
                "max(abs(X))", offset=fn_tok.offset)
        if fn_tok.text not in AGG_FNS:
            raise ParseError(
                f"unknown aggregation {fn_tok.text!r} (expected one of "
                f"{', '.join(AGG_FNS)})", offset=fn_tok.offset)
        self.expect("(")
        use_abs = False
        if self.at_name("abs"):
            self.advance()
            self.expect("(")
            var = self.expect("name").text
            self.expect(")")
            use_abs = True
        else:
            var = self.expect("name").text
        self.expect(")")
        return AggExpr(fn_tok.text, var, use_abs)

    def where(self) -> tuple[Constraint, ...]:
        self.advance()                       # 'where'
        self.expect("(")
        out = [self.constraint()]
        while self.at(","):
            self.advance()
            out.append(self.constraint())
        self.expect(")")
        return tuple(out)

    def constraint(self) -> Constraint:
        lhs = self.aexpr()
        if self.cur.kind not in CMP_OPS:
            self.fail("expected a comparison operator",
                      expected=set(CMP_OPS))
        op = self.advance().kind
        rhs = self.aexpr()
        return Constraint(lhs, op, rhs)

    def aexpr(self) -> ArithExpr:
        node = self.aterm()
        while self.cur.kind in ("+", "-"):
            op = self.advance().kind
            node = BinOp(op, node, self.aterm())
        return node

    def aterm(self) -> ArithExpr:
        node = self.afactor()
        while self.cur.kind in ("*", "/"):
            op = self.advance().kind
            node = BinOp(op, node, self.afactor())
        return node

    def afactor(self) -> ArithExpr:
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return NumConst(float(tok.text))
        if tok.kind == "-":
            self.advance()
            num = self.expect("num")
            return NumConst(-float(num.text))
        if tok.kind == "(":
            self.advance()
            node = self.aexpr()
            self.expect(")")
            return node
        if tok.kind == "name":
            if tok.text == "abs":
                self.advance()
                self.expect("(")
                inner = self.aexpr()
                self.expect(")")
                return AbsOp(inner)
            if tok.text == "_":
                self.fail("'_' cannot appear in where-arithmetic")
            self.advance()
            return VarRef(tok.text)
        self.fail("expected a number, variable, abs(...), or '('")

    def window(self) -> WindowSpec:
        self.advance()                       # '['
        kind_tok = self.expect("name")
        if kind_tok.text == "count":
            n = self._int("count")
            self.expect("]")
            if n < 1:
                raise WindowError(f"count window must be >= 1, got {n}")
            return CountWindow(n)
        if kind_tok.text == "range":
            amount = self._int("range")
            unit_tok = self.expect("name")
            if unit_tok.text == "s":
                ms = amount * 1000
            elif unit_tok.text == "ms":
                ms = amount
            else:
                raise ParseError("expected time unit 's' or 'ms'",
                                 offset=unit_tok.offset)
            self.expect("]")
            if ms < 1:
                raise WindowError(f"range window must be >= 1 ms, got {ms}")
            return RangeWindow(ms)
        raise ParseError("expected 'count' or 'range'",
                         offset=kind_tok.offset)

    def _int(self, what: str) -> int:
        tok = self.expect("num")
        value = float(tok.text)
        if not value.is_integer():
            raise ParseError(f"{what} takes an integer",
                             offset=tok.offset)
        return int(value)


def parse_rule(text: str) -> RuleAst:
    """Parse and validate one rule. Multi-line input is fine.

    Raises ParseError (with offset), UnboundVariableError, ArityError,
    or WindowError.
    """
    if len(text.encode("utf-8")) > MAX_RULE_BYTES:
        raise ParseError(
            f"rule text exceeds {MAX_RULE_BYTES} bytes")
    ast = _Parser(text).rule()
    validate_rule(ast)
    return ast


def validate_rule(ast: RuleAst):
    """Enforce the binding and window invariants on a parsed rule."""
    body = ast.body
    bindable = bound_vars(body)
    slot_bindable = bound_slot_vars(body)

    # Head arguments: variables must be bound; wildcards are
    # meaningless in an emission and rejected.
    if isinstance(body, Lambda):
        allowed = {body.target.name}
        for t in ast.head.arg_terms:
            if isinstance(t, Wildcard):
                raise ParseError("'_' cannot appear in head arguments")
            if isinstance(t, Variable) and t.name not in allowed:
                raise UnboundVariableError(
                    t.name, "lambda heads may only carry the aggregation "
                    "target")
        for t in (ast.head.start_slot, ast.head.end_slot):
            if not isinstance(t, Wildcard):
                raise ParseError(
                    "lambda heads take wildcard time slots")
    else:
        for t in ast.head.arg_terms:
            if isinstance(t, Wildcard):
                raise ParseError("'_' cannot appear in head arguments")
            if isinstance(t, Variable) and t.name not in bindable:
                raise UnboundVariableError(t.name)
        for t in (ast.head.start_slot, ast.head.end_slot):
            if isinstance(t, Variable) and t.name not in slot_bindable:
                raise UnboundVariableError(
                    t.name, "head time slots must be '_' or a variable "
                    "bound by a body time slot")

    # Constraints: every referenced variable must be bound by a body
    # pattern. For nseq only the positive pattern counts (a constraint
    # on an absent witness has no value to test); for lambda the source
    # pattern's variables filter samples and the target is off-limits.
    if isinstance(body, Lambda):
        constraint_scope = pattern_vars(body.source)
        detail = "lambda constraints filter samples and may only use " \
                 "source-pattern variables"
    elif isinstance(body, Nseq):
        constraint_scope = pattern_vars(body.positive)
        detail = "nseq constraints may only use positive-pattern variables"
    else:
        constraint_scope = bindable
        detail = ""
    for c in ast.constraints:
        for name in sorted(arith_vars(c.lhs) | arith_vars(c.rhs)):
            if name not in constraint_scope:
                raise UnboundVariableError(name, detail)

    if isinstance(body, Lambda):
        if body.agg.var not in pattern_vars(body.source):
            raise ArityError(
                f"aggregation variable {body.agg.var!r} is not bound by "
                "the source pattern")
        if body.target.name in pattern_vars(body.source):
            raise ParseError(
                f"aggregation target {body.target.name!r} collides with a "
                "source-pattern variable")

    if isinstance(body, Nseq) and isinstance(ast.window, CountWindow):
        raise WindowError("nseq needs a range window (its deadline is a "
                          "time span, not an event count)")
