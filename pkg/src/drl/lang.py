"""Parser and normalizer for the constraint DSL.

File format: UTF-8 text, ``#`` starts a comment, one formula per line.
An optional header line ``vars: a, b, c`` declares the variable universe;
otherwise identifiers bind to CSV headers supplied by the caller.

Grammar (EBNF)::

    formula := implic
    implic  := disj ["->" implic]
    disj    := conj {("or"|"|") conj}
    conj    := neg {("and"|"&") neg}
    neg     := ("not"|"!") neg | "(" formula ")" | atom
    atom    := expr cmp expr
    cmp     := ">=" | "<=" | ">" | "<" | "==" | "!="
    expr    := term {("+"|"-") term}
    term    := ["-"] (number ["*" ident] | ident)

Keywords are case-insensitive; ``implies`` is accepted as a word form of
``->``. Normalization rewrites every formula into a conjunction of
disjunctions of non-strict ``>= 0`` inequalities, replacing each strict
atom ``e > 0`` by ``e - epsilon >= 0``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .algebra import (
    Constraint,
    ConstraintSet,
    Inequality,
    LinearExpr,
    clause,
    subsumption_prune,
)
from .errors import NormalizationError, ParseError

COMPARATORS = (">=", "<=", ">", "<", "==", "!=")


@dataclass(frozen=True)
class VariableBinding:
    """Maps variable names to 0-based indices; order fixes the dimension."""

    names: tuple[str, ...]
    source: str = "declared"  # "declared" | "csv"

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            dupes = sorted({n for n in self.names if self.names.count(n) > 1})
            raise ValueError(f"duplicate variable names: {dupes}")

    @property
    def dimension(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int | None:
        try:
            return self.names.index(name)
        except ValueError:
            return None


@dataclass(frozen=True)
class NormalizationConfig:
    epsilon: Fraction = Fraction(1, 10**6)
    max_clauses: int = 10_000

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_clauses < 1:
            raise ValueError("max_clauses must be >= 1")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Atom:
    lhs: LinearExpr
    op: str
    rhs: LinearExpr
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Formula", ...]


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


Formula = Atom | Not | And | Or | Implies


# ---------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|>=|<=|==|!=|>|<|[()+\-*&|!])
""", re.VERBOSE)

_WORD_OPS = {"and": "&", "or": "|", "not": "!", "implies": "->"}


@dataclass
class _Token:
    kind: str   # "number" | "ident" | one of the operator strings | "end"
    text: str
    column: int


def _lex(line_text: str, line_no: int) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(line_text):
        m = _TOKEN_RE.match(line_text, pos)
        if not m:
            raise ParseError(f"unexpected character {line_text[pos]!r}",
                             line_no, pos + 1)
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        col = m.start() + 1
        text = m.group()
        if m.lastgroup == "number":
            tokens.append(_Token("number", text, col))
        elif m.lastgroup == "ident":
            word = _WORD_OPS.get(text.lower())
            if word is not None:
                tokens.append(_Token(word, text, col))
            else:
                tokens.append(_Token("ident", text, col))
        else:
            tokens.append(_Token(text, text, col))
    tokens.append(_Token("end", "", len(line_text) + 1))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser

class _Parser:
    def __init__(self, tokens: list[_Token], line_no: int, binding: VariableBinding):
        self.tokens = tokens
        self.i = 0
        self.line = line_no
        self.binding = binding

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def take(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of line'!r}",
                             self.line, tok.column)
        return self.take()

    def fail(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, self.line, tok.column)

    def parse_formula(self) -> Formula:
        node = self.parse_disj()
        if self.peek().kind == "->":
            self.take()
            return Implies(node, self.parse_formula())  # right-associative
        return node

    def parse_disj(self) -> Formula:
        parts = [self.parse_conj()]
        while self.peek().kind == "|":
            self.take()
            parts.append(self.parse_conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def parse_conj(self) -> Formula:
        parts = [self.parse_neg()]
        while self.peek().kind == "&":
            self.take()
            parts.append(self.parse_neg())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def parse_neg(self) -> Formula:
        tok = self.peek()
        if tok.kind == "!":
            self.take()
            return Not(self.parse_neg())
        if tok.kind == "(":
            self.take()
            node = self.parse_formula()
            self.expect(")")
            return node
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        start = self.peek()
        lhs = self.parse_expr()
        cmp_tok = self.peek()
        if cmp_tok.kind not in COMPARATORS:
            raise self.fail("expected comparison operator")
        self.take()
        rhs = self.parse_expr()
        return Atom(lhs, cmp_tok.kind, rhs, self.line, start.column)

    def parse_expr(self) -> LinearExpr:
        acc = self.parse_term()
        while self.peek().kind in ("+", "-"):
            op = self.take().kind
            term = self.parse_term()
            acc = acc + term if op == "+" else acc - term
        return acc

    def parse_term(self) -> LinearExpr:
        negate = False
        if self.peek().kind == "-":
            self.take()
            negate = True
        tok = self.peek()
        if tok.kind == "number":
            self.take()
            value = Fraction(tok.text)  # exact: d decimals -> denominator 10^d
            if self.peek().kind == "*":
                self.take()
                ident = self.expect("ident")
                expr = LinearExpr.variable(self._resolve(ident)).scaled(value)
            else:
                expr = LinearExpr.constant(value)
        elif tok.kind == "ident":
            self.take()
            expr = LinearExpr.variable(self._resolve(tok))
            if self.peek().kind == "*":
                raise self.fail("nonlinear term: variable * variable is not allowed")
        else:
            raise self.fail("expected number or identifier")
        return -expr if negate else expr

    def _resolve(self, tok: _Token) -> int:
        idx = self.binding.index(tok.text)
        if idx is None:
            raise ParseError(f"unknown identifier {tok.text!r}", self.line, tok.column)
        return idx


_VARS_HEADER_RE = re.compile(r"^\s*vars\s*:\s*(.*)$", re.IGNORECASE)


def _strip_comment(line_text: str) -> str:
    cut = line_text.find("#")
    return line_text if cut < 0 else line_text[:cut]


def read_variable_header(text: str) -> VariableBinding | None:
    """Extract the optional ``vars:`` declaration, if present."""
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw).strip()
        if not stripped:
            continue
        m = _VARS_HEADER_RE.match(stripped)
        if not m:
            return None
        names = tuple(n.strip() for n in m.group(1).split(",") if n.strip())
        if not names:
            raise ParseError("empty vars: declaration", line_no, 1)
        return VariableBinding(names, source="declared")
    return None


def parse(text: str, binding: VariableBinding) -> list[Formula]:
    """Parse every non-comment line into a formula AST."""
    formulas: list[Formula] = []
    saw_header = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw)
        if not stripped.strip():
            continue
        if not saw_header and not formulas and _VARS_HEADER_RE.match(stripped):
            saw_header = True
            continue
        parser = _Parser(_lex(stripped, line_no), line_no, binding)
        node = parser.parse_formula()
        end = parser.peek()
        if end.kind != "end":
            raise ParseError(f"unexpected trailing input {end.text!r}",
                             line_no, end.column)
        formulas.append(node)
    return formulas


# ---------------------------------------------------------------------------
# Normalization: NNF -> atom rewriting -> CNF over >=0 inequalities

_NEGATED = {">=": "<", "<=": ">", ">": "<=", "<": ">=", "==": "!=", "!=": "=="}


def _nnf(node: Formula, negate: bool) -> Formula:
    if isinstance(node, Atom):
        if negate:
            return Atom(node.lhs, _NEGATED[node.op], node.rhs, node.line, node.column)
        return node
    if isinstance(node, Not):
        return _nnf(node.child, not negate)
    if isinstance(node, Implies):
        # A -> B  ==  not A or B
        rewritten = Or((_nnf(node.lhs, True), _nnf(node.rhs, False)))
        return _nnf(rewritten, negate) if negate else rewritten
    if isinstance(node, And):
        children = tuple(_nnf(c, negate) for c in node.children)
        return Or(children) if negate else And(children)
    if isinstance(node, Or):
        children = tuple(_nnf(c, negate) for c in node.children)
        return And(children) if negate else Or(children)
    raise TypeError(f"unknown formula node {node!r}")


_Clause = tuple[Inequality, ...]


def _atom_clauses(atom: Atom, epsilon: Fraction) -> list[list[LinearExpr]]:
    """CNF clauses (lists of raw >=0 expressions) for one comparison atom."""
    diff = atom.lhs - atom.rhs
    eps = LinearExpr.constant(epsilon)
    if atom.op == ">=":
        return [[diff]]
    if atom.op == "<=":
        return [[-diff]]
    if atom.op == ">":
        return [[diff - eps]]
    if atom.op == "<":
        return [[(-diff) - eps]]
    if atom.op == "==":
        return [[diff], [-diff]]
    if atom.op == "!=":
        return [[diff - eps, (-diff) - eps]]
    raise ValueError(f"unknown comparator {atom.op!r}")


def _cnf(node: Formula, cfg: NormalizationConfig) -> list[list[LinearExpr]]:
    if isinstance(node, Atom):
        return _atom_clauses(node, cfg.epsilon)
    if isinstance(node, And):
        out: list[list[LinearExpr]] = []
        for child in node.children:
            out.extend(_cnf(child, cfg))
            _check_cap(len(out), cfg)
        return out
    if isinstance(node, Or):
        acc: list[list[LinearExpr]] = [[]]
        for child in node.children:
            clauses = _cnf(child, cfg)
            _check_cap(len(acc) * len(clauses), cfg)
            acc = [a + c for a in acc for c in clauses]
        return acc
    raise TypeError(f"normalization expects NNF without {type(node).__name__}")


def _check_cap(count: int, cfg: NormalizationConfig) -> None:
    if count > cfg.max_clauses:
        raise NormalizationError(
            f"CNF expansion exceeds max_clauses={cfg.max_clauses}")


def normalize(ast: Formula, cfg: NormalizationConfig,
              dimension: int) -> ConstraintSet:
    """Rewrite one formula into a deduplicated, subsumption-pruned set."""
    nnf = _nnf(ast, negate=False)
    raw_clauses = _cnf(nnf, cfg)
    constraints: list[Constraint] = []
    for raw in raw_clauses:
        c = clause(raw)
        if c is not None:  # tautologies restrict nothing
            constraints.append(c)
    return ConstraintSet.of(subsumption_prune(constraints), dimension)


def normalize_all(formulas: Iterable[Formula], cfg: NormalizationConfig,
                  dimension: int) -> ConstraintSet:
    """Normalize formulas and conjoin the results into one set."""
    acc: list[Constraint] = []
    for f in formulas:
        acc.extend(normalize(f, cfg, dimension).constraints)
    return ConstraintSet.of(subsumption_prune(acc), dimension)


def load_constraints(text: str, cfg: NormalizationConfig,
                     csv_binding: VariableBinding | None = None,
                     ) -> tuple[ConstraintSet, VariableBinding]:
    """Parse and normalize a constraint file.

    The variable universe comes from the ``vars:`` header when present,
    else from ``csv_binding`` (the data file's columns).
    """
    binding = read_variable_header(text)
    if binding is None:
        if csv_binding is None:
            raise ParseError(
                "no vars: header and no data file to bind identifiers to", 1, 1)
        binding = csv_binding
    formulas = parse(text, binding)
    return normalize_all(formulas, cfg, binding.dimension), binding


# ---------------------------------------------------------------------------
# Printing

def _format_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def _print_inequality(ineq: Inequality, names: Sequence[str]) -> str:
    # Scale by the lcm of denominators so every coefficient prints as an
    # integer the grammar can read back; positive scaling is sound.
    expr = ineq.expr
    denoms = [w.denominator for _, w in expr.terms] + [expr.bias.denominator]
    scaled = expr.scaled(Fraction(math.lcm(*denoms)))
    positives = [(k, w) for k, w in scaled.terms if w > 0]
    negatives = [(k, w) for k, w in scaled.terms if w < 0]
    parts: list[str] = []
    for k, w in positives + negatives:
        mag = abs(w)
        term = names[k] if mag == 1 else f"{mag.numerator}*{names[k]}"
        if not parts:
            parts.append(term if w > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if w > 0 else f"- {term}")
    bias = scaled.bias
    if bias != 0 or not parts:
        text = str(abs(bias.numerator))
        if not parts:
            parts.append(text if bias >= 0 else f"-{text}")
        else:
            parts.append(f"+ {text}" if bias > 0 else f"- {text}")
    return " ".join(parts) + " >= 0"


def roundtrip_print(cset: ConstraintSet, binding: VariableBinding) -> str:
    """Render a set as DSL text that reparses to an equal set."""
    lines: list[str] = []
    for c in cset.constraints:
        rendered = [_print_inequality(d, binding.names) for d in c.disjuncts]
        if len(rendered) == 1:
            lines.append(rendered[0])
        else:
            lines.append(" or ".join(f"({r})" for r in rendered))
    return "\n".join(lines) + ("\n" if lines else "")
