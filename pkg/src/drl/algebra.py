"""Exact symbolic algebra for linear expressions, inequalities and constraints.

All compile-time arithmetic runs on arbitrary-precision rationals
(:class:`fractions.Fraction`), so resolution and deduplication are exact.
Floating point enters only where samples do: :func:`evaluate` and
:func:`substitute`.

Conventions:
  * variable indices are 0-based ``int`` in ``0..D-1``;
  * an :class:`Inequality` with expression ``e`` means ``e >= 0``;
  * a :class:`Constraint` is a disjunction of inequalities;
  * a :class:`ConstraintSet` is a conjunction of constraints.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import DimensionMismatchError, UnboundVariableError

Rational = Fraction

_ZERO = Fraction(0)
_ONE = Fraction(1)


@dataclass(frozen=True)
class LinearExpr:
    """Sparse linear expression ``sum(w_k * x_k) + bias``.

    ``terms`` is sorted by variable index and stores no zero coefficients,
    so structurally equal expressions compare and hash equal.
    """

    terms: tuple[tuple[int, Fraction], ...]
    bias: Fraction

    @staticmethod
    def of(coeffs: Mapping[int, Fraction | int] | Iterable[tuple[int, Fraction | int]],
           bias: Fraction | int = 0) -> LinearExpr:
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[int, Fraction] = {}
        for k, w in items:
            if k < 0:
                raise ValueError(f"negative variable index {k}")
            acc[k] = acc.get(k, _ZERO) + Fraction(w)
        terms = tuple((k, w) for k, w in sorted(acc.items()) if w != 0)
        return LinearExpr(terms, Fraction(bias))

    @staticmethod
    def constant(bias: Fraction | int) -> LinearExpr:
        return LinearExpr((), Fraction(bias))

    @staticmethod
    def variable(index: int) -> LinearExpr:
        return LinearExpr(((index, _ONE),), _ZERO)

    def coefficient(self, var: int) -> Fraction:
        for k, w in self.terms:
            if k == var:
                return w
        return _ZERO

    def variables(self) -> tuple[int, ...]:
        return tuple(k for k, _ in self.terms)

    @property
    def is_constant(self) -> bool:
        return not self.terms

    def __add__(self, other: LinearExpr) -> LinearExpr:
        return LinearExpr.of(self.terms + other.terms, self.bias + other.bias)

    def __sub__(self, other: LinearExpr) -> LinearExpr:
        return self + (-other)

    def __neg__(self) -> LinearExpr:
        return LinearExpr(tuple((k, -w) for k, w in self.terms), -self.bias)

    def scaled(self, factor: Fraction) -> LinearExpr:
        if factor == 0:
            return LinearExpr((), _ZERO)
        return LinearExpr(tuple((k, w * factor) for k, w in self.terms),
                          self.bias * factor)

    def __truediv__(self, divisor: Fraction) -> LinearExpr:
        if divisor == 0:
            raise ZeroDivisionError("division of linear expression by zero")
        return self.scaled(_ONE / Fraction(divisor))

    def without(self, var: int) -> LinearExpr:
        """The expression with any ``var`` term removed (the residual phi)."""
        return LinearExpr(tuple((k, w) for k, w in self.terms if k != var), self.bias)


class Sign(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    ABSENT = "absent"


@dataclass(frozen=True)
class Inequality:
    """Canonical linear inequality ``expr >= 0``.

    Canonical form: the coefficient of the smallest-index variable has
    absolute value 1 (constant inequalities are scaled so the bias is
    0 or +-1). Scaling by a positive factor preserves the solution set,
    so syntactic equality catches scaled duplicates.
    """

    expr: LinearExpr

    @staticmethod
    def normalized(expr: LinearExpr) -> Inequality:
        if expr.terms:
            lead = abs(expr.terms[0][1])
        else:
            lead = abs(expr.bias)
        if lead not in (0, 1):
            expr = expr / lead
        return Inequality(expr)

    @property
    def is_constant(self) -> bool:
        return not self.expr.terms

    @property
    def constant_true(self) -> bool:
        return not self.expr.terms and self.expr.bias >= 0

    @property
    def constant_false(self) -> bool:
        return not self.expr.terms and self.expr.bias < 0

    def sort_key(self):
        return (self.expr.terms, self.expr.bias)


FALSE_INEQUALITY = Inequality.normalized(LinearExpr.constant(-1))


def occurrence_sign(ineq: Inequality, var: int) -> Sign:
    """Whether ``var`` occurs positively, negatively, or not at all."""
    w = ineq.expr.coefficient(var)
    if w > 0:
        return Sign.POSITIVE
    if w < 0:
        return Sign.NEGATIVE
    return Sign.ABSENT


@dataclass(frozen=True)
class Constraint:
    """Disjunction of canonical inequalities, stored sorted and deduplicated."""

    disjuncts: tuple[Inequality, ...]

    def variables(self) -> set[int]:
        out: set[int] = set()
        for d in self.disjuncts:
            out.update(d.expr.variables())
        return out

    def mentions(self, var: int) -> bool:
        return any(d.expr.coefficient(var) != 0 for d in self.disjuncts)

    @property
    def is_false(self) -> bool:
        return all(d.constant_false for d in self.disjuncts)

    def sort_key(self):
        return tuple(d.sort_key() for d in self.disjuncts)


def clause(disjuncts: Iterable[Inequality | LinearExpr]) -> Constraint | None:
    """Build a constraint from raw disjuncts; ``None`` means tautology.

    Constant-true disjuncts make the whole clause trivially satisfied.
    Constant-false disjuncts restrict nothing and are dropped; if every
    disjunct is constant-false the unsatisfiable clause ``-1 >= 0`` remains.
    Disjuncts sharing a linear part are merged into the weakest one
    (largest bias): ``e + b1 >= 0 or e + b2 >= 0`` equals
    ``e + max(b1, b2) >= 0``.
    """
    by_slope: dict[tuple, Inequality] = {}
    for d in disjuncts:
        ineq = d if isinstance(d, Inequality) else Inequality.normalized(d)
        if ineq.constant_true:
            return None
        if ineq.constant_false:
            continue
        key = ineq.expr.terms
        held = by_slope.get(key)
        if held is None or ineq.expr.bias > held.expr.bias:
            by_slope[key] = ineq
    if not by_slope:
        return Constraint((FALSE_INEQUALITY,))
    return Constraint(tuple(sorted(by_slope.values(), key=Inequality.sort_key)))


def dedup_constraints(constraints: Iterable[Constraint]) -> list[Constraint]:
    """Order-preserving removal of syntactically equal constraints."""
    return list(dict.fromkeys(constraints))


def entails(stronger: Constraint, weaker: Constraint) -> bool:
    """Clause-level entailment by slope matching.

    ``stronger`` entails ``weaker`` when every disjunct of ``stronger``
    has a disjunct in ``weaker`` with the same linear part and a bias at
    least as large (``e + b >= 0`` implies ``e + b' >= 0`` for ``b' >= b``).
    Subset clauses are the equal-bias special case.
    """
    available = {d.expr.terms: d.expr.bias for d in weaker.disjuncts}
    for d in stronger.disjuncts:
        bias = available.get(d.expr.terms)
        if bias is None or bias < d.expr.bias:
            return False
    return True


class EntailmentIndex:
    """Incremental registry of clauses with fast entailment queries.

    Slope tuples are interned to small ints so repeated scans avoid
    rehashing rational tuples.
    """

    def __init__(self):
        self._slope_ids: dict[tuple, int] = {}
        self._reps: list[list[tuple[int, Fraction]]] = []
        self._items: list[Constraint] = []

    def __len__(self) -> int:
        return len(self._items)

    def _rep(self, c: Constraint) -> list[tuple[int, Fraction]]:
        ids = self._slope_ids
        return [(ids.setdefault(d.expr.terms, len(ids)), d.expr.bias)
                for d in c.disjuncts]

    def add(self, c: Constraint) -> None:
        self._reps.append(self._rep(c))
        self._items.append(c)

    def is_entailed(self, c: Constraint) -> bool:
        """True when some registered clause entails ``c`` (or equals it)."""
        mine = dict(self._rep(c))
        n = len(mine)
        for other in self._reps:
            if len(other) > n:
                continue  # distinct-slope clause with more disjuncts cannot entail
            for sid, bias in other:
                held = mine.get(sid)
                if held is None or held < bias:
                    break
            else:
                return True
        return False

    def pruned(self) -> list[Constraint]:
        """Members not entailed by any other member, in insertion order."""
        keep: list[Constraint] = []
        for i, c in enumerate(self._items):
            mine = dict(self._reps[i])
            n = len(mine)
            subsumed = False
            for j, other in enumerate(self._reps):
                if j == i or len(other) > n:
                    continue
                for sid, bias in other:
                    held = mine.get(sid)
                    if held is None or held < bias:
                        break
                else:
                    subsumed = True
                    break
            if not subsumed:
                keep.append(c)
        return keep


def subsumption_prune(constraints: Iterable[Constraint]) -> list[Constraint]:
    """Drop every clause entailed by another clause.

    Removing an entailed (weaker) clause keeps the conjunction's solution
    set unchanged. Two distinct clauses cannot entail each other, so the
    result is order-stable.
    """
    items = dedup_constraints(constraints)
    if len(items) <= 1:
        return items
    index = EntailmentIndex()
    for c in items:
        index.add(c)
    return index.pruned()


@dataclass(frozen=True)
class ConstraintSet:
    """Conjunction of constraints over variables ``0..dimension-1``."""

    constraints: tuple[Constraint, ...]
    dimension: int

    @staticmethod
    def of(constraints: Iterable[Constraint], dimension: int) -> ConstraintSet:
        items = dedup_constraints(constraints)
        for c in items:
            bad = [v for v in c.variables() if v >= dimension]
            if bad:
                raise DimensionMismatchError(
                    f"constraint mentions variable index {max(bad)} "
                    f"but dimension is {dimension}")
        return ConstraintSet(tuple(items), dimension)

    def __len__(self) -> int:
        return len(self.constraints)


def evaluate(expr: LinearExpr, sample: Sequence[float]) -> float:
    """``sum(w_k * sample[k]) + bias`` in float64.

    Accumulation is sequential in ascending variable order; the refinement
    engine reproduces the same order so results agree bitwise.
    """
    if expr.terms and expr.terms[-1][0] >= len(sample):
        raise DimensionMismatchError(
            f"expression uses variable {expr.terms[-1][0]} but sample has "
            f"dimension {len(sample)}")
    acc = float(expr.bias)
    for k, w in expr.terms:
        acc += float(w) * sample[k]
    return acc


@dataclass(frozen=True)
class PivotTerm:
    """One disjunct ``w*x + phi >= 0`` after substitution of everything but x."""

    weight: float          # float(w), nonzero
    residual: float        # phi evaluated at the bindings
    disjunct_index: int    # position in the constraint's disjunct tuple


@dataclass(frozen=True)
class PartialConstraint:
    """A constraint after substitution, univariate in ``var`` (or constant).

    ``trivially_satisfied`` means some substituted disjunct is a constant
    ``>= -tau``; an unsatisfied partial with no pivots is constant-false.
    """

    var: int | None
    trivially_satisfied: bool
    pivots: tuple[PivotTerm, ...]


def substitute(constraint: Constraint, bindings: Mapping[int, float],
               tau: float = 0.0) -> PartialConstraint:
    """Substitute bound variables, leaving at most one variable free.

    Pivot disjuncts are rescaled exactly so the free variable's weight is
    +-1; boundary values are then independent of how the stored inequality
    happened to be scaled. Raises :class:`UnboundVariableError` when more
    than one variable of the constraint is missing from ``bindings``.
    """
    free = sorted(constraint.variables() - set(bindings))
    if len(free) > 1:
        raise UnboundVariableError(
            f"substitution leaves variables {free} free; at most one allowed")
    var = free[0] if free else None
    pivots: list[PivotTerm] = []
    for j, d in enumerate(constraint.disjuncts):
        if var is not None:
            w = d.expr.coefficient(var)
        else:
            w = _ZERO
        if w != 0:
            residual = d.expr.without(var) / abs(w)
            weight = 1.0 if w > 0 else -1.0
            pivots.append(PivotTerm(weight, _eval_at(residual, bindings), j))
        elif _eval_at(d.expr, bindings) >= -tau:
            return PartialConstraint(var, True, ())
    return PartialConstraint(var, False, tuple(pivots))


def _eval_at(expr: LinearExpr, bindings: Mapping[int, float]) -> float:
    acc = float(expr.bias)
    for k, w in expr.terms:
        try:
            acc += float(w) * bindings[k]
        except KeyError:
            raise UnboundVariableError(f"variable {k} is not bound") from None
    return acc


def satisfies(cset: ConstraintSet, sample: Sequence[float],
              tol: float) -> tuple[bool, list[bool]]:
    """Check a sample against every constraint.

    Returns ``(all_ok, verdicts)`` where ``verdicts[i]`` is True when
    constraint ``i`` has some disjunct evaluating ``>= -tol``.
    """
    if len(sample) != cset.dimension:
        raise DimensionMismatchError(
            f"sample has dimension {len(sample)}, expected {cset.dimension}")
    verdicts: list[bool] = []
    for c in cset.constraints:
        verdicts.append(any(evaluate(d.expr, sample) >= -tol for d in c.disjuncts))
    return all(verdicts), verdicts
