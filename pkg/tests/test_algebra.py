"""Core algebra: expressions, canonical inequalities, clauses, evaluation."""

from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drl.algebra import (
    FALSE_INEQUALITY,
    Constraint,
    ConstraintSet,
    Inequality,
    LinearExpr,
    Sign,
    clause,
    entails,
    evaluate,
    occurrence_sign,
    satisfies,
    subsumption_prune,
    substitute,
)
from drl.errors import DimensionMismatchError, UnboundVariableError


def expr(coeffs, bias=0):
    return LinearExpr.of({k: Fraction(v) for k, v in coeffs.items()}, Fraction(bias))


def ineq(coeffs, bias=0):
    return Inequality.normalized(expr(coeffs, bias))


@st.composite
def linear_exprs(draw, max_var=5):
    n = draw(st.integers(0, max_var))
    coeffs = {}
    for k in range(n):
        num = draw(st.integers(-50, 50))
        den = draw(st.integers(1, 10))
        coeffs[k] = Fraction(num, den)
    bias = Fraction(draw(st.integers(-100, 100)), draw(st.integers(1, 10)))
    return LinearExpr.of(coeffs, bias)


class TestLinearExpr:
    def test_zero_coefficients_dropped(self):
        e = expr({0: 1, 1: 0, 2: -2})
        assert e.variables() == (0, 2)

    def test_add_sub_roundtrip(self):
        a = expr({0: 2, 1: -1}, 5)
        b = expr({1: 4}, -3)
        assert (a + b) - b == a

    def test_division_exact(self):
        e = expr({0: 3}, 1) / Fraction(3)
        assert e.coefficient(0) == 1
        assert e.bias == Fraction(1, 3)

    @given(a=linear_exprs(), b=linear_exprs())
    @settings(max_examples=300)
    def test_exactness_property(self, a, b):
        assert (a + b) - b == a

    def test_without_removes_term(self):
        e = expr({0: 1, 3: 2}, 7)
        assert e.without(3) == expr({0: 1}, 7)


class TestCanonicalForm:
    def test_leading_coefficient_unit(self):
        got = ineq({1: 4, 3: -2}, 8)
        assert got.expr == expr({1: 1, 3: Fraction(-1, 2)}, 2)

    def test_scaled_duplicates_collide(self):
        assert ineq({0: 2, 1: 2}, -6) == ineq({0: 1, 1: 1}, -3)

    def test_negative_leading_sign_preserved(self):
        got = ineq({0: -3, 1: 6})
        assert got.expr == expr({0: -1, 1: 2})

    def test_constant_scaled_by_bias(self):
        assert ineq({}, -17) == FALSE_INEQUALITY
        assert ineq({}, 5).expr.bias == 1

    def test_zero_constant_kept(self):
        assert ineq({}, 0).constant_true

    @given(e=linear_exprs())
    @settings(max_examples=300)
    def test_idempotent(self, e):
        once = Inequality.normalized(e)
        assert Inequality.normalized(once.expr) == once


class TestOccurrenceSign:
    def test_positive(self):
        # x5 - x1 >= 0 seen from x5 (indices 4 and 0)
        assert occurrence_sign(ineq({4: 1, 0: -1}), 4) is Sign.POSITIVE

    def test_negative(self):
        # x4 - x5 >= 0 seen from x5
        assert occurrence_sign(ineq({3: 1, 4: -1}), 4) is Sign.NEGATIVE

    def test_absent(self):
        assert occurrence_sign(ineq({3: 1, 4: -1}), 1) is Sign.ABSENT

    @given(e=linear_exprs(), var=st.integers(0, 5))
    @settings(max_examples=300)
    def test_partition_property(self, e, var):
        sign = occurrence_sign(Inequality.normalized(e), var)
        w = Inequality.normalized(e).expr.coefficient(var)
        expected = (Sign.POSITIVE if w > 0
                    else Sign.NEGATIVE if w < 0 else Sign.ABSENT)
        assert sign is expected


class TestEvaluate:
    def test_exact_cancellation(self):
        assert evaluate(expr({0: 1, 1: 1}, -3), (1.0, 2.0)) == 0.0

    def test_simple(self):
        assert evaluate(expr({0: 2}, 1), (0.5, 99.0)) == 2.0

    def test_worked_vector(self):
        # -x5 + x4 at x4=6, x5=5
        assert evaluate(expr({4: -1, 3: 1}), (1.0, 2.0, 4.0, 6.0, 5.0)) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            evaluate(expr({4: 1}), (1.0, 2.0))

    @given(e=linear_exprs(max_var=4),
           sample=st.lists(st.floats(-100, 100), min_size=4, max_size=4))
    @settings(max_examples=300)
    def test_substitute_evaluate_coherence(self, e, sample):
        c = clause([e])
        if c is None or c.is_false:
            return
        partial = substitute(c, dict(enumerate(sample)), tau=0.0)
        direct = evaluate(e, sample)
        if partial.trivially_satisfied:
            assert direct >= -1e-9 * max(1.0, abs(direct))
        else:
            # all disjuncts substituted to constant negatives
            assert direct < 1e-9 * max(1.0, abs(direct)) + 1e-12


class TestClause:
    def test_tautology_returns_none(self):
        assert clause([expr({}, 1)]) is None
        assert clause([expr({0: 1}), expr({}, 0)]) is None

    def test_constant_false_dropped(self):
        c = clause([expr({0: 1}, -1), expr({}, -5)])
        assert c == Constraint((ineq({0: 1}, -1),))

    def test_all_false_collapses(self):
        c = clause([expr({}, -5), expr({}, -2)])
        assert c is not None and c.is_false
        assert c.disjuncts == (FALSE_INEQUALITY,)

    def test_duplicate_disjuncts_merged(self):
        c = clause([expr({0: 2}, -2), expr({0: 1}, -1)])
        assert len(c.disjuncts) == 1

    def test_same_slope_keeps_weakest(self):
        c = clause([expr({0: 1}, -3), expr({0: 1}, -1)])
        assert c.disjuncts == (ineq({0: 1}, -1),)


class TestSubstitute:
    def psi2(self):
        # (x2 - x5 >= 0) or (x5 - x3 >= 0), indices 1, 4, 2
        return clause([expr({1: 1, 4: -1}), expr({4: 1, 2: -1})])

    def test_univariate_pivots(self):
        partial = substitute(self.psi2(), {1: 2.0, 2: 4.0}, tau=1e-9)
        assert partial.var == 4 and not partial.trivially_satisfied
        got = sorted((p.weight, p.residual) for p in partial.pivots)
        assert got == [(-1.0, 2.0), (1.0, -4.0)]

    def test_constant_true_short_circuits(self):
        # x4 - x1 >= 0 with x1=1, x4=6
        c = clause([expr({3: 1, 0: -1})])
        partial = substitute(c, {0: 1.0, 3: 6.0}, tau=1e-9)
        assert partial.trivially_satisfied

    def test_constant_false(self):
        c = clause([expr({0: 1}, -5)])
        partial = substitute(c, {0: 0.0}, tau=1e-9)
        assert not partial.trivially_satisfied and partial.pivots == ()

    def test_too_many_free_variables(self):
        with pytest.raises(UnboundVariableError):
            substitute(self.psi2(), {1: 2.0}, tau=1e-9)


def example3_set():
    psi1 = clause([expr({4: 1, 0: -1})])
    psi2 = clause([expr({1: 1, 4: -1}), expr({4: 1, 2: -1})])
    psi3 = clause([expr({3: 1, 4: -1})])
    return ConstraintSet.of([psi1, psi2, psi3], 5)


class TestSatisfies:
    def test_worked_example_satisfied(self):
        ok, verdicts = satisfies(example3_set(), (1, 2, 4, 6, 5), 1e-9)
        assert ok and verdicts == [True, True, True]

    def test_first_constraint_violated(self):
        ok, verdicts = satisfies(example3_set(), (1, 2, 4, 6, 0), 1e-9)
        assert not ok and verdicts[0] is False

    def test_empty_set_vacuous(self):
        ok, verdicts = satisfies(ConstraintSet.of([], 3), (0, 0, 0), 1e-9)
        assert ok and verdicts == []

    def test_dimension_checked(self):
        with pytest.raises(DimensionMismatchError):
            satisfies(example3_set(), (1.0, 2.0), 1e-9)


class TestSubsumption:
    def test_subset_subsumes(self):
        small = clause([expr({0: 1}, -1)])
        big = clause([expr({0: 1}, -1), expr({1: 1})])
        assert subsumption_prune([big, small]) == [small]

    def test_bias_entailment(self):
        stronger = clause([expr({0: 1}, -3)])   # x >= 3
        weaker = clause([expr({0: 1}, -1)])     # x >= 1
        assert entails(stronger, weaker)
        assert subsumption_prune([weaker, stronger]) == [stronger]

    def test_unrelated_kept(self):
        a = clause([expr({0: 1})])
        b = clause([expr({1: 1})])
        assert subsumption_prune([a, b]) == [a, b]


class TestConstraintSet:
    def test_dedup(self):
        a = clause([expr({0: 2}, -2)])
        b = clause([expr({0: 1}, -1)])
        assert len(ConstraintSet.of([a, b], 1)) == 1

    def test_dimension_validated(self):
        with pytest.raises(DimensionMismatchError):
            ConstraintSet.of([clause([expr({3: 1})])], 2)
