"""Self-checks for the test oracles: they must detect bad outputs."""

import random
from fractions import Fraction

import numpy as np

from oracles import (
    beats_refined,
    exact_sat,
    exact_satisfies,
    interval_feasible,
    random_planted_set,
)
from drl.algebra import ConstraintSet, LinearExpr, clause
from drl.compiler import compile_chain
from drl.refiner import BoundaryPair, refine_batch


def expr(coeffs, bias=0):
    return LinearExpr.of({k: Fraction(v) for k, v in coeffs.items()}, Fraction(bias))


class TestExactSat:
    def test_full_dimensional(self):
        cset = ConstraintSet.of([clause([expr({0: 1}), expr({1: 1})])], 2)
        assert exact_sat(cset)

    def test_thin_equality_region(self):
        # x0 == 1/3 (two opposing inequalities): a grid would miss it
        cset = ConstraintSet.of([
            clause([expr({0: 3}, -1)]),
            clause([expr({0: -3}, 1)]),
        ], 2)
        assert exact_sat(cset)

    def test_point_region_in_3d(self):
        cset = ConstraintSet.of([
            clause([expr({0: 1}, -1)]), clause([expr({0: -1}, 1)]),
            clause([expr({1: 1}, -2)]), clause([expr({1: -1}, 2)]),
            clause([expr({2: 1, 0: -1, 1: -1})]),
            clause([expr({2: -1, 0: 1, 1: 1})]),
        ], 3)
        assert exact_sat(cset)

    def test_infeasible(self):
        cset = ConstraintSet.of([
            clause([expr({0: 1}, -2)]),
            clause([expr({0: -1}, 1)]),
        ], 1)
        assert not exact_sat(cset)

    def test_disjunctive_infeasible(self):
        # (x<=0 or x>=5) and (1<=x<=4)
        cset = ConstraintSet.of([
            clause([expr({0: -1}), expr({0: 1}, -5)]),
            clause([expr({0: 1}, -1)]),
            clause([expr({0: -1}, 4)]),
        ], 1)
        assert not exact_sat(cset)

    def test_agrees_with_witness(self):
        rng = random.Random(99)
        for _ in range(60):
            D = rng.randint(1, 3)
            cset, witness = random_planted_set(rng, D, rng.randint(1, 6))
            assert exact_satisfies(cset, witness)
            assert exact_sat(cset)


class TestIntervalFeasible:
    def test_feasible_gap(self):
        pairs = [BoundaryPair(1.0, 5.0, 0, 0), BoundaryPair(-np.inf, 3.0, -1, 0)]
        assert interval_feasible(pairs, 1e-9)

    def test_infeasible_pair(self):
        # requires x <= 0 or x >= 5, and 1 <= x <= 4
        pairs = [BoundaryPair(0.0, 5.0, 0, 0),
                 BoundaryPair(-np.inf, 1.0, -1, 0),   # x >= 1
                 BoundaryPair(4.0, np.inf, 0, -1)]    # x <= 4
        assert not interval_feasible(pairs, 1e-9)


class TestBeatsRefined:
    def _layer(self, cset, order):
        return compile_chain(cset, order,
                             tuple(f"v{i}" for i in range(cset.dimension)),
                             Fraction(1, 10**6))

    def test_accepts_true_refinement(self):
        rng = random.Random(7)
        nprng = np.random.default_rng(7)
        for _ in range(20):
            D = rng.randint(1, 3)
            cset, _ = random_planted_set(rng, D, rng.randint(1, 5))
            order = list(range(D))
            rng.shuffle(order)
            layer = self._layer(cset, tuple(order))
            X = nprng.uniform(-10, 10, size=(3, D))
            out = refine_batch(layer, X, 1e-9)
            for r in range(3):
                assert beats_refined(cset, X[r], out.refined[r],
                                     tuple(order)) is None

    def test_flags_overshoot(self):
        # x0 >= 1; input 0 refines to 1; pretending it lands at 3 must fail
        cset = ConstraintSet.of([clause([expr({0: 1}, -1)])], 1)
        fake = np.array([3.0])
        assert beats_refined(cset, np.array([0.0]), fake, (0,)) == 0

    def test_flags_wrong_side(self):
        # (x<=1 or x>=10), input 2: optimal snap is 1, not 10
        cset = ConstraintSet.of(
            [clause([expr({0: -1}, 1), expr({0: 1}, -10)])], 1)
        fake = np.array([10.0])
        assert beats_refined(cset, np.array([2.0]), fake, (0,)) == 0

    def test_flags_later_coordinate(self):
        # x1 >= x0: from (0.5, 0): honest result keeps x0, snaps x1 to 0.5.
        # A doctored result that moved x1 to 2.0 is beatable at position 1.
        cset = ConstraintSet.of([clause([expr({1: 1, 0: -1})])], 2)
        fake = np.array([0.5, 2.0])
        assert beats_refined(cset, np.array([0.5, 0.0]), fake, (0, 1)) == 1
