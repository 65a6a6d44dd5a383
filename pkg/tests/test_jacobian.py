"""Derivatives of the refinement map against central finite differences."""

import random
from fractions import Fraction

import numpy as np

from oracles import random_planted_set
from drl.algebra import ConstraintSet, LinearExpr, clause
from drl.compiler import compile_chain
from drl.refiner import refine, refine_with_jacobian

EPS = Fraction(1, 10**6)
TAU = 1e-9
H = 1e-5


def expr(coeffs, bias=0):
    return LinearExpr.of({k: Fraction(v) for k, v in coeffs.items()}, Fraction(bias))


def make_layer(constraints, D, order=None):
    return compile_chain(ConstraintSet.of(constraints, D),
                         tuple(order or range(D)),
                         tuple(f"v{i}" for i in range(D)), EPS)


def test_constant_branch_zero_row():
    layer = make_layer([clause([expr({0: 1})])], 1)   # x0 >= 0
    got = refine_with_jacobian(layer, (-2.0,), TAU)
    assert got.refined == (0.0,)
    assert got.jacobian.tolist() == [[0.0]]


def test_chain_rule_through_prefix():
    layer = make_layer([clause([expr({1: 1, 0: -1})])], 2)   # x1 >= x0
    got = refine_with_jacobian(layer, (3.0, 1.0), TAU)
    assert got.refined == (3.0, 3.0)
    assert got.jacobian.tolist() == [[1.0, 0.0], [1.0, 0.0]]


def test_satisfied_sample_identity():
    layer = make_layer([clause([expr({1: 1, 0: -1})])], 2)
    got = refine_with_jacobian(layer, (1.0, 5.0), TAU)
    assert got.jacobian.tolist() == [[1.0, 0.0], [0.0, 1.0]]


def test_two_step_chain_rule():
    # x1 >= 2*x0, x2 >= 3*x1: snapping cascades through both rows.
    layer = make_layer([
        clause([expr({1: 1, 0: -2})]),
        clause([expr({2: 1, 1: -3})]),
    ], 3)
    got = refine_with_jacobian(layer, (1.0, 0.0, 0.0), TAU)
    assert got.refined == (1.0, 2.0, 6.0)
    assert got.jacobian.tolist() == [
        [1.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [6.0, 0.0, 0.0],
    ]


def test_lower_triangular_in_ordering_space():
    rng, nprng = random.Random(7), np.random.default_rng(7)
    for _ in range(30):
        D = rng.randint(2, 5)
        cset, _ = random_planted_set(rng, D, rng.randint(1, 6))
        order = list(range(D))
        rng.shuffle(order)
        layer = make_layer(list(cset.constraints), D, order)
        x = nprng.uniform(-10, 10, size=D)
        got = refine_with_jacobian(layer, x, TAU)
        J = got.jacobian[np.ix_(order, order)]
        assert np.allclose(J, np.tril(J))


def _provenance_pattern(result):
    return [(p.action, p.source_constraint, p.source_disjunct)
            for p in result.provenance]


def test_finite_difference_agreement():
    rng, nprng = random.Random(8), np.random.default_rng(8)
    checked = 0
    while checked < 120:
        D = rng.randint(1, 5)
        cset, _ = random_planted_set(rng, D, rng.randint(1, 6))
        order = list(range(D))
        rng.shuffle(order)
        layer = make_layer(list(cset.constraints), D, order)
        x = nprng.uniform(-10, 10, size=D)
        base = refine_with_jacobian(layer, x, TAU)
        pattern = _provenance_pattern(base)
        fd = np.zeros((D, D))
        on_boundary = False
        for b in range(D):
            xp, xm = x.copy(), x.copy()
            xp[b] += H
            xm[b] -= H
            rp, rm = refine(layer, xp, TAU), refine(layer, xm, TAU)
            if (_provenance_pattern(rp) != pattern
                    or _provenance_pattern(rm) != pattern):
                on_boundary = True
                break
            fd[:, b] = (np.array(rp.refined) - np.array(rm.refined)) / (2 * H)
        if on_boundary:
            continue
        denom = np.maximum(np.abs(fd), 1.0)
        assert np.max(np.abs(base.jacobian - fd) / denom) <= 1e-4
        checked += 1
