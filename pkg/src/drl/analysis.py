"""Dataset violation metrics and variable-ordering heuristics.

Metrics are evaluated against the user's (pre-elimination) constraint set:

  * ``cvr``  -- percentage of rows violating at least one constraint;
  * ``scvc`` -- mean over rows of the percentage of violated constraints;
  * ``cvc``  -- percentage of constraints violated by at least one row.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

import numpy as np

from .algebra import ConstraintSet
from .errors import DimensionMismatchError


@dataclass(frozen=True)
class MetricsReport:
    cvr: float
    scvc: float
    cvc: float
    per_constraint_violation_counts: tuple[int, ...]
    n_rows: int
    n_constraints: int

    def to_json(self) -> str:
        return json.dumps({
            "cvr": self.cvr,
            "scvc": self.scvc,
            "cvc": self.cvc,
            "per_constraint_violation_counts":
                list(self.per_constraint_violation_counts),
            "n_rows": self.n_rows,
            "n_constraints": self.n_constraints,
        }, indent=2) + "\n"


def violation_matrix(cset: ConstraintSet, values: np.ndarray,
                     tol: float) -> np.ndarray:
    """Boolean (n_rows, n_constraints) matrix; True marks a violation."""
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != cset.dimension:
        raise DimensionMismatchError(
            f"expected (n, {cset.dimension}) matrix, got {X.shape}")
    n = X.shape[0]
    out = np.empty((n, len(cset.constraints)), dtype=bool)
    for i, c in enumerate(cset.constraints):
        sat = np.zeros(n, dtype=bool)
        for d in c.disjuncts:
            acc = np.full(n, float(d.expr.bias))
            for k, w in d.expr.terms:
                acc += float(w) * X[:, k]
            sat |= acc >= -tol
        out[:, i] = ~sat
    return out


def metrics(cset: ConstraintSet, values: np.ndarray, tol: float) -> MetricsReport:
    matrix = violation_matrix(cset, values, tol)
    return metrics_from_matrix(matrix)


def metrics_from_matrix(matrix: np.ndarray) -> MetricsReport:
    n, m = matrix.shape
    if n == 0 or m == 0:
        return MetricsReport(0.0, 0.0, 0.0, tuple([0] * m), n, m)
    per_constraint = matrix.sum(axis=0)
    per_row = matrix.sum(axis=1)
    cvr = 100.0 * float(np.count_nonzero(per_row)) / n
    scvc = float(np.mean(100.0 * per_row / m))
    cvc = 100.0 * float(np.count_nonzero(per_constraint)) / m
    return MetricsReport(cvr, scvc, cvc,
                         tuple(int(v) for v in per_constraint), n, m)


# ---------------------------------------------------------------------------
# Variable orderings


@dataclass(frozen=True)
class VariableOrdering:
    """A permutation of variable indices plus how it was obtained."""

    order: tuple[int, ...]
    method: str                       # given | random | corr | kde | file
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("ordering is not a permutation")

    def names(self, all_names: tuple[str, ...]) -> list[str]:
        return [all_names[i] for i in self.order]


def ordering_given(D: int) -> VariableOrdering:
    return VariableOrdering(tuple(range(D)), "given")


def ordering_random(D: int, seed: int) -> VariableOrdering:
    """Fisher-Yates shuffle driven by Python's Mersenne Twister
    (``random.Random(seed)``), so the permutation is reproducible."""
    if D < 1:
        raise ValueError("D must be >= 1")
    order = list(range(D))
    random.Random(seed).shuffle(order)
    return VariableOrdering(tuple(order), "random", {"seed": seed})


def _pearson_matrix(values: np.ndarray) -> np.ndarray:
    # Zero-variance columns get correlation 0 with everything.
    X = np.asarray(values, dtype=np.float64)
    std = X.std(axis=0)
    safe = np.where(std == 0, 1.0, std)
    Z = (X - X.mean(axis=0)) / safe
    corr = (Z.T @ Z) / X.shape[0]
    corr[std == 0, :] = 0.0
    corr[:, std == 0] = 0.0
    return corr


def ordering_corr(real: np.ndarray, synthetic: np.ndarray) -> VariableOrdering:
    """Rank variables by how much their pairwise correlations drift between
    the real and synthetic data; most faithful variables come first."""
    real = np.asarray(real, dtype=np.float64)
    synthetic = np.asarray(synthetic, dtype=np.float64)
    if real.shape[1] != synthetic.shape[1]:
        raise DimensionMismatchError("column counts differ")
    if real.shape[0] < 2 or synthetic.shape[0] < 2:
        raise ValueError("need at least 2 rows in each dataset")
    diff = np.abs(_pearson_matrix(real) - _pearson_matrix(synthetic))
    np.fill_diagonal(diff, 0.0)
    scores = diff.sum(axis=1)
    order = tuple(int(i) for i in np.argsort(scores, kind="stable"))
    return VariableOrdering(order, "corr",
                            {"scores": [float(s) for s in scores]})


def ordering_kde(real: np.ndarray, synthetic: np.ndarray,
                 bins: int = 32) -> VariableOrdering:
    """Rank variables by the KL divergence between per-variable histograms
    of the real and synthetic data (real || synthetic), ascending.

    Distributions are discrete: equal-width bins over the union range with
    Laplace smoothing. A smooth density-estimate variant is not implemented.
    """
    real = np.asarray(real, dtype=np.float64)
    synthetic = np.asarray(synthetic, dtype=np.float64)
    if real.shape[1] != synthetic.shape[1]:
        raise DimensionMismatchError("column counts differ")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    alpha = 1e-9
    scores: list[float] = []
    for j in range(real.shape[1]):
        a, b = real[:, j], synthetic[:, j]
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        if lo == hi:
            scores.append(0.0)
            continue
        edges = np.linspace(lo, hi, bins + 1)
        p = np.histogram(a, bins=edges)[0].astype(np.float64)
        q = np.histogram(b, bins=edges)[0].astype(np.float64)
        p = (p + alpha) / (p + alpha).sum()
        q = (q + alpha) / (q + alpha).sum()
        scores.append(float(np.sum(p * np.log(p / q))))
    order = tuple(int(i) for i in np.argsort(np.array(scores), kind="stable"))
    return VariableOrdering(order, "kde", {"bins": bins, "scores": scores})
