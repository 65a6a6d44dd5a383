"""Apply a compiled layer: project samples onto the constraint region.

Variables are processed once each, in the compiled ordering. At each step
the constraints that mention the current variable are reduced to univariate
interval conditions by substituting the already-refined prefix; a value
that violates them is snapped to the nearest boundary that itself satisfies
every condition.

The engine is vectorized over rows, and every arithmetic step is
elementwise with a fixed accumulation order, so results are bit-identical
whatever the batch size, row chunking or worker count. Snapped values are
recomputed from the constraint coefficients and the refined prefix at the
moment of snapping; no boundary values are cached across steps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .algebra import PartialConstraint
from .compiler import CompiledLayer
from .data import Dataset
from .errors import (
    DimensionMismatchError,
    DrlError,
    NumericFailureError,
    UnsatError,
)

DEFAULT_TAU = 1e-9

# Provenance actions, one per refined coordinate.
KEPT = "kept"
SNAPPED_LEFT = "snapped_left"
SNAPPED_RIGHT = "snapped_right"
TRIVIALLY_FREE = "trivially_free"
FAILED = "failed"

ACTIONS = (KEPT, SNAPPED_LEFT, SNAPPED_RIGHT, TRIVIALLY_FREE, FAILED)
A_KEPT, A_LEFT, A_RIGHT, A_FREE, A_FAILED = range(5)


@dataclass(frozen=True)
class BoundaryPair:
    """Univariate interval condition: satisfied left of ``left`` or right of
    ``right`` (infinities mark absent bounds)."""

    left: float
    right: float
    left_source: int    # disjunct index backing the finite bound, -1 if none
    right_source: int


def boundaries(partial: PartialConstraint) -> BoundaryPair | None:
    """Boundary pair of a substituted constraint; ``None`` when it imposes
    nothing (trivially satisfied, per its constant disjuncts)."""
    if partial.trivially_satisfied:
        return None
    left, right = -np.inf, np.inf
    left_src = right_src = -1
    for p in partial.pivots:
        bound = -p.residual / p.weight
        if p.weight < 0:
            if bound > left:
                left, left_src = bound, p.disjunct_index
        else:
            if bound < right:
                right, right_src = bound, p.disjunct_index
    return BoundaryPair(left, right, left_src, right_src)


def pair_satisfied(pair: BoundaryPair, v: float, tol: float) -> bool:
    return v <= pair.left + tol or v >= pair.right - tol


def closest_bounds(pairs: Sequence[BoundaryPair], v: float, tol: float,
                   ) -> tuple[float | None, float | None, int, int]:
    """Nearest admissible boundaries around ``v``.

    Returns ``(left, right, left_index, right_index)`` where the values are
    the closest boundary below/above ``v`` that satisfies every pair within
    ``tol`` (``None`` when no such bound exists on that side); the indices
    point into ``pairs``.
    """
    best_l: float | None = None
    best_r: float | None = None
    idx_l = idx_r = -1
    for i, pair in enumerate(pairs):
        lv = pair.left
        if np.isfinite(lv) and v > lv and all(
                pair_satisfied(q, lv, tol) for q in pairs):
            if best_l is None or lv > best_l:
                best_l, idx_l = lv, i
        rv = pair.right
        if np.isfinite(rv) and v < rv and all(
                pair_satisfied(q, rv, tol) for q in pairs):
            if best_r is None or rv < best_r:
                best_r, idx_r = rv, i
    return best_l, best_r, idx_l, idx_r


# ---------------------------------------------------------------------------
# Precompiled refinement plan


@dataclass(frozen=True)
class _Disjunct:
    weight: float                           # pivot coefficient, 0.0 for free
    terms: tuple[tuple[int, float], ...]    # (position, coef), fixed order
    bias: float
    index: int                              # disjunct index in its constraint


@dataclass(frozen=True)
class _ActiveConstraint:
    neg: tuple[_Disjunct, ...]    # pivots with weight < 0: left bounds
    pos: tuple[_Disjunct, ...]    # pivots with weight > 0: right bounds
    free: tuple[_Disjunct, ...]   # pivot-free disjuncts: constant after subst


@dataclass(frozen=True)
class _Plan:
    positions: tuple[tuple[_ActiveConstraint, ...], ...]
    to_position: np.ndarray    # name index -> ordering position
    to_name: np.ndarray        # ordering position -> name index


def _build_plan(layer: CompiledLayer) -> _Plan:
    D = layer.dimension
    to_position = np.empty(D, dtype=np.intp)
    for pos, var in enumerate(layer.ordering):
        to_position[var] = pos
    positions: list[tuple[_ActiveConstraint, ...]] = []
    for pos in range(D):
        var = layer.ordering[pos]
        compiled: list[_ActiveConstraint] = []
        for c in layer.active[pos]:
            neg: list[_Disjunct] = []
            posi: list[_Disjunct] = []
            free: list[_Disjunct] = []
            for j, d in enumerate(c.disjuncts):
                w = d.expr.coefficient(var)
                # Rescale exactly so the pivot weight is +-1 (free disjuncts:
                # so the smallest-position coefficient is +-1). Coefficients
                # and accumulation order then depend only on the ordering,
                # which the serialized artifact carries, so results are
                # stable across save/load round-trips.
                if w != 0:
                    residual = d.expr.without(var) / abs(w)
                    weight = 1.0 if w > 0 else -1.0
                else:
                    residual = d.expr
                    if residual.terms:
                        lead = min(residual.terms,
                                   key=lambda t: to_position[t[0]])[1]
                        residual = residual / abs(lead)
                    weight = 0.0
                terms = tuple(sorted(
                    ((int(to_position[k]), float(coef))
                     for k, coef in residual.terms),
                    key=lambda t: t[0]))
                if any(t[0] >= pos for t in terms):
                    raise AssertionError(
                        f"active constraint at position {pos} depends on a "
                        f"not-yet-refined variable")
                dis = _Disjunct(weight, terms, float(residual.bias), j)
                if w < 0:
                    neg.append(dis)
                elif w > 0:
                    posi.append(dis)
                else:
                    free.append(dis)
            compiled.append(_ActiveConstraint(tuple(neg), tuple(posi), tuple(free)))
        positions.append(tuple(compiled))
    return _Plan(tuple(positions), to_position, np.argsort(to_position))


def _plan_for(layer: CompiledLayer) -> _Plan:
    plan = layer._plan_cache.get("plan")
    if plan is None:
        plan = _build_plan(layer)
        layer._plan_cache["plan"] = plan
    return plan


# ---------------------------------------------------------------------------
# Batch engine


@dataclass
class BatchResult:
    refined: np.ndarray          # (n, D) in layer.names order
    actions: np.ndarray          # (n, D) int8 codes, names order
    source_constraint: np.ndarray  # (n, D) int32, -1 when not snapped
    source_disjunct: np.ndarray    # (n, D) int32
    jacobians: np.ndarray | None   # (n, D, D) names order
    failures: list[tuple[int, int]]  # (row, name index)

    def action_name(self, row: int, var: int) -> str:
        return ACTIONS[self.actions[row, var]]


def _eval_disjunct(d: _Disjunct, V: np.ndarray) -> np.ndarray:
    acc = np.full(V.shape[0], d.bias, dtype=np.float64)
    for pos, coef in d.terms:
        acc += coef * V[:, pos]
    return acc


def refine_batch(layer: CompiledLayer, values: np.ndarray,
                 tau: float = DEFAULT_TAU, want_jacobian: bool = False,
                 on_position: Callable[[int], None] | None = None,
                 ) -> BatchResult:
    """Refine every row of ``values`` (columns in ``layer.names`` order)."""
    if not layer.is_sat:
        raise UnsatError("cannot refine with an unsatisfiable layer",
                         witness=layer.witness)
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != layer.dimension:
        raise DimensionMismatchError(
            f"expected (n, {layer.dimension}) matrix, got {X.shape}")
    if not np.all(np.isfinite(X)):
        r, c = np.argwhere(~np.isfinite(X))[0]
        raise DrlError(f"non-finite input at row {int(r)}, "
                       f"column {layer.names[int(c)]!r}")

    plan = _plan_for(layer)
    n, D = X.shape
    V = X[:, plan.to_name].copy()          # position space
    actions = np.full((n, D), A_KEPT, dtype=np.int8)
    src_c = np.full((n, D), -1, dtype=np.int32)
    src_d = np.full((n, D), -1, dtype=np.int32)
    snap_terms: list[list[tuple[int, _Disjunct] | None]] = (
        [[None] * D for _ in range(n)] if want_jacobian else [])
    failures: list[tuple[int, int]] = []

    with np.errstate(invalid="ignore"):
        for pos in range(D):
            if on_position is not None:
                on_position(pos)
            constraints = plan.positions[pos]
            if not constraints:
                actions[:, pos] = A_FREE
                continue
            x = V[:, pos]
            K = len(constraints)
            L = np.empty((K, n)); R = np.empty((K, n))
            Lsrc = np.empty((K, n), dtype=np.int32)
            Rsrc = np.empty((K, n), dtype=np.int32)
            TRIV = np.empty((K, n), dtype=bool)
            for k, c in enumerate(constraints):
                triv = np.zeros(n, dtype=bool)
                for d in c.free:
                    triv |= _eval_disjunct(d, V) >= -tau
                TRIV[k] = triv
                L[k], Lsrc[k] = _bound(c.neg, V, lower=True)
                R[k], Rsrc[k] = _bound(c.pos, V, lower=False)
            sat = TRIV | (x <= L + tau) | (x >= R - tau)
            ok_rows = sat.all(axis=0)
            all_triv = TRIV.all(axis=0)
            actions[ok_rows & all_triv, pos] = A_FREE
            vio = np.flatnonzero(~ok_rows)
            if vio.size == 0:
                continue

            xs = x[vio]
            Lv, Rv, Tv = L[:, vio], R[:, vio], TRIV[:, vio]
            # A bound is an admissible target when it satisfies every
            # non-trivial condition within tau; bounds of trivially
            # satisfied constraints are not needed as targets.
            mem_l = (Tv[None, :, :] | (Lv[:, None, :] <= Lv[None, :, :] + tau)
                     | (Lv[:, None, :] >= Rv[None, :, :] - tau)).all(axis=1)
            mem_r = (Tv[None, :, :] | (Rv[:, None, :] <= Lv[None, :, :] + tau)
                     | (Rv[:, None, :] >= Rv[None, :, :] - tau)).all(axis=1)
            ok_l = np.isfinite(Lv) & (xs > Lv) & mem_l & ~Tv
            ok_r = np.isfinite(Rv) & (xs < Rv) & mem_r & ~Tv
            cand_l = np.where(ok_l, Lv, -np.inf)
            cand_r = np.where(ok_r, Rv, np.inf)
            pick_l = cand_l.argmax(axis=0)
            pick_r = cand_r.argmin(axis=0)
            lval = np.take_along_axis(cand_l, pick_l[None, :], 0)[0]
            rval = np.take_along_axis(cand_r, pick_r[None, :], 0)[0]
            has_l = ok_l.any(axis=0)
            has_r = ok_r.any(axis=0)

            go_left = np.abs(xs - lval) < np.abs(xs - rval)
            chosen = np.where(go_left, lval, rval)
            bad = (~has_l & ~has_r) | ~np.isfinite(chosen)
            for i in np.flatnonzero(bad):
                failures.append((int(vio[i]), int(plan.to_name[pos])))
            good = ~bad
            rows = vio[good]
            V[rows, pos] = chosen[good]
            actions[vio[bad], pos] = A_FAILED
            actions[rows, pos] = np.where(go_left[good], A_LEFT, A_RIGHT)
            pick = np.where(go_left, pick_l, pick_r)
            src_k = pick[good]
            src_c[rows, pos] = src_k
            sel = np.where(go_left, np.take_along_axis(Lsrc[:, vio], pick_l[None, :], 0)[0],
                           np.take_along_axis(Rsrc[:, vio], pick_r[None, :], 0)[0])
            src_d[rows, pos] = sel[good]
            if want_jacobian:
                gl = go_left[good]
                sel_good = sel[good]
                for i, row in enumerate(rows):
                    c = constraints[src_k[i]]
                    group = c.neg if gl[i] else c.pos
                    pivot = next(d for d in group if d.index == sel_good[i])
                    snap_terms[row][pos] = pivot

    jac = _jacobians(plan, snap_terms, n, D) if want_jacobian else None
    inv = plan.to_position
    result = BatchResult(
        refined=V[:, inv],
        actions=actions[:, inv],
        source_constraint=src_c[:, inv],
        source_disjunct=src_d[:, inv],
        jacobians=jac,
        failures=failures,
    )
    return result


def _bound(pivots: tuple[_Disjunct, ...], V: np.ndarray,
           lower: bool) -> tuple[np.ndarray, np.ndarray]:
    """Tightest bound over the pivot disjuncts, with its disjunct index."""
    n = V.shape[0]
    if not pivots:
        fill = -np.inf if lower else np.inf
        return np.full(n, fill), np.full(n, -1, dtype=np.int32)
    vals = np.empty((len(pivots), n))
    for t, d in enumerate(pivots):
        vals[t] = -_eval_disjunct(d, V) / d.weight
    pick = vals.argmax(axis=0) if lower else vals.argmin(axis=0)
    best = np.take_along_axis(vals, pick[None, :], 0)[0]
    sources = np.fromiter((pivots[t].index for t in pick), dtype=np.int32,
                          count=n)
    return best, sources


def _jacobians(plan: _Plan, snap_terms, n: int, D: int) -> np.ndarray:
    # snap_terms is position-indexed; None marks kept/free coordinates,
    # whose rows stay unit vectors.
    out = np.empty((n, D, D))
    inv = plan.to_position
    for row in range(n):
        J = np.eye(D)
        for pos in range(D):
            pivot = snap_terms[row][pos]
            if pivot is None:
                continue
            acc = np.zeros(D)
            for term_pos, coef in pivot.terms:
                acc += (-coef / pivot.weight) * J[term_pos]
            J[pos] = acc
        out[row] = J[np.ix_(inv, inv)]
    return out


# ---------------------------------------------------------------------------
# Public single-sample and dataset interfaces


@dataclass(frozen=True)
class ProvenanceEntry:
    action: str
    source_constraint: int   # index into the active list at that step, -1
    source_disjunct: int


@dataclass(frozen=True)
class RefineResult:
    refined: tuple[float, ...]
    provenance: tuple[ProvenanceEntry, ...]
    jacobian: np.ndarray | None = None

    @property
    def changed(self) -> bool:
        return any(p.action in (SNAPPED_LEFT, SNAPPED_RIGHT)
                   for p in self.provenance)


def refine(layer: CompiledLayer, sample: Sequence[float],
           tau: float = DEFAULT_TAU) -> RefineResult:
    """Refine one sample (in ``layer.names`` order).

    Single samples run through the batch engine with one row, which keeps
    every surface of the package bit-identical.
    """
    return _single(layer, sample, tau, want_jacobian=False)


def refine_with_jacobian(layer: CompiledLayer, sample: Sequence[float],
                         tau: float = DEFAULT_TAU) -> RefineResult:
    """As :func:`refine`, with the derivative of the refinement map.

    Row ``i`` of the Jacobian is the gradient of refined coordinate ``i``
    with respect to the inputs; permuting rows and columns into the
    compiled ordering makes the matrix lower-triangular. The map is
    piecewise affine, so rows are exact away from branch-switch points.
    """
    return _single(layer, sample, tau, want_jacobian=True)


def _single(layer: CompiledLayer, sample: Sequence[float], tau: float,
            want_jacobian: bool) -> RefineResult:
    arr = np.asarray(sample, dtype=np.float64)[None, :]
    batch = refine_batch(layer, arr, tau, want_jacobian=want_jacobian)
    if batch.failures:
        var = layer.names[batch.failures[0][1]]
        raise NumericFailureError(
            f"no admissible boundary for variable {var!r}", row=0, var=var)
    provenance = tuple(
        ProvenanceEntry(ACTIONS[batch.actions[0, v]],
                        int(batch.source_constraint[0, v]),
                        int(batch.source_disjunct[0, v]))
        for v in range(layer.dimension))
    jac = batch.jacobians[0] if want_jacobian else None
    return RefineResult(tuple(float(v) for v in batch.refined[0]),
                        provenance, jac)


def refine_dataset(layer: CompiledLayer, dataset: Dataset,
                   tau: float = DEFAULT_TAU, parallelism: int = 1,
                   skip_errors: bool = False, want_jacobian: bool = False,
                   ) -> BatchResult:
    """Refine every row of a dataset, remapping columns by name.

    Rows are independent; with ``parallelism > 1`` they are processed in
    contiguous chunks on a thread pool, which cannot change the results.
    A numeric failure aborts unless ``skip_errors`` is set, in which case
    failed coordinates keep their input value and are marked.
    """
    perm = dataset.column_permutation(layer.names)
    matrix = dataset.values[:, perm]
    if not np.all(np.isfinite(matrix)):
        r = int(np.argwhere(~np.isfinite(matrix))[0][0])
        raise DrlError(f"non-finite value in data row {r + 1}")

    if parallelism > 1 and matrix.shape[0] > 1:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(np.arange(matrix.shape[0]), parallelism)
        chunks = [c for c in chunks if c.size]
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(
                lambda idx: refine_batch(layer, matrix[idx], tau,
                                         want_jacobian=want_jacobian),
                chunks))
        result = BatchResult(
            refined=np.concatenate([p.refined for p in parts]),
            actions=np.concatenate([p.actions for p in parts]),
            source_constraint=np.concatenate([p.source_constraint for p in parts]),
            source_disjunct=np.concatenate([p.source_disjunct for p in parts]),
            jacobians=(np.concatenate([p.jacobians for p in parts])
                       if want_jacobian else None),
            failures=[(int(chunk[r]), v)
                      for chunk, p in zip(chunks, parts)
                      for r, v in p.failures],
        )
    else:
        result = refine_batch(layer, matrix, tau, want_jacobian=want_jacobian)

    if result.failures and not skip_errors:
        row, var = result.failures[0]
        raise NumericFailureError(
            f"row {row}: no admissible boundary for variable "
            f"{layer.names[var]!r}", row=row, var=layer.names[var])
    return result
