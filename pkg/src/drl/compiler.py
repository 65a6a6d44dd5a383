"""Variable elimination over disjunctive constraints.

Eliminating variable x from a conjunction of disjunctive constraints uses a
resolution rule pairing a constraint whose x-occurrences are all positive
with one whose pivot occurrences are negative:

    (w'_1 x + p'_1 >= 0) v ... v R'      (w_1 x + p_1 >= 0) v ... v R
    ----------------------------------------------------------------
          OR_{j,k} (p_k / w_k - p'_j / w'_j >= 0)  v  R  v  R'

with all w_k > 0 > w'_j. Constraints mixing positive and negative
occurrences are first closed into a positive-only set by repeated
resolution (at most one round per mixed constraint), after which one
cross-resolution pass against the negative-only set yields the next set
in the chain. A variable-free set whose only clauses are constant-false
certifies unsatisfiability.

All arithmetic here is exact rational; floats never enter compilation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .algebra import (
    Constraint,
    ConstraintSet,
    EntailmentIndex,
    Inequality,
    LinearExpr,
    Sign,
    clause,
    dedup_constraints,
    occurrence_sign,
    subsumption_prune,
)
from .errors import BudgetExceededError, DimensionMismatchError

DEFAULT_MAX_RESOLVENTS = 500_000


@dataclass(frozen=True)
class VariablePartition:
    """Four-way split of a set by how each constraint mentions a variable."""

    plus: tuple[Constraint, ...]
    minus: tuple[Constraint, ...]
    mixed: tuple[Constraint, ...]
    free: tuple[Constraint, ...]


def partition(constraints: Sequence[Constraint], var: int) -> VariablePartition:
    plus: list[Constraint] = []
    minus: list[Constraint] = []
    mixed: list[Constraint] = []
    free: list[Constraint] = []
    for c in constraints:
        has_pos = has_neg = False
        for d in c.disjuncts:
            sign = occurrence_sign(d, var)
            if sign is Sign.POSITIVE:
                has_pos = True
            elif sign is Sign.NEGATIVE:
                has_neg = True
        if has_pos and has_neg:
            mixed.append(c)
        elif has_pos:
            plus.append(c)
        elif has_neg:
            minus.append(c)
        else:
            free.append(c)
    return VariablePartition(tuple(plus), tuple(minus), tuple(mixed), tuple(free))


def cp_resolve(psi: Constraint, psi_prime: Constraint, var: int) -> Constraint | None:
    """Resolve a positive-pivot constraint against a negative-pivot one.

    ``psi`` must not contain negative occurrences of ``var`` and must have
    at least one positive pivot; ``psi_prime`` must have at least one
    negative pivot and no negative occurrences outside its pivots (any
    constraint satisfies the latter by construction). Returns ``None``
    when the conclusion is a tautology.
    """
    pos_pivots: list[tuple[Fraction, LinearExpr]] = []
    residual: list[Inequality] = []
    for d in psi.disjuncts:
        w = d.expr.coefficient(var)
        if w > 0:
            pos_pivots.append((w, d.expr.without(var)))
        elif w < 0:
            raise ValueError("cp_resolve: first premise has a negative occurrence")
        else:
            residual.append(d)
    neg_pivots: list[tuple[Fraction, LinearExpr]] = []
    residual_prime: list[Inequality] = []
    for d in psi_prime.disjuncts:
        w = d.expr.coefficient(var)
        if w < 0:
            neg_pivots.append((w, d.expr.without(var)))
        else:
            residual_prime.append(d)
    if not pos_pivots or not neg_pivots:
        raise ValueError("cp_resolve: both premises need a pivot occurrence")

    scaled_pos = [phi / w for w, phi in pos_pivots]
    scaled_neg = [phi / w for w, phi in neg_pivots]
    disjuncts: list[Inequality | LinearExpr] = []
    for p in scaled_pos:
        for q in scaled_neg:
            diff = p - q
            if not diff.terms and diff.bias >= 0:
                return None  # touching bounds: the conclusion is a tautology
            disjuncts.append(diff)
    disjuncts.extend(residual)
    disjuncts.extend(residual_prime)
    return clause(disjuncts)


@dataclass(frozen=True)
class EliminationStep:
    variable: int
    partition: VariablePartition
    plusplus: tuple[Constraint, ...]
    result: tuple[Constraint, ...]
    resolvent_count: int


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def charge(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise BudgetExceededError(
                f"resolvent budget exceeded ({self.used} > {self.limit})")


def close_plusplus(plus: Sequence[Constraint], mixed: Sequence[Constraint],
                   var: int, budget: _Budget | None = None) -> tuple[Constraint, ...]:
    """Close the positive-only set under resolution with mixed constraints.

    Runs at most ``len(mixed)`` rounds; entailment pruning across rounds
    stops the iteration early at a fixpoint and keeps redundant resolvents
    from spawning further work. Every output constraint has only positive
    occurrences of ``var``.
    """
    budget = budget or _Budget(DEFAULT_MAX_RESOLVENTS)
    index = EntailmentIndex()
    frontier: list[Constraint] = []
    for c in dedup_constraints(plus):
        if not index.is_entailed(c):
            index.add(c)
            frontier.append(c)
    for _ in range(len(mixed)):
        fresh: list[Constraint] = []
        for psi in frontier:
            for psi_prime in mixed:
                budget.charge()
                resolvent = cp_resolve(psi, psi_prime, var)
                if resolvent is None or index.is_entailed(resolvent):
                    continue
                index.add(resolvent)
                fresh.append(resolvent)
        if not fresh:
            break
        frontier = fresh
    return tuple(index.pruned())


def eliminate(constraints: Sequence[Constraint], var: int,
              budget: _Budget | None = None) -> EliminationStep:
    """One elimination step: the result set no longer mentions ``var``."""
    budget = budget or _Budget(DEFAULT_MAX_RESOLVENTS)
    parts = partition(constraints, var)
    if not parts.minus:
        # Nothing to resolve against: every pivot constraint is satisfiable
        # by moving far enough in one direction, so only the free part
        # survives. Skipping the closure avoids building a set that the
        # cross-resolution below would discard anyway.
        return EliminationStep(var, parts, (), tuple(subsumption_prune(parts.free)), 0)
    plusplus = close_plusplus(parts.plus, parts.mixed, var, budget)
    index = EntailmentIndex()
    for c in dedup_constraints(parts.free):
        if not index.is_entailed(c):
            index.add(c)
    count = 0
    for psi in plusplus:
        for psi_prime in parts.minus:
            count += 1
            budget.charge()
            resolvent = cp_resolve(psi, psi_prime, var)
            if resolvent is not None and not index.is_entailed(resolvent):
                index.add(resolvent)
    result = index.pruned()
    leaked = [c for c in result if c.mentions(var)]
    if leaked:
        raise AssertionError(f"eliminated variable {var} leaked into result")
    return EliminationStep(var, parts, plusplus, tuple(result), count)


@dataclass(frozen=True)
class StepStats:
    variable: int
    n_plus: int
    n_minus: int
    n_mixed: int
    n_plusplus: int
    resolvents: int
    result_size: int


@dataclass(frozen=True)
class CompiledLayer:
    """Elimination chain plus everything the refiner needs to apply it.

    ``ordering`` holds variable indices (into ``names``) from first-refined
    to last-refined. ``chain[p]`` is the constraint set over the ordering
    prefix ``ordering[:p+1]``; ``chain[-1]`` is the full input set.
    ``active[p]`` lists the ``chain[p]`` constraints that mention
    ``ordering[p]``; the rest is inherited from ``chain[p-1]`` and already
    holds for any prefix satisfying it.
    """

    names: tuple[str, ...]
    ordering: tuple[int, ...]
    epsilon: Fraction
    chain: tuple[tuple[Constraint, ...], ...]
    active: tuple[tuple[Constraint, ...], ...]
    verdict: str  # "sat" | "unsat"
    witness: Constraint | None
    step_stats: tuple[StepStats, ...]
    _plan_cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.names)

    @property
    def is_sat(self) -> bool:
        return self.verdict == "sat"

    def constraint_set(self) -> ConstraintSet:
        """The original (normalized) constraint set this layer was built from."""
        constraints = self.chain[-1] if self.chain else ()
        return ConstraintSet.of(constraints, self.dimension)


def compile_chain(cset: ConstraintSet, ordering: Sequence[int],
                  names: Sequence[str], epsilon: Fraction,
                  max_resolvents: int = DEFAULT_MAX_RESOLVENTS) -> CompiledLayer:
    """Build the full elimination chain along ``ordering``.

    ``ordering`` must be a permutation of ``range(cset.dimension)``; entry 0
    is refined first and eliminated last.
    """
    D = cset.dimension
    if sorted(ordering) != list(range(D)):
        raise ValueError("ordering must be a permutation of range(dimension)")
    if len(names) != D:
        raise DimensionMismatchError(
            f"{len(names)} names for dimension {D}")

    budget = _Budget(max_resolvents)
    chain: list[tuple[Constraint, ...]] = [()] * D
    stats: list[StepStats] = []
    current: tuple[Constraint, ...] = tuple(cset.constraints)
    for pos in range(D - 1, -1, -1):
        chain[pos] = current
        step = eliminate(current, ordering[pos], budget)
        stats.append(StepStats(
            variable=ordering[pos],
            n_plus=len(step.partition.plus),
            n_minus=len(step.partition.minus),
            n_mixed=len(step.partition.mixed),
            n_plusplus=len(step.plusplus),
            resolvents=step.resolvent_count,
            result_size=len(step.result),
        ))
        current = step.result

    # current is now variable-free; tautologies were dropped at clause
    # construction, so any surviving clause here is constant-false.
    witness = None
    for c in current:
        if all(d.constant_false for d in c.disjuncts):
            witness = c
            break
    verdict = "unsat" if witness is not None else "sat"

    allowed: set[int] = set()
    for pos in range(D):
        allowed.add(ordering[pos])
        for c in chain[pos]:
            if not c.variables() <= allowed:
                raise AssertionError(
                    f"chain set {pos} mentions variables outside the prefix")

    active = tuple(
        tuple(c for c in chain[pos] if c.mentions(ordering[pos]))
        for pos in range(D))
    return CompiledLayer(
        names=tuple(names),
        ordering=tuple(ordering),
        epsilon=epsilon,
        chain=tuple(chain),
        active=active,
        verdict=verdict,
        witness=witness,
        step_stats=tuple(reversed(stats)),
    )


# ---------------------------------------------------------------------------
# Serialization: rationals as "num/den" strings for bit-exact round-trips.


def _rational_to_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


def _rational_from_str(text: str) -> Fraction:
    num, _, den = text.partition("/")
    return Fraction(int(num), int(den)) if den else Fraction(int(num))


def _clause_to_json(c: Constraint, names: Sequence[str]) -> dict:
    return {
        "disjuncts": [
            {
                "coeffs": {names[k]: _rational_to_str(w) for k, w in d.expr.terms},
                "bias": _rational_to_str(d.expr.bias),
            }
            for d in c.disjuncts
        ]
    }


def _clause_from_json(obj: dict, index: dict[str, int]) -> Constraint:
    disjuncts = []
    for d in obj["disjuncts"]:
        expr = LinearExpr.of(
            {index[name]: _rational_from_str(w) for name, w in d["coeffs"].items()},
            _rational_from_str(d["bias"]))
        disjuncts.append(Inequality.normalized(expr))
    built = clause(disjuncts)
    if built is None:
        raise ValueError("serialized artifact contains a tautological clause")
    return built


def layer_to_json(layer: CompiledLayer) -> str:
    doc = {
        "ordering": [layer.names[v] for v in layer.ordering],
        "epsilon": _rational_to_str(layer.epsilon),
        "chain": [
            {
                "var": layer.names[layer.ordering[pos]],
                "constraints": [_clause_to_json(c, layer.names)
                                for c in layer.chain[pos]],
            }
            for pos in range(layer.dimension)
        ],
        "verdict": layer.verdict,
        "unsat_witness": (_clause_to_json(layer.witness, layer.names)
                          if layer.witness is not None else None),
    }
    return json.dumps(doc, indent=2) + "\n"


def layer_from_json(text: str) -> CompiledLayer:
    """Reconstruct a layer; variable names are taken from the ordering list."""
    doc = json.loads(text)
    names = tuple(doc["ordering"])
    index = {name: i for i, name in enumerate(names)}
    ordering = tuple(index[name] for name in doc["ordering"])
    chain = tuple(
        tuple(_clause_from_json(c, index) for c in entry["constraints"])
        for entry in doc["chain"])
    if len(chain) != len(names):
        raise ValueError("artifact chain length does not match ordering")
    active = tuple(
        tuple(c for c in chain[pos] if c.mentions(ordering[pos]))
        for pos in range(len(names)))
    witness = (_clause_from_json(doc["unsat_witness"], index)
               if doc.get("unsat_witness") else None)
    return CompiledLayer(
        names=names,
        ordering=ordering,
        epsilon=_rational_from_str(doc["epsilon"]),
        chain=chain,
        active=active,
        verdict=doc["verdict"],
        witness=witness,
        step_stats=(),
    )
