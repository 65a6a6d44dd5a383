"""Compile linear-arithmetic background knowledge and refine samples to it.

Typical flow: parse a constraint file into a :class:`ConstraintSet`,
compile it along a variable ordering into a :class:`CompiledLayer`, then
refine samples or whole CSV datasets so every row satisfies the
constraints, optionally with the Jacobian of the refinement map.
"""

from .algebra import (
    Constraint,
    ConstraintSet,
    Inequality,
    LinearExpr,
    Rational,
    Sign,
    clause,
    evaluate,
    occurrence_sign,
    satisfies,
    substitute,
)
from .analysis import (
    MetricsReport,
    VariableOrdering,
    metrics,
    ordering_corr,
    ordering_given,
    ordering_kde,
    ordering_random,
)
from .compiler import (
    CompiledLayer,
    EliminationStep,
    VariablePartition,
    compile_chain,
    cp_resolve,
    eliminate,
    layer_from_json,
    layer_to_json,
    partition,
)
from .data import Dataset, read_csv, read_csv_text, write_csv
from .errors import (
    BudgetExceededError,
    DimensionMismatchError,
    DrlError,
    NormalizationError,
    NumericFailureError,
    ParseError,
    UnboundVariableError,
    UnsatError,
)
from .lang import (
    NormalizationConfig,
    VariableBinding,
    load_constraints,
    normalize,
    parse,
    roundtrip_print,
)
from .refiner import (
    BatchResult,
    BoundaryPair,
    RefineResult,
    boundaries,
    closest_bounds,
    refine,
    refine_batch,
    refine_dataset,
    refine_with_jacobian,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
