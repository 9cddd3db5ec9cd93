"""Entangling capacities of bipartite unitaries.

Distances between unitaries induced by pure states, their product-state
restriction, the primal (min-max) and dual (max-min) entangling capacities,
and generalised control operators.
"""

from .capacity import (
    BoundStatus,
    CapacityKind,
    CapacityResult,
    GapReport,
    LocalUnitary,
    capacity_dual,
    capacity_primal,
    ce_upper_bound,
    closest_local_unitary,
    g_function,
    geometric_entanglement_pure,
    largest_schmidt_after,
    minimax_gap,
    primal_lower_bound_if_maximal,
)
from .errors import (
    DimensionMismatch,
    EigenFailure,
    EntcapError,
    InvalidFamily,
    NotNormalized,
    NotSquare,
    NotUnitary,
    ObjectiveFailure,
    OptimizerFailure,
    OutOfRange,
)
from .gco import (
    FamilyDimensionError,
    GcoOperator,
    ThetaMatrix,
    UnitaryFamily,
    builtin_families,
    capacity_dual_abelian,
    diagonal_product_distance,
    family_rank,
    gco_build,
    gram_residual,
    max_entanglement_witness,
)
from .linalg import (
    BipartiteState,
    SchmidtDecomposition,
    UnitaryOperator,
    eigenphases,
    kron,
    random_product_state,
    random_state,
    random_unitary,
    schmidt_decompose,
    swap_operator,
    validate_unitary,
)
from .metrics import (
    AllPureStates,
    ExplicitList,
    MetricValue,
    Method,
    PureProductStates,
    Sampler,
    compose_tensor_distance,
    d_eigenphase,
    d_restricted,
    d_state,
    product_state_distance,
)
from .optimize import (
    OptimizerOptions,
    OptRunResult,
    maximize_over_product_states,
    minimize_over_local_unitaries,
    minimize_over_product_states,
    nested_maximin,
    nested_minimax,
)

__version__ = "0.1.0"
