"""Greedy weak-regularity decompositions, truncation splits and cut-type
seminorms for step tensors."""

__version__ = "0.1.0"

from .errors import BudgetExceeded, IngestError, PreconditionError
from .tensorspace import (
    INF,
    Measure,
    StepTensor,
    as_exponent,
    dual_exponent,
    inner_product,
    lp_norm,
    ones,
    random_ball_sample,
    rank1,
    zeros,
)
from .seminorms import (
    EXACT,
    Exact,
    Heuristic,
    OracleResult,
    SeminormFamily,
    best_response,
    cut_norm,
    family_membership,
    operator_norm,
    r_seminorm,
)
from .regularity import (
    GreedyDecomposition,
    PipelineApprox,
    StrongDecomposition,
    greedy_decompose,
    partition_average,
    strong_decompose,
    weak_banach_approx,
)
from .truncation import (
    Rank1Split,
    Rank1Term,
    SparsifyResult,
    TruncationSplit,
    k_bound,
    low_rank_sup_approx,
    rank1_split,
    threshold_split,
    top_k,
    top_k_sparsify,
)
from .orbit import (
    BlockPermutation,
    CoverResult,
    OrbitDistanceResult,
    apply_permutation,
    corner_block,
    greedy_cover,
    interp_exponents,
    lp_orbit_distance,
    orbit_distance,
    riesz_thorin_check,
)
