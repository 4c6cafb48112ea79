"""Linear regression when a sparse subset of response/predictor pairs is mismatched."""
from .errors import (
    BudgetError,
    DimensionError,
    InfeasibleError,
    InfeasibleSparsityError,
    InsufficientDataError,
    ParameterError,
    SingularDesignError,
    SparsePermError,
)
from .model import (
    GroundTruth,
    ObservationSet,
    SimulationSpec,
    SparsePermutation,
    apply_permutation,
    generate_design,
    k_from_fraction,
    replication_seed,
    sample_sparse_permutation,
    sample_unit_sphere,
    snr,
    synthesize,
)
from .recovery import (
    SupportEstimate,
    TwoStageResult,
    estimate_support_mad,
    estimate_support_topk,
    recover_permutation_on_support,
    recover_permutation_sorted,
    refit_excluding,
    support_from_permutation,
    two_stage,
)
from .solvers import (
    FixedLambda,
    HuberRule,
    SimulationRule,
    TheoremRule,
    fit_exact_bruteforce,
    fit_exact_d1_sorting,
    fit_lad,
    fit_ols,
    fit_robust,
    kkt_residual,
    lambda_value,
    robust_objective,
    soft_threshold,
)
from .theory import BoundInputs, BoundReport, compute_bounds

__version__ = "0.1.0"
