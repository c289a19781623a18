"""Relaxed prox bundle and composite subgradient solvers with certified
subproblems, solution certificates, and complexity-bound calculators."""

from .problem import (
    CompositeTerm,
    ProblemInstance,
    SubgradientOracle,
    Tolerances,
    evaluate_phi,
    validate_instance,
)
from .instances import (
    MaxAffineSpec,
    WorstCaseParams,
    make_abs_oracle,
    make_composite,
    make_max_affine,
    make_random_max_affine,
    make_worst_case,
    p_r_grad,
    p_r_value,
)
from .bundle import (
    Bundle,
    Cut,
    Policy,
    active_set,
    eval_model,
    make_cut,
    update_null,
    update_serious,
)
from .subproblem import SubproblemError, SubproblemSolution, solve, verify_kkt
from .solvers import (
    IterationRecord,
    RpbConfig,
    RunTrace,
    Termination,
    cscs_run,
    reduction_check,
    rpb_run,
    serious_test,
)
from .bounds import (
    BoundingBall,
    BoundingBox,
    BoundReport,
    LambdaRange,
    SolutionPair,
    SolutionTriple,
    bound_cscs,
    bound_null,
    bound_report,
    bound_serious,
    bound_total,
    bound_triple,
    certificate_pair,
    certificate_triple,
    check_eps_subgradient,
    comparator_convex,
    comparator_strong,
    cscs_lambda_valid,
    easyrecur_threshold,
    lambda_ranges,
    lower_bound,
    rate_bound,
    triple_residual_bounds,
)

__version__ = "0.1.0"
