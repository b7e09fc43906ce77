"""Block coordinate descent solvers for nonconvex composite objectives
under a single coupling equality constraint, with exact pairwise
breakpoint subsolvers, semi-greedy working-set selection, baseline
methods, and a benchmark harness."""

from .errors import (
    AllZeroCoefficients,
    BlockCDError,
    BlockTooLarge,
    CsvFormatError,
    DegenerateProjection,
    EmptyInterval,
    IdenticalIndices,
    InfeasibleIndicator,
    InfeasibleStart,
    InfeasibleTarget,
    KMismatch,
    MonotonicityBreach,
    TooLarge,
    TooManyBlocks,
    UnsupportedCombination,
)
from .problems import (
    CurvatureMatrix,
    Family,
    FeasibleSet,
    ProblemInstance,
    SetKind,
    composite_subgradient,
    curvature_alpha,
    curvature_matrix,
    dcpb1_problem,
    dcpb2_problem,
    eval_gradient_f,
    eval_objective,
    feasibility_residual,
    feasible_set_for,
    nnspca_problem,
    power_iteration_norm,
    project,
    sit_problem,
    subgrad_top_s,
    top_s_norm,
    top_s_support,
)
from .roots import RootSet, nonneg_roots, solve_real
from .selection import SelectionKind, SelectionStrategy, enumerate_working_sets, next_working_set
from .solvers import (
    Method,
    SolveTrace,
    SolverConfig,
    TraceRecord,
    bcd_run,
    hybrid_run,
    mscr_run,
    pdca_run,
    psg_run,
    run_solver,
)
from .subsolvers import (
    BlockStep,
    block2_solver,
    dcpb1_block2,
    dcpb2_block2,
    nnspca_block2,
    sit_block2,
    sit_blockk_local,
)
from .diagnostics import (
    CwsReport,
    block_curvature_expectation,
    check_dcpb2_exactness,
    check_extreme_point,
    check_sit_exactness,
    probe_cws,
    residual_R,
    verify_expectation_identities,
)

__version__ = "0.1.0"
