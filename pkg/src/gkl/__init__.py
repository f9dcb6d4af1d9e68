"""Greedy kernel interpolation: beta-greedy selection, Newton basis updates,
and numerical checks of the associated convergence inequalities."""

from .geometry import (
    CandidateSet,
    fill_distance,
    from_points,
    load_points_csv,
    project_to_slice,
    sample_random,
    separation_distance,
    uniform_grid,
)
from .greedy import (
    Exhausted,
    GreedyState,
    NumericalBreakdown,
    SelectionRule,
    SingularKernelMatrix,
    StopCriteria,
    interpolant_oracle,
    newton_update,
    partial_native_norm,
    power_oracle,
    run_greedy,
    score_candidates,
    select_next,
)
from .kernels import (
    GAUSSIAN_W2,
    WENDLAND_K0,
    KernelModel,
    available_kernels,
    get_kernel,
    kernel_diag,
    kernel_eval,
    kernel_matrix,
    register_kernel,
)
from .trace import RunTrace, read_trace_csv, write_trace_csv

__version__ = "0.1.0"
