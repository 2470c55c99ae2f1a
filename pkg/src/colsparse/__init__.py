"""Recovery of column-sparse (and simultaneously low-rank) matrices from
Gaussian linear measurements: mixed-norm solvers, dual recovery certificates,
statistical-dimension measurement thresholds, and a benchmark harness."""

from .core import (
    PolarMatrix,
    Subspace,
    angular_distance,
    as_support,
    block_soft_threshold,
    l12_norm,
    linf2_norm,
    polar_decompose,
    principal_angle_sin,
    support_complement,
    top_r_left_subspace,
)
from .operators import MeasurementOp, operator_norm, sample_gaussian
from .solvers import (
    SolveResult,
    SolverConfig,
    solve_l1,
    solve_l12,
    solve_nuclear_on_support,
    solve_streamlined,
)
from .certificates import (
    ExactCertReport,
    RangePartition,
    SoftCertReport,
    build_range_partition,
    check_exact_cert,
    check_soft_cert,
    energy_bounds,
    find_exact_cert,
    find_soft_cert,
    range_angle_bound,
    subdiff_member,
)
from .statdim import (
    ConeParams,
    ThresholdResult,
    chi_excess,
    exact_threshold,
    m_soft,
    mc_cone_distance,
    mu_colstream,
    phi,
)
from .recovery import (
    NastConfig,
    NastResult,
    StreamlineConfig,
    StreamlineHistory,
    column_streamline,
    nast,
    select_support,
)
from .bench import (
    InstanceSpec,
    TrialRecord,
    emit_figure_data,
    generate_instance,
    run_sweep,
    run_trial,
)

__version__ = "0.1.0"
