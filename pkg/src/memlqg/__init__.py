"""memlqg: Gaussian state transfer into a lossy three-mode memory with
continuous syndrome measurement, Kalman filtering and LQG feedback."""

from .model import (
    Encoding,
    FieldMode,
    MemoryParams,
    NoiseModel,
    SourceSpec,
    drive_vector,
    input_covariance,
    lambda_matrix,
    noise_model,
    squeezed_vacuum,
    standard_encoding,
    standard_noise,
    thermal_occupation,
    tritter,
    vacuum,
)
from .openloop import (
    GaussianState,
    fidelity,
    fidelity_closed_form,
    occupation_threshold,
    pfd_rate,
    psys,
    psys_closed_form,
    single_mode_check,
    steady_mode_variances,
    steady_state,
    syndrome_statistics,
    syndrome_variance_ideal,
    system_matrices,
)
from .estimation import (
    FilterState,
    MeasurementModel,
    StationaryFilter,
    SyndromeFilterState,
    filter_step,
    kalman_gain,
    measurement_model,
    riccati_flow,
    stationary_filter,
    syndrome_filter_step,
)
from .control import Gains, LqgConfig, control_input, cost_rate, lqg_gains, syndrome_weights
from .closedloop import (
    AugmentedModel,
    build_augmented,
    closed_loop_covariance,
    closed_loop_mean,
    closed_loop_summary,
    controlled_fidelity,
    explicit_formula_report,
    vprime_explicit,
)
from .simulate import (
    EnsembleMoments,
    Trajectory,
    TrajectoryConfig,
    ensemble_moments,
    ensemble_statistics,
    filter_view_noise,
    innovation_diagnostics,
    simulate_trajectory,
)
from .acceptance import ALL_CHECKS, CheckResult, run_all, run_check

__version__ = "0.1.0"

__all__ = [
    "ALL_CHECKS",
    "AugmentedModel",
    "CheckResult",
    "Encoding",
    "EnsembleMoments",
    "FieldMode",
    "FilterState",
    "Gains",
    "GaussianState",
    "LqgConfig",
    "MeasurementModel",
    "MemoryParams",
    "NoiseModel",
    "SourceSpec",
    "StationaryFilter",
    "SyndromeFilterState",
    "Trajectory",
    "TrajectoryConfig",
    "build_augmented",
    "closed_loop_covariance",
    "closed_loop_mean",
    "closed_loop_summary",
    "control_input",
    "controlled_fidelity",
    "cost_rate",
    "drive_vector",
    "ensemble_moments",
    "ensemble_statistics",
    "explicit_formula_report",
    "fidelity",
    "fidelity_closed_form",
    "filter_step",
    "filter_view_noise",
    "innovation_diagnostics",
    "input_covariance",
    "kalman_gain",
    "lambda_matrix",
    "lqg_gains",
    "measurement_model",
    "noise_model",
    "occupation_threshold",
    "pfd_rate",
    "psys",
    "psys_closed_form",
    "riccati_flow",
    "run_all",
    "run_check",
    "simulate_trajectory",
    "single_mode_check",
    "squeezed_vacuum",
    "standard_encoding",
    "standard_noise",
    "stationary_filter",
    "steady_mode_variances",
    "steady_state",
    "syndrome_filter_step",
    "syndrome_statistics",
    "syndrome_variance_ideal",
    "syndrome_weights",
    "system_matrices",
    "thermal_occupation",
    "tritter",
    "vacuum",
    "vprime_explicit",
]
