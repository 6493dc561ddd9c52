"""Massive-MIMO unsourced random access: tree code, covariance-based activity detection and simulation."""

from mimo_ura._capacity import (
    AntennaRequirement,
    DesignPoint,
    SumRateCheck,
    antenna_requirement,
    approximate_or_mac_entropy,
    binary_entropy,
    design_report,
    exact_outer_user_cap,
    format_report,
    inner_user_cap,
    large_n_regime,
    max_active_users,
    nnls_error_bound,
    or_mac_entropy_bound,
    outer_user_cap,
    phi,
    sum_rate_feasible,
    zero_row_probability,
)
from mimo_ura._channel import complex_normal, draw_fading, transmit_activity, transmit_subslot
from mimo_ura._codebook import (
    ActivityAssignment,
    Codebook,
    assign_activity,
    generate_codebook,
    load_codebook,
    or_mac_output,
    save_codebook,
)
from mimo_ura._config import (
    ConfigError,
    DetectorSettings,
    Estimator,
    PowerAllocation,
    RateReport,
    ScheduleKind,
    Seeds,
    SystemConfig,
    ThresholdMode,
    Violation,
    allocate_power,
    config_from_dict,
    config_to_dict,
    load_config,
    power_for_ebn0,
    rate_report,
    reference_config,
    small_config,
    subslot_powers,
    validate_config,
    with_ebn0,
)
from mimo_ura._detector import (
    DetectorError,
    DetectorResult,
    DetectorState,
    coordinate_derivative,
    coordinate_step,
    detect_support,
    direct_inverse,
    empirical_covariance,
    ml_coordinate_descent,
    neg_log_likelihood,
    nnls_estimate,
    nnls_objective,
    true_covariance,
)
from mimo_ura._results import (
    MemoryResultStore,
    ResultStore,
    StoredRun,
    dump_activity_csv,
    write_sidecar,
    write_sweep_csv,
)
from mimo_ura._results_factory import create_result_store
from mimo_ura._simulation import (
    PupeMetrics,
    SweepAxis,
    SweepPoint,
    SweepResult,
    TrialResult,
    compute_pupe,
    derive_trial_seed,
    monte_carlo_sweep,
    run_point,
    run_trial,
)
from mimo_ura._tree_code import (
    DecodeStats,
    MessagePath,
    ParityMatrices,
    PathOverflowError,
    bits_to_payload,
    encode_payload_bits,
    generate_parity_matrices,
    parity_consistent,
    payload_to_bits,
    tree_decode,
    tree_encode,
)

__all__ = [
    "ActivityAssignment",
    "AntennaRequirement",
    "Codebook",
    "ConfigError",
    "DecodeStats",
    "DesignPoint",
    "DetectorError",
    "DetectorResult",
    "DetectorSettings",
    "DetectorState",
    "Estimator",
    "MemoryResultStore",
    "MessagePath",
    "ParityMatrices",
    "PathOverflowError",
    "PowerAllocation",
    "PupeMetrics",
    "RateReport",
    "ResultStore",
    "ScheduleKind",
    "Seeds",
    "StoredRun",
    "SumRateCheck",
    "SweepAxis",
    "SweepPoint",
    "SweepResult",
    "SystemConfig",
    "ThresholdMode",
    "TrialResult",
    "Violation",
    "allocate_power",
    "antenna_requirement",
    "approximate_or_mac_entropy",
    "assign_activity",
    "binary_entropy",
    "bits_to_payload",
    "complex_normal",
    "compute_pupe",
    "config_from_dict",
    "config_to_dict",
    "coordinate_derivative",
    "coordinate_step",
    "create_result_store",
    "derive_trial_seed",
    "design_report",
    "detect_support",
    "direct_inverse",
    "draw_fading",
    "dump_activity_csv",
    "empirical_covariance",
    "encode_payload_bits",
    "exact_outer_user_cap",
    "format_report",
    "generate_codebook",
    "generate_parity_matrices",
    "inner_user_cap",
    "large_n_regime",
    "load_codebook",
    "load_config",
    "max_active_users",
    "ml_coordinate_descent",
    "monte_carlo_sweep",
    "neg_log_likelihood",
    "nnls_error_bound",
    "nnls_estimate",
    "nnls_objective",
    "or_mac_entropy_bound",
    "or_mac_output",
    "outer_user_cap",
    "parity_consistent",
    "payload_to_bits",
    "phi",
    "power_for_ebn0",
    "rate_report",
    "reference_config",
    "run_point",
    "run_trial",
    "save_codebook",
    "small_config",
    "subslot_powers",
    "sum_rate_feasible",
    "transmit_activity",
    "transmit_subslot",
    "tree_decode",
    "tree_encode",
    "true_covariance",
    "validate_config",
    "with_ebn0",
    "write_sidecar",
    "write_sweep_csv",
    "zero_row_probability",
]
