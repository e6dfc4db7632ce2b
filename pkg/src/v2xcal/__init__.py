"""V2X wireless-channel simulation and calibration toolkit.

The package replays vehicle mobility traces past a roadside unit, decides
per-packet delivery through a configurable cascade of free-space reference,
log-distance/Lognormal shadowing, and Nakagami fast fading, aggregates the
outcomes into distance-binned PDR curves and spatial heatmaps, and fits the
ten-parameter channel configuration to an observed curve with a real-coded
genetic algorithm. Everything is deterministic under explicit seeds, and
every artifact round-trips losslessly through its CSV form.
"""

from .propagation import (
    DSRC_BAND_HZ,
    DSRC_MAX_TX_POWER_MW,
    SNR_THRESHOLDS_DB,
    SPEED_OF_LIGHT_M_S,
    SUPPORTED_DATA_RATES_MBPS,
    DeliveryReason,
    FadingParams,
    FastFadingModel,
    RadioParams,
    SlowFadingModel,
    cascade_rx_power,
    deterministic_gain_db,
    free_space_rx_power,
    is_received,
    log_distance_rx_power,
    lognormal_rx_power,
    nakagami_power_sample,
    snr_threshold_db,
    to_db,
    to_linear,
    validate_dsrc_profile,
)
from .simulator import (
    DeliveryLog,
    DeliveryRecord,
    Direction,
    EnuTrace,
    HeatmapCell,
    HeatmapGrid,
    PdrBin,
    PdrCurve,
    ScenarioConfig,
    heatmap,
    max_link_distance,
    pdr_curve,
    rmse,
    run_scenario,
    vehicle_position,
)
from .calibration import (
    CalibrationResult,
    GaConfig,
    Genome,
    HistoryRecord,
    INFEASIBLE_RMSE,
    PRESET_GENOMES,
    SearchSpace,
    calibrated_genome,
    default_genome,
    evolve,
    history_to_csv,
    noise_raised_genome,
    objective,
    parse_history_csv,
    result_summary,
    table_search_space,
)
from .dataio import (
    GeodeticPosition,
    MessageType,
    SyntheticSpec,
    Trace,
    TraceDirection,
    TraceParseError,
    TraceRecord,
    TransmissionType,
    export_heatmap_csv,
    export_log_csv,
    export_pdr_csv,
    export_trace_csv,
    generate_synthetic,
    parse_heatmap_csv,
    parse_log_csv,
    parse_pdr_csv,
    parse_trace_csv,
    project_enu,
)
from .config import (
    RunConfig,
    SynthSection,
    apply_preset,
    parse_config,
    render_config,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationResult",
    "DSRC_BAND_HZ",
    "DSRC_MAX_TX_POWER_MW",
    "DeliveryLog",
    "DeliveryReason",
    "DeliveryRecord",
    "Direction",
    "EnuTrace",
    "FadingParams",
    "FastFadingModel",
    "GaConfig",
    "Genome",
    "GeodeticPosition",
    "HeatmapCell",
    "HeatmapGrid",
    "HistoryRecord",
    "INFEASIBLE_RMSE",
    "MessageType",
    "PRESET_GENOMES",
    "PdrBin",
    "PdrCurve",
    "RadioParams",
    "RunConfig",
    "SNR_THRESHOLDS_DB",
    "SPEED_OF_LIGHT_M_S",
    "SUPPORTED_DATA_RATES_MBPS",
    "ScenarioConfig",
    "SearchSpace",
    "SlowFadingModel",
    "SynthSection",
    "SyntheticSpec",
    "Trace",
    "TraceDirection",
    "TraceParseError",
    "TraceRecord",
    "TransmissionType",
    "apply_preset",
    "calibrated_genome",
    "cascade_rx_power",
    "default_genome",
    "deterministic_gain_db",
    "evolve",
    "export_heatmap_csv",
    "export_log_csv",
    "export_pdr_csv",
    "export_trace_csv",
    "free_space_rx_power",
    "generate_synthetic",
    "heatmap",
    "history_to_csv",
    "is_received",
    "log_distance_rx_power",
    "lognormal_rx_power",
    "max_link_distance",
    "nakagami_power_sample",
    "noise_raised_genome",
    "objective",
    "parse_config",
    "parse_heatmap_csv",
    "parse_history_csv",
    "parse_log_csv",
    "parse_pdr_csv",
    "parse_trace_csv",
    "pdr_curve",
    "project_enu",
    "render_config",
    "result_summary",
    "rmse",
    "run_scenario",
    "snr_threshold_db",
    "table_search_space",
    "to_db",
    "to_linear",
    "validate_dsrc_profile",
    "vehicle_position",
]
