"""Probabilistic header-replica and code-rate allocation for LR-FHSS uplinks."""

from .analytic import (
    AnalyticReport,
    LoadSummary,
    decode_threshold,
    evaluate,
    evaluate_batch,
    fragment_success,
    fragments_for,
    header_success,
    load_summary,
    payload_success,
)
from .core import (
    DR8,
    DR9,
    AllocationDistribution,
    NetworkConfig,
    Setup,
    SetupCatalog,
    dbm_to_watts,
    default_catalog,
)
from .optimizer import (
    Objective,
    OptimizationResult,
    QuantizedAlpha,
    SimplexGrid,
    decode_downlink,
    encode_downlink,
    enumerate_simplex,
    optimize,
    optimize_quantized,
    optimize_two_setup,
)
from .simulator import SimReport, detect_collisions, generate_traffic, simulate

__version__ = "0.1.0"
