"""Device-agnostic inference-benchmark orchestrator.

Batch-size sweeps over precision modes and models, with warm-up and repeat
handling, concurrent telemetry, latency/throughput/tail statistics, Pareto
and performance-per-watt analysis, and report/figure emission. Fully
testable at desk scale through the built-in simulated device backend, and
attachable to real accelerators via the external worker protocol.
"""

from .model import (
    AnalysisReport,
    ConfigKey,
    DeviceKind,
    DeviceSpec,
    LatencySample,
    MetricSummary,
    ModelSpec,
    ParetoPoint,
    Precision,
    RunRecord,
    RunStatus,
    SweepPlan,
    TelemetrySample,
    validate_plan,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "ConfigKey",
    "DeviceKind",
    "DeviceSpec",
    "LatencySample",
    "MetricSummary",
    "ModelSpec",
    "ParetoPoint",
    "Precision",
    "RunRecord",
    "RunStatus",
    "SweepPlan",
    "TelemetrySample",
    "validate_plan",
    "__version__",
]
