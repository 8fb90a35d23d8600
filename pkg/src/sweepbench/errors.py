"""Exception taxonomy shared across the orchestrator.

Protocol-facing errors carry a stable ``code`` string so they survive the
trip across the worker wire format and back.
"""


class SweepbenchError(Exception):
    """Base class for all orchestrator errors."""

    code = "internal_error"


class InvalidPlan(SweepbenchError):
    code = "invalid_plan"

    def __init__(self, field: str, reason: str):
        super().__init__(f"invalid plan: {field}: {reason}")
        self.field = field
        self.reason = reason


class BackendUnavailable(SweepbenchError):
    code = "backend_unavailable"


class HandshakeMismatch(SweepbenchError):
    code = "handshake_mismatch"

    def __init__(self, peer_version):
        super().__init__(f"worker speaks protocol version {peer_version}")
        self.peer_version = peer_version


class UnsupportedPrecision(SweepbenchError):
    code = "unsupported_precision"


class OutOfMemory(SweepbenchError):
    code = "out_of_memory"


class InvalidRequest(SweepbenchError):
    code = "invalid_request"


class BackendCrashed(SweepbenchError):
    code = "backend_crashed"


class NoSuccessfulRuns(SweepbenchError):
    code = "no_successful_runs"


class MissingBaseline(SweepbenchError):
    code = "missing_baseline"


class ZeroPower(SweepbenchError):
    code = "zero_power"


class InsufficientSamples(SweepbenchError):
    code = "insufficient_samples"


class ChecksumMismatch(SweepbenchError):
    code = "checksum_mismatch"


class SchemaVersionMismatch(SweepbenchError):
    code = "schema_version_mismatch"


class SinkFailure(SweepbenchError):
    code = "sink_failure"


#: Maps wire error codes back to exception classes for the protocol client.
CODE_TO_ERROR = {
    cls.code: cls
    for cls in (
        BackendUnavailable,
        HandshakeMismatch,
        UnsupportedPrecision,
        OutOfMemory,
        InvalidRequest,
        BackendCrashed,
        SchemaVersionMismatch,
    )
}
