"""Error taxonomy mirroring the stable wire-protocol codes."""


class WorkerError(Exception):
    """Base for all protocol-visible failures; `code` goes on the wire."""

    code = "internal_error"


class UnsupportedPrecision(WorkerError):
    code = "unsupported_precision"


class DeviceOutOfMemory(WorkerError):
    code = "out_of_memory"


class InvalidRequest(WorkerError):
    code = "invalid_request"


class BackendUnavailable(WorkerError):
    code = "backend_unavailable"
