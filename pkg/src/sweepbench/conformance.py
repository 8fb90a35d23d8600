"""Backend conformance vectors shared by every session implementation.

The same checks run against the in-process simulated backend and any
external worker: message pairing semantics, session lifecycle, sample
counts, warm-up exclusion, and the error taxonomy. Latency *values* are
never asserted — only structure.

A factory is any callable DeviceSpec -> open BackendSession.
"""

from __future__ import annotations

from typing import Callable, List, Tuple

from .backend import BackendSession, SessionState
from .errors import (
    BackendCrashed,
    InvalidRequest,
    OutOfMemory,
    SweepbenchError,
    UnsupportedPrecision,
)
from .model import DeviceSpec, ModelSpec, Precision

SessionFactory = Callable[[DeviceSpec], BackendSession]


def _expect(exc_types, fn, *args, **kwargs):
    try:
        fn(*args, **kwargs)
    except exc_types:
        return
    except SweepbenchError as exc:
        raise AssertionError(
            f"expected {exc_types}, got {type(exc).__name__}: {exc}"
        ) from exc
    raise AssertionError(f"expected {exc_types}, but call succeeded")


def check_handshake(factory, device, model):
    session = factory(device)
    assert session.state is SessionState.IDLE, "fresh session must be idle"
    assert Precision.FP32 in session.capabilities, "fp32 capability required"
    session.release()


def check_lifecycle_gating(factory, device, model):
    session = factory(device)
    _expect(InvalidRequest, session.run, 1, 0, 10, 0.05)
    session.load_model(model, Precision.FP32)
    assert session.state is SessionState.MODEL_LOADED
    session.release()


def check_sample_counts(factory, device, model):
    session = factory(device)
    session.load_model(model, Precision.FP32)
    for warmup, timed in ((20, 100), (0, 5), (3, 2)):
        latencies, telemetry = session.run(2, warmup, timed, 0.05)
        assert len(latencies) == timed, (
            f"warmup={warmup} timed={timed}: got {len(latencies)} samples"
        )
        assert [s.iteration_index for s in latencies] == list(range(timed))
        assert all(s.latency_s > 0 for s in latencies)
        assert len(telemetry) >= 1, "at least one telemetry sample per run"
        ts = [t.timestamp_s for t in telemetry]
        assert ts == sorted(ts), "telemetry timestamps must be non-decreasing"
    session.release()


def check_invalid_requests(factory, device, model):
    session = factory(device)
    session.load_model(model, Precision.FP32)
    _expect(InvalidRequest, session.run, 1, 0, 0, 0.05)
    _expect(InvalidRequest, session.run, 0, 0, 10, 0.05)
    session.release()


def check_int8_requires_engine(factory, device, model):
    session = factory(device)
    if Precision.INT8 not in session.capabilities:
        session.release()
        return
    session.load_model(model, Precision.INT8)
    _expect(InvalidRequest, session.run, 1, 0, 10, 0.05)
    session.prepare_engine()
    assert session.state is SessionState.ENGINE_READY
    latencies, _ = session.run(1, 2, 10, 0.05)
    assert len(latencies) == 10
    session.release()


def check_oom_taxonomy(factory, device, model):
    # Any sane capacity is exceeded by a ludicrous batch; the error must be
    # OutOfMemory, not a generic failure, so the sweep engine can record it.
    session = factory(device)
    session.load_model(model, Precision.FP32)
    _expect(OutOfMemory, session.run, 2**40, 0, 10, 0.05)
    session.release()


def check_telemetry_clock(factory, device, model):
    session = factory(device)
    first = session.query_telemetry()
    second = session.query_telemetry()
    assert second.timestamp_s >= first.timestamp_s
    assert first.mem_used_bytes >= 0
    assert 0 <= first.util_pct <= 100
    session.release()


def check_release_closes(factory, device, model):
    session = factory(device)
    session.release()
    _expect((BackendCrashed, InvalidRequest), session.query_telemetry)


ALL_CHECKS: List[Tuple[str, Callable]] = [
    ("handshake", check_handshake),
    ("lifecycle_gating", check_lifecycle_gating),
    ("sample_counts", check_sample_counts),
    ("invalid_requests", check_invalid_requests),
    ("int8_requires_engine", check_int8_requires_engine),
    ("oom_taxonomy", check_oom_taxonomy),
    ("telemetry_clock", check_telemetry_clock),
    ("release_closes", check_release_closes),
]


def run_conformance(
    factory: SessionFactory, device: DeviceSpec, model: ModelSpec
) -> List[str]:
    """Run every conformance vector; returns the names of passed checks.

    Raises AssertionError naming the first failing vector.
    """
    passed = []
    for name, check in ALL_CHECKS:
        try:
            check(factory, device, model)
        except AssertionError as exc:
            raise AssertionError(f"conformance vector {name!r} failed: {exc}") from exc
        passed.append(name)
    return passed
