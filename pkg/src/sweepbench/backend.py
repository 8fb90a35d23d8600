"""Backend abstraction: how the orchestrator drives any execution backend.

A session walks idle -> model_loaded -> engine_ready; inference runs in
either loaded state except INT8, which requires the engine-preparation
phase to have completed. ``release`` closes the session for good; switching
models means opening a fresh session.
"""

from __future__ import annotations

import enum
from abc import ABC, abstractmethod
from typing import Callable, Dict, Optional, Set, Tuple

import numpy as np

from .errors import (
    BackendCrashed,
    BackendUnavailable,
    InvalidRequest,
    OutOfMemory,
    UnsupportedPrecision,
)
from .model import DeviceSpec, LatencySample, ModelSpec, Precision, TelemetrySample
from .simdevice import SimState, noisy_latencies, sim_latency, sim_memory, utilization_factor

PROTOCOL_VERSION = 1


class SessionState(enum.Enum):
    IDLE = "idle"
    MODEL_LOADED = "model_loaded"
    ENGINE_READY = "engine_ready"
    CLOSED = "closed"


class BackendSession(ABC):
    """One session serves one run at a time on one device."""

    device: DeviceSpec
    capabilities: Set[Precision]
    state: SessionState

    @abstractmethod
    def load_model(self, model: ModelSpec, precision: Precision) -> None:
        ...

    @abstractmethod
    def prepare_engine(self) -> None:
        ...

    @abstractmethod
    def run(
        self,
        batch: int,
        warmup: int,
        timed: int,
        telemetry_period_s: float,
        seed: int = 0,
    ) -> Tuple[Tuple[LatencySample, ...], Tuple[TelemetrySample, ...]]:
        """Execute warm-up then timed iterations; returns (latencies, telemetry).

        Exactly `timed` latency samples come back, ordered by iteration
        index, with warm-up samples discarded. The telemetry trace covers
        the run at the requested period with at least one sample.
        """

    @abstractmethod
    def query_telemetry(self) -> TelemetrySample:
        ...

    @abstractmethod
    def release(self) -> None:
        ...


class SimulatedSession(BackendSession):
    """In-process analytic backend; all timing is virtual and deterministic."""

    def __init__(self, device: DeviceSpec):
        if device.mem_capacity_bytes <= 0:
            raise BackendUnavailable(f"device {device.name}: no memory capacity")
        self.device = device
        self.capabilities = {Precision.FP32, Precision.FP16, Precision.INT8}
        self.state = SessionState.IDLE
        self.sim = SimState(device=device)
        self.model: Optional[ModelSpec] = None
        self.precision: Optional[Precision] = None

    def _check_open(self) -> None:
        if self.state is SessionState.CLOSED:
            raise BackendCrashed("session closed")

    def load_model(self, model: ModelSpec, precision: Precision) -> None:
        self._check_open()
        if self.state is not SessionState.IDLE:
            raise InvalidRequest(f"load_model requires idle state, got {self.state.value}")
        if precision not in self.capabilities:
            raise UnsupportedPrecision(precision.value)
        footprint = sim_memory(self.device, model, precision, batch=1)
        if footprint > self.device.mem_capacity_bytes:
            raise OutOfMemory(
                f"model footprint {footprint} exceeds capacity "
                f"{self.device.mem_capacity_bytes}"
            )
        self.model = model
        self.precision = precision
        scale = precision.bits_per_value / 32.0
        self.sim.mem_used_bytes = int(
            self.device.base_runtime_bytes + model.param_bytes * scale
        )
        self.state = SessionState.MODEL_LOADED

    def prepare_engine(self) -> None:
        self._check_open()
        if self.state is not SessionState.MODEL_LOADED:
            raise InvalidRequest("prepare_engine requires model_loaded state")
        # Opaque phase covering export/build/calibration; instant here and
        # never part of latency statistics.
        self.state = SessionState.ENGINE_READY

    def run(self, batch, warmup, timed, telemetry_period_s, seed=0):
        self._check_open()
        if self.state not in (SessionState.MODEL_LOADED, SessionState.ENGINE_READY):
            raise InvalidRequest("run requires a loaded model")
        if self.precision is Precision.INT8 and self.state is not SessionState.ENGINE_READY:
            raise InvalidRequest("INT8 inference requires prepare_engine first")
        if batch < 1:
            raise InvalidRequest("batch must be >= 1")
        if timed < 1:
            raise InvalidRequest("timed iteration count must be >= 1")
        if warmup < 0:
            raise InvalidRequest("warmup iteration count must be >= 0")
        if telemetry_period_s <= 0:
            raise InvalidRequest("telemetry period must be > 0")

        footprint = sim_memory(self.device, self.model, self.precision, batch)
        if footprint > self.device.mem_capacity_bytes:
            raise OutOfMemory(
                f"batch {batch} footprint {footprint} exceeds capacity "
                f"{self.device.mem_capacity_bytes}"
            )

        base = sim_latency(self.device, self.model, self.precision, batch)
        rng = np.random.default_rng(seed)
        all_samples = noisy_latencies(base, warmup + timed, self.device.noise_cv, rng)
        timed_samples = all_samples[warmup:]
        latencies = tuple(
            LatencySample(iteration_index=i, latency_s=v)
            for i, v in enumerate(timed_samples)
        )

        # Telemetry in virtual time: allocation happens before warm-up, the
        # load holds for the whole run, and the final sample lands exactly at
        # run completion.
        self.sim.mem_used_bytes = footprint
        load = utilization_factor(self.device, batch)
        total = sum(all_samples)
        telemetry = []
        elapsed = 0.0
        while elapsed + telemetry_period_s < total:
            elapsed += telemetry_period_s
            telemetry.append(self.sim.advance(load, telemetry_period_s))
        telemetry.append(self.sim.advance(load, total - elapsed))

        # Activations are freed after the call; weights stay resident.
        scale = self.precision.bits_per_value / 32.0
        self.sim.mem_used_bytes = int(
            self.device.base_runtime_bytes + self.model.param_bytes * scale
        )
        self.sim.load = 0.0
        return latencies, tuple(telemetry)

    def query_telemetry(self) -> TelemetrySample:
        self._check_open()
        return self.sim.snapshot()

    def release(self) -> None:
        self._check_open()
        self.state = SessionState.CLOSED


#: A backend factory takes a DeviceSpec and yields an open session.
BackendFactory = Callable[[DeviceSpec], BackendSession]


def default_registry() -> Dict[str, BackendFactory]:
    return {"sim": SimulatedSession}


def open_session(
    device: DeviceSpec,
    backend_kind: str,
    registry: Optional[Dict[str, BackendFactory]] = None,
) -> BackendSession:
    """Open a session on `device` through the registered backend kind."""
    registry = registry if registry is not None else default_registry()
    factory = registry.get(backend_kind)
    if factory is None:
        raise BackendUnavailable(f"no backend registered for kind {backend_kind!r}")
    return factory(device)
