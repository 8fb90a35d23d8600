"""Analytic device model: latency, memory, power, temperature, utilization.

Latency follows a roofline shape: a fixed launch overhead plus the larger of
compute time and memory time. Compute rate ramps toward the device peak as
batch size grows (half-saturation at ``half_sat_batch``); weight traffic
amortizes across the batch, so efficiency improves with larger batches.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import UnsupportedPrecision
from .model import DeviceSpec, ModelSpec, Precision, TelemetrySample

#: Extra multiplier applied to the top 1% of noisy samples, per unit of
#: noise_cv, so the simulated tail is strictly heavier than the median.
TAIL_INFLATION_PER_CV = 3.0


def utilization_factor(device: DeviceSpec, batch: int) -> float:
    """Fraction of peak arithmetic rate reached at a given batch size."""
    return batch / (batch + device.half_sat_batch)


def sim_latency(
    device: DeviceSpec, model: ModelSpec, precision: Precision, batch: int
) -> float:
    """Deterministic per-call latency in seconds (noise applied separately)."""
    if batch < 1:
        raise ValueError("batch must be >= 1")
    if not isinstance(precision, Precision):
        raise UnsupportedPrecision(str(precision))
    scale = precision.bits_per_value / 32.0
    effective_peak = utilization_factor(device, batch) * device.peak_ops_per_s(precision)
    compute_time = batch * model.flops_per_image / effective_peak
    # Weight traffic amortizes over the batch: one pass of the parameters
    # serves every image in the call.
    bytes_moved = (
        batch * model.activation_bytes_per_image + model.param_bytes
    ) * scale
    memory_time = bytes_moved / (device.mem_bandwidth_gbs * 1e9)
    return device.launch_overhead_s + max(compute_time, memory_time)


def sim_memory(
    device: DeviceSpec, model: ModelSpec, precision: Precision, batch: int
) -> int:
    """Device memory footprint in bytes; capacity is enforced by the backend."""
    scale = precision.bits_per_value / 32.0
    return int(
        device.base_runtime_bytes
        + model.param_bytes * scale
        + batch * model.activation_bytes_per_image * scale
    )


def noisy_latencies(
    base_latency_s: float, count: int, noise_cv: float, rng: np.random.Generator
) -> List[float]:
    """Draw `count` latency samples around a deterministic base value.

    Multiplicative log-normal noise with coefficient of variation `noise_cv`
    (mean-one), plus a tail inflation on the largest 1% of samples so the
    p99 is strictly above the median whenever noise_cv > 0.
    """
    if noise_cv == 0:
        return [base_latency_s] * count
    sigma = math.sqrt(math.log(1.0 + noise_cv * noise_cv))
    mult = np.exp(rng.normal(-0.5 * sigma * sigma, sigma, size=count))
    n_tail = max(1, math.ceil(0.01 * count))
    tail_idx = np.argsort(mult)[-n_tail:]
    mult[tail_idx] *= 1.0 + TAIL_INFLATION_PER_CV * noise_cv
    return [base_latency_s * m for m in mult]


@dataclass
class SimState:
    """Mutable simulator state confined to one backend session.

    Virtual time only advances through runs and telemetry queries, which
    keeps every emitted timestamp a pure function of the request sequence.
    """

    device: DeviceSpec
    resident_model: Optional[Tuple[ModelSpec, Precision]] = None
    clock_s: float = 0.0
    temp_c: float = 0.0
    load: float = 0.0
    mem_used_bytes: int = 0

    def __post_init__(self):
        self.temp_c = self.device.thermal.ambient_c
        self.mem_used_bytes = self.device.base_runtime_bytes
        self._lock = threading.Lock()

    def steady_temp(self, load: float) -> float:
        th = self.device.thermal
        return th.ambient_c + load * (th.steady_c - th.ambient_c)

    def advance(self, load: float, dt: float) -> TelemetrySample:
        """First-order relaxation toward the load's steady temperature.

        Returns the telemetry snapshot at the new virtual time.
        """
        if dt <= 0:
            raise ValueError("dt must be > 0")
        if not (0 <= load <= 1):
            raise ValueError("load must be in [0, 1]")
        with self._lock:
            target = self.steady_temp(load)
            self.temp_c = target + (self.temp_c - target) * math.exp(
                -dt / self.device.thermal.tau_s
            )
            self.clock_s += dt
            self.load = load
            return self._snapshot_locked()

    def snapshot(self) -> TelemetrySample:
        with self._lock:
            return self._snapshot_locked()

    def _snapshot_locked(self) -> TelemetrySample:
        power = self.device.idle_power_w + self.load * (
            self.device.max_power_w - self.device.idle_power_w
        )
        return TelemetrySample(
            timestamp_s=self.clock_s,
            mem_used_bytes=self.mem_used_bytes,
            power_w=power,
            temp_c=self.temp_c,
            util_pct=100.0 * self.load,
        )


def sim_power_temp_util(state: SimState, load: float, dt: float) -> TelemetrySample:
    """Advance the thermal/power state by dt seconds at the given load."""
    return state.advance(load, dt)
