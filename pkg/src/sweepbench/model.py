"""Domain types shared by the sweep engine, backends, statistics, and reports.

All types are immutable value objects; each one round-trips through a
JSON-compatible dict via ``to_dict`` / ``from_dict`` with field names that
form the serialization contract for every other module.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .errors import InvalidPlan

SCHEMA_VERSION = 1


class Precision(enum.Enum):
    """Numerical execution mode; the value is the wire identifier."""

    FP32 = "fp32"
    FP16 = "fp16"
    INT8 = "int8"

    @property
    def bits_per_value(self) -> int:
        return {Precision.FP32: 32, Precision.FP16: 16, Precision.INT8: 8}[self]

    @classmethod
    def parse(cls, text: str) -> "Precision":
        return cls(text.lower())


@dataclass(frozen=True)
class ModelSpec:
    """Analytic description of one network: work and footprint per image."""

    name: str
    flops_per_image: float
    param_bytes: int
    activation_bytes_per_image: int
    input_shape: Tuple[int, int, int]

    def __post_init__(self):
        if self.flops_per_image <= 0:
            raise ValueError(f"model {self.name}: flops_per_image must be > 0")
        if self.param_bytes < 0 or self.activation_bytes_per_image < 0:
            raise ValueError(f"model {self.name}: byte counts must be >= 0")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "flops_per_image": self.flops_per_image,
            "param_bytes": self.param_bytes,
            "activation_bytes_per_image": self.activation_bytes_per_image,
            "input_shape": list(self.input_shape),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        return cls(
            name=d["name"],
            flops_per_image=float(d["flops_per_image"]),
            param_bytes=int(d["param_bytes"]),
            activation_bytes_per_image=int(d["activation_bytes_per_image"]),
            input_shape=tuple(d["input_shape"]),
        )


class DeviceKind(enum.Enum):
    SIMULATED = "simulated"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ThermalParams:
    """First-order thermal model constants for a simulated device."""

    ambient_c: float = 30.0
    steady_c: float = 68.0
    tau_s: float = 20.0

    def to_dict(self) -> dict:
        return {"ambient_c": self.ambient_c, "steady_c": self.steady_c, "tau_s": self.tau_s}

    @classmethod
    def from_dict(cls, d: dict) -> "ThermalParams":
        return cls(**d)


@dataclass(frozen=True)
class DeviceSpec:
    """Architectural parameters of a (real or simulated) accelerator.

    ``half_sat_batch`` is the batch size at which the simulated device reaches
    half of its peak arithmetic utilization; smaller values mean the device
    saturates at smaller batches.
    """

    name: str
    kind: DeviceKind
    peak_fp32_tflops: float
    peak_fp16_tflops: float
    peak_int8_tops: float
    mem_bandwidth_gbs: float
    mem_capacity_bytes: int
    launch_overhead_s: float
    base_runtime_bytes: int
    idle_power_w: float
    max_power_w: float
    noise_cv: float
    half_sat_batch: float = 8.0
    thermal: ThermalParams = field(default_factory=ThermalParams)

    def __post_init__(self):
        if not (self.peak_fp16_tflops >= self.peak_fp32_tflops):
            raise ValueError(f"device {self.name}: peak_fp16 < peak_fp32")
        if not (self.peak_int8_tops >= self.peak_fp16_tflops):
            raise ValueError(f"device {self.name}: peak_int8 < peak_fp16")
        if not (0 <= self.idle_power_w <= self.max_power_w):
            raise ValueError(f"device {self.name}: power range invalid")
        if not (0 <= self.noise_cv < 1):
            raise ValueError(f"device {self.name}: noise_cv must be in [0, 1)")

    def peak_ops_per_s(self, precision: Precision) -> float:
        """Theoretical peak arithmetic rate for a precision, in ops/s."""
        tera = {
            Precision.FP32: self.peak_fp32_tflops,
            Precision.FP16: self.peak_fp16_tflops,
            Precision.INT8: self.peak_int8_tops,
        }[precision]
        return tera * 1e12

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "peak_fp32_tflops": self.peak_fp32_tflops,
            "peak_fp16_tflops": self.peak_fp16_tflops,
            "peak_int8_tops": self.peak_int8_tops,
            "mem_bandwidth_gbs": self.mem_bandwidth_gbs,
            "mem_capacity_bytes": self.mem_capacity_bytes,
            "launch_overhead_s": self.launch_overhead_s,
            "base_runtime_bytes": self.base_runtime_bytes,
            "idle_power_w": self.idle_power_w,
            "max_power_w": self.max_power_w,
            "noise_cv": self.noise_cv,
            "half_sat_batch": self.half_sat_batch,
            "thermal": self.thermal.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceSpec":
        d = dict(d)
        d["kind"] = DeviceKind(d["kind"])
        d["thermal"] = ThermalParams.from_dict(d.get("thermal", {}))
        return cls(**d)


@dataclass(frozen=True)
class SweepPlan:
    """The full experiment matrix plus timing parameters.

    Device and model entries are names resolved against a registry at
    execution time; the plan itself stays a small, portable document.
    """

    devices: Tuple[str, ...]
    models: Tuple[str, ...]
    precisions: Tuple[Precision, ...]
    batch_sizes: Tuple[int, ...]
    sweeps: int
    repeats: int
    warmup_iters: int
    timed_iters: int
    telemetry_period_ms: int
    seed: int

    def total_runs(self) -> int:
        return (
            len(self.devices)
            * len(self.models)
            * len(self.precisions)
            * len(self.batch_sizes)
            * self.sweeps
            * self.repeats
        )

    def to_dict(self) -> dict:
        return {
            "devices": list(self.devices),
            "models": list(self.models),
            "precisions": [p.value for p in self.precisions],
            "batch_sizes": list(self.batch_sizes),
            "sweeps": self.sweeps,
            "repeats": self.repeats,
            "warmup_iters": self.warmup_iters,
            "timed_iters": self.timed_iters,
            "telemetry_period_ms": self.telemetry_period_ms,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        return cls(
            devices=tuple(d["devices"]),
            models=tuple(d["models"]),
            precisions=tuple(Precision.parse(p) for p in d["precisions"]),
            batch_sizes=tuple(int(b) for b in d["batch_sizes"]),
            sweeps=int(d["sweeps"]),
            repeats=int(d["repeats"]),
            warmup_iters=int(d["warmup_iters"]),
            timed_iters=int(d["timed_iters"]),
            telemetry_period_ms=int(d["telemetry_period_ms"]),
            seed=int(d["seed"]),
        )


def validate_plan(plan: SweepPlan) -> SweepPlan:
    """Check plan invariants; returns the plan with batch_sizes sorted-unique.

    Raises InvalidPlan naming the first violated field.
    """
    if not plan.devices:
        raise InvalidPlan("devices", "at least one device required")
    if not plan.models:
        raise InvalidPlan("models", "at least one model required")
    if not plan.precisions:
        raise InvalidPlan("precisions", "at least one precision required")
    if not plan.batch_sizes:
        raise InvalidPlan("batch_sizes", "at least one batch size required")
    if any(b < 1 for b in plan.batch_sizes):
        raise InvalidPlan("batch_sizes", "all batch sizes must be >= 1")
    if plan.warmup_iters < 0:
        raise InvalidPlan("warmup_iters", "must be >= 0")
    if plan.timed_iters < 2:
        raise InvalidPlan("timed_iters", "must be >= 2 (std undefined for n < 2)")
    if plan.repeats < 1:
        raise InvalidPlan("repeats", "must be >= 1")
    if plan.sweeps < 1:
        raise InvalidPlan("sweeps", "must be >= 1")
    if plan.telemetry_period_ms < 1:
        raise InvalidPlan("telemetry_period_ms", "must be >= 1")
    normalized = tuple(sorted(set(plan.batch_sizes)))
    if normalized != plan.batch_sizes:
        plan = replace(plan, batch_sizes=normalized)
    return plan


@dataclass(frozen=True)
class LatencySample:
    iteration_index: int
    latency_s: float

    def __post_init__(self):
        if self.latency_s <= 0:
            raise ValueError("latency_s must be > 0")

    def to_dict(self) -> dict:
        return {"iteration_index": self.iteration_index, "latency_s": self.latency_s}

    @classmethod
    def from_dict(cls, d: dict) -> "LatencySample":
        return cls(iteration_index=int(d["iteration_index"]), latency_s=float(d["latency_s"]))


@dataclass(frozen=True)
class TelemetrySample:
    timestamp_s: float
    mem_used_bytes: int
    power_w: float
    temp_c: float
    util_pct: float

    def __post_init__(self):
        if not (0 <= self.util_pct <= 100):
            raise ValueError("util_pct must be in [0, 100]")
        if self.mem_used_bytes < 0:
            raise ValueError("mem_used_bytes must be >= 0")

    def to_dict(self) -> dict:
        return {
            "timestamp_s": self.timestamp_s,
            "mem_used_bytes": self.mem_used_bytes,
            "power_w": self.power_w,
            "temp_c": self.temp_c,
            "util_pct": self.util_pct,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TelemetrySample":
        return cls(
            timestamp_s=float(d["timestamp_s"]),
            mem_used_bytes=int(d["mem_used_bytes"]),
            power_w=float(d["power_w"]),
            temp_c=float(d["temp_c"]),
            util_pct=float(d["util_pct"]),
        )


class RunStatus(enum.Enum):
    OK = "ok"
    OOM = "oom"
    BACKEND_ERROR = "backend_error"


@dataclass(frozen=True)
class ConfigKey:
    """Identifies one measured configuration (all sweeps/repeats pooled)."""

    device: str
    model: str
    precision: Precision
    batch_size: int

    def as_tuple(self) -> tuple:
        return (self.device, self.model, self.precision.value, self.batch_size)

    def __str__(self) -> str:
        return f"{self.device}/{self.model}/{self.precision.value}/b{self.batch_size}"


@dataclass(frozen=True)
class RunRecord:
    """One measurement: raw latencies plus the telemetry trace."""

    device: str
    model: str
    precision: Precision
    batch_size: int
    sweep_index: int
    repeat_index: int
    latencies: Tuple[LatencySample, ...]
    telemetry: Tuple[TelemetrySample, ...]
    status: RunStatus
    error_message: str = ""
    telemetry_degraded: bool = False

    @property
    def key(self) -> ConfigKey:
        return ConfigKey(self.device, self.model, self.precision, self.batch_size)

    @property
    def run_key(self) -> str:
        """Stable identifier for the full (config, sweep, repeat) tuple."""
        return (
            f"{self.device}|{self.model}|{self.precision.value}"
            f"|{self.batch_size}|{self.sweep_index}|{self.repeat_index}"
        )

    def to_dict(self) -> dict:
        return {
            "device": self.device,
            "model": self.model,
            "precision": self.precision.value,
            "batch_size": self.batch_size,
            "sweep_index": self.sweep_index,
            "repeat_index": self.repeat_index,
            "latencies": [s.to_dict() for s in self.latencies],
            "telemetry": [s.to_dict() for s in self.telemetry],
            "status": self.status.value,
            "error_message": self.error_message,
            "telemetry_degraded": self.telemetry_degraded,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            device=d["device"],
            model=d["model"],
            precision=Precision.parse(d["precision"]),
            batch_size=int(d["batch_size"]),
            sweep_index=int(d["sweep_index"]),
            repeat_index=int(d["repeat_index"]),
            latencies=tuple(LatencySample.from_dict(s) for s in d["latencies"]),
            telemetry=tuple(TelemetrySample.from_dict(s) for s in d["telemetry"]),
            status=RunStatus(d["status"]),
            error_message=d.get("error_message", ""),
            telemetry_degraded=bool(d.get("telemetry_degraded", False)),
        )


@dataclass(frozen=True)
class MetricSummary:
    """Derived statistics for one configuration, pooled over repeats."""

    device: str
    model: str
    precision: Precision
    batch_size: int
    median_latency_s: float
    mean_latency_s: float
    std_latency_s: float
    p99_latency_s: float
    throughput_ips: float
    peak_mem_bytes: int
    avg_power_w: float
    repeats_aggregated: int

    def __post_init__(self):
        if self.median_latency_s > self.p99_latency_s:
            raise ValueError("median_latency_s must be <= p99_latency_s")
        expected = self.batch_size / self.median_latency_s
        if abs(self.throughput_ips - expected) > 1e-9 * expected:
            raise ValueError("throughput_ips inconsistent with batch/median")

    @property
    def key(self) -> ConfigKey:
        return ConfigKey(self.device, self.model, self.precision, self.batch_size)

    def to_dict(self) -> dict:
        return {
            "device": self.device,
            "model": self.model,
            "precision": self.precision.value,
            "batch_size": self.batch_size,
            "median_latency_s": self.median_latency_s,
            "mean_latency_s": self.mean_latency_s,
            "std_latency_s": self.std_latency_s,
            "p99_latency_s": self.p99_latency_s,
            "throughput_ips": self.throughput_ips,
            "peak_mem_bytes": self.peak_mem_bytes,
            "avg_power_w": self.avg_power_w,
            "repeats_aggregated": self.repeats_aggregated,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSummary":
        return cls(
            device=d["device"],
            model=d["model"],
            precision=Precision.parse(d["precision"]),
            batch_size=int(d["batch_size"]),
            median_latency_s=float(d["median_latency_s"]),
            mean_latency_s=float(d["mean_latency_s"]),
            std_latency_s=float(d["std_latency_s"]),
            p99_latency_s=float(d["p99_latency_s"]),
            throughput_ips=float(d["throughput_ips"]),
            peak_mem_bytes=int(d["peak_mem_bytes"]),
            avg_power_w=float(d["avg_power_w"]),
            repeats_aggregated=int(d["repeats_aggregated"]),
        )


@dataclass(frozen=True)
class ParetoPoint:
    precision: Precision
    batch_size: int
    median_latency_s: float
    throughput_ips: float

    def to_dict(self) -> dict:
        return {
            "precision": self.precision.value,
            "batch_size": self.batch_size,
            "median_latency_s": self.median_latency_s,
            "throughput_ips": self.throughput_ips,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParetoPoint":
        return cls(
            precision=Precision.parse(d["precision"]),
            batch_size=int(d["batch_size"]),
            median_latency_s=float(d["median_latency_s"]),
            throughput_ips=float(d["throughput_ips"]),
        )


@dataclass(frozen=True)
class AnalysisReport:
    """Cross-configuration derivations over a full sweep.

    Mapping keys are "/".join-ed identifier strings so the report serializes
    to a flat, diff-friendly JSON document.
    """

    summaries: Tuple[MetricSummary, ...]
    peak_table: Dict[str, Tuple[int, float]]
    speedup_vs_cpu: Dict[str, Optional[float]]
    speedup_vs_fp32: Dict[str, Dict[str, float]]
    pareto_front: Dict[str, Tuple[ParetoPoint, ...]]
    ppw_table: Dict[str, float]
    metadata: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "metadata": dict(self.metadata),
            "summaries": [s.to_dict() for s in self.summaries],
            "peak_table": {k: list(v) for k, v in self.peak_table.items()},
            "speedup_vs_cpu": dict(self.speedup_vs_cpu),
            "speedup_vs_fp32": {k: dict(v) for k, v in self.speedup_vs_fp32.items()},
            "pareto_front": {
                k: [p.to_dict() for p in pts] for k, pts in self.pareto_front.items()
            },
            "ppw_table": dict(self.ppw_table),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalysisReport":
        return cls(
            summaries=tuple(MetricSummary.from_dict(s) for s in d["summaries"]),
            peak_table={k: (int(v[0]), float(v[1])) for k, v in d["peak_table"].items()},
            speedup_vs_cpu=dict(d["speedup_vs_cpu"]),
            speedup_vs_fp32={k: dict(v) for k, v in d["speedup_vs_fp32"].items()},
            pareto_front={
                k: tuple(ParetoPoint.from_dict(p) for p in pts)
                for k, pts in d["pareto_front"].items()
            },
            ppw_table=dict(d["ppw_table"]),
            metadata=dict(d.get("metadata", {})),
        )
