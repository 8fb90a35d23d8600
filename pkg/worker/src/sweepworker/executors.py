"""Pluggable inference executors behind the protocol server.

The stub executor synthesizes latencies from the model's analytic fields and
needs no hardware or ML framework; it exists so the full protocol surface is
testable on any machine. The torch executor runs real forward passes with
device-event timing when PyTorch is installed.
"""

from __future__ import annotations

import hashlib
import json
import platform
import random
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional

from .errors import DeviceOutOfMemory, InvalidRequest, UnsupportedPrecision

PRECISION_BITS = {"fp32": 32, "fp16": 16, "int8": 8}

DEFAULT_DEVICE = {
    "name": "stub-device",
    "mem_capacity_bytes": 16 * 1024**3,
    "base_runtime_bytes": 1024**3,
    "idle_power_w": 10.0,
    "max_power_w": 70.0,
    "ambient_c": 30.0,
    "steady_c": 68.0,
    # Synthetic arithmetic rate at fp32, in ops/s; halved bit-width doubles it.
    "stub_rate_ops_s": 5.0e12,
    "stub_overhead_s": 5.0e-5,
    "stub_noise_cv": 0.02,
}


def load_device_params(path: Optional[str]) -> dict:
    params = dict(DEFAULT_DEVICE)
    if path:
        params.update(json.loads(Path(path).read_text()))
    return params


class StubExecutor:
    """Deterministic synthetic executor; declares every precision.

    Latency is a fixed overhead plus work at a per-precision rate, with
    seeded multiplicative jitter. Memory follows the analytic footprint of
    the loaded model, so oversized batches fail with a real OOM code.
    """

    def __init__(self, device_params: dict, cache_dir: Optional[Path] = None):
        self.params = device_params
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.model: Optional[dict] = None
        self.precision: Optional[str] = None
        self.mem_used = int(device_params["base_runtime_bytes"])
        self.load = 0.0
        self._epoch = time.monotonic()

    @property
    def device_name(self) -> str:
        return self.params["name"]

    def capabilities(self) -> List[str]:
        return ["fp32", "fp16", "int8"]

    def runtime_fingerprint(self) -> dict:
        return {
            "executor": "stub",
            "python": platform.python_version(),
            "platform": platform.platform(),
        }

    def _footprint(self, batch: int) -> int:
        scale = PRECISION_BITS[self.precision] / 32.0
        return int(
            self.params["base_runtime_bytes"]
            + self.model["param_bytes"] * scale
            + batch * self.model["activation_bytes_per_image"] * scale
        )

    def load_model(self, model: dict, precision: str) -> None:
        if precision not in self.capabilities():
            raise UnsupportedPrecision(f"precision {precision!r} not supported")
        self.model = model
        self.precision = precision
        footprint = self._footprint(batch=1)
        capacity = self.params["mem_capacity_bytes"]
        if footprint > capacity:
            self.model = self.precision = None
            raise DeviceOutOfMemory(
                f"model footprint {footprint} exceeds capacity {capacity}"
            )
        scale = PRECISION_BITS[precision] / 32.0
        self.mem_used = int(
            self.params["base_runtime_bytes"] + model["param_bytes"] * scale
        )

    def prepare_engine(self) -> bool:
        """Simulated engine build; returns True on a disk-cache hit."""
        if self.cache_dir is None:
            return False
        key = hashlib.sha256(
            f"{self.device_name}:{self.model['name']}:{self.precision}".encode()
        ).hexdigest()
        marker = self.cache_dir / f"{key}.engine"
        if marker.exists():
            return True
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        marker.write_text(
            json.dumps(
                {
                    "device": self.device_name,
                    "model": self.model["name"],
                    "precision": self.precision,
                }
            )
        )
        return False

    def infer(self, batch: int, warmup: int, timed: int, seed: int) -> List[float]:
        footprint = self._footprint(batch)
        capacity = self.params["mem_capacity_bytes"]
        if footprint > capacity:
            raise DeviceOutOfMemory(
                f"batch {batch} footprint {footprint} exceeds capacity {capacity}"
            )
        self.mem_used = footprint
        self.load = min(1.0, batch / 64.0)
        rate = self.params["stub_rate_ops_s"] * (32.0 / PRECISION_BITS[self.precision])
        base = self.params["stub_overhead_s"] + batch * self.model["flops_per_image"] / rate
        rng = random.Random(seed)
        cv = self.params["stub_noise_cv"]
        samples = [
            base * max(0.1, 1.0 + rng.gauss(0.0, cv)) for _ in range(warmup + timed)
        ]
        # Warm-up draws are consumed and discarded; only the tail is reported.
        result = samples[warmup:]
        scale = PRECISION_BITS[self.precision] / 32.0
        self.mem_used = int(
            self.params["base_runtime_bytes"] + self.model["param_bytes"] * scale
        )
        self.load = 0.0
        return result

    def telemetry(self) -> Dict[str, float]:
        idle, peak = self.params["idle_power_w"], self.params["max_power_w"]
        return {
            "timestamp_s": time.monotonic() - self._epoch,
            "mem_used_bytes": self.mem_used,
            "power_w": idle + self.load * (peak - idle),
            "temp_c": self.params["ambient_c"]
            + self.load * (self.params["steady_c"] - self.params["ambient_c"]),
            "util_pct": 100.0 * self.load,
        }

    def release(self) -> None:
        self.model = self.precision = None
        self.mem_used = int(self.params["base_runtime_bytes"])
        self.load = 0.0


class TorchExecutor:
    """Real forward passes through torchvision models.

    FP32 runs anywhere; FP16 needs a CUDA device; INT8 is not offered (it
    belongs to a dedicated optimizing runtime). Timing uses device events
    with explicit synchronization on GPU and the host monotonic clock on CPU.
    """

    def __init__(self, device_params: dict, torch_device: str = "cpu",
                 cache_dir: Optional[Path] = None):
        import torch
        import torchvision

        self.torch = torch
        self.torchvision = torchvision
        self.params = device_params
        self.device = torch.device(torch_device)
        self.is_cuda = self.device.type == "cuda"
        self.model = None
        self.model_spec: Optional[dict] = None
        self.precision: Optional[str] = None
        self._epoch = time.monotonic()

    @property
    def device_name(self) -> str:
        if self.is_cuda:
            return self.torch.cuda.get_device_name(self.device)
        return f"cpu ({platform.processor() or platform.machine()})"

    def capabilities(self) -> List[str]:
        return ["fp32", "fp16"] if self.is_cuda else ["fp32"]

    def runtime_fingerprint(self) -> dict:
        fp = {
            "executor": "torch",
            "python": platform.python_version(),
            "torch": self.torch.__version__,
            "torchvision": self.torchvision.__version__,
        }
        if self.is_cuda:
            fp["cuda"] = self.torch.version.cuda
        return fp

    def load_model(self, model: dict, precision: str) -> None:
        if precision not in self.capabilities():
            raise UnsupportedPrecision(
                f"precision {precision!r} not supported on {self.device}"
            )
        factory = getattr(self.torchvision.models, model["name"], None)
        if factory is None:
            raise InvalidRequest(f"unknown model {model['name']!r}")
        try:
            net = factory(weights=None).eval().to(self.device)
            if precision == "fp16":
                net = net.half()
        except self.torch.cuda.OutOfMemoryError as exc:
            raise DeviceOutOfMemory(str(exc)) from exc
        self.model = net
        self.model_spec = model
        self.precision = precision

    def prepare_engine(self) -> bool:
        return False  # eager execution; nothing to build

    def infer(self, batch: int, warmup: int, timed: int, seed: int) -> List[float]:
        torch = self.torch
        dtype = torch.float16 if self.precision == "fp16" else torch.float32
        shape = (batch, *self.model_spec["input_shape"])
        try:
            # Inputs live on-device before any timing starts.
            x = torch.randn(shape, dtype=dtype, device=self.device)
            with torch.no_grad():
                for _ in range(warmup):
                    self.model(x)
                if self.is_cuda:
                    torch.cuda.synchronize(self.device)
                latencies = []
                for _ in range(timed):
                    if self.is_cuda:
                        start = torch.cuda.Event(enable_timing=True)
                        end = torch.cuda.Event(enable_timing=True)
                        start.record()
                        self.model(x)
                        end.record()
                        torch.cuda.synchronize(self.device)
                        latencies.append(start.elapsed_time(end) / 1e3)
                    else:
                        t0 = time.perf_counter()
                        self.model(x)
                        latencies.append(time.perf_counter() - t0)
        except self.torch.cuda.OutOfMemoryError as exc:
            raise DeviceOutOfMemory(str(exc)) from exc
        return latencies

    def telemetry(self) -> Dict[str, float]:
        sample = {
            "timestamp_s": time.monotonic() - self._epoch,
            "mem_used_bytes": 0,
            "power_w": 0.0,
            "temp_c": 0.0,
            "util_pct": 0.0,
        }
        if self.is_cuda:
            sample["mem_used_bytes"] = self.torch.cuda.memory_allocated(self.device)
            try:
                import pynvml

                pynvml.nvmlInit()
                handle = pynvml.nvmlDeviceGetHandleByIndex(self.device.index or 0)
                sample["power_w"] = pynvml.nvmlDeviceGetPowerUsage(handle) / 1e3
                sample["temp_c"] = float(
                    pynvml.nvmlDeviceGetTemperature(handle, pynvml.NVML_TEMPERATURE_GPU)
                )
                sample["util_pct"] = float(
                    pynvml.nvmlDeviceGetUtilizationRates(handle).gpu
                )
            except Exception:
                pass  # telemetry degrades to memory-only, never fails a run
        else:
            import resource

            rss_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
            sample["mem_used_bytes"] = rss_kb * 1024
        return sample

    def release(self) -> None:
        self.model = None
        self.model_spec = None
        self.precision = None
        if self.is_cuda:
            self.torch.cuda.empty_cache()


def make_executor(kind: str, device_params: dict, torch_device: str,
                  cache_dir: Optional[Path]):
    if kind == "stub":
        return StubExecutor(device_params, cache_dir=cache_dir)
    if kind == "torch":
        try:
            return TorchExecutor(device_params, torch_device, cache_dir=cache_dir)
        except ImportError as exc:
            print(f"torch executor unavailable: {exc}", file=sys.stderr)
            raise SystemExit(2)
    raise SystemExit(f"unknown executor kind {kind!r}")
