"""Published peak-throughput results embedded as a golden regression dataset.

The fixture is a checked-in JSON file with a content hash; any transcription
drift fails loudly. The rows let the analysis pipeline be regression-tested
without hardware: recomputing each speedup from the stored throughputs must
reproduce the printed 2-decimal values exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from typing import Dict, List, Optional, Tuple

from .errors import ChecksumMismatch
from .stats import round_half_up

FIXTURE_NAME = "golden_table1.json"


@dataclass(frozen=True)
class GoldenRow:
    platform: str
    model: str
    peak_batch: int
    peak_throughput_ips: int
    speedup_vs_cpu: Optional[float]

    def to_dict(self) -> dict:
        return {
            "platform": self.platform,
            "model": self.model,
            "peak_batch": self.peak_batch,
            "peak_throughput_ips": self.peak_throughput_ips,
            "speedup_vs_cpu": self.speedup_vs_cpu,
        }


def _canonical_payload(doc: dict) -> str:
    return json.dumps(
        {"rows": doc["rows"], "theoretical_peaks": doc["theoretical_peaks"]},
        sort_keys=True,
        separators=(",", ":"),
    )


def load_fixture() -> dict:
    """Load and checksum-verify the raw fixture document."""
    text = resources.files("sweepbench.data").joinpath(FIXTURE_NAME).read_text()
    doc = json.loads(text)
    digest = hashlib.sha256(_canonical_payload(doc).encode()).hexdigest()
    if digest != doc["sha256"]:
        raise ChecksumMismatch(
            f"golden fixture hash {digest} != recorded {doc['sha256']}"
        )
    return doc


def load_golden() -> List[GoldenRow]:
    doc = load_fixture()
    return [
        GoldenRow(
            platform=r["platform"],
            model=r["model"],
            peak_batch=int(r["peak_batch"]),
            peak_throughput_ips=int(r["peak_throughput_ips"]),
            speedup_vs_cpu=r["speedup_vs_cpu"],
        )
        for r in doc["rows"]
    ]


def theoretical_peaks() -> Dict[str, Dict[str, float]]:
    """Published peak compute per device: fp32/fp16 TFLOPS, int8 TOPS."""
    return load_fixture()["theoretical_peaks"]


def cpu_baselines() -> Dict[str, int]:
    """Per-model CPU peak throughput, used as the speedup denominator."""
    return {
        row.model: row.peak_throughput_ips
        for row in load_golden()
        if row.platform.startswith("cpu")
    }


def check_speedups() -> List[dict]:
    """Recompute every stored speedup from the stored throughputs.

    Returns one result dict per row that carries a speedup against a CPU
    baseline (the CPU self-rows are excluded): expected, recomputed, match,
    and whether the row would still match under a +/-1 ips perturbation
    (rounding-insensitive rows are flagged, not failed).
    """
    rows = load_golden()
    baselines = cpu_baselines()
    results = []
    for row in rows:
        if row.platform.startswith("cpu") or row.speedup_vs_cpu is None:
            continue
        base = baselines.get(row.model)
        if base is None:
            continue
        recomputed = round_half_up(row.peak_throughput_ips / base, 2)
        neighbors = {
            round_half_up((row.peak_throughput_ips + d) / base, 2) for d in (-1, 1)
        }
        results.append(
            {
                "platform": row.platform,
                "model": row.model,
                "expected": row.speedup_vs_cpu,
                "recomputed": recomputed,
                "match": recomputed == row.speedup_vs_cpu,
                "rounding_insensitive": neighbors == {row.speedup_vs_cpu},
            }
        )
    return results
