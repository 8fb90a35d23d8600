"""Per-configuration statistics and cross-configuration derivations.

Estimator conventions (declared in report metadata):
- median: lower median (order statistic n/2, 1-indexed) for even n
- p99: nearest-rank, sorted[ceil(0.99 * n)] 1-indexed, no interpolation
- std: population (divisor n)
- throughput: batch_size / median latency
- latency pooling: all timed samples from all ok runs of a configuration
- average power: trapezoidal time-weighted mean over telemetry timestamps
"""

from __future__ import annotations

import math
from collections import defaultdict
from decimal import ROUND_HALF_UP, Decimal
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import MissingBaseline, NoSuccessfulRuns, ZeroPower
from .model import (
    AnalysisReport,
    ConfigKey,
    MetricSummary,
    ParetoPoint,
    Precision,
    RunRecord,
    RunStatus,
    TelemetrySample,
)

AGGREGATION_METADATA = {
    "median_estimator": "lower-median",
    "p99_estimator": "nearest-rank",
    "std_divisor": "n",
    "latency_pooling": "all timed samples pooled across sweeps and repeats",
    "memory_aggregation": "max across runs",
    "power_aggregation": "trapezoidal time-weighted mean",
    "throughput_definition": "batch_size / median_latency_s",
}


def lower_median(values: Sequence[float]) -> float:
    """Median that stays within the observed samples: sorted[(n-1)//2]."""
    if not values:
        raise ValueError("lower_median of empty sequence")
    return sorted(values)[(len(values) - 1) // 2]


def p99_nearest_rank(values: Sequence[float]) -> float:
    """Nearest-rank 99th percentile: sorted[ceil(0.99 n)], 1-indexed."""
    if not values:
        raise ValueError("p99 of empty sequence")
    n = len(values)
    rank = max(1, math.ceil(0.99 * n))
    return sorted(values)[rank - 1]


def round_half_up(value: float, places: int = 2) -> float:
    """Table-display rounding; Python's round() would round half to even."""
    quant = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quant, rounding=ROUND_HALF_UP))


def time_weighted_power(samples: Sequence[TelemetrySample]) -> float:
    """Trapezoidal mean of power over the sample span; robust to jitter."""
    if not samples:
        return 0.0
    if len(samples) == 1:
        return samples[0].power_w
    ts = np.array([s.timestamp_s for s in samples])
    pw = np.array([s.power_w for s in samples])
    span = ts[-1] - ts[0]
    if span <= 0:
        return float(pw.mean())
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(pw, ts) / span)


def summarize(records: Sequence[RunRecord]) -> MetricSummary:
    """Pool all ok runs of one configuration into a MetricSummary."""
    if not records:
        raise NoSuccessfulRuns("no records for configuration")
    key = records[0].key
    for r in records:
        if r.key != key:
            raise ValueError(f"mixed configurations: {r.key} vs {key}")
    ok = [r for r in records if r.status is RunStatus.OK]
    if not ok:
        raise NoSuccessfulRuns(f"no successful runs for {key}")
    pooled = [s.latency_s for r in ok for s in r.latencies]
    if len(pooled) < 2:
        raise NoSuccessfulRuns(f"fewer than 2 pooled samples for {key}")
    median = lower_median(pooled)
    arr = np.array(pooled)
    telemetry = [s for r in ok for s in r.telemetry]
    peak_mem = max((s.mem_used_bytes for s in telemetry), default=0)
    # Average power over the pooled runs, weighted by each run's span.
    powers = [time_weighted_power(r.telemetry) for r in ok if r.telemetry]
    avg_power = float(np.mean(powers)) if powers else 0.0
    return MetricSummary(
        device=key.device,
        model=key.model,
        precision=key.precision,
        batch_size=key.batch_size,
        median_latency_s=median,
        mean_latency_s=float(arr.mean()),
        std_latency_s=float(arr.std()),
        p99_latency_s=p99_nearest_rank(pooled),
        throughput_ips=key.batch_size / median,
        peak_mem_bytes=peak_mem,
        avg_power_w=avg_power,
        repeats_aggregated=len(ok),
    )


def peak_throughput(summaries: Sequence[MetricSummary]) -> Tuple[int, float]:
    """(peak_batch, peak_throughput) over one (device, model, precision) group.

    Ties break toward the smaller batch.
    """
    if not summaries:
        raise ValueError("peak_throughput of empty group")
    best = min(summaries, key=lambda s: (-s.throughput_ips, s.batch_size))
    return best.batch_size, best.throughput_ips


def speedup(numerator_ips: float, baseline_ips: Optional[float]) -> float:
    """Throughput ratio against a baseline; tables render it at 2 decimals."""
    if baseline_ips is None:
        raise MissingBaseline("no baseline throughput available")
    if baseline_ips <= 0:
        raise MissingBaseline("baseline throughput must be > 0")
    return numerator_ips / baseline_ips


def performance_per_watt(summary: MetricSummary) -> float:
    """Throughput divided by average power draw, in images/sec/W."""
    if summary.avg_power_w <= 0:
        raise ZeroPower(f"avg_power_w={summary.avg_power_w} for {summary.key}")
    return summary.throughput_ips / summary.avg_power_w


def pareto_front(points: Sequence[tuple]) -> List[tuple]:
    """Non-dominated subset of (latency_s, throughput_ips, *tag) tuples.

    p dominates q iff p.latency <= q.latency and p.throughput >= q.throughput
    with at least one strict; exact coordinate ties all survive. Output is
    sorted by latency ascending (throughput descending within ties).
    """
    kept = []
    for p in points:
        dominated = False
        for q in points:
            if (
                q[0] <= p[0]
                and q[1] >= p[1]
                and (q[0] < p[0] or q[1] > p[1])
            ):
                dominated = True
                break
        if not dominated:
            kept.append(p)
    return sorted(kept, key=lambda p: (p[0], -p[1]))


def speedup_vs_fp32(
    summaries: Sequence[MetricSummary],
) -> Dict[Tuple[str, str, int], Dict[str, float]]:
    """Per (device, model, batch): throughput ratio of each precision to FP32.

    Keys with no FP32 run are emitted as gaps (absent), not failures.
    """
    by_key: Dict[Tuple[str, str, int], Dict[Precision, MetricSummary]] = defaultdict(dict)
    for s in summaries:
        by_key[(s.device, s.model, s.batch_size)][s.precision] = s
    out: Dict[Tuple[str, str, int], Dict[str, float]] = {}
    for key, group in by_key.items():
        base = group.get(Precision.FP32)
        if base is None:
            continue
        out[key] = {
            prec.value: s.throughput_ips / base.throughput_ips
            for prec, s in group.items()
        }
    return out


def build_report(
    summaries: Sequence[MetricSummary],
    cpu_baseline_ips: Optional[Mapping[str, float]] = None,
) -> AnalysisReport:
    """Assemble the full cross-configuration analysis document."""
    summaries = tuple(
        sorted(summaries, key=lambda s: (s.device, s.model, s.precision.value, s.batch_size))
    )

    by_dmp: Dict[Tuple[str, str, str], List[MetricSummary]] = defaultdict(list)
    by_dm: Dict[Tuple[str, str], List[MetricSummary]] = defaultdict(list)
    for s in summaries:
        by_dmp[(s.device, s.model, s.precision.value)].append(s)
        by_dm[(s.device, s.model)].append(s)

    peak_table = {}
    ppw_table = {}
    speedup_cpu: Dict[str, Optional[float]] = {}
    for (device, model, prec), group in sorted(by_dmp.items()):
        batch, ips = peak_throughput(group)
        label = f"{device}/{model}/{prec}"
        peak_table[label] = (batch, ips)
        peak_summary = next(s for s in group if s.batch_size == batch)
        if peak_summary.avg_power_w > 0:
            ppw_table[label] = performance_per_watt(peak_summary)
        if cpu_baseline_ips is not None:
            base = cpu_baseline_ips.get(model)
            speedup_cpu[label] = speedup(ips, base) if base else None

    fronts = {}
    for (device, model), group in sorted(by_dm.items()):
        points = [
            (s.median_latency_s, s.throughput_ips, s.precision, s.batch_size)
            for s in group
        ]
        fronts[f"{device}/{model}"] = tuple(
            ParetoPoint(
                precision=p[2],
                batch_size=p[3],
                median_latency_s=p[0],
                throughput_ips=p[1],
            )
            for p in pareto_front(points)
        )

    vs_fp32 = {
        f"{device}/{model}/b{batch}": ratios
        for (device, model, batch), ratios in sorted(speedup_vs_fp32(summaries).items())
    }

    return AnalysisReport(
        summaries=summaries,
        peak_table=peak_table,
        speedup_vs_cpu=speedup_cpu,
        speedup_vs_fp32=vs_fp32,
        pareto_front=fronts,
        ppw_table=ppw_table,
        metadata=dict(AGGREGATION_METADATA),
    )


def group_records(records: Iterable[RunRecord]) -> Dict[ConfigKey, List[RunRecord]]:
    grouped: Dict[ConfigKey, List[RunRecord]] = defaultdict(list)
    for r in records:
        grouped[r.key].append(r)
    return grouped


def summarize_all(records: Iterable[RunRecord]) -> List[MetricSummary]:
    """Summaries for every configuration with at least one ok run."""
    out = []
    for key, group in group_records(records).items():
        try:
            out.append(summarize(group))
        except NoSuccessfulRuns:
            continue
    return sorted(out, key=lambda s: (s.device, s.model, s.precision.value, s.batch_size))
