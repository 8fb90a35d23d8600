"""Analysis artifact emission: JSON document, CSV exports, plot-data series.

Latencies are stored in seconds everywhere; rendered tables and plot data
use milliseconds. All outputs are deterministic functions of the input
records, so re-running on identical input is byte-identical.
"""

from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import SchemaVersionMismatch, SweepbenchError
from .model import AnalysisReport, MetricSummary, Precision, RunRecord, RunStatus
from .stats import build_report, round_half_up, summarize_all

ANALYSIS_FILENAME = "analysis.json"
SUMMARIES_CSV = "summaries.csv"
PLOT_DIR = "plots"

SUMMARY_COLUMNS = [
    "device",
    "model",
    "precision",
    "batch_size",
    "median_latency_ms",
    "mean_latency_ms",
    "std_latency_ms",
    "p99_latency_ms",
    "throughput_ips",
    "aggregate_throughput_ips",
    "peak_mem_bytes",
    "avg_power_w",
    "repeats_aggregated",
]

#: The plot-data families emitted per (device, model) group.
PLOT_FAMILIES = (
    "throughput_vs_batch",
    "latency_vs_batch",
    "pareto",
    "speedup_vs_batch",
    "memory_vs_batch",
)


def aggregate_throughput(records: Sequence[RunRecord]) -> Dict[tuple, float]:
    """Audit-only alternative throughput: total images / total timed seconds."""
    images: Dict[tuple, float] = defaultdict(float)
    seconds: Dict[tuple, float] = defaultdict(float)
    for r in records:
        if r.status is not RunStatus.OK:
            continue
        k = r.key.as_tuple()
        images[k] += r.batch_size * len(r.latencies)
        seconds[k] += sum(s.latency_s for s in r.latencies)
    return {k: images[k] / seconds[k] for k in images if seconds[k] > 0}


def analyze_records(
    records: Sequence[RunRecord],
    cpu_baseline_ips: Optional[Mapping[str, float]] = None,
) -> AnalysisReport:
    if not records:
        raise SweepbenchError("no records to analyze")
    summaries = summarize_all(records)
    if not summaries:
        raise SweepbenchError("no successful runs to analyze")
    return build_report(summaries, cpu_baseline_ips=cpu_baseline_ips)


def write_analysis(
    records: Sequence[RunRecord],
    out_dir: Path,
    cpu_baseline_ips: Optional[Mapping[str, float]] = None,
) -> AnalysisReport:
    """Emit analysis.json, summaries.csv, and all plot-data CSV families."""
    report = analyze_records(records, cpu_baseline_ips=cpu_baseline_ips)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    (out_dir / ANALYSIS_FILENAME).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    write_summaries_csv(report.summaries, records, out_dir / SUMMARIES_CSV)
    write_plot_data(report, out_dir / PLOT_DIR)
    return report


def load_records(path: Path) -> List[RunRecord]:
    path = Path(path)
    records = []
    for line in path.read_text().splitlines():
        if line.strip():
            records.append(RunRecord.from_dict(json.loads(line)))
    return records


def load_analysis(path: Path) -> AnalysisReport:
    doc = json.loads(Path(path).read_text())
    from .model import SCHEMA_VERSION

    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"analysis schema {doc.get('schema_version')} != {SCHEMA_VERSION}"
        )
    return AnalysisReport.from_dict(doc)


def write_summaries_csv(
    summaries: Sequence[MetricSummary], records: Sequence[RunRecord], path: Path
) -> None:
    agg = aggregate_throughput(records)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SUMMARY_COLUMNS)
        for s in summaries:
            writer.writerow(
                [
                    s.device,
                    s.model,
                    s.precision.value,
                    s.batch_size,
                    repr(s.median_latency_s * 1e3),
                    repr(s.mean_latency_s * 1e3),
                    repr(s.std_latency_s * 1e3),
                    repr(s.p99_latency_s * 1e3),
                    repr(s.throughput_ips),
                    repr(agg.get(s.key.as_tuple(), 0.0)),
                    s.peak_mem_bytes,
                    repr(s.avg_power_w),
                    s.repeats_aggregated,
                ]
            )


def _group_by_device_model(
    summaries: Sequence[MetricSummary],
) -> Dict[Tuple[str, str], List[MetricSummary]]:
    groups: Dict[Tuple[str, str], List[MetricSummary]] = defaultdict(list)
    for s in summaries:
        groups[(s.device, s.model)].append(s)
    return dict(sorted(groups.items()))


def _series_by_precision(group: Sequence[MetricSummary]):
    batches = sorted({s.batch_size for s in group})
    table = {(s.precision, s.batch_size): s for s in group}
    return batches, table


def write_plot_data(report: AnalysisReport, plot_dir: Path) -> List[Path]:
    """One CSV per plot family per (device, model); returns written paths."""
    plot_dir = Path(plot_dir)
    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (device, model), group in _group_by_device_model(report.summaries).items():
        stem = f"{device}__{model}"
        batches, table = _series_by_precision(group)
        precisions = [p for p in Precision if any(s.precision is p for s in group)]

        def cell(prec, batch, attr, scale=1.0):
            s = table.get((prec, batch))
            return repr(getattr(s, attr) * scale) if s is not None else ""

        for family, attr, scale in (
            ("throughput_vs_batch", "throughput_ips", 1.0),
            ("latency_vs_batch", "median_latency_s", 1e3),
            ("memory_vs_batch", "peak_mem_bytes", 1.0),
        ):
            path = plot_dir / f"{stem}__{family}.csv"
            with path.open("w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(["batch_size"] + [p.value for p in precisions])
                for b in batches:
                    writer.writerow([b] + [cell(p, b, attr, scale) for p in precisions])
            written.append(path)

        path = plot_dir / f"{stem}__pareto.csv"
        front = {
            (pt.precision, pt.batch_size)
            for pt in report.pareto_front.get(f"{device}/{model}", ())
        }
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(
                ["precision", "batch_size", "median_latency_ms", "throughput_ips", "on_front"]
            )
            for s in sorted(group, key=lambda s: (s.precision.value, s.batch_size)):
                writer.writerow(
                    [
                        s.precision.value,
                        s.batch_size,
                        repr(s.median_latency_s * 1e3),
                        repr(s.throughput_ips),
                        int((s.precision, s.batch_size) in front),
                    ]
                )
        written.append(path)

        path = plot_dir / f"{stem}__speedup_vs_batch.csv"
        with path.open("w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["batch_size"] + [p.value for p in precisions])
            for b in batches:
                ratios = report.speedup_vs_fp32.get(f"{device}/{model}/b{b}", {})
                writer.writerow(
                    [b] + [repr(ratios[p.value]) if p.value in ratios else "" for p in precisions]
                )
        written.append(path)
    return written


def render_peak_table(
    report: AnalysisReport, cpu_baseline_ips: Optional[Mapping[str, float]] = None
) -> str:
    """Fixed-width summary table: platform, model, peak batch/throughput, speedup."""
    lines = [
        f"{'Platform':<24} {'Model':<12} {'Peak Batch':>10} "
        f"{'Peak Throughput (ips)':>22} {'Speedup vs CPU':>15}"
    ]
    for label, (batch, ips) in sorted(report.peak_table.items()):
        device, model, prec = label.split("/")
        ratio = report.speedup_vs_cpu.get(label)
        if ratio is None and cpu_baseline_ips:
            base = cpu_baseline_ips.get(model)
            ratio = ips / base if base else None
        speed = f"{round_half_up(ratio, 2):.2f}x" if ratio is not None else "N/A"
        lines.append(
            f"{device + ' (' + prec + ')':<24} {model:<12} {batch:>10} "
            f"{round(ips):>22} {speed:>15}"
        )
    return "\n".join(lines)
