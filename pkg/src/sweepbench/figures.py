"""Render the plot-data families to PNG figures with matplotlib."""

from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .model import AnalysisReport, Precision
from .report import _group_by_device_model, _series_by_precision

STYLE = {
    Precision.FP32: {"color": "tab:blue", "marker": "o"},
    Precision.FP16: {"color": "tab:orange", "marker": "s"},
    Precision.INT8: {"color": "tab:green", "marker": "^"},
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def render_figures(report: AnalysisReport, fig_dir: Path) -> List[Path]:
    """One PNG per plot family per (device, model); returns written paths."""
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (device, model), group in _group_by_device_model(report.summaries).items():
        stem = f"{device}__{model}"
        title = f"{model} on {device}"
        batches, table = _series_by_precision(group)
        precisions = [p for p in Precision if any(s.precision is p for s in group)]

        def series(prec, attr, scale=1.0):
            pts = [
                (b, getattr(table[(prec, b)], attr) * scale)
                for b in batches
                if (prec, b) in table
            ]
            return [p[0] for p in pts], [p[1] for p in pts]

        fig, ax = plt.subplots(figsize=(6, 4))
        for prec in precisions:
            x, y = series(prec, "throughput_ips")
            ax.plot(x, y, label=prec.value, **STYLE[prec])
        ax.set_xscale("log", base=2)
        ax.set_xlabel("batch size")
        ax.set_ylabel("throughput (images/sec)")
        ax.set_title(f"Throughput vs batch: {title}")
        ax.legend()
        ax.grid(True, alpha=0.3)
        written.append(_save(fig, fig_dir / f"{stem}__throughput_vs_batch.png"))

        fig, ax = plt.subplots(figsize=(6, 4))
        for prec in precisions:
            x, y = series(prec, "median_latency_s", 1e3)
            ax.plot(x, y, label=prec.value, **STYLE[prec])
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("batch size")
        ax.set_ylabel("median latency (ms)")
        ax.set_title(f"Latency vs batch: {title}")
        ax.legend()
        ax.grid(True, alpha=0.3)
        written.append(_save(fig, fig_dir / f"{stem}__latency_vs_batch.png"))

        fig, ax = plt.subplots(figsize=(6, 4))
        for prec in precisions:
            x, y = series(prec, "median_latency_s", 1e3)
            _, thr = series(prec, "throughput_ips")
            ax.scatter(x, thr, label=prec.value, **STYLE[prec])
        front = report.pareto_front.get(f"{device}/{model}", ())
        if front:
            ax.plot(
                [p.median_latency_s * 1e3 for p in front],
                [p.throughput_ips for p in front],
                "k--",
                alpha=0.6,
                label="pareto front",
            )
        ax.set_xscale("log")
        ax.set_xlabel("median latency (ms)")
        ax.set_ylabel("throughput (images/sec)")
        ax.set_title(f"Latency-throughput tradeoff: {title}")
        ax.legend()
        ax.grid(True, alpha=0.3)
        written.append(_save(fig, fig_dir / f"{stem}__pareto.png"))

        fig, ax = plt.subplots(figsize=(6, 4))
        for prec in precisions:
            pts = [
                (b, report.speedup_vs_fp32[f"{device}/{model}/b{b}"][prec.value])
                for b in batches
                if prec.value in report.speedup_vs_fp32.get(f"{device}/{model}/b{b}", {})
            ]
            if pts:
                ax.plot([p[0] for p in pts], [p[1] for p in pts], label=prec.value, **STYLE[prec])
        ax.set_xscale("log", base=2)
        ax.set_xlabel("batch size")
        ax.set_ylabel("throughput speedup vs fp32")
        ax.set_title(f"Speedup vs fp32: {title}")
        ax.legend()
        ax.grid(True, alpha=0.3)
        written.append(_save(fig, fig_dir / f"{stem}__speedup_vs_batch.png"))

        fig, ax = plt.subplots(figsize=(6, 4))
        for prec in precisions:
            x, y = series(prec, "peak_mem_bytes", 1.0 / 2**30)
            ax.plot(x, y, label=prec.value, **STYLE[prec])
        ax.set_xscale("log", base=2)
        ax.set_xlabel("batch size")
        ax.set_ylabel("peak memory (GiB)")
        ax.set_title(f"Memory vs batch: {title}")
        ax.legend()
        ax.grid(True, alpha=0.3)
        written.append(_save(fig, fig_dir / f"{stem}__memory_vs_batch.png"))
    return written
