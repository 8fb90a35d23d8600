"""Command-line entry point: plan validation, sweep execution, analysis,
table rendering, figure emission, and golden-data regression checks.

Exit codes: 0 ok, 1 check failure, 2 invalid plan, 3 backend unavailable,
4 sink failure.
"""

from __future__ import annotations

import json
import shlex
import sys
from importlib import resources
from pathlib import Path

import click

from . import golden as golden_mod
from .backend import default_registry
from .errors import (
    BackendUnavailable,
    InvalidPlan,
    SinkFailure,
    SweepbenchError,
)
from .model import SweepPlan, validate_plan
from .presets import builtin_devices, builtin_models, load_device_file
from .protocol import make_worker_backend
from .report import load_records, render_peak_table, write_analysis
from .sweep import RecordSink, execute_sweep

EXIT_CHECK_FAILED = 1
EXIT_INVALID_PLAN = 2
EXIT_BACKEND_UNAVAILABLE = 3
EXIT_SINK_FAILURE = 4


def load_plan(plan_path: str) -> SweepPlan:
    """Load a plan from a file path or a shipped plan name."""
    path = Path(plan_path)
    if path.exists():
        text = path.read_text()
    else:
        shipped = resources.files("sweepbench.data").joinpath(plan_path)
        if not shipped.is_file():
            raise InvalidPlan("plan", f"plan file not found: {plan_path}")
        text = shipped.read_text()
    try:
        return validate_plan(SweepPlan.from_dict(json.loads(text)))
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidPlan("plan", f"cannot parse plan: {exc}") from exc


def _resolve_devices(plan, device_files):
    devices = builtin_devices()
    for f in device_files:
        spec = load_device_file(Path(f))
        devices[spec.name] = spec
    missing = [d for d in plan.devices if d not in devices]
    if missing:
        raise InvalidPlan("devices", f"unknown devices: {', '.join(missing)}")
    return devices


def _parse_baselines(pairs):
    if not pairs:
        return None
    out = {}
    for pair in pairs:
        if pair == "golden":
            out.update(golden_mod.cpu_baselines())
            continue
        model, _, value = pair.partition("=")
        if not value:
            raise click.BadParameter(f"expected model=ips, got {pair!r}")
        out[model] = float(value)
    return out


@click.group()
def main():
    """Inference benchmark orchestrator: batch sweeps, stats, reports."""


@main.command()
@click.option("--plan", "plan_path", required=True, help="Plan file or shipped plan name.")
@click.option("--backend", default="sim", show_default=True, help="Backend kind.")
@click.option(
    "--out",
    "out_dir",
    envvar="SWEEPBENCH_OUT",
    default="out",
    show_default=True,
    help="Output directory (env SWEEPBENCH_OUT).",
)
@click.option("--resume", is_flag=True, help="Skip runs already in the manifest.")
@click.option("--seed", type=int, default=None, help="Override the plan seed.")
@click.option("--device-file", multiple=True, help="Extra device parameter file(s).")
@click.option("--worker-cmd", default=None, help="Worker command line for --backend worker.")
@click.option("--cpu-baseline", multiple=True, help="model=ips baseline, or 'golden'.")
@click.option("--figures/--no-figures", default=True, show_default=True)
def run(plan_path, backend, out_dir, resume, seed, device_file, worker_cmd, cpu_baseline, figures):
    """Execute a sweep plan and write records + analysis under --out."""
    try:
        plan = load_plan(plan_path)
        if seed is not None:
            from dataclasses import replace

            plan = replace(plan, seed=seed)
        devices = _resolve_devices(plan, device_file)
    except InvalidPlan as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID_PLAN)

    registry = default_registry()
    if worker_cmd:
        registry["worker"] = make_worker_backend(shlex.split(worker_cmd))
    if backend not in registry:
        click.echo(f"error: no backend registered for kind {backend!r}", err=True)
        sys.exit(EXIT_BACKEND_UNAVAILABLE)

    out = Path(out_dir)
    try:
        sink = RecordSink(out)
        progress = execute_sweep(
            plan,
            devices,
            builtin_models(),
            sink,
            registry=registry,
            backend_kind=backend,
            resume=resume,
        )
    except BackendUnavailable as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_BACKEND_UNAVAILABLE)
    except SinkFailure as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SINK_FAILURE)

    click.echo(
        f"sweep complete: {progress.completed} ok, {progress.failed} failed, "
        f"{progress.total_configs} total in {progress.elapsed_s:.1f}s"
    )
    records = sink.read_records()
    baselines = _parse_baselines(cpu_baseline)
    report = write_analysis(records, out, cpu_baseline_ips=baselines)
    if figures:
        from .figures import render_figures

        render_figures(report, out / "figures")
    click.echo(render_peak_table(report, cpu_baseline_ips=baselines))


@main.command()
@click.option("--records", "records_path", required=True, type=click.Path(exists=True))
@click.option(
    "--out",
    "out_dir",
    envvar="SWEEPBENCH_OUT",
    default="out",
    show_default=True,
)
@click.option("--cpu-baseline", multiple=True, help="model=ips baseline, or 'golden'.")
@click.option("--figures/--no-figures", default=True, show_default=True)
def analyze(records_path, out_dir, cpu_baseline, figures):
    """Recompute the analysis artifacts from an existing records file."""
    records = load_records(Path(records_path))
    baselines = _parse_baselines(cpu_baseline)
    try:
        report = write_analysis(records, Path(out_dir), cpu_baseline_ips=baselines)
    except SweepbenchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CHECK_FAILED)
    if figures:
        from .figures import render_figures

        render_figures(report, Path(out_dir) / "figures")
    click.echo(render_peak_table(report, cpu_baseline_ips=baselines))


@main.group()
def plan():
    """Plan authoring helpers."""


@plan.command("validate")
@click.argument("plan_path")
def plan_validate(plan_path):
    """Validate a plan file and print the normalized run count."""
    try:
        p = load_plan(plan_path)
    except InvalidPlan as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INVALID_PLAN)
    click.echo(f"plan ok: {p.total_runs()} runs")


@main.group()
def golden():
    """Golden regression dataset commands."""


@golden.command("dump")
def golden_dump():
    """Print the golden dataset as JSON."""
    rows = [r.to_dict() for r in golden_mod.load_golden()]
    click.echo(
        json.dumps(
            {"rows": rows, "theoretical_peaks": golden_mod.theoretical_peaks()},
            indent=2,
            sort_keys=True,
        )
    )


@golden.command("check")
def golden_check():
    """Recompute all speedups from the golden throughputs; exit 1 on mismatch."""
    results = golden_mod.check_speedups()
    failures = 0
    for r in results:
        status = "ok" if r["match"] else "FAIL"
        flag = "" if r["rounding_insensitive"] else " (rounding-sensitive)"
        click.echo(
            f"{status}: {r['platform']} {r['model']}: "
            f"recomputed {r['recomputed']:.2f} vs printed {r['expected']:.2f}{flag}"
        )
        if not r["match"]:
            failures += 1
    click.echo(f"{len(results) - failures}/{len(results)} speedups match")
    if failures:
        sys.exit(EXIT_CHECK_FAILED)


@main.group()
def protocol():
    """Worker wire-protocol utilities."""


@protocol.command("print")
def protocol_print():
    """Print the worker wire-protocol contract."""
    click.echo(resources.files("sweepbench.data").joinpath("PROTOCOL.md").read_text())


if __name__ == "__main__":
    main()
