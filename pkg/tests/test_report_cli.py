import csv
import json

import pytest
from click.testing import CliRunner

from sweepbench.cli import main
from sweepbench.errors import SchemaVersionMismatch, SweepbenchError
from sweepbench.presets import builtin_devices, builtin_models
from sweepbench.report import (
    PLOT_FAMILIES,
    SUMMARY_COLUMNS,
    aggregate_throughput,
    analyze_records,
    load_analysis,
    load_records,
    render_peak_table,
    write_analysis,
)
from sweepbench.sweep import RecordSink, execute_sweep


@pytest.fixture(scope="module")
def small_records(small_plan_module, tmp_path_factory):
    out = tmp_path_factory.mktemp("records")
    sink = RecordSink(out)
    execute_sweep(small_plan_module, builtin_devices(), builtin_models(), sink)
    return sink.read_records()


@pytest.fixture(scope="module")
def small_plan_module():
    from sweepbench.model import Precision, SweepPlan

    return SweepPlan(
        devices=("sim-t4",),
        models=("resnet18",),
        precisions=(Precision.FP32, Precision.FP16, Precision.INT8),
        batch_sizes=(1, 8, 64),
        sweeps=2,
        repeats=2,
        warmup_iters=3,
        timed_iters=10,
        telemetry_period_ms=50,
        seed=42,
    )


class TestAnalysisArtifacts:
    def test_analyze_empty_errors(self):
        with pytest.raises(SweepbenchError):
            analyze_records([])

    def test_artifact_set(self, small_records, tmp_path):
        out = tmp_path / "analysis"
        report = write_analysis(small_records, out)
        assert (out / "analysis.json").exists()
        assert (out / "summaries.csv").exists()
        for family in PLOT_FAMILIES:
            assert (out / "plots" / f"sim-t4__resnet18__{family}.csv").exists()
        assert len(report.summaries) == 9  # 3 precisions x 3 batches

    def test_analysis_round_trip(self, small_records, tmp_path):
        out = tmp_path / "analysis"
        report = write_analysis(small_records, out)
        loaded = load_analysis(out / "analysis.json")
        assert loaded == report

    def test_schema_version_guard(self, small_records, tmp_path):
        out = tmp_path / "analysis"
        write_analysis(small_records, out)
        doc = json.loads((out / "analysis.json").read_text())
        doc["schema_version"] = 99
        (out / "analysis.json").write_text(json.dumps(doc))
        with pytest.raises(SchemaVersionMismatch):
            load_analysis(out / "analysis.json")

    def test_rewrite_is_byte_identical(self, small_records, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        write_analysis(small_records, a)
        write_analysis(small_records, b)
        for name in ("analysis.json", "summaries.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        for p in sorted((a / "plots").iterdir()):
            assert p.read_bytes() == (b / "plots" / p.name).read_bytes()

    def test_summary_csv_shape(self, small_records, tmp_path):
        out = tmp_path / "analysis"
        write_analysis(small_records, out)
        with (out / "summaries.csv").open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == SUMMARY_COLUMNS
        assert len(rows) == 1 + 9
        thr = rows[0].index("throughput_ips")
        agg = rows[0].index("aggregate_throughput_ips")
        for row in rows[1:]:
            # The audit column is an independent estimator; it should land
            # close to the median-based definition, never at zero.
            assert float(row[agg]) > 0
            assert float(row[agg]) == pytest.approx(float(row[thr]), rel=0.25)

    def test_aggregate_throughput_definition(self, small_records):
        agg = aggregate_throughput(small_records)
        key = ("sim-t4", "resnet18", "fp32", 8)
        pooled = [
            s.latency_s
            for r in small_records
            if r.key.as_tuple() == key
            for s in r.latencies
        ]
        assert agg[key] == pytest.approx(8 * len(pooled) / sum(pooled))

    def test_peak_table_rendering(self, small_records):
        report = analyze_records(small_records, cpu_baseline_ips={"resnet18": 670})
        text = render_peak_table(report, cpu_baseline_ips={"resnet18": 670})
        assert "Platform" in text and "Speedup vs CPU" in text
        assert "sim-t4 (int8)" in text
        assert "x" in text.splitlines()[1]

    def test_peak_table_na_without_baseline(self, small_records):
        report = analyze_records(small_records)
        assert "N/A" in render_peak_table(report)


def write_plan(tmp_path, plan):
    path = tmp_path / "plan.json"
    path.write_text(json.dumps(plan.to_dict()))
    return path


class TestCli:
    def test_plan_validate_ok(self, tmp_path, small_plan):
        result = CliRunner().invoke(
            main, ["plan", "validate", str(write_plan(tmp_path, small_plan))]
        )
        assert result.exit_code == 0
        assert "36 runs" in result.output

    def test_plan_validate_rejects_bad_plan(self, tmp_path, small_plan):
        from dataclasses import replace

        bad = replace(small_plan, timed_iters=1)
        result = CliRunner().invoke(
            main, ["plan", "validate", str(write_plan(tmp_path, bad))]
        )
        assert result.exit_code == 2

    def test_plan_validate_missing_file(self):
        result = CliRunner().invoke(main, ["plan", "validate", "no-such.plan"])
        assert result.exit_code == 2

    def test_shipped_plan_resolves(self):
        result = CliRunner().invoke(main, ["plan", "validate", "paper-default.plan"])
        assert result.exit_code == 0
        assert "5940 runs" in result.output

    def test_run_end_to_end(self, tmp_path, small_plan):
        out = tmp_path / "out"
        result = CliRunner().invoke(
            main,
            [
                "run",
                "--plan", str(write_plan(tmp_path, small_plan)),
                "--out", str(out),
                "--no-figures",
                "--cpu-baseline", "resnet18=670",
            ],
        )
        assert result.exit_code == 0, result.output
        assert "sweep complete: 36 ok, 0 failed" in result.output
        assert (out / "records.jsonl").exists()
        assert (out / "manifest.txt").exists()
        assert (out / "analysis.json").exists()
        assert "Peak Throughput" in result.output

    def test_run_unknown_backend(self, tmp_path, small_plan):
        result = CliRunner().invoke(
            main,
            [
                "run",
                "--plan", str(write_plan(tmp_path, small_plan)),
                "--out", str(tmp_path / "out"),
                "--backend", "cuda",
                "--no-figures",
            ],
        )
        assert result.exit_code == 3

    def test_run_renders_figures(self, tmp_path, small_plan):
        from dataclasses import replace

        out = tmp_path / "out"
        quick = replace(small_plan, sweeps=1, repeats=1)
        result = CliRunner().invoke(
            main,
            ["run", "--plan", str(write_plan(tmp_path, quick)), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        pngs = sorted(p.name for p in (out / "figures").glob("*.png"))
        assert pngs == [
            f"sim-t4__resnet18__{family}.png"
            for family in sorted(PLOT_FAMILIES)
        ]

    def test_analyze_from_records(self, tmp_path, small_plan):
        out = tmp_path / "out"
        runner = CliRunner()
        runner.invoke(
            main,
            ["run", "--plan", str(write_plan(tmp_path, small_plan)),
             "--out", str(out), "--no-figures"],
        )
        redo = tmp_path / "redo"
        result = runner.invoke(
            main,
            ["analyze", "--records", str(out / "records.jsonl"),
             "--out", str(redo), "--no-figures", "--cpu-baseline", "golden"],
        )
        assert result.exit_code == 0, result.output
        assert (redo / "analysis.json").exists()
        assert load_records(out / "records.jsonl")

    def test_golden_check(self):
        result = CliRunner().invoke(main, ["golden", "check"])
        assert result.exit_code == 0
        assert "12/12 speedups match" in result.output

    def test_golden_dump_is_json(self):
        result = CliRunner().invoke(main, ["golden", "dump"])
        doc = json.loads(result.output)
        assert len(doc["rows"]) == 20

    def test_protocol_print(self):
        result = CliRunner().invoke(main, ["protocol", "print"])
        assert result.exit_code == 0
        for kind in ("hello", "infer", "telemetry_query", "release"):
            assert kind in result.output
