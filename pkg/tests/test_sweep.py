import time
from dataclasses import replace

import pytest

from sweepbench.backend import SimulatedSession
from sweepbench.errors import InsufficientSamples
from sweepbench.model import DeviceSpec, Precision, RunStatus, TelemetrySample
from sweepbench.presets import builtin_devices, builtin_models
from sweepbench.sweep import (
    RecordSink,
    detect_steady_state,
    execute_sweep,
    iter_run_keys,
    run_seed,
    sample_during_run,
)


def run_plan(plan, out_dir, resume=False):
    sink = RecordSink(out_dir)
    progress = execute_sweep(
        plan, builtin_devices(), builtin_models(), sink, resume=resume
    )
    return sink, progress


class TestRunSeed:
    def test_stable_and_distinct(self):
        key = "sim-t4|resnet18|fp32|8|0|0"
        assert run_seed(42, key) == run_seed(42, key)
        assert run_seed(42, key) != run_seed(43, key)
        assert run_seed(42, key) != run_seed(42, key.replace("|0|0", "|0|1"))


class TestIterRunKeys:
    def test_count_and_order(self, small_plan):
        keys = list(iter_run_keys(small_plan))
        assert len(keys) == small_plan.total_runs() == 36
        # Precision is the outermost swept axis, repeat the innermost.
        first = keys[: small_plan.repeats]
        assert [k[5] for k in first] == [0, 1]
        assert all(k[1] is Precision.FP32 for k in keys[:12])
        assert all(k[1] is Precision.INT8 for k in keys[-12:])


class TestExecuteSweep:
    def test_record_set_matches_plan(self, small_plan, tmp_path):
        sink, progress = run_plan(small_plan, tmp_path / "out")
        records = sink.read_records()
        assert len(records) == small_plan.total_runs()
        assert progress.completed == small_plan.total_runs()
        assert progress.failed == 0
        assert all(r.status is RunStatus.OK for r in records)
        assert all(len(r.latencies) == small_plan.timed_iters for r in records)

        expected = {
            f"{d}|{m}|{p.value}|{b}|{s}|{r}"
            for d, p, m, s, b, r in iter_run_keys(small_plan)
        }
        assert {r.run_key for r in records} == expected

    def test_emission_order_is_deterministic(self, small_plan, tmp_path):
        sink, _ = run_plan(small_plan, tmp_path / "out")
        got = [r.run_key for r in sink.read_records()]
        expected = [
            f"{d}|{m}|{p.value}|{b}|{s}|{r}"
            for d, p, m, s, b, r in iter_run_keys(small_plan)
        ]
        assert got == expected

    def test_byte_identical_across_runs(self, small_plan, tmp_path):
        sink_a, _ = run_plan(small_plan, tmp_path / "a")
        sink_b, _ = run_plan(small_plan, tmp_path / "b")
        assert sink_a.records_path.read_bytes() == sink_b.records_path.read_bytes()

    def test_resume_after_full_run_adds_nothing(self, small_plan, tmp_path):
        sink, _ = run_plan(small_plan, tmp_path / "out")
        before = sink.records_path.read_bytes()
        _, progress = run_plan(small_plan, tmp_path / "out", resume=True)
        assert sink.records_path.read_bytes() == before
        assert progress.completed == small_plan.total_runs()

    def test_resume_after_interruption_completes_the_set(self, small_plan, tmp_path):
        reference, _ = run_plan(small_plan, tmp_path / "ref")
        out = tmp_path / "out"
        sink, _ = run_plan(small_plan, out)

        # Simulate a crash: keep the first 10 completed runs plus one record
        # line whose manifest entry never landed.
        records = sink.records_path.read_text().splitlines()
        manifest = sink.manifest_path.read_text().splitlines()
        sink.records_path.write_text("".join(l + "\n" for l in records[:11]))
        sink.manifest_path.write_text("".join(l + "\n" for l in manifest[:10]))

        resumed, progress = run_plan(small_plan, out, resume=True)
        final = resumed.read_records()
        keys = [r.run_key for r in final]
        assert len(keys) == len(set(keys)) == small_plan.total_runs()

        # Latencies match an uninterrupted sweep: seeds are a pure function
        # of the run key, not of execution order. Telemetry is exempt; its
        # virtual timestamps depend on the session's run history.
        by_key = {r.run_key: r for r in reference.read_records()}
        for record in final:
            ref = by_key[record.run_key]
            assert record.latencies == ref.latencies
            assert record.status is ref.status

    def test_prune_orphans_drops_unmanifested_lines(self, small_plan, tmp_path):
        sink, _ = run_plan(small_plan, tmp_path / "out")
        lines = sink.records_path.read_text().splitlines()
        sink.manifest_path.write_text(
            "".join(l + "\n" for l in sink.manifest_path.read_text().splitlines()[:-2])
        )
        sink.prune_orphans()
        assert len(sink.read_records()) == len(lines) - 2

    def test_oom_recorded_and_sweep_continues(self, small_plan, tmp_path, t4, resnet18):
        # Capacity fits the model plus small batches; batch 64 activations
        # (64 * 256 KiB fp32) do not fit.
        capacity = (
            t4.base_runtime_bytes
            + resnet18.param_bytes
            + 10 * resnet18.activation_bytes_per_image
        )
        tight = DeviceSpec.from_dict({**t4.to_dict(), "mem_capacity_bytes": capacity})
        plan = replace(small_plan, precisions=(Precision.FP32,))
        sink = RecordSink(tmp_path / "out")
        progress = execute_sweep(
            plan, {"sim-t4": tight}, builtin_models(), sink
        )
        records = sink.read_records()
        assert len(records) == plan.total_runs()
        oom = [r for r in records if r.status is RunStatus.OOM]
        ok = [r for r in records if r.status is RunStatus.OK]
        assert {r.batch_size for r in oom} == {64}
        assert {r.batch_size for r in ok} == {1, 8}
        assert progress.failed == len(oom)
        assert all("capacity" in r.error_message for r in oom)


class TestSteadyState:
    def trace(self, temps, dt=1.0):
        return [
            TelemetrySample(
                timestamp_s=i * dt, mem_used_bytes=0, power_w=50, temp_c=t, util_pct=50
            )
            for i, t in enumerate(temps)
        ]

    def test_flat_tail_is_steady(self):
        assert detect_steady_state(self.trace([30, 50, 60, 64.9, 65, 65.1]), 2.0, 0.5)

    def test_rising_tail_is_not(self):
        assert not detect_steady_state(self.trace([30, 40, 50, 60, 70, 80]), 3.0, 0.5)

    def test_too_few_samples(self):
        with pytest.raises(InsufficientSamples):
            detect_steady_state(self.trace([30]), 1.0, 0.5)

    def test_short_trace(self):
        with pytest.raises(InsufficientSamples):
            detect_steady_state(self.trace([30, 31]), 10.0, 0.5)


class TestSampleDuringRun:
    def test_collects_periodic_plus_final_sample(self, t4):
        session = SimulatedSession(t4)
        result, telemetry, degraded = sample_during_run(
            session, 50, lambda: time.sleep(0.4) or "done"
        )
        assert result == "done"
        assert not degraded
        # ~8 periodic samples plus the final one; generous scheduling slack.
        assert 4 <= len(telemetry) <= 12

    def test_sampler_failure_degrades_not_fails(self, t4):
        session = SimulatedSession(t4)
        session.release()
        result, telemetry, degraded = sample_during_run(
            session, 10, lambda: time.sleep(0.05) or 7
        )
        assert result == 7
        assert degraded
