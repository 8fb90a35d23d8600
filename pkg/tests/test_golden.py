import json

import pytest

from sweepbench import golden
from sweepbench.errors import ChecksumMismatch
from sweepbench.stats import round_half_up


class TestFixtureIntegrity:
    def test_checksum_verifies(self):
        doc = golden.load_fixture()
        assert len(doc["rows"]) == 20

    def test_tampered_fixture_rejected(self, monkeypatch, tmp_path):
        doc = golden.load_fixture()
        doc["rows"][3]["peak_throughput_ips"] += 1
        tampered = tmp_path / "golden_table1.json"
        tampered.write_text(json.dumps(doc))

        class FakeFiles:
            def joinpath(self, name):
                return tampered

        monkeypatch.setattr(golden.resources, "files", lambda pkg: FakeFiles())
        with pytest.raises(ChecksumMismatch):
            golden.load_fixture()


class TestRows:
    def row(self, platform, model):
        matches = [
            r for r in golden.load_golden() if r.platform == platform and r.model == model
        ]
        assert len(matches) == 1
        return matches[0]

    def test_cpu_rows(self):
        r18 = self.row("cpu-granite-rapids-24t", "resnet18")
        r50 = self.row("cpu-granite-rapids-24t", "resnet50")
        assert (r18.peak_batch, r18.peak_throughput_ips, r18.speedup_vs_cpu) == (8, 670, 1.0)
        assert (r50.peak_batch, r50.peak_throughput_ips, r50.speedup_vs_cpu) == (8, 230, 1.0)

    def test_t4_int8_resnet18(self):
        r = self.row("t4-int8", "resnet18")
        assert (r.peak_batch, r.peak_throughput_ips, r.speedup_vs_cpu) == (512, 8837, 13.19)

    def test_l4_int8_rows(self):
        r18 = self.row("l4-int8", "resnet18")
        r50 = self.row("l4-int8", "resnet50")
        assert (r18.peak_batch, r18.peak_throughput_ips, r18.speedup_vs_cpu) == (32, 38932, 58.11)
        assert (r50.peak_batch, r50.peak_throughput_ips, r50.speedup_vs_cpu) == (32, 13388, 58.21)

    def test_resnet101_has_no_cpu_baseline(self):
        rows = [r for r in golden.load_golden() if r.model == "resnet101"]
        assert len(rows) == 6
        assert all(r.speedup_vs_cpu is None for r in rows)

    def test_theoretical_peaks(self):
        peaks = golden.theoretical_peaks()
        assert peaks["t4"] == {"fp32_tflops": 8.1, "fp16_tflops": 65, "int8_tops": 130}
        assert peaks["l4"] == {"fp32_tflops": 30.3, "fp16_tflops": 121, "int8_tops": 242}


class TestSpeedupRegression:
    def test_all_twelve_speedups_recompute_exactly(self):
        results = golden.check_speedups()
        assert len(results) == 12
        assert all(r["match"] for r in results)

    def test_cpu_baselines(self):
        assert golden.cpu_baselines() == {"resnet18": 670, "resnet50": 230}

    def test_internal_consistency(self):
        # Every stored speedup equals throughput / cpu baseline at 2 decimals.
        baselines = golden.cpu_baselines()
        for row in golden.load_golden():
            if row.platform.startswith("cpu") or row.speedup_vs_cpu is None:
                continue
            expected = round_half_up(row.peak_throughput_ips / baselines[row.model], 2)
            assert row.speedup_vs_cpu == expected, row
