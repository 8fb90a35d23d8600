"""Sweep execution: the nested precision/model/sweep/batch/repeat loops.

Loop order is precision -> model -> sweep -> batch -> repeat per device,
emitting exactly one RunRecord per tuple regardless of per-run failures.
Records stream to an append-only JSONL sink with a manifest of completed
run keys, so an interrupted sweep resumes without duplicates.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Set

from .backend import BackendFactory, BackendSession, default_registry
from .errors import (
    BackendCrashed,
    InsufficientSamples,
    OutOfMemory,
    SinkFailure,
    SweepbenchError,
)
from .model import (
    DeviceSpec,
    ModelSpec,
    Precision,
    RunRecord,
    RunStatus,
    SweepPlan,
    TelemetrySample,
    validate_plan,
)

log = logging.getLogger(__name__)

RECORDS_FILENAME = "records.jsonl"
MANIFEST_FILENAME = "manifest.txt"


def run_seed(plan_seed: int, run_key: str) -> int:
    """Per-run RNG seed; independent of execution order so resume is exact."""
    digest = hashlib.sha256(f"{plan_seed}:{run_key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class SweepProgress:
    total_configs: int
    completed: int = 0
    failed: int = 0
    current: str = ""
    started_at: float = field(default_factory=time.time)

    @property
    def elapsed_s(self) -> float:
        return time.time() - self.started_at

    def to_dict(self) -> dict:
        return {
            "total_configs": self.total_configs,
            "completed": self.completed,
            "failed": self.failed,
            "current": self.current,
        }


class RecordSink:
    """Append-only JSONL record store with a completed-key manifest.

    Each record line is flushed before its manifest entry, so a crash can
    leave at most one orphan record line, which resume rewrites cleanly by
    trusting only the manifest.
    """

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.records_path = self.out_dir / RECORDS_FILENAME
        self.manifest_path = self.out_dir / MANIFEST_FILENAME
        self._lock = threading.Lock()

    def completed_keys(self) -> Set[str]:
        if not self.manifest_path.exists():
            return set()
        return {
            line.strip()
            for line in self.manifest_path.read_text().splitlines()
            if line.strip()
        }

    def prune_orphans(self) -> None:
        """Drop record lines whose key never made it into the manifest."""
        if not self.records_path.exists():
            return
        done = self.completed_keys()
        kept = []
        for line in self.records_path.read_text().splitlines():
            if not line.strip():
                continue
            record = RunRecord.from_dict(json.loads(line))
            if record.run_key in done:
                kept.append(line)
        self.records_path.write_text("".join(k + "\n" for k in kept))

    def append(self, record: RunRecord) -> None:
        line = json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"))
        try:
            with self._lock:
                with self.records_path.open("a") as f:
                    f.write(line + "\n")
                    f.flush()
                with self.manifest_path.open("a") as f:
                    f.write(record.run_key + "\n")
                    f.flush()
        except OSError as exc:
            raise SinkFailure(f"cannot append record: {exc}") from exc

    def read_records(self) -> List[RunRecord]:
        if not self.records_path.exists():
            return []
        return [
            RunRecord.from_dict(json.loads(line))
            for line in self.records_path.read_text().splitlines()
            if line.strip()
        ]


def sample_during_run(
    session: BackendSession,
    period_ms: int,
    run_fn: Callable[[], object],
) -> tuple:
    """Run `run_fn` while sampling session telemetry every `period_ms`.

    Used for backends whose runs take wall-clock time; the simulated backend
    synthesizes its trace in virtual time inside run() instead. Sampler
    failures degrade to whatever was collected, never fail the run.
    Returns (run_fn result, telemetry list, degraded flag).
    """
    telemetry: List[TelemetrySample] = []
    degraded = [False]
    done = threading.Event()

    def loop():
        while not done.wait(period_ms / 1000.0):
            try:
                telemetry.append(session.query_telemetry())
            except SweepbenchError:
                degraded[0] = True
                return

    sampler = threading.Thread(target=loop, daemon=True)
    sampler.start()
    try:
        result = run_fn()
    finally:
        done.set()
        sampler.join()
    try:
        telemetry.append(session.query_telemetry())
    except SweepbenchError:
        degraded[0] = True
    return result, telemetry, degraded[0]


def detect_steady_state(
    samples: Sequence[TelemetrySample], window_s: float, tol_c: float
) -> bool:
    """True iff the temperature span in the trailing window is within tol_c."""
    if len(samples) < 2:
        raise InsufficientSamples("need at least 2 telemetry samples")
    end = samples[-1].timestamp_s
    if end - samples[0].timestamp_s < window_s:
        raise InsufficientSamples(
            f"trace spans {end - samples[0].timestamp_s:.3f}s < window {window_s}s"
        )
    window = [s.temp_c for s in samples if s.timestamp_s >= end - window_s]
    return max(window) - min(window) <= tol_c


def iter_run_keys(plan: SweepPlan):
    """Deterministic emission order: a pure function of the plan."""
    for device in plan.devices:
        for precision in plan.precisions:
            for model in plan.models:
                for sweep in range(plan.sweeps):
                    for batch in plan.batch_sizes:
                        for repeat in range(plan.repeats):
                            yield device, precision, model, sweep, batch, repeat


def execute_sweep(
    plan: SweepPlan,
    devices: Dict[str, DeviceSpec],
    models: Dict[str, ModelSpec],
    sink: RecordSink,
    registry: Optional[Dict[str, BackendFactory]] = None,
    backend_kind: str = "sim",
    resume: bool = False,
    progress_cb: Optional[Callable[[SweepProgress], None]] = None,
) -> SweepProgress:
    """Execute the full plan, streaming one RunRecord per tuple to the sink.

    Backend errors are recorded per-run and never abort the sweep; only sink
    failures and plan invalidation are fatal.
    """
    plan = validate_plan(plan)
    registry = registry if registry is not None else default_registry()
    progress = SweepProgress(total_configs=plan.total_runs())

    completed: Set[str] = set()
    if resume:
        sink.prune_orphans()
        completed = sink.completed_keys()
        progress.completed = len(completed)

    period_s = plan.telemetry_period_ms / 1000.0

    for device_name in plan.devices:
        device = devices[device_name]
        engine_prepared: Set[str] = set()  # (model) keys with a cached engine
        for precision in plan.precisions:
            for model_name in plan.models:
                model = models[model_name]
                session: Optional[BackendSession] = None
                for sweep_idx in range(plan.sweeps):
                    for batch in plan.batch_sizes:
                        for repeat_idx in range(plan.repeats):
                            record = RunRecord(
                                device=device_name,
                                model=model_name,
                                precision=precision,
                                batch_size=batch,
                                sweep_index=sweep_idx,
                                repeat_index=repeat_idx,
                                latencies=(),
                                telemetry=(),
                                status=RunStatus.BACKEND_ERROR,
                            )
                            if record.run_key in completed:
                                continue
                            progress.current = record.run_key
                            if session is None:
                                try:
                                    session = _open_loaded_session(
                                        device,
                                        model,
                                        precision,
                                        registry,
                                        backend_kind,
                                        engine_prepared,
                                    )
                                except OutOfMemory as exc:
                                    sink.append(
                                        replace(
                                            record,
                                            status=RunStatus.OOM,
                                            error_message=str(exc),
                                        )
                                    )
                                    progress.failed += 1
                                    continue
                                except SweepbenchError as exc:
                                    sink.append(_failed(record, exc))
                                    progress.failed += 1
                                    continue
                            record = _execute_one(
                                session, record, plan, period_s
                            )
                            if record.status is RunStatus.OK:
                                progress.completed += 1
                            else:
                                progress.failed += 1
                                if record.status is RunStatus.BACKEND_ERROR:
                                    # Crashed session; next run reopens.
                                    _safe_release(session)
                                    session = None
                            sink.append(record)
                            if progress_cb is not None:
                                progress_cb(progress)
                if session is not None:
                    _safe_release(session)
    progress.current = ""
    return progress


def _open_loaded_session(device, model, precision, registry, backend_kind, engine_prepared):
    session = registry[backend_kind](device) if backend_kind in registry else None
    if session is None:
        from .errors import BackendUnavailable

        raise BackendUnavailable(f"no backend registered for kind {backend_kind!r}")
    session.load_model(model, precision)
    if precision is Precision.INT8:
        # Engine prep happens once per (device, model) and is cached by the
        # backend across sweeps; re-invoking on a fresh session is a cache hit.
        session.prepare_engine()
        engine_prepared.add(model.name)
    return session


def _execute_one(session, record, plan, period_s):
    seed = run_seed(plan.seed, record.run_key)
    try:
        latencies, telemetry = session.run(
            record.batch_size,
            plan.warmup_iters,
            plan.timed_iters,
            period_s,
            seed=seed,
        )
        if len(latencies) != plan.timed_iters:
            raise BackendCrashed(
                f"backend returned {len(latencies)} samples, expected {plan.timed_iters}"
            )
        return replace(
            record, latencies=latencies, telemetry=telemetry, status=RunStatus.OK
        )
    except OutOfMemory as exc:
        return replace(record, status=RunStatus.OOM, error_message=str(exc))
    except SweepbenchError as exc:
        return _failed(record, exc)


def _failed(record, exc):
    return replace(record, status=RunStatus.BACKEND_ERROR, error_message=str(exc))


def _safe_release(session):
    try:
        session.release()
    except SweepbenchError:
        pass
