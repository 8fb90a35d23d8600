"""Newline-delimited wire protocol for external worker backends.

Framing: one UTF-8 JSON object per line on the worker's stdin/stdout.
Requests carry a monotone ``request_id``; every request gets exactly one
``ok`` or ``error`` response with the matching id. Responses may arrive out
of order — ``telemetry_query`` is answered while an ``infer`` is in flight —
so the client demultiplexes by id. The full contract lives in PROTOCOL.md.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from typing import List, Optional, Sequence, Tuple

from .backend import PROTOCOL_VERSION, BackendSession, SessionState
from .errors import (
    CODE_TO_ERROR,
    BackendCrashed,
    BackendUnavailable,
    HandshakeMismatch,
    SweepbenchError,
)
from .model import DeviceSpec, LatencySample, ModelSpec, Precision, TelemetrySample

REQUEST_KINDS = (
    "hello",
    "load_model",
    "prepare_engine",
    "alloc",
    "warmup",
    "infer",
    "telemetry_query",
    "release",
    "bye",
)
RESPONSE_KINDS = ("ok", "error")


def encode_message(kind: str, request_id: int, payload: dict) -> str:
    """Serialize one protocol message to its wire line (no trailing newline)."""
    return json.dumps(
        {"kind": kind, "request_id": request_id, "payload": payload},
        sort_keys=True,
        separators=(",", ":"),
    )


def decode_message(line: str) -> dict:
    msg = json.loads(line)
    for field in ("kind", "request_id", "payload"):
        if field not in msg:
            raise ValueError(f"protocol message missing field {field!r}")
    return msg


class WorkerClient:
    """Drives one worker subprocess; thread-safe request/response pairing."""

    def __init__(self, command: Sequence[str]):
        try:
            self.proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot start worker: {exc}") from exc
        self._write_lock = threading.Lock()
        self._id_lock = threading.Lock()
        self._next_id = 1
        self._pending: dict = {}
        self._pending_lock = threading.Lock()
        self._dead = False
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        for line in self.proc.stdout:
            line = line.strip()
            if not line:
                continue
            try:
                msg = decode_message(line)
            except (ValueError, json.JSONDecodeError):
                continue
            with self._pending_lock:
                q = self._pending.pop(msg["request_id"], None)
            if q is not None:
                q.put(msg)
        self._dead = True
        with self._pending_lock:
            pending, self._pending = self._pending, {}
        for q in pending.values():
            q.put(None)

    def request(self, kind: str, payload: dict, timeout: Optional[float] = 60.0) -> dict:
        """Send one request and block for its response payload.

        Raises the mapped SweepbenchError on an error response and
        BackendCrashed if the worker dies first.
        """
        if self._dead:
            raise BackendCrashed("worker process exited")
        with self._id_lock:
            request_id = self._next_id
            self._next_id += 1
        q: queue.Queue = queue.Queue()
        with self._pending_lock:
            self._pending[request_id] = q
        line = encode_message(kind, request_id, payload)
        try:
            with self._write_lock:
                self.proc.stdin.write(line + "\n")
                self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise BackendCrashed(f"worker stdin closed: {exc}") from exc
        try:
            msg = q.get(timeout=timeout)
        except queue.Empty:
            raise BackendCrashed(f"worker response timeout for {kind}")
        if msg is None:
            raise BackendCrashed("worker process exited mid-request")
        if msg["kind"] == "error":
            code = msg["payload"].get("code", "internal_error")
            message = msg["payload"].get("message", "")
            raise CODE_TO_ERROR.get(code, SweepbenchError)(message)
        return msg["payload"]

    def close(self) -> None:
        try:
            if not self._dead:
                self.request("bye", {}, timeout=5.0)
        except SweepbenchError:
            pass
        try:
            self.proc.stdin.close()
        except OSError:
            pass
        self.proc.wait(timeout=10.0)


class ExternalWorkerSession(BackendSession):
    """BackendSession implemented over the worker wire protocol.

    Telemetry during a run is sampled on the wall clock by a second thread,
    exercising the protocol's concurrent telemetry channel.
    """

    def __init__(self, device: DeviceSpec, command: Sequence[str]):
        self.device = device
        self.client = WorkerClient(command)
        hello = self.client.request(
            "hello", {"protocol_version": PROTOCOL_VERSION, "device_name": device.name}
        )
        version = hello.get("protocol_version")
        if version != PROTOCOL_VERSION:
            self.client.close()
            raise HandshakeMismatch(version)
        self.capabilities = {Precision.parse(p) for p in hello.get("capabilities", [])}
        self.runtime_fingerprint = hello.get("runtime", {})
        self.state = SessionState.IDLE

    def load_model(self, model: ModelSpec, precision: Precision) -> None:
        self.client.request(
            "load_model", {"model": model.to_dict(), "precision": precision.value}
        )
        self.state = SessionState.MODEL_LOADED

    def prepare_engine(self) -> None:
        self.client.request("prepare_engine", {})
        self.state = SessionState.ENGINE_READY

    def run(self, batch, warmup, timed, telemetry_period_s, seed=0):
        telemetry: List[TelemetrySample] = []
        done = threading.Event()

        def sample_loop():
            while not done.wait(telemetry_period_s):
                try:
                    telemetry.append(self.query_telemetry())
                except SweepbenchError:
                    return

        sampler = threading.Thread(target=sample_loop, daemon=True)
        sampler.start()
        try:
            payload = self.client.request(
                "infer",
                {"batch": batch, "warmup": warmup, "timed": timed, "seed": seed},
                timeout=None,
            )
        finally:
            done.set()
            sampler.join()
        # Post-run sample so short runs never come back with empty telemetry.
        telemetry.append(self.query_telemetry())
        latencies = tuple(
            LatencySample(iteration_index=i, latency_s=v)
            for i, v in enumerate(payload["latencies_s"])
        )
        return latencies, tuple(telemetry)

    def query_telemetry(self) -> TelemetrySample:
        payload = self.client.request("telemetry_query", {})
        return TelemetrySample.from_dict(payload)

    def release(self) -> None:
        self.client.request("release", {})
        self.state = SessionState.CLOSED
        self.client.close()


def make_worker_backend(command: Sequence[str]):
    """Backend factory for the registry: spawns one worker per session."""

    def factory(device: DeviceSpec) -> ExternalWorkerSession:
        return ExternalWorkerSession(device, command)

    return factory
