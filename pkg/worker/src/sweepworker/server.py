"""The stdin/stdout protocol loop.

One JSON object per line; every request gets exactly one ok/error response
carrying its request_id. Inference runs on a dedicated thread so telemetry
queries arriving mid-run are answered immediately, which is the one place
responses may leave out of order.
"""

from __future__ import annotations

import json
import sys
import threading
import traceback
from typing import Optional, TextIO

from . import PROTOCOL_VERSION
from .errors import InvalidRequest, WorkerError

IDLE = "idle"
MODEL_LOADED = "model_loaded"
ENGINE_READY = "engine_ready"
CLOSED = "closed"


class Server:
    def __init__(self, executor, stdin: Optional[TextIO] = None,
                 stdout: Optional[TextIO] = None):
        self.executor = executor
        self.stdin = stdin if stdin is not None else sys.stdin
        self.stdout = stdout if stdout is not None else sys.stdout
        self.state = IDLE
        self.greeted = False
        self._write_lock = threading.Lock()
        self._infer_thread: Optional[threading.Thread] = None
        # Cleared by the infer thread before it writes its response, so the
        # requester's next message never races against thread teardown.
        self._infer_active = threading.Event()

    def _write(self, kind: str, request_id, payload: dict) -> None:
        line = json.dumps(
            {"kind": kind, "request_id": request_id, "payload": payload},
            sort_keys=True,
            separators=(",", ":"),
        )
        with self._write_lock:
            self.stdout.write(line + "\n")
            self.stdout.flush()

    def _error(self, request_id, code: str, message: str) -> None:
        self._write("error", request_id, {"code": code, "message": message})

    def serve(self) -> None:
        """Process requests until bye or EOF."""
        for line in self.stdin:
            line = line.strip()
            if not line:
                continue
            try:
                msg = json.loads(line)
                kind = msg["kind"]
                request_id = msg["request_id"]
                payload = msg.get("payload", {})
            except (json.JSONDecodeError, KeyError) as exc:
                self._error(None, "invalid_request", f"malformed message: {exc}")
                continue
            if kind == "bye":
                self._join_infer()
                self._write("ok", request_id, {})
                return
            try:
                self._dispatch(kind, request_id, payload)
            except WorkerError as exc:
                self._error(request_id, exc.code, str(exc))
            except MemoryError as exc:
                self._error(request_id, "out_of_memory", str(exc))
            except Exception:
                self._error(request_id, "internal_error", traceback.format_exc())
        self._join_infer()

    def _join_infer(self) -> None:
        if self._infer_thread is not None:
            self._infer_thread.join()
            self._infer_thread = None

    def _busy(self) -> bool:
        return self._infer_active.is_set()

    def _dispatch(self, kind: str, request_id, payload: dict) -> None:
        if not self.greeted and kind != "hello":
            raise InvalidRequest("hello must be the first request")

        if kind == "telemetry_query":
            # Answered even mid-inference; that is the whole point of the
            # second channel. Only a closed session refuses it.
            if self.state == CLOSED:
                raise InvalidRequest("session released")
            self._write("ok", request_id, self.executor.telemetry())
            return

        if self._busy():
            raise InvalidRequest(f"{kind} while an inference is in flight")
        self._join_infer()

        if kind == "hello":
            self.greeted = True
            self._write(
                "ok",
                request_id,
                {
                    "protocol_version": PROTOCOL_VERSION,
                    "capabilities": self.executor.capabilities(),
                    "device_name": self.executor.device_name,
                    "runtime": self.executor.runtime_fingerprint(),
                },
            )
            return

        if self.state == CLOSED:
            raise InvalidRequest("session released; only bye is valid")

        if kind == "load_model":
            if self.state != IDLE:
                raise InvalidRequest(f"load_model requires idle state, got {self.state}")
            self.executor.load_model(payload["model"], payload["precision"])
            self.state = MODEL_LOADED
            self._write("ok", request_id, {})
        elif kind == "prepare_engine":
            if self.state != MODEL_LOADED:
                raise InvalidRequest("prepare_engine requires model_loaded state")
            cached = self.executor.prepare_engine()
            self.state = ENGINE_READY
            self._write("ok", request_id, {"cached": bool(cached)})
        elif kind == "alloc":
            if self.state not in (MODEL_LOADED, ENGINE_READY):
                raise InvalidRequest("alloc requires a loaded model")
            self._write("ok", request_id, {})
        elif kind == "warmup":
            if self.state not in (MODEL_LOADED, ENGINE_READY):
                raise InvalidRequest("warmup requires a loaded model")
            self._write("ok", request_id, {})
        elif kind == "infer":
            self._start_infer(request_id, payload)
        elif kind == "release":
            self.executor.release()
            self.state = CLOSED
            self._write("ok", request_id, {})
        else:
            raise InvalidRequest(f"unknown request kind {kind!r}")

    def _start_infer(self, request_id, payload: dict) -> None:
        if self.state not in (MODEL_LOADED, ENGINE_READY):
            raise InvalidRequest("infer requires a loaded model")
        if self.executor.precision == "int8" and self.state != ENGINE_READY:
            raise InvalidRequest("INT8 inference requires prepare_engine first")
        batch = int(payload["batch"])
        warmup = int(payload.get("warmup", 0))
        timed = int(payload["timed"])
        seed = int(payload.get("seed", 0))
        if batch < 1:
            raise InvalidRequest("batch must be >= 1")
        if timed < 1:
            raise InvalidRequest("timed iteration count must be >= 1")
        if warmup < 0:
            raise InvalidRequest("warmup iteration count must be >= 0")

        def run():
            try:
                latencies = self.executor.infer(batch, warmup, timed, seed)
            except WorkerError as exc:
                self._infer_active.clear()
                self._error(request_id, exc.code, str(exc))
            except MemoryError as exc:
                self._infer_active.clear()
                self._error(request_id, "out_of_memory", str(exc))
            except Exception:
                self._infer_active.clear()
                self._error(request_id, "internal_error", traceback.format_exc())
            else:
                self._infer_active.clear()
                self._write("ok", request_id, {"latencies_s": list(latencies)})

        self._infer_active.set()
        self._infer_thread = threading.Thread(target=run, daemon=True)
        self._infer_thread.start()
