"""HTTP service exposing prediction and coefficient editing.

All endpoints are deterministic reads over an immutable checkpoint snapshot;
requests never mutate session state, so concurrent handling is safe. Payload
builders are shared with the CLI so both paths emit byte-identical JSON.
"""

from __future__ import annotations

import os
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from . import jsonio
from .motion import PoseSequence
from .network import MotionModel
from .numkit import Rng
from .synth import synth_generate

_SAMPLE_SEED = 20240


def prediction_payload(model: MotionModel, past: PoseSequence, k: int | None = None) -> dict:
    preds = model.predict_k(past, k)
    return {
        "coefficients": preds.coefficients,
        "futures": preds.futures,
        "past": past.frames,
    }


def edit_payload(model: MotionModel, past: PoseSequence, sample_index: int,
                 deltas) -> dict:
    deltas = np.asarray(deltas, dtype=np.float64)
    base = model.predict_k(past)
    if not 0 <= sample_index < base.k:
        raise IndexError(f"sample_index {sample_index} out of range for {base.k} samples")
    future = model.predict_edited(base, sample_index, deltas)
    return {
        "future": future.frames,
        "coefficients": base.coefficients[sample_index] + deltas,
    }


def model_info(model: MotionModel) -> dict:
    p = model.profile
    return {
        "m": p.m_directions,
        "c": p.c_latent,
        "k": model.k,
        "v": p.v,
        "t_past": p.t_past,
        "t_future": p.t_future,
        "n": p.n_freq,
        "parents": list(model.skeleton.parents),
    }


def default_samples(model: MotionModel, count: int = 4):
    """Deterministic bundled past motions generated from the model's skeleton."""
    seqs = synth_generate(
        Rng(_SAMPLE_SEED), model.profile.skeleton, count, model.fps,
        min_frames=model.profile.total_length,
    )
    samples = []
    for i, seq in enumerate(seqs):
        past = PoseSequence(
            skeleton=seq.skeleton, fps=seq.fps,
            frames=seq.frames[: model.profile.t_past].copy(),
        )
        samples.append((f"synthetic-{i}", past))
    return samples


class ApiSession:
    """Immutable view of one checkpoint plus its bundled sample pasts."""

    def __init__(self, model: MotionModel, samples=None):
        self.model = model
        self.samples = list(samples) if samples is not None else default_samples(model)
        self._by_id = {sid: past for sid, past in self.samples}

    def samples_payload(self) -> dict:
        return {
            "samples": [
                {"id": sid, "past": past.frames} for sid, past in self.samples
            ]
        }

    def resolve_past(self, body: dict) -> PoseSequence:
        if "past" in body:
            arr = np.asarray(body["past"], dtype=np.float64)
            p = self.model.profile
            if arr.shape != (p.t_past, p.v, 3):
                raise ValueError(
                    f"past must have shape {(p.t_past, p.v, 3)}, got {arr.shape}"
                )
            return PoseSequence(skeleton=self.model.skeleton, fps=self.model.fps, frames=arr)
        if "sample_id" in body:
            sid = body["sample_id"]
            if sid not in self._by_id:
                raise ValueError(f"unknown sample_id {sid!r}")
            return self._by_id[sid]
        raise ValueError("request needs either 'past' or 'sample_id'")


_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
}


def make_handler(session: ApiSession, ui_dir: str | None = None):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, *args):
            pass

        def _send(self, status: int, body: bytes, content_type: str = "application/json"):
            self.send_response(status)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()
            self.wfile.write(body)

        def _send_json(self, status: int, payload) -> None:
            self._send(status, jsonio.dumps(payload).encode("utf-8"))

        def _send_error(self, status: int, message: str) -> None:
            self._send_json(status, {"error": message})

        def _serve_static(self, path: str) -> None:
            rel = path.lstrip("/") or "index.html"
            full = os.path.normpath(os.path.join(ui_dir, rel))
            if not full.startswith(os.path.abspath(ui_dir)) or not os.path.isfile(full):
                self._send_error(404, f"unknown route {path}")
                return
            ext = os.path.splitext(full)[1].lower()
            with open(full, "rb") as fh:
                self._send(200, fh.read(), _CONTENT_TYPES.get(ext, "application/octet-stream"))

        def do_OPTIONS(self):
            self.send_response(204)
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            if self.path == "/api/model":
                self._send_json(200, model_info(session.model))
            elif self.path == "/api/samples":
                self._send_json(200, session.samples_payload())
            elif ui_dir is not None and not self.path.startswith("/api/"):
                self._serve_static(self.path)
            else:
                self._send_error(404, f"unknown route {self.path}")

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            body = jsonio.loads(raw.decode("utf-8")) if raw else {}
            if not isinstance(body, dict):
                raise ValueError("request body must be a JSON object")
            return body

        def do_POST(self):
            try:
                if self.path == "/api/predict":
                    body = self._read_body()
                    past = session.resolve_past(body)
                    k = body.get("k")
                    self._send_json(200, prediction_payload(session.model, past, k))
                elif self.path == "/api/edit":
                    body = self._read_body()
                    past = session.resolve_past(body)
                    if "sample_index" not in body or "deltas" not in body:
                        raise ValueError("edit requests need 'sample_index' and 'deltas'")
                    payload = edit_payload(
                        session.model, past, int(body["sample_index"]), body["deltas"]
                    )
                    self._send_json(200, payload)
                else:
                    self._send_error(404, f"unknown route {self.path}")
            except (ValueError, IndexError, KeyError) as exc:
                self._send_error(400, str(exc))

    return Handler


def make_server(session: ApiSession, port: int, ui_dir: str | None = None) -> ThreadingHTTPServer:
    if ui_dir is not None:
        ui_dir = os.path.abspath(ui_dir)
    return ThreadingHTTPServer(("127.0.0.1", port), make_handler(session, ui_dir))
