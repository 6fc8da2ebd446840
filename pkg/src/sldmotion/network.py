"""Frequency-domain motion generator with hand-derived gradients.

Forward path per window: pad the observed motion by repeating its last
frame, project onto the leading rows of the orthonormal cosine basis, run
two residual graph blocks over the joints, pool into a past feature, then
for each query decode [feature; latent code] back to frequency coefficients
(as a residual on the projected past) and return to the time domain.

Every layer ships its reverse-mode rule; there is no autodiff tape. All
parameters live in an ordered name -> float64 array mapping, which is also
the checkpoint block order.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass

import numpy as np

from . import jsonio
from .config import ABLATION_MODES, Profile, TrainConfig, get_profile
from .directions import (
    combine,
    combine_backward,
    edit_coefficients,
    effective_directions,
    effective_directions_backward,
    effective_directions_fwd,
    qlp_backward,
    qlp_forward,
)
from .errors import EvaluationError, GeometryError, SchemaError
from .motion import PoseSequence, Skeleton
from .numkit import DctBasis, Rng, dct_basis, dct_forward, dct_inverse
from .synth import canonical_skeleton

_CHECKPOINT_FORMAT = "sldmotion-checkpoint-v1"


@dataclass
class PredictionSet:
    """K decoded futures plus the coefficients that produced them."""

    futures: np.ndarray        # (K, T_f, V, 3), original coordinates
    coefficients: np.ndarray   # (K, M)
    past: PoseSequence
    offset: np.ndarray         # (3,) root shift removed before encoding
    full: np.ndarray           # (K, T_p+T_f, V, 3), centered decoder output
    feat: np.ndarray           # encoder feature, reused for edits
    xf: np.ndarray             # frequency projection of the padded past

    @property
    def k(self) -> int:
        return self.futures.shape[0]

    def future_sequences(self) -> list:
        fps, skeleton = self.past.fps, self.past.skeleton
        return [
            PoseSequence(skeleton=skeleton, fps=fps, frames=self.futures[i])
            for i in range(self.k)
        ]


class _Forward:
    """Cached activations for one window forward pass."""

    __slots__ = ("xf", "feat", "enc_cache", "eff", "eff_cache", "w_all",
                 "qlp_caches", "zvecs", "dec_caches", "y")


def _skeleton_adjacency(skeleton: Skeleton) -> np.ndarray:
    v = skeleton.joint_count
    adj = np.eye(v)
    for child, parent in skeleton.bones:
        adj[child, parent] = 1.0
        adj[parent, child] = 1.0
    return adj


def _graph_block_fwd(h: np.ndarray, adj: np.ndarray, w: np.ndarray):
    r = adj.sum(axis=1)
    if np.any(np.abs(r) < 1e-8):
        raise EvaluationError("graph adjacency row sum collapsed to zero")
    ahat = adj / r[:, None]
    p = h @ w
    t = np.tanh(ahat @ p)
    return t + h, (h, w, ahat, r, p, t)


def _graph_block_bwd(g: np.ndarray, cache, g_adj: np.ndarray, g_w: np.ndarray) -> np.ndarray:
    h, w, ahat, r, p, t = cache
    gs = g * (1.0 - t * t)
    g_ahat = gs @ p.T
    g_p = ahat.T @ gs
    g_w += h.T @ g_p
    # row-normalized adjacency: pull the normalization back into raw entries
    g_adj += (g_ahat - (g_ahat * ahat).sum(axis=1, keepdims=True)) / r[:, None]
    return g_p @ w.T + g


class MotionModel:
    """Generator with learnable directions and queries; single-owner parameters."""

    def __init__(self, profile: Profile, skeleton: Skeleton, fps: int, mode: str,
                 k: int, seed: int, params: dict, basis: DctBasis):
        self.profile = profile
        self.skeleton = skeleton
        self.fps = fps
        self.mode = mode
        self.k = k
        self.seed = seed
        self.params = params
        self.basis = basis

    # -- construction ------------------------------------------------------

    @classmethod
    def create(cls, profile, mode: str = "MQ-P+SLD", k: int | None = None,
               seed: int = 0, skeleton: Skeleton | None = None, fps: int = 25) -> "MotionModel":
        profile = get_profile(profile)
        if mode not in ABLATION_MODES:
            raise ValueError(f"unknown mode {mode!r}; expected one of {ABLATION_MODES}")
        if skeleton is None:
            skeleton = canonical_skeleton(profile.skeleton)[0]
        if skeleton.joint_count != profile.v:
            raise GeometryError(
                f"skeleton has {skeleton.joint_count} joints, profile {profile.name} expects {profile.v}"
            )
        if k is None:
            k = profile.k_samples
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        rng = Rng(seed)
        params: dict = {}
        for name, shape in cls._block_specs(profile, mode, k):
            params[name] = cls._init_block(name, shape, skeleton, rng)
        basis = dct_basis(profile.total_length, profile.n_freq)
        return cls(profile, skeleton, fps, mode, k, seed, params, basis)

    @staticmethod
    def _zdim(profile: Profile, mode: str) -> int:
        if mode == "MQ":
            return profile.c_query
        if mode == "MQ+SLD":
            return profile.c_latent + profile.c_query
        return profile.c_latent

    @staticmethod
    def _qlp_in(profile: Profile, mode: str) -> int:
        return profile.c_feature if mode == "MQ+SLD" else profile.c_feature + profile.c_query

    @classmethod
    def _block_specs(cls, profile: Profile, mode: str, k: int):
        v, cf = profile.v, profile.c_feature
        f = profile.n_freq * 3
        fusion_in = cf + cls._zdim(profile, mode)
        specs = [
            ("enc1_adj", (v, v)), ("enc1_w", (f, f)),
            ("enc2_adj", (v, v)), ("enc2_w", (f, f)),
            ("pool_w", (f, cf)), ("pool_b", (cf,)),
            ("fus_w", (fusion_in, v * f)), ("fus_b", (v * f,)),
            ("dec1_adj", (v, v)), ("dec1_w", (f, f)),
            ("dec2_adj", (v, v)), ("dec2_w", (f, f)),
            ("out_w", (f, f)), ("out_b", (f,)),
        ]
        if mode != "MQ":
            hq = cf
            specs += [
                ("qlp1_w", (cls._qlp_in(profile, mode), hq)), ("qlp1_b", (hq,)),
                ("qlp2_w", (hq, hq)), ("qlp2_b", (hq,)),
                ("qlp3_w", (hq, profile.m_directions)), ("qlp3_b", (profile.m_directions,)),
                ("dirs_raw", (profile.m_directions, profile.c_latent)),
            ]
        specs.append(("queries", (k, profile.c_query)))
        return specs

    @staticmethod
    def _init_block(name: str, shape, skeleton: Skeleton, rng: Rng) -> np.ndarray:
        if name.endswith("_adj"):
            return _skeleton_adjacency(skeleton)
        # output heads start at zero so every query decodes to the projected
        # past until training moves them; biases start at zero
        if name in ("out_w", "qlp3_w") or name.endswith("_b"):
            return np.zeros(shape)
        if name in ("dirs_raw", "queries"):
            return rng.normal(shape)
        fan_in = shape[0]
        return rng.normal(shape) / np.sqrt(fan_in)

    def param_count(self) -> int:
        return sum(arr.size for arr in self.params.values())

    def zero_grads(self) -> dict:
        return {name: np.zeros_like(arr) for name, arr in self.params.items()}

    def effective(self) -> np.ndarray:
        if self.mode == "MQ":
            raise ValueError("mode MQ carries no latent directions")
        return effective_directions(self.params["dirs_raw"])

    # -- forward -----------------------------------------------------------

    def preprocess(self, past_frames: np.ndarray) -> np.ndarray:
        """Pad with the last frame to full length, project to frequency rows."""
        past_frames = np.asarray(past_frames, dtype=np.float64)
        p = self.profile
        if past_frames.shape != (p.t_past, p.v, 3):
            raise ValueError(
                f"expected past of shape {(p.t_past, p.v, 3)}, got {past_frames.shape}"
            )
        padded = np.concatenate(
            [past_frames, np.tile(past_frames[-1], (p.t_future, 1, 1))], axis=0
        )
        return dct_forward(self.basis, padded, p.n_freq)

    def encode_fwd(self, xf: np.ndarray):
        p = self.profile
        h0 = xf.transpose(1, 0, 2).reshape(p.v, p.n_freq * 3)
        h1, c1 = _graph_block_fwd(h0, self.params["enc1_adj"], self.params["enc1_w"])
        h2, c2 = _graph_block_fwd(h1, self.params["enc2_adj"], self.params["enc2_w"])
        pooled = h2.mean(axis=0)
        feat = pooled @ self.params["pool_w"] + self.params["pool_b"]
        return feat, (c1, c2, pooled)

    def encode_bwd(self, g_feat: np.ndarray, cache, grads: dict) -> None:
        c1, c2, pooled = cache
        grads["pool_w"] += np.outer(pooled, g_feat)
        grads["pool_b"] += g_feat
        g_pooled = self.params["pool_w"] @ g_feat
        g_h2 = np.tile(g_pooled / self.profile.v, (self.profile.v, 1))
        g_h1 = _graph_block_bwd(g_h2, c2, grads["enc2_adj"], grads["enc2_w"])
        _graph_block_bwd(g_h1, c1, grads["enc1_adj"], grads["enc1_w"])

    def decode_fwd(self, feat: np.ndarray, zvec: np.ndarray, xf: np.ndarray):
        p = self.profile
        f = p.n_freq * 3
        u = np.concatenate([feat, zvec])
        h0 = (u @ self.params["fus_w"] + self.params["fus_b"]).reshape(p.v, f)
        h1, c1 = _graph_block_fwd(h0, self.params["dec1_adj"], self.params["dec1_w"])
        h2, c2 = _graph_block_fwd(h1, self.params["dec2_adj"], self.params["dec2_w"])
        delta = h2 @ self.params["out_w"] + self.params["out_b"]
        yf = xf + delta.reshape(p.v, p.n_freq, 3).transpose(1, 0, 2)
        y = dct_inverse(self.basis, yf)
        return y, (u, c1, c2, h2)

    def decode_bwd(self, g_y: np.ndarray, cache, grads: dict):
        """Returns (g_feat, g_zvec); parameter gradients accumulate in ``grads``."""
        p = self.profile
        u, c1, c2, h2 = cache
        g_yf = np.tensordot(self.basis.inverse[:, : p.n_freq].T, g_y, axes=(1, 0))
        g_delta = g_yf.transpose(1, 0, 2).reshape(p.v, p.n_freq * 3)
        grads["out_w"] += h2.T @ g_delta
        grads["out_b"] += g_delta.sum(axis=0)
        g_h2 = g_delta @ self.params["out_w"].T
        g_h1 = _graph_block_bwd(g_h2, c2, grads["dec2_adj"], grads["dec2_w"])
        g_h0 = _graph_block_bwd(g_h1, c1, grads["dec1_adj"], grads["dec1_w"])
        g_hvec = g_h0.reshape(-1)
        grads["fus_w"] += np.outer(u, g_hvec)
        grads["fus_b"] += g_hvec
        g_u = self.params["fus_w"] @ g_hvec
        return g_u[: p.c_feature], g_u[p.c_feature :]

    def forward_window(self, past_frames: np.ndarray, k: int | None = None) -> _Forward:
        """Full forward pass on centered past frames; caches kept for backward."""
        p = self.profile
        k = self.k if k is None else k
        if not 1 <= k <= self.k:
            raise ValueError(f"k must be in [1, {self.k}], got {k}")
        fwd = _Forward()
        fwd.xf = self.preprocess(past_frames)
        fwd.feat, fwd.enc_cache = self.encode_fwd(fwd.xf)
        queries = self.params["queries"]
        if self.mode == "MQ":
            fwd.eff = fwd.eff_cache = None
            fwd.qlp_caches = None
            fwd.w_all = np.zeros((k, p.m_directions))
            fwd.zvecs = [queries[i] for i in range(k)]
        elif self.mode == "MQ+SLD":
            fwd.eff, fwd.eff_cache = effective_directions_fwd(self.params["dirs_raw"])
            w, cache = qlp_forward(self.params, fwd.feat)
            fwd.qlp_caches = cache
            z = combine(w, fwd.eff)
            fwd.w_all = np.tile(w, (k, 1))
            fwd.zvecs = [np.concatenate([z, queries[i]]) for i in range(k)]
        else:
            fwd.eff, fwd.eff_cache = effective_directions_fwd(self.params["dirs_raw"])
            fwd.qlp_caches = []
            rows, fwd.zvecs = [], []
            for i in range(k):
                w_i, cache = qlp_forward(
                    self.params, np.concatenate([fwd.feat, queries[i]])
                )
                fwd.qlp_caches.append(cache)
                rows.append(w_i)
                fwd.zvecs.append(combine(w_i, fwd.eff))
            fwd.w_all = np.stack(rows)
        fwd.dec_caches = []
        ys = []
        for zvec in fwd.zvecs:
            y, cache = self.decode_fwd(fwd.feat, zvec, fwd.xf)
            ys.append(y)
            fwd.dec_caches.append(cache)
        fwd.y = np.stack(ys)
        return fwd

    def backward_window(self, fwd: _Forward, g_y: np.ndarray, grads: dict | None = None) -> dict:
        """Map d(loss)/d(decoded sequences) to parameter gradients."""
        p = self.profile
        k = g_y.shape[0]
        if grads is None:
            grads = self.zero_grads()
        g_feat = np.zeros(p.c_feature)
        g_eff = np.zeros((p.m_directions, p.c_latent)) if self.mode != "MQ" else None
        g_z_shared = np.zeros(p.c_latent) if self.mode == "MQ+SLD" else None
        for i in range(k):
            g_f, g_zvec = self.decode_bwd(g_y[i], fwd.dec_caches[i], grads)
            g_feat += g_f
            if self.mode == "MQ":
                grads["queries"][i] += g_zvec
            elif self.mode == "MQ+SLD":
                g_z_shared += g_zvec[: p.c_latent]
                grads["queries"][i] += g_zvec[p.c_latent :]
            else:
                g_w, g_e = combine_backward(g_zvec, fwd.w_all[i], fwd.eff)
                g_eff += g_e
                g_x = qlp_backward(self.params, g_w, fwd.qlp_caches[i], grads)
                g_feat += g_x[: p.c_feature]
                grads["queries"][i] += g_x[p.c_feature :]
        if self.mode == "MQ+SLD":
            g_w, g_e = combine_backward(g_z_shared, fwd.w_all[0], fwd.eff)
            g_eff += g_e
            g_feat += qlp_backward(self.params, g_w, fwd.qlp_caches, grads)
        if g_eff is not None:
            grads["dirs_raw"] += effective_directions_backward(g_eff, fwd.eff_cache)
        self.encode_bwd(g_feat, fwd.enc_cache, grads)
        return grads

    # -- prediction --------------------------------------------------------

    def _check_past(self, past: PoseSequence) -> None:
        p = self.profile
        if past.skeleton.joint_count != p.v or past.skeleton.parents != self.skeleton.parents:
            raise GeometryError("input skeleton does not match the model skeleton")
        if len(past) != p.t_past:
            raise ValueError(f"past must have exactly {p.t_past} frames, got {len(past)}")

    def predict_k(self, past: PoseSequence, k: int | None = None) -> PredictionSet:
        """Encode once, decode once per query; futures are de-centered."""
        self._check_past(past)
        k = self.k if k is None else k
        offset = past.frames[-1, self.skeleton.root].copy()
        fwd = self.forward_window(past.frames - offset, k)
        futures = fwd.y[:, self.profile.t_past :, :, :] + offset
        return PredictionSet(
            futures=futures,
            coefficients=fwd.w_all.copy(),
            past=past,
            offset=offset,
            full=fwd.y,
            feat=fwd.feat,
            xf=fwd.xf,
        )

    def predict_edited(self, base: PredictionSet, sample_index: int,
                       deltas: np.ndarray) -> PoseSequence:
        """Re-decode one sample with shifted coefficients; the encoding is reused."""
        if self.mode == "MQ":
            raise ValueError("mode MQ has no latent coefficients to edit")
        edited = edit_coefficients(base.coefficients, sample_index, deltas)
        eff = effective_directions(self.params["dirs_raw"])
        z = combine(edited[sample_index], eff)
        if self.mode == "MQ+SLD":
            zvec = np.concatenate([z, self.params["queries"][sample_index]])
        else:
            zvec = z
        y, _ = self.decode_fwd(base.feat, zvec, base.xf)
        frames = y[self.profile.t_past :] + base.offset
        return PoseSequence(skeleton=self.skeleton, fps=self.fps, frames=frames)


# -- checkpoints -----------------------------------------------------------

def save_checkpoint(path, model: MotionModel, config: TrainConfig | None = None,
                    epoch: int = 0, step: int = 0, moments: dict | None = None) -> None:
    """Atomically write a binary checkpoint: length-prefixed JSON header + blocks."""
    blocks = []
    chunks = []
    for name, arr in model.params.items():
        blocks.append({"name": name, "kind": "param", "shape": list(arr.shape)})
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    if moments is not None:
        for kind in ("adam_m", "adam_v"):
            for name in model.params:
                arr = moments[kind][name]
                blocks.append({"name": name, "kind": kind, "shape": list(arr.shape)})
                chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(chunks)
    header = {
        "format": _CHECKPOINT_FORMAT,
        "profile": model.profile.to_dict(),
        "skeleton": {
            "parents": list(model.skeleton.parents),
            "joint_names": list(model.skeleton.joint_names or []) or None,
        },
        "fps": model.fps,
        "ablation_mode": model.mode,
        "k": model.k,
        "seed": model.seed,
        "epoch": epoch,
        "step": step,
        "config": config.to_dict() if config is not None else None,
        "blocks": blocks,
        "checksum": hashlib.sha256(body).hexdigest(),
    }
    header_bytes = jsonio.dumps(header).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(body)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns (model, meta) where meta has epoch/step/config/moments."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 8:
        raise SchemaError(f"{path}: truncated checkpoint")
    (header_len,) = struct.unpack("<Q", raw[:8])
    try:
        header = jsonio.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except Exception:
        raise SchemaError(f"{path}: unreadable checkpoint header") from None
    if header.get("format") != _CHECKPOINT_FORMAT:
        raise SchemaError(f"{path}: unknown checkpoint format {header.get('format')!r}")
    body = raw[8 + header_len :]
    if hashlib.sha256(body).hexdigest() != header["checksum"]:
        raise SchemaError(f"{path}: checkpoint checksum mismatch")
    profile = Profile.from_dict(header["profile"])
    skeleton = Skeleton(
        joint_count=len(header["skeleton"]["parents"]),
        parents=header["skeleton"]["parents"],
        joint_names=header["skeleton"]["joint_names"],
    )
    params: dict = {}
    moments = {"adam_m": {}, "adam_v": {}}
    offset = 0
    for block in header["blocks"]:
        shape = tuple(block["shape"])
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(
            body, dtype="<f8", count=size, offset=offset
        ).astype(np.float64).reshape(shape)
        offset += size * 8
        if block["kind"] == "param":
            params[block["name"]] = arr.copy()
        else:
            moments[block["kind"]][block["name"]] = arr.copy()
    model = MotionModel(
        profile=profile,
        skeleton=skeleton,
        fps=header["fps"],
        mode=header["ablation_mode"],
        k=header["k"],
        seed=header["seed"],
        params=params,
        basis=dct_basis(profile.total_length, profile.n_freq),
    )
    config = TrainConfig.from_dict(header["config"]) if header.get("config") else None
    meta = {
        "epoch": header["epoch"],
        "step": header["step"],
        "config": config,
        "moments": moments if moments["adam_m"] else None,
    }
    return model, meta
