"""Motion data model: skeletons, pose sequences, windows, and dataset prep.

The on-disk motion format is UTF-8 JSON:

    {"fps": int, "joint_count": V, "parents": [int x V],
     "joint_names": [str x V]?, "frames": [[[x, y, z] x V] x T]}

Floats are written with 17 significant digits so save/load round trips are
bit-exact. A dataset manifest is JSON with a list of motion files plus the
window extraction parameters.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import jsonio
from .errors import SchemaError


@dataclass(frozen=True)
class Skeleton:
    """Joint tree; ``parents[j]`` is the parent index, -1 for the root."""

    joint_count: int
    parents: tuple
    joint_names: tuple | None = None

    def __post_init__(self):
        v = self.joint_count
        parents = tuple(int(p) for p in self.parents)
        object.__setattr__(self, "parents", parents)
        if v < 1:
            raise SchemaError(f"joint_count must be >= 1, got {v}")
        if len(parents) != v:
            raise SchemaError(f"parents has {len(parents)} entries for {v} joints")
        roots = [j for j, p in enumerate(parents) if p == -1]
        if len(roots) != 1:
            raise SchemaError(f"expected exactly one root joint, found {len(roots)}")
        for j, p in enumerate(parents):
            if p != -1 and not 0 <= p < v:
                raise SchemaError(f"parent {p} of joint {j} out of range for {v} joints")
        # every joint must reach the root without cycles
        for j in range(v):
            seen = set()
            cur = j
            while cur != -1:
                if cur in seen:
                    raise SchemaError(f"parents contain a cycle through joint {j}")
                seen.add(cur)
                cur = parents[cur]
        if self.joint_names is not None:
            names = tuple(str(n) for n in self.joint_names)
            if len(names) != v:
                raise SchemaError(f"joint_names has {len(names)} entries for {v} joints")
            object.__setattr__(self, "joint_names", names)

    @property
    def root(self) -> int:
        return self.parents.index(-1)

    @property
    def bones(self) -> tuple:
        """(child, parent) pairs in child order."""
        return tuple((j, p) for j, p in enumerate(self.parents) if p != -1)

    def joint_index(self, name: str) -> int | None:
        if self.joint_names is None:
            return None
        try:
            return self.joint_names.index(name)
        except ValueError:
            return None


@dataclass(frozen=True)
class PoseSequence:
    """Frames x joints x 3 coordinates (meters) at a fixed frame rate."""

    skeleton: Skeleton
    fps: int
    frames: np.ndarray

    def __post_init__(self):
        frames = np.ascontiguousarray(np.asarray(self.frames, dtype=np.float64))
        object.__setattr__(self, "frames", frames)
        if self.fps < 1:
            raise SchemaError(f"fps must be >= 1, got {self.fps}")
        if frames.ndim != 3 or frames.shape[1:] != (self.skeleton.joint_count, 3):
            raise SchemaError(
                f"frames must be (T, {self.skeleton.joint_count}, 3), got {frames.shape}"
            )
        if frames.shape[0] < 1:
            raise SchemaError("a pose sequence needs at least one frame")
        if not np.all(np.isfinite(frames)):
            raise SchemaError("frames contain non-finite values")

    def __len__(self) -> int:
        return self.frames.shape[0]

    def bone_lengths(self) -> np.ndarray:
        """(T, bones) lengths in bone order."""
        bones = self.skeleton.bones
        out = np.empty((len(self), len(bones)))
        for b, (child, parent) in enumerate(bones):
            out[:, b] = np.linalg.norm(
                self.frames[:, child] - self.frames[:, parent], axis=-1
            )
        return out

    def check_bone_lengths(self) -> None:
        if self.skeleton.bones and not np.all(self.bone_lengths() > 0.0):
            raise SchemaError("sequence contains a zero-length bone")

    def translated(self, offset) -> "PoseSequence":
        return replace(self, frames=self.frames + np.asarray(offset, dtype=np.float64))


@dataclass(frozen=True)
class MotionWindow:
    """An observed past plus the future that actually followed it."""

    past: PoseSequence
    future: PoseSequence
    source_id: str

    def __post_init__(self):
        if self.past.skeleton != self.future.skeleton:
            raise SchemaError("past and future use different skeletons")
        if self.past.fps != self.future.fps:
            raise SchemaError("past and future use different frame rates")

    @property
    def skeleton(self) -> Skeleton:
        return self.past.skeleton


@dataclass
class WindowDataset:
    windows: list
    multimodal_index: dict | None = None

    def __len__(self) -> int:
        return len(self.windows)


def load_motion(path) -> PoseSequence:
    """Read a motion file, validating it against the schema."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: top-level value must be an object")
    for key in ("fps", "joint_count", "parents", "frames"):
        if key not in raw:
            raise SchemaError(f"{path}: missing field {key!r}")
    v = raw["joint_count"]
    if not isinstance(v, int) or v < 1:
        raise SchemaError(f"{path}: joint_count must be a positive integer")
    skeleton = Skeleton(
        joint_count=v,
        parents=raw["parents"],
        joint_names=tuple(raw["joint_names"]) if raw.get("joint_names") else None,
    )
    frames = raw["frames"]
    if not isinstance(frames, list) or not frames:
        raise SchemaError(f"{path}: frames must be a non-empty list")
    for t, frame in enumerate(frames):
        if not isinstance(frame, list) or len(frame) != v:
            raise SchemaError(f"{path}: frame {t} does not have {v} joints")
        for j, joint in enumerate(frame):
            if not isinstance(joint, list) or len(joint) != 3:
                raise SchemaError(f"{path}: frame {t} joint {j} is not an [x, y, z] triple")
    fps = raw["fps"]
    if not isinstance(fps, int) or fps < 1:
        raise SchemaError(f"{path}: fps must be a positive integer")
    seq = PoseSequence(skeleton=skeleton, fps=fps, frames=np.asarray(frames, dtype=np.float64))
    seq.check_bone_lengths()
    return seq


def save_motion(seq: PoseSequence, path) -> None:
    seq.check_bone_lengths()
    payload = {
        "fps": seq.fps,
        "joint_count": seq.skeleton.joint_count,
        "parents": list(seq.skeleton.parents),
    }
    if seq.skeleton.joint_names is not None:
        payload["joint_names"] = list(seq.skeleton.joint_names)
    payload["frames"] = seq.frames
    jsonio.dump(payload, path)


def save_manifest(path, motion_files, t_past: int, t_future: int, stride: int) -> None:
    jsonio.dump(
        {
            "motions": [str(f) for f in motion_files],
            "t_past": int(t_past),
            "t_future": int(t_future),
            "stride": int(stride),
        },
        path,
    )


def load_manifest(path) -> dict:
    try:
        raw = jsonio.load(path)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    for key in ("motions", "t_past", "t_future", "stride"):
        if key not in raw:
            raise SchemaError(f"{path}: manifest missing field {key!r}")
    base = os.path.dirname(os.path.abspath(path))
    raw["motions"] = [
        m if os.path.isabs(m) else os.path.join(base, m) for m in raw["motions"]
    ]
    return raw


def load_dataset(manifest_path) -> WindowDataset:
    """Load every motion in a manifest and slice it into windows."""
    manifest = load_manifest(manifest_path)
    seqs = [load_motion(p) for p in manifest["motions"]]
    ids = [os.path.splitext(os.path.basename(p))[0] for p in manifest["motions"]]
    return make_windows(
        seqs, manifest["t_past"], manifest["t_future"], manifest["stride"], ids=ids
    )


def make_windows(seqs, t_past: int, t_future: int, stride: int, ids=None) -> WindowDataset:
    """Slide fixed-length windows over each sequence.

    Sequences shorter than ``t_past + t_future`` contribute nothing. Window
    arrays are copies, so mutating one window never aliases another.
    """
    if t_past < 1 or t_future < 1:
        raise ValueError(f"window lengths must be >= 1, got {t_past}, {t_future}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if ids is None:
        ids = [f"seq-{i}" for i in range(len(seqs))]
    total = t_past + t_future
    windows = []
    for seq_id, seq in zip(ids, seqs):
        t = len(seq)
        for start in range(0, t - total + 1, stride):
            past = PoseSequence(
                skeleton=seq.skeleton, fps=seq.fps,
                frames=seq.frames[start : start + t_past].copy(),
            )
            future = PoseSequence(
                skeleton=seq.skeleton, fps=seq.fps,
                frames=seq.frames[start + t_past : start + total].copy(),
            )
            windows.append(
                MotionWindow(past=past, future=future, source_id=f"{seq_id}:{start}")
            )
    return WindowDataset(windows=windows)


def window_source(window: MotionWindow) -> str:
    """Sequence identity of a window (window start stripped)."""
    return window.source_id.rsplit(":", 1)[0]


def center_normalize(window: MotionWindow):
    """Shift a window so the root of the last observed frame sits at the origin.

    Returns the shifted window and the offset that restores the original
    coordinates exactly.
    """
    offset = window.past.frames[-1, window.skeleton.root].copy()
    centered = MotionWindow(
        past=window.past.translated(-offset),
        future=window.future.translated(-offset),
        source_id=window.source_id,
    )
    return centered, offset


def denormalize(window: MotionWindow, offset) -> MotionWindow:
    return MotionWindow(
        past=window.past.translated(offset),
        future=window.future.translated(offset),
        source_id=window.source_id,
    )


def last_pose_anchor(window: MotionWindow) -> np.ndarray:
    """Centered last observed pose, flattened; the multimodal grouping key."""
    centered, _ = center_normalize(window)
    return centered.past.frames[-1].ravel()


def build_multimodal_index(dataset: WindowDataset, threshold: float) -> WindowDataset:
    """Group windows whose centered last observed poses lie within ``threshold``.

    The resulting index is reflexive and symmetric; window ``i`` always
    belongs to its own group.
    """
    if threshold <= 0:
        raise ValueError(f"threshold must be > 0, got {threshold}")
    n = len(dataset.windows)
    anchors = np.stack([last_pose_anchor(w) for w in dataset.windows]) if n else np.zeros((0, 0))
    index: dict = {}
    for i in range(n):
        dists = np.linalg.norm(anchors - anchors[i], axis=1)
        index[i] = [int(j) for j in np.nonzero(dists <= threshold)[0]]
    return WindowDataset(windows=dataset.windows, multimodal_index=index)


def zero_velocity_baseline(window: MotionWindow) -> PoseSequence:
    """Future that freezes the last observed pose; the canonical accuracy floor."""
    t_future = len(window.future)
    frames = np.tile(window.past.frames[-1], (t_future, 1, 1))
    return PoseSequence(skeleton=window.skeleton, fps=window.past.fps, frames=frames)
