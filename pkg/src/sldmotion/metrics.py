"""Diversity and accuracy metrics for sets of predicted futures.

Conventions (documented in every report): displacement errors take the L2
norm over a single pose (joints x 3 flattened), average it over frames, and
minimize over samples; the pairwise diversity distance is the L2 norm over
the whole flattened future. Values are in raw dataset coordinate units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jsonio
from .errors import GeometryError
from .motion import WindowDataset, build_multimodal_index, center_normalize

ADE_CONVENTION = "per-frame L2 norm over joints, averaged over frames, minimized over samples"
APD_CONVENTION = "L2 norm over flattened futures, averaged over ordered sample pairs"


def _futures_of(preds) -> np.ndarray:
    arr = preds.futures if hasattr(preds, "futures") else np.asarray(preds, dtype=np.float64)
    if arr.ndim != 4:
        raise ValueError(f"expected futures of shape (K, T, V, 3), got {arr.shape}")
    return arr


def _gt_frames(gt) -> np.ndarray:
    return gt.frames if hasattr(gt, "frames") else np.asarray(gt, dtype=np.float64)


def apd(preds) -> float:
    """Average pairwise L2 distance among samples; 0 means no diversity."""
    futures = _futures_of(preds)
    k = futures.shape[0]
    if k < 2:
        raise ValueError(f"APD needs at least 2 samples, got {k}")
    flat = futures.reshape(k, -1)
    total = 0.0
    for i in range(k):
        for j in range(i + 1, k):
            total += float(np.linalg.norm(flat[i] - flat[j]))
    return 2.0 * total / (k * (k - 1))


def ade(preds, gt) -> float:
    """Average displacement error of the closest sample."""
    futures = _futures_of(preds)
    target = _gt_frames(gt)
    diff = futures - target[None]
    per_frame = np.linalg.norm(diff.reshape(diff.shape[0], diff.shape[1], -1), axis=2)
    return float(np.min(per_frame.mean(axis=1)))


def fde(preds, gt) -> float:
    """Final-frame displacement error of the closest sample."""
    futures = _futures_of(preds)
    target = _gt_frames(gt)
    diff = futures[:, -1] - target[-1][None]
    return float(np.min(np.linalg.norm(diff.reshape(diff.shape[0], -1), axis=1)))


def _group_futures(window_index: int, dataset: WindowDataset):
    if dataset.multimodal_index is None:
        raise RuntimeError("multimodal index not built; call build_multimodal_index first")
    group = dataset.multimodal_index[window_index]
    out = []
    for j in group:
        centered, _ = center_normalize(dataset.windows[j])
        out.append(centered.future.frames)
    return out


def mmade(preds, window_index: int, dataset: WindowDataset) -> float:
    """ADE averaged over the window's group of multimodal ground-truth futures."""
    futures = _futures_of(preds)
    _, offset = center_normalize(dataset.windows[window_index])
    centered = futures - offset
    members = _group_futures(window_index, dataset)
    return float(np.mean([ade(centered, gt) for gt in members]))


def mmfde(preds, window_index: int, dataset: WindowDataset) -> float:
    """FDE averaged over the window's group of multimodal ground-truth futures."""
    futures = _futures_of(preds)
    _, offset = center_normalize(dataset.windows[window_index])
    centered = futures - offset
    members = _group_futures(window_index, dataset)
    return float(np.mean([fde(centered, gt) for gt in members]))


@dataclass
class MetricsReport:
    apd: float
    ade: float
    fde: float
    mmade: float
    mmfde: float
    windows: int
    k: int
    conventions: dict

    def to_dict(self) -> dict:
        return {
            "apd": self.apd,
            "ade": self.ade,
            "fde": self.fde,
            "mmade": self.mmade,
            "mmfde": self.mmfde,
            "windows": self.windows,
            "k": self.k,
            "conventions": self.conventions,
        }

    def to_json(self) -> str:
        return jsonio.dumps(self.to_dict())


def default_multimodal_threshold(windows) -> float:
    """Half the vertical extent of a reference pose; the grouping default."""
    ref = windows[0].past.frames[-1]
    extent = float(ref[:, 1].max() - ref[:, 1].min())
    return 0.5 * extent if extent > 0 else 0.5


def evaluate_model(model, windows, mm_threshold: float | None = None,
                   k: int | None = None) -> MetricsReport:
    """Predict every window with the model and average all five metrics."""
    windows = list(windows.windows) if isinstance(windows, WindowDataset) else list(windows)
    if not windows:
        raise ValueError("cannot evaluate on an empty window list")
    profile = model.profile
    for w in windows:
        if w.skeleton.joint_count != profile.v:
            raise GeometryError(
                f"geometry mismatch: window has {w.skeleton.joint_count} joints, "
                f"model expects {profile.v}"
            )
        if len(w.past) != profile.t_past or len(w.future) != profile.t_future:
            raise GeometryError(
                f"geometry mismatch: window is {len(w.past)}+{len(w.future)} frames, "
                f"model expects {profile.t_past}+{profile.t_future}"
            )
    threshold = mm_threshold if mm_threshold is not None else default_multimodal_threshold(windows)
    dataset = build_multimodal_index(WindowDataset(windows=windows), threshold)
    k_used = model.k if k is None else k
    sums = np.zeros(5)
    for i, window in enumerate(windows):
        preds = model.predict_k(window.past, k_used)
        sums += (
            apd(preds),
            ade(preds, window.future),
            fde(preds, window.future),
            mmade(preds, i, dataset),
            mmfde(preds, i, dataset),
        )
    means = sums / len(windows)
    return MetricsReport(
        apd=float(means[0]),
        ade=float(means[1]),
        fde=float(means[2]),
        mmade=float(means[3]),
        mmfde=float(means[4]),
        windows=len(windows),
        k=k_used,
        conventions={
            "ade": ADE_CONVENTION,
            "apd": APD_CONVENTION,
            "units": "dataset coordinate units",
            "multimodal_threshold": threshold,
        },
    )
