"""Procedural motion synthesis.

Sequences are produced by forward kinematics over a fixed rest skeleton with
sinusoidal joint-angle programs ("primitives": walk, sit-down, arm-raise,
turn, idle sway). Rotations preserve bone lengths exactly, and every draw is
a pure function of (seed, sequence index), so regenerating with the same
seed yields a byte-identical corpus and growing ``count`` keeps earlier
sequences as a prefix.
"""

from __future__ import annotations

import numpy as np

from .motion import PoseSequence, Skeleton
from .numkit import Rng

PRIMITIVES = ("walk", "sit_down", "arm_raise", "turn", "idle")

# name -> (parents, joint_names, rest offsets from parent, base root position)
_SKELETONS = {
    "standard17": (
        (-1, 0, 1, 2, 3, 0, 5, 6, 0, 8, 9, 2, 11, 12, 2, 14, 15),
        (
            "pelvis", "spine", "chest", "neck", "head",
            "l_hip", "l_knee", "l_ankle",
            "r_hip", "r_knee", "r_ankle",
            "l_shoulder", "l_elbow", "l_wrist",
            "r_shoulder", "r_elbow", "r_wrist",
        ),
        (
            (0.0, 0.0, 0.0),
            (0.0, 0.12, 0.0), (0.0, 0.15, 0.0), (0.0, 0.12, 0.0), (0.0, 0.12, 0.0),
            (0.10, -0.02, 0.0), (0.0, -0.42, 0.0), (0.0, -0.42, 0.0),
            (-0.10, -0.02, 0.0), (0.0, -0.42, 0.0), (0.0, -0.42, 0.0),
            (0.18, 0.05, 0.0), (0.0, -0.28, 0.0), (0.0, -0.26, 0.0),
            (-0.18, 0.05, 0.0), (0.0, -0.28, 0.0), (0.0, -0.26, 0.0),
        ),
        (0.0, 0.95, 0.0),
    ),
    "tiny5": (
        (-1, 0, 1, 1, 1),
        ("pelvis", "spine", "head", "l_shoulder", "r_shoulder"),
        (
            (0.0, 0.0, 0.0),
            (0.0, 0.25, 0.0), (0.0, 0.20, 0.0),
            (0.22, 0.0, 0.0), (-0.22, 0.0, 0.0),
        ),
        (0.0, 0.5, 0.0),
    ),
}

_X = np.array([1.0, 0.0, 0.0])
_Y = np.array([0.0, 1.0, 0.0])
_Z = np.array([0.0, 0.0, 1.0])


def canonical_skeleton(name: str):
    """Return (skeleton, rest_offsets, base_root_position) for a built-in skeleton."""
    try:
        parents, names, offsets, base = _SKELETONS[name]
    except KeyError:
        raise ValueError(f"unknown skeleton {name!r}; available: {sorted(_SKELETONS)}") from None
    skeleton = Skeleton(joint_count=len(parents), parents=parents, joint_names=names)
    return skeleton, np.asarray(offsets, dtype=np.float64), np.asarray(base, dtype=np.float64)


def _axis_rotations(axis: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """(T, 3, 3) rotation matrices about a unit axis (Rodrigues)."""
    kx, ky, kz = axis
    k_cross = np.array([[0.0, -kz, ky], [kz, 0.0, -kx], [-ky, kx, 0.0]])
    k_outer = np.outer(axis, axis)
    cos = np.cos(angles)[:, None, None]
    sin = np.sin(angles)[:, None, None]
    return cos * np.eye(3) + sin * k_cross + (1.0 - cos) * k_outer


def forward_kinematics(skeleton: Skeleton, offsets: np.ndarray,
                       local_rots: np.ndarray, root_pos: np.ndarray) -> np.ndarray:
    """Positions (T, V, 3) from per-joint local rotations and a root trajectory."""
    t, v = local_rots.shape[0], skeleton.joint_count
    world_rot = np.empty((t, v, 3, 3))
    pos = np.empty((t, v, 3))
    root = skeleton.root
    world_rot[:, root] = local_rots[:, root]
    pos[:, root] = root_pos
    order = _topological_order(skeleton)
    for j in order:
        p = skeleton.parents[j]
        if p == -1:
            continue
        world_rot[:, j] = world_rot[:, p] @ local_rots[:, j]
        pos[:, j] = pos[:, p] + np.einsum("tab,b->ta", world_rot[:, p], offsets[j])
    return pos


def _topological_order(skeleton: Skeleton):
    order, placed = [], {skeleton.root}
    pending = [j for j in range(skeleton.joint_count) if j != skeleton.root]
    while pending:
        for j in list(pending):
            if skeleton.parents[j] in placed:
                order.append(j)
                placed.add(j)
                pending.remove(j)
    return order


def _smoothstep(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


class _AngleProgram:
    """Accumulates per-joint (axis, angle-series) terms, skipping unknown joints."""

    def __init__(self, skeleton: Skeleton, t: int):
        self.skeleton = skeleton
        self.t = t
        self.terms: dict = {}

    def add(self, joint_name: str, axis: np.ndarray, angles: np.ndarray) -> None:
        j = self.skeleton.joint_index(joint_name)
        if j is None:
            return
        self.terms.setdefault(j, []).append((axis, angles))

    def local_rotations(self) -> np.ndarray:
        t, v = self.t, self.skeleton.joint_count
        rots = np.tile(np.eye(3), (t, v, 1, 1))
        for j, terms in self.terms.items():
            r = np.tile(np.eye(3), (t, 1, 1))
            for axis, angles in terms:
                r = r @ _axis_rotations(axis, angles)
            rots[:, j] = r
        return rots


def _walk(rng: Rng, prog: _AngleProgram, time: np.ndarray, root: np.ndarray) -> None:
    freq = 0.8 + 0.6 * float(rng.uniform())
    phase = 2.0 * np.pi * float(rng.uniform())
    hip_amp = 0.30 + 0.25 * float(rng.uniform())
    arm_amp = 0.25 + 0.25 * float(rng.uniform())
    speed = 0.5 + 0.7 * float(rng.uniform())
    swing = 2.0 * np.pi * freq * time + phase
    prog.add("l_hip", _X, hip_amp * np.sin(swing))
    prog.add("r_hip", _X, -hip_amp * np.sin(swing))
    prog.add("l_knee", _X, -0.5 * hip_amp * (1.0 + np.sin(swing + np.pi)))
    prog.add("r_knee", _X, -0.5 * hip_amp * (1.0 + np.sin(swing)))
    prog.add("l_shoulder", _X, -arm_amp * np.sin(swing))
    prog.add("r_shoulder", _X, arm_amp * np.sin(swing))
    root[:, 2] += speed * time
    root[:, 1] += 0.02 * np.sin(2.0 * swing)


def _sit_down(rng: Rng, prog: _AngleProgram, time: np.ndarray, root: np.ndarray) -> None:
    duration = 0.8 + 1.2 * float(rng.uniform())
    depth = 0.20 + 0.15 * float(rng.uniform())
    ramp = _smoothstep(time / duration)
    prog.add("l_hip", _X, -1.2 * ramp)
    prog.add("r_hip", _X, -1.2 * ramp)
    prog.add("l_knee", _X, 1.4 * ramp)
    prog.add("r_knee", _X, 1.4 * ramp)
    prog.add("spine", _X, 0.3 * ramp)
    prog.add("l_shoulder", _X, -0.4 * ramp)
    prog.add("r_shoulder", _X, -0.4 * ramp)
    root[:, 1] -= depth * ramp


def _arm_raise(rng: Rng, prog: _AngleProgram, time: np.ndarray, root: np.ndarray) -> None:
    duration = 0.6 + 1.0 * float(rng.uniform())
    lift = 1.2 + 0.8 * float(rng.uniform())
    both = rng.randint(2) == 0
    ramp = _smoothstep(time / duration)
    prog.add("l_shoulder", _Z, -lift * ramp)
    if both:
        prog.add("r_shoulder", _Z, lift * ramp)
    prog.add("spine", _X, -0.1 * ramp)


def _turn(rng: Rng, prog: _AngleProgram, time: np.ndarray, root: np.ndarray) -> None:
    total = (0.8 + 1.2 * float(rng.uniform())) * (1.0 if rng.randint(2) == 0 else -1.0)
    duration = max(time[-1], 1e-9)
    ramp = _smoothstep(time / duration)
    prog.add("pelvis", _Y, total * ramp)
    prog.add("l_shoulder", _X, 0.15 * np.sin(2.0 * np.pi * 0.5 * time))
    prog.add("r_shoulder", _X, -0.15 * np.sin(2.0 * np.pi * 0.5 * time))


def _idle(rng: Rng, prog: _AngleProgram, time: np.ndarray, root: np.ndarray) -> None:
    freq = 0.3 + 0.4 * float(rng.uniform())
    amp = 0.04 + 0.05 * float(rng.uniform())
    phase = 2.0 * np.pi * float(rng.uniform())
    sway = 2.0 * np.pi * freq * time + phase
    prog.add("spine", _Z, amp * np.sin(sway))
    prog.add("l_shoulder", _X, amp * np.sin(sway + 0.7))
    prog.add("r_shoulder", _X, amp * np.sin(sway + 1.9))
    root[:, 1] += 0.01 * np.sin(sway)


_PROGRAMS = {
    "walk": _walk,
    "sit_down": _sit_down,
    "arm_raise": _arm_raise,
    "turn": _turn,
    "idle": _idle,
}


def synth_generate(rng: Rng, skeleton_name: str, count: int, fps: int,
                   min_frames: int, with_labels: bool = False):
    """Generate ``count`` sequences, each at least ``min_frames`` long.

    Sequence ``i`` is drawn from ``rng.derive(i)``, so outputs depend only on
    (seed, i). With ``with_labels`` the primitive name of each sequence is
    returned alongside it.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if min_frames < 1:
        raise ValueError(f"min_frames must be >= 1, got {min_frames}")
    skeleton, offsets, base_root = canonical_skeleton(skeleton_name)
    seqs, labels = [], []
    for i in range(count):
        seq_rng = rng.derive(i)
        label = PRIMITIVES[seq_rng.randint(len(PRIMITIVES))]
        frames_count = min_frames + seq_rng.randint(max(min_frames // 3, 1) + 1)
        time = np.arange(frames_count, dtype=np.float64) / fps
        prog = _AngleProgram(skeleton, frames_count)
        root = np.tile(base_root, (frames_count, 1))
        _PROGRAMS[label](seq_rng, prog, time, root)
        frames = forward_kinematics(skeleton, offsets, prog.local_rotations(), root)
        seqs.append(PoseSequence(skeleton=skeleton, fps=fps, frames=frames))
        labels.append(label)
    return (seqs, labels) if with_labels else seqs
