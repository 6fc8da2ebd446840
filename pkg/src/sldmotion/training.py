"""Three-term objective, Adam updates, and the deterministic epoch loop.

The objective is a weighted sum of a best-of-K reconstruction term (gradient
flows only through the sample closest to ground truth), a bounded pairwise
diversity kernel, and a motion constraint penalizing bone stretch and a
velocity jump at the observation seam. Every piece of randomness in the loop
is a pure function of (seed, epoch), so interrupted runs resume exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import TrainConfig
from .errors import GeometryError, TrainingError
from .metrics import evaluate_model
from .motion import MotionWindow, PoseSequence, WindowDataset, center_normalize, window_source
from .network import MotionModel, PredictionSet, load_checkpoint, save_checkpoint
from .numkit import Rng

HOLDOUT_FRACTION = 0.1
PAST_TERM_WEIGHT = 0.1
SEAM_WEIGHT = 0.5


# -- loss terms (array level, with gradients) --------------------------------

def reconstruction_terms(fulls: np.ndarray, past_frames: np.ndarray,
                         future_frames: np.ndarray, t_past: int):
    """Best-of-K squared error; returns (value, future_term, past_term, k_star, g)."""
    diffs = fulls[:, t_past:] - future_frames
    mses = np.mean(diffs * diffs, axis=(1, 2, 3))
    k_star = int(np.argmin(mses))
    future_term = float(mses[k_star])
    past_diff = fulls[k_star, :t_past] - past_frames
    past_term = float(np.mean(past_diff * past_diff))
    value = future_term + PAST_TERM_WEIGHT * past_term
    g = np.zeros_like(fulls)
    g[k_star, t_past:] = 2.0 * diffs[k_star] / future_frames.size
    g[k_star, :t_past] = PAST_TERM_WEIGHT * 2.0 * past_diff / past_frames.size
    return value, future_term, past_term, k_star, g


def diversity_terms(futures: np.ndarray, alpha: float):
    """Mean over pairs of exp(-||Y_i - Y_j|| / alpha); bounded in (0, 1]."""
    k = futures.shape[0]
    if k < 2:
        raise ValueError(f"pairwise diversity needs K >= 2, got K={k}")
    flat = futures.reshape(k, -1)
    pairs = k * (k - 1) // 2
    total = 0.0
    g = np.zeros_like(flat)
    for i in range(k):
        for j in range(i + 1, k):
            diff = flat[i] - flat[j]
            d = float(np.linalg.norm(diff))
            e = float(np.exp(-d / alpha))
            total += e
            if d > 1e-12:
                coef = -e / (alpha * d)
                g[i] += coef * diff
                g[j] -= coef * diff
    return total / pairs, (g / pairs).reshape(futures.shape)


def constraint_terms(futures: np.ndarray, last_past: np.ndarray, skeleton):
    """Bone-length deviation from the last observed frame plus the first-frame seam."""
    k, t_f = futures.shape[0], futures.shape[1]
    bones = skeleton.bones
    g = np.zeros_like(futures)
    total = 0.0
    for s in range(k):
        sample = 0.0
        if bones:
            bone_sum = 0.0
            g_bone = np.zeros_like(futures[s])
            for child, parent in bones:
                vecs = futures[s, :, child] - futures[s, :, parent]
                lens = np.linalg.norm(vecs, axis=1)
                ref = float(np.linalg.norm(last_past[child] - last_past[parent]))
                dev = lens - ref
                bone_sum += float(np.sum(dev * dev))
                safe = lens > 1e-12
                coef = np.where(safe, 2.0 * dev / np.where(safe, lens, 1.0), 0.0)
                g_bone[:, child] += coef[:, None] * vecs
                g_bone[:, parent] -= coef[:, None] * vecs
            denom = t_f * len(bones)
            sample += bone_sum / denom
            g[s] += g_bone / denom
        seam = futures[s, 0] - last_past
        sample += SEAM_WEIGHT * float(np.sum(seam * seam))
        g[s, 0] += 2.0 * SEAM_WEIGHT * seam
        total += sample
    return total / k, g / k


@dataclass
class LossParts:
    loss_r: float
    loss_d: float
    loss_c: float
    total: float
    future_term: float
    past_term: float
    argmin_k: int


def window_loss_and_grads(fulls: np.ndarray, window: MotionWindow, cfg: TrainConfig,
                          t_past: int):
    """Weighted objective on one (centered) window; gradient w.r.t. decoded sequences."""
    r_val, fterm, pterm, k_star, g_r = reconstruction_terms(
        fulls, window.past.frames, window.future.frames, t_past
    )
    d_val, g_d = diversity_terms(fulls[:, t_past:], cfg.alpha_d)
    c_val, g_c = constraint_terms(fulls[:, t_past:], window.past.frames[-1], window.skeleton)
    total = cfg.lambda_r * r_val + cfg.lambda_d * d_val + cfg.lambda_c * c_val
    g_y = cfg.lambda_r * g_r
    g_y[:, t_past:] += cfg.lambda_d * g_d + cfg.lambda_c * g_c
    parts = LossParts(
        loss_r=r_val, loss_d=d_val, loss_c=c_val, total=total,
        future_term=fterm, past_term=pterm, argmin_k=k_star,
    )
    return parts, g_y


# -- loss surface over prediction sets (original coordinates) ---------------

def _t_past_of(preds: PredictionSet) -> int:
    return preds.full.shape[1] - preds.futures.shape[1]


def loss_reconstruction(preds: PredictionSet, gt_future: PoseSequence) -> float:
    t_past = _t_past_of(preds)
    centered_future = gt_future.frames - preds.offset
    value, *_ = reconstruction_terms(
        preds.full, preds.past.frames - preds.offset, centered_future, t_past
    )
    return value


def loss_diversity(preds: PredictionSet, alpha_d: float) -> float:
    value, _ = diversity_terms(preds.futures, alpha_d)
    return value


def loss_constraint(preds: PredictionSet, past: PoseSequence) -> float:
    value, _ = constraint_terms(preds.futures, past.frames[-1], past.skeleton)
    return value


def total_loss(preds: PredictionSet, window: MotionWindow, cfg: TrainConfig) -> LossParts:
    centered, _ = center_normalize(window)
    parts, _ = window_loss_and_grads(preds.full, centered, cfg, _t_past_of(preds))
    return parts


# -- optimizer ---------------------------------------------------------------

def lr_schedule(epoch: int, lr0: float) -> float:
    """Flat for 100 epochs, then linear decay hitting zero at epoch 500."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return max(0.0, lr0 * (1.0 - max(0, epoch - 100) / 400.0))


@dataclass
class TrainState:
    model: MotionModel
    m: dict
    v: dict
    step: int = 0
    epoch: int = 0

    @classmethod
    def fresh(cls, model: MotionModel) -> "TrainState":
        return cls(model=model, m=model.zero_grads(), v=model.zero_grads())


def adam_step(state: TrainState, grads: dict, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> TrainState:
    """Bias-corrected Adam update applied in place."""
    bad = [name for name, g in grads.items() if g.size and not np.all(np.isfinite(g))]
    if bad:
        raise TrainingError(f"non-finite gradients in parameter groups: {sorted(bad)}")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in state.model.params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        if p.size and not np.all(np.isfinite(p)):
            raise TrainingError(f"parameters {name!r} became non-finite after update")
    return state


# -- dataset split and the loop ----------------------------------------------

def split_dataset(dataset: WindowDataset):
    """Hold out the trailing ~10% of windows by source sequence, never splitting one."""
    sources: list = []
    for w in dataset.windows:
        src = window_source(w)
        if src not in sources:
            sources.append(src)
    if len(sources) < 2:
        return list(dataset.windows), []
    counts = {src: 0 for src in sources}
    for w in dataset.windows:
        counts[window_source(w)] += 1
    want = max(1, int(round(HOLDOUT_FRACTION * len(dataset.windows))))
    held_sources: set = set()
    held_count = 0
    for src in reversed(sources):
        if held_count >= want or len(held_sources) == len(sources) - 1:
            break
        held_sources.add(src)
        held_count += counts[src]
    train = [w for w in dataset.windows if window_source(w) not in held_sources]
    held = [w for w in dataset.windows if window_source(w) in held_sources]
    return train, held


@dataclass
class TrainResult:
    state: TrainState
    log: list = field(default_factory=list)
    ortho_devs: list = field(default_factory=list)
    heldout_windows: list = field(default_factory=list)
    heldout_report: object = None
    checkpoint_path: str | None = None


def _check_geometry(windows, profile) -> None:
    for w in windows:
        if w.skeleton.joint_count != profile.v:
            raise GeometryError(
                f"geometry mismatch: window has {w.skeleton.joint_count} joints, "
                f"profile {profile.name} expects {profile.v}"
            )
        if len(w.past) != profile.t_past or len(w.future) != profile.t_future:
            raise GeometryError(
                f"geometry mismatch: window is {len(w.past)}+{len(w.future)} frames, "
                f"profile {profile.name} expects {profile.t_past}+{profile.t_future}"
            )


def orthogonality_deviation(model: MotionModel) -> float:
    """Max-abs deviation of the effective directions' Gram matrix from identity."""
    if model.mode == "MQ":
        return 0.0
    eff = model.effective()
    gram = eff @ eff.T
    return float(np.max(np.abs(gram - np.eye(gram.shape[0]))))


def train(config: TrainConfig, dataset: WindowDataset, out_path=None,
          resume_from=None, log_fn=None) -> TrainResult:
    """Run the epoch loop; returns the final state, per-epoch log, and held-out report."""
    cfg = config.validate()
    profile = cfg.resolved_profile()
    k = cfg.resolved_k()
    if not dataset.windows:
        raise TrainingError("cannot train on an empty dataset")
    _check_geometry(dataset.windows, profile)
    train_windows, held_windows = split_dataset(dataset)
    if not train_windows:
        raise TrainingError("dataset split left no training windows")
    fps = train_windows[0].past.fps
    skeleton = train_windows[0].skeleton

    if resume_from is not None:
        model, meta = load_checkpoint(resume_from)
        state = TrainState.fresh(model)
        if meta["moments"] is not None:
            state.m = meta["moments"]["adam_m"]
            state.v = meta["moments"]["adam_v"]
        state.epoch = meta["epoch"]
        state.step = meta["step"]
    else:
        model = MotionModel.create(
            profile, mode=cfg.ablation_mode, k=k, seed=cfg.seed,
            skeleton=skeleton, fps=fps,
        )
        state = TrainState.fresh(model)

    centered = [center_normalize(w)[0] for w in train_windows]
    n = len(centered)
    result = TrainResult(state=state, heldout_windows=held_windows)

    for epoch in range(state.epoch, cfg.epochs):
        lr = lr_schedule(epoch, cfg.lr0)
        order = Rng(cfg.seed).derive(1000 + epoch).permutation(n)
        sums = np.zeros(4)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            grads = state.model.zero_grads()
            scale = 1.0 / len(batch)
            for idx in batch:
                window = centered[int(idx)]
                fwd = state.model.forward_window(window.past.frames)
                parts, g_y = window_loss_and_grads(fwd.y, window, cfg, profile.t_past)
                state.model.backward_window(fwd, g_y * scale, grads)
                sums += (parts.loss_r, parts.loss_d, parts.loss_c, parts.total)
            adam_step(state, grads, lr)
        state.epoch = epoch + 1
        means = sums / n
        line = {
            "epoch": epoch,
            "lr": lr,
            "loss_r": float(means[0]),
            "loss_d": float(means[1]),
            "loss_c": float(means[2]),
            "total": float(means[3]),
        }
        result.log.append(line)
        result.ortho_devs.append(orthogonality_deviation(state.model))
        if log_fn is not None:
            log_fn(line)
        if (
            out_path is not None
            and cfg.checkpoint_every > 0
            and state.epoch % cfg.checkpoint_every == 0
            and state.epoch < cfg.epochs
        ):
            save_checkpoint(out_path, state.model, config=cfg, epoch=state.epoch,
                            step=state.step, moments={"adam_m": state.m, "adam_v": state.v})

    if out_path is not None:
        save_checkpoint(out_path, state.model, config=cfg, epoch=state.epoch,
                        step=state.step, moments={"adam_m": state.m, "adam_v": state.v})
        result.checkpoint_path = str(out_path)
    if held_windows:
        result.heldout_report = evaluate_model(state.model, held_windows)
    return result
