"""Diverse, accurate, and editable human motion prediction.

A compact implementation of stochastic motion forecasting built on an
orthogonal latent direction basis with learnable motion queries: one
observed pose window in, K diverse futures out, each steerable by editing
its latent coefficients.
"""

from .config import ABLATION_MODES, PROFILES, Profile, TrainConfig, get_profile
from .directions import combine, edit_coefficients, effective_directions
from .estimator import DiverseMotionPredictor, as_window_dataset
from .metrics import MetricsReport, ade, apd, evaluate_model, fde, mmade, mmfde
from .motion import (
    MotionWindow,
    PoseSequence,
    Skeleton,
    WindowDataset,
    build_multimodal_index,
    center_normalize,
    load_dataset,
    load_motion,
    make_windows,
    save_motion,
    zero_velocity_baseline,
)
from .network import MotionModel, PredictionSet, load_checkpoint, save_checkpoint
from .numkit import DctBasis, Rng, dct_basis, gaussian, grad_check, matmul, orthonormalize
from .synth import canonical_skeleton, synth_generate
from .training import (
    TrainResult,
    TrainState,
    adam_step,
    loss_constraint,
    loss_diversity,
    loss_reconstruction,
    lr_schedule,
    total_loss,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_MODES",
    "PROFILES",
    "Profile",
    "TrainConfig",
    "get_profile",
    "combine",
    "edit_coefficients",
    "effective_directions",
    "DiverseMotionPredictor",
    "as_window_dataset",
    "MetricsReport",
    "ade",
    "apd",
    "evaluate_model",
    "fde",
    "mmade",
    "mmfde",
    "MotionWindow",
    "PoseSequence",
    "Skeleton",
    "WindowDataset",
    "build_multimodal_index",
    "center_normalize",
    "load_dataset",
    "load_motion",
    "make_windows",
    "save_motion",
    "zero_velocity_baseline",
    "MotionModel",
    "PredictionSet",
    "load_checkpoint",
    "save_checkpoint",
    "DctBasis",
    "Rng",
    "dct_basis",
    "gaussian",
    "grad_check",
    "matmul",
    "orthonormalize",
    "canonical_skeleton",
    "synth_generate",
    "TrainResult",
    "TrainState",
    "adam_step",
    "loss_constraint",
    "loss_diversity",
    "loss_reconstruction",
    "lr_schedule",
    "total_loss",
    "train",
]
