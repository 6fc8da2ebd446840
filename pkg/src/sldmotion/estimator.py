"""Scikit-learn style estimator wrapping the training loop and predictor.

``fit`` consumes motion windows (a WindowDataset or a list of MotionWindow),
``predict`` maps an observed past to a (K, T_future, V, 3) array of sampled
futures, and hyperparameters follow the get_params/set_params contract so
the model clones and composes with the wider ecosystem.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .config import TrainConfig
from .metrics import ade
from .motion import MotionWindow, PoseSequence, WindowDataset
from .network import PredictionSet
from .training import train


def as_window_dataset(x) -> WindowDataset:
    """Accept a WindowDataset or an iterable of MotionWindow."""
    if isinstance(x, WindowDataset):
        if not x.windows:
            raise ValueError("dataset contains no windows")
        return x
    windows = list(x)
    if not windows:
        raise ValueError("dataset contains no windows")
    for w in windows:
        if not isinstance(w, MotionWindow):
            raise TypeError(f"expected MotionWindow elements, got {type(w)!r}")
    return WindowDataset(windows=windows)


class DiverseMotionPredictor(BaseEstimator):
    """Predicts K diverse futures per observed motion, editable in latent space.

    Parameters mirror the training configuration; fitted state lives in
    ``model_`` (trailing underscore per sklearn convention).
    """

    def __init__(self, profile="tiny", epochs=30, batch_size=16, k_samples=None,
                 lambda_r=1.0, lambda_d=0.1, lambda_c=0.05, alpha_d=100.0,
                 lr0=0.001, seed=0, ablation_mode="MQ-P+SLD"):
        self.profile = profile
        self.epochs = epochs
        self.batch_size = batch_size
        self.k_samples = k_samples
        self.lambda_r = lambda_r
        self.lambda_d = lambda_d
        self.lambda_c = lambda_c
        self.alpha_d = alpha_d
        self.lr0 = lr0
        self.seed = seed
        self.ablation_mode = ablation_mode

    def _config(self) -> TrainConfig:
        profile = self.profile if isinstance(self.profile, str) else self.profile.name
        return TrainConfig(
            profile=profile,
            epochs=self.epochs,
            batch_size=self.batch_size,
            k_samples=self.k_samples,
            lambda_r=self.lambda_r,
            lambda_d=self.lambda_d,
            lambda_c=self.lambda_c,
            alpha_d=self.alpha_d,
            lr0=self.lr0,
            seed=self.seed,
            ablation_mode=self.ablation_mode,
            checkpoint_every=0,
        )

    def fit(self, X, y=None):
        """Train on motion windows; y is ignored (futures live in the windows)."""
        dataset = as_window_dataset(X)
        result = train(self._config().validate(), dataset)
        self.model_ = result.state.model
        self.train_log_ = result.log
        self.heldout_report_ = result.heldout_report
        return self

    def _as_past(self, x) -> PoseSequence:
        if isinstance(x, PoseSequence):
            return x
        arr = np.asarray(x, dtype=np.float64)
        model = self.model_
        if arr.shape != (model.profile.t_past, model.profile.v, 3):
            raise ValueError(
                f"expected past of shape {(model.profile.t_past, model.profile.v, 3)}, "
                f"got {arr.shape}"
            )
        return PoseSequence(skeleton=model.skeleton, fps=model.fps, frames=arr)

    def predict_set(self, past) -> PredictionSet:
        check_is_fitted(self, "model_")
        return self.model_.predict_k(self._as_past(past))

    def predict(self, X):
        """Futures for one past (array of shape (K, T_f, V, 3)) or a list of pasts."""
        check_is_fitted(self, "model_")
        if isinstance(X, (list, tuple)):
            return [self.predict_set(x).futures for x in X]
        return self.predict_set(X).futures

    def score(self, X, y=None) -> float:
        """Negative mean ADE over windows (higher is better)."""
        check_is_fitted(self, "model_")
        dataset = as_window_dataset(X)
        errors = [
            ade(self.model_.predict_k(w.past), w.future) for w in dataset.windows
        ]
        return -float(np.mean(errors))
