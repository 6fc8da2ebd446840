import numpy as np
import pytest

from sldmotion.config import PROFILES, TrainConfig
from sldmotion.motion import WindowDataset, make_windows
from sldmotion.numkit import Rng
from sldmotion.synth import synth_generate
from sldmotion.training import train

SMOKE_CORPUS_SEED = 42
SMOKE_WINDOWS = 64
SMOKE_EPOCHS = 30


def smoke_config(seed=0, **overrides) -> TrainConfig:
    base = dict(profile="tiny", epochs=SMOKE_EPOCHS, batch_size=16, seed=seed)
    base.update(overrides)
    return TrainConfig(**base).validate()


def perturb_params(model, scale=0.05, seed=99) -> None:
    """Push every parameter off its init so heads are non-zero and argmins robust."""
    rng = Rng(seed)
    for arr in model.params.values():
        arr += scale * rng.normal(arr.shape)


@pytest.fixture(scope="session")
def tiny_profile():
    return PROFILES["tiny"]


@pytest.fixture(scope="session")
def smoke_dataset(tiny_profile) -> WindowDataset:
    """64 deterministic synthetic windows on the tiny profile."""
    seqs = synth_generate(
        Rng(SMOKE_CORPUS_SEED), "tiny5", 30, 25,
        min_frames=tiny_profile.total_length,
    )
    ds = make_windows(seqs, tiny_profile.t_past, tiny_profile.t_future, 2)
    assert len(ds.windows) >= SMOKE_WINDOWS
    return WindowDataset(ds.windows[:SMOKE_WINDOWS])


@pytest.fixture(scope="session")
def smoke_result(smoke_dataset):
    """One 30-epoch tiny training run shared by tests that need a trained model."""
    return train(smoke_config(), smoke_dataset)


@pytest.fixture(scope="session")
def trained_model(smoke_result):
    return smoke_result.state.model


def random_pose_window(rng: Rng, v=4, t_past=3, t_future=5):
    """Small random window on a chain skeleton, for metric oracles."""
    from sldmotion.motion import MotionWindow, PoseSequence, Skeleton

    skel = Skeleton(joint_count=v, parents=tuple([-1] + list(range(v - 1))))
    base = rng.normal((t_past + t_future, v, 3))
    past = PoseSequence(skeleton=skel, fps=10, frames=base[:t_past])
    future = PoseSequence(skeleton=skel, fps=10, frames=base[t_past:])
    return MotionWindow(past=past, future=future, source_id="rand:0")
