"""Model geometry profiles and the training configuration."""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from . import jsonio

ABLATION_MODES = ("MQ", "MQ+SLD", "MQ-P+SLD")


@dataclass(frozen=True)
class Profile:
    """Static geometry of a model: window lengths, joint count, latent sizes."""

    name: str
    skeleton: str          # canonical skeleton id used by the synthesizer
    v: int                 # joints
    t_past: int            # observed frames
    t_future: int          # predicted frames
    n_freq: int            # retained frequency rows
    m_directions: int      # latent directions
    c_latent: int          # latent width
    c_feature: int         # past-feature width
    c_query: int           # query width
    k_samples: int         # default predictions per window

    @property
    def total_length(self) -> int:
        return self.t_past + self.t_future

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


PROFILES = {
    "standard": Profile(
        name="standard", skeleton="standard17", v=17, t_past=25, t_future=100,
        n_freq=20, m_directions=10, c_latent=64, c_feature=128, c_query=64,
        k_samples=50,
    ),
    "tiny": Profile(
        name="tiny", skeleton="tiny5", v=5, t_past=8, t_future=16,
        n_freq=8, m_directions=4, c_latent=16, c_feature=16, c_query=16,
        k_samples=10,
    ),
}


def get_profile(profile) -> Profile:
    if isinstance(profile, Profile):
        return profile
    try:
        return PROFILES[profile]
    except KeyError:
        raise ValueError(
            f"unknown profile {profile!r}; available: {sorted(PROFILES)}"
        ) from None


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    profile: str = "standard"
    epochs: int = 500
    batch_size: int = 16
    k_samples: int | None = None     # None -> profile default
    lambda_r: float = 1.0
    lambda_d: float = 0.1
    lambda_c: float = 0.05
    alpha_d: float = 100.0
    lr0: float = 0.001
    seed: int = 0
    ablation_mode: str = "MQ-P+SLD"
    checkpoint_every: int = 10

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("lambda_r", "lambda_d", "lambda_c"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.alpha_d <= 0:
            raise ValueError(f"alpha_d must be > 0, got {self.alpha_d}")
        if self.ablation_mode not in ABLATION_MODES:
            raise ValueError(
                f"unknown ablation_mode {self.ablation_mode!r}; expected one of {ABLATION_MODES}"
            )
        k = self.resolved_k()
        if k < 2:
            raise ValueError(f"k_samples must be >= 2 for pairwise diversity, got {k}")
        return self

    def resolved_profile(self) -> Profile:
        return get_profile(self.profile)

    def resolved_k(self) -> int:
        return self.k_samples if self.k_samples is not None else self.resolved_profile().k_samples

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "TrainConfig":
        return cls.from_dict(jsonio.load(path))

    def override(self, **kwargs) -> "TrainConfig":
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs)
