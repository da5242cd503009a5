"""Model and training hyperparameter bundles.

Field map to the conventional symbols: embed_dim D, num_modes K,
history_frames T, future_frames F, lane_radius R1, agent_radius R2,
history_span I1, prediction_span I2, attn_rounds N_attn.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from hpnet.synth.augment import AugmentationConfig


class ConfigError(ValueError):
    pass


@dataclass
class ModelConfig:
    embed_dim: int = 128
    num_heads: int = 8
    num_modes: int = 6
    history_frames: int = 20
    future_frames: int = 30
    lane_radius: float = 50.0       # spatial attention reach, meters
    agent_radius: float = 50.0      # agent attention reach, meters
    history_span: int = 20          # temporal attention window, frames
    prediction_span: int = 20       # historical-prediction window, frames
    attn_rounds: int = 2
    num_stages: int = 2             # proposal + refinement
    use_hpa: bool = True
    pre_norm: bool = True           # residual + pre-normalization blocks
    dropout: float = 0.1
    activation: str = "silu"        # fixed project-wide smooth rectifier

    def validate(self):
        positive = (
            "embed_dim", "num_heads", "num_modes", "history_frames",
            "future_frames", "lane_radius", "agent_radius", "attn_rounds",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.history_span < 0 or self.prediction_span < 0:
            raise ConfigError("attention spans must be >= 0")
        if self.history_span > self.history_frames:
            raise ConfigError("history_span must be <= history_frames")
        if self.embed_dim % self.num_heads:
            raise ConfigError(
                f"num_heads={self.num_heads} must divide embed_dim={self.embed_dim}"
            )
        if self.num_stages != 2:
            raise ConfigError("the decoder is a fixed proposal+refinement pair")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        return self

    @classmethod
    def toy(cls, **overrides):
        """Laptop-scale profile: same structure, narrow embeddings, half spans
        and radii."""
        base = dict(
            embed_dim=32,
            num_heads=2,
            lane_radius=35.0,
            agent_radius=35.0,
            history_span=10,
            prediction_span=10,
        )
        base.update(overrides)
        return cls(**base).validate()

    @classmethod
    def micro(cls, **overrides):
        """Gradient-check scale: tiny everything."""
        base = dict(
            embed_dim=8,
            num_heads=2,
            num_modes=2,
            history_frames=4,
            future_frames=3,
            history_span=2,
            prediction_span=2,
            attn_rounds=1,
            dropout=0.0,
        )
        base.update(overrides)
        return cls(**base).validate()

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names}).validate()


@dataclass
class TrainConfig:
    epochs: int = 64
    batch_size: int = 16
    learning_rate: float = 5e-4
    weight_decay: float = 1e-4
    huber_delta: float = 1.0
    objective: str = "marginal"     # marginal | joint
    seed: int = 0
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)

    def validate(self):
        if self.epochs < 0 or self.batch_size <= 0:
            raise ConfigError("epochs must be >= 0 and batch_size positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.weight_decay < 0 or self.huber_delta <= 0:
            raise ConfigError("weight_decay >= 0 and huber_delta > 0 required")
        if self.objective not in ("marginal", "joint"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        self.augmentation.validate()
        return self

    @classmethod
    def toy(cls, **overrides):
        base = dict(epochs=8, batch_size=4, learning_rate=3e-4)
        base.update(overrides)
        return cls(**base).validate()

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        aug = d.pop("augmentation", {})
        names = {f.name for f in fields(cls)} - {"augmentation"}
        cfg = cls(**{k: v for k, v in d.items() if k in names})
        if isinstance(aug, dict):
            cfg.augmentation = AugmentationConfig(**aug)
        return cfg.validate()
