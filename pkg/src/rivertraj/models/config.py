from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError

ARCHITECTURES = ("transformer", "lstm")
CONTEXT_MODES = ("curvature", "agnostic")
HEAD_MODES = ("classification", "hybrid")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and training hyperparameters.

    ``distance_embed``/``cog_embed`` default to 256 each for the transformer
    and 512 each for the LSTM. The transformer model width is their sum;
    ``hidden_size`` is the transformer feedforward size or the LSTM hidden
    state size.
    """

    architecture: str = "transformer"
    context_mode: str = "curvature"
    head_mode: str = "classification"
    n: int = 10
    m: int = 15
    distance_vocab: int = 465
    cog_vocab: int = 361
    max_distance: float = 464.0
    hidden_size: int = 512
    encoder_layers: int = 3
    decoder_layers: int = 3
    dropout: float = 0.1
    distance_embed: int | None = None
    cog_embed: int | None = None
    context_embed: int = 16
    curvature_bins: int = 81
    curvature_clip: float = 0.004
    attention_heads: int = 8
    alpha: float = 0.5
    learning_rate: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    max_train_seconds: float | None = None

    def __post_init__(self):
        default = 256 if self.architecture == "transformer" else 512
        if self.distance_embed is None:
            object.__setattr__(self, "distance_embed", default)
        if self.cog_embed is None:
            object.__setattr__(self, "cog_embed", default)
        self.validate()

    @property
    def step_width(self) -> int:
        return self.distance_embed + self.cog_embed

    def validate(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"architecture must be one of {ARCHITECTURES}")
        if self.context_mode not in CONTEXT_MODES:
            raise ConfigError(f"context_mode must be one of {CONTEXT_MODES}")
        if self.head_mode not in HEAD_MODES:
            raise ConfigError(f"head_mode must be one of {HEAD_MODES}")
        if self.n < 1 or self.m < 1:
            raise ConfigError("n and m must be positive")
        if min(self.distance_embed, self.cog_embed, self.context_embed, self.hidden_size) < 1:
            raise ConfigError("embedding and hidden sizes must be positive")
        if self.architecture == "transformer" and self.step_width % self.attention_heads:
            raise ConfigError("transformer width must be divisible by attention_heads")
        if self.architecture == "lstm" and self.encoder_layers != self.decoder_layers:
            raise ConfigError("LSTM encoder and decoder need the same number of layers")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.curvature_bins < 1 or self.curvature_bins % 2 == 0:
            raise ConfigError("curvature_bins must be odd (symmetric around zero)")

    @property
    def curvature_bin_width(self) -> float:
        return self.curvature_clip / (self.curvature_bins // 2) if self.curvature_bins > 1 else 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def with_(self, **changes) -> "ModelConfig":
        return replace(self, **changes)

    @classmethod
    def desk(cls, architecture: str = "transformer", **kw) -> "ModelConfig":
        """Width-64, 2+2 layer configuration for CPU-scale experiments."""
        base = dict(
            architecture=architecture,
            distance_embed=32,
            cog_embed=32,
            hidden_size=64,
            encoder_layers=2,
            decoder_layers=2,
            attention_heads=4,
            context_embed=8,
            learning_rate=1e-3,
            batch_size=64,
            max_epochs=30,
            patience=5,
        )
        base.update(kw)
        return cls(**base)
