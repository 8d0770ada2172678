"""Model and training hyperparameter containers."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..gridworld import encoded_observation_dim


@dataclass(frozen=True)
class ModelConfig:
    """Causal-transformer policy hyperparameters.

    The observation pipeline is a two-layer MLP (obs_dim -> obs_embed_dim
    -> d_model); actions go through a 32-entry embedding table (pad id 31);
    rewards, when enabled, through a scalar linear embedding. The action
    head is 8-wide (the compass directions).
    """

    num_layers: int = 2
    d_model: int = 64
    num_heads: int = 4
    dropout: float = 0.2
    context_len: int = 192
    action_vocab: int = 32
    include_rewards: bool = False
    obs_dim: int = encoded_observation_dim(9)
    obs_embed_dim: int = 64

    def __post_init__(self):
        if self.d_model % self.num_heads != 0:
            raise ValueError(f"d_model={self.d_model} must be divisible by num_heads={self.num_heads}")
        if self.context_len < 2:
            raise ValueError("context_len must be >= 2")
        if self.action_vocab != 32:
            raise ValueError("the action vocabulary is pinned to 32 (8 moves + pad id 31)")


PRESETS = {
    "tiny": dict(num_layers=2, d_model=64, num_heads=4),
    "small": dict(num_layers=4, d_model=128, num_heads=4),
    "medium": dict(num_layers=6, d_model=256, num_heads=8),
}


def model_preset(name: str, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    return ModelConfig(**{**PRESETS[name], **overrides})


def count_params(cfg: ModelConfig) -> int:
    """Closed-form parameter count.

    obs MLP: obs_dim*h + h + h*d + d
    action table: 32*d;  reward embed (optional): 2*d
    positions: context_len*d
    per block: 12*d^2 + 13*d   (attention 4d^2+4d, MLP 8d^2+5d, two norms 4d)
    final norm: 2*d;  head: 8*d + 8
    """
    d, h = cfg.d_model, cfg.obs_embed_dim
    total = cfg.obs_dim * h + h + h * d + d
    total += cfg.action_vocab * d
    if cfg.include_rewards:
        total += 2 * d
    total += cfg.context_len * d
    total += cfg.num_layers * (12 * d * d + 13 * d)
    total += 2 * d
    total += 8 * d + 8
    return total


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings (learning-rate bounds follow the cosine schedule)."""

    batch_size: int = 64
    epochs: int = 25
    lr_max: float = 1e-4
    lr_min: float = 1e-6
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    seed: int = 0
    heldout_fraction: float = 0.1
    batches_per_epoch: int | None = None   # derived from dataset size when None

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 <= self.heldout_fraction < 1.0:
            raise ValueError("heldout_fraction must be in [0, 1)")
