"""The causal-transformer policy network.

Token embeddings by kind (state -> observation MLP, action/pad -> table
row, reward -> scalar linear) plus learned absolute positions, a stack of
pre-norm attention blocks, and an 8-way action head read at state
positions.
"""

from __future__ import annotations

import numpy as np

from ..dataset import KIND_ACTION, KIND_PAD, KIND_REWARD, KIND_STATE, TokenizedBatch
from ..numerics import (
    AttentionWeights,
    Tensor,
    causal_self_attention,
    cross_entropy_masked,
    dropout,
    gelu,
    layer_norm,
    linear,
    scatter_rows,
    take_rows,
    trunc_normal,
)
from ..numerics.tensor import embedding
from .config import ModelConfig


class ModelContractError(ValueError):
    """Batch violates the model's input contract (e.g. overlong)."""


class PolicyModel:
    """Parameter container plus the forward pass."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Tensor]):
        self.cfg = cfg
        self.params = params

    def named_parameters(self) -> dict[str, Tensor]:
        return self.params

    def param_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {k: p.grad for k, p in self.params.items() if p.grad is not None}

    # -- forward -----------------------------------------------------------

    def _block_weights(self, i: int) -> AttentionWeights:
        p = self.params
        return AttentionWeights(
            wq=p[f"block{i}.attn.wq"], wk=p[f"block{i}.attn.wk"],
            wv=p[f"block{i}.attn.wv"], wo=p[f"block{i}.attn.wo"],
            bq=p[f"block{i}.attn.bq"], bk=p[f"block{i}.attn.bk"],
            bv=p[f"block{i}.attn.bv"], bo=p[f"block{i}.attn.bo"],
        )

    def embed_tokens(self, batch: TokenizedBatch, training: bool = False,
                     dropout_rng: np.random.Generator | None = None) -> Tensor:
        cfg = self.cfg
        p = self.params
        b, t = batch.token_kind.shape
        if t > cfg.context_len:
            raise ModelContractError(f"batch length {t} exceeds context_len {cfg.context_len}")
        if batch.obs_dim != cfg.obs_dim:
            raise ModelContractError(f"observation dim {batch.obs_dim} != configured {cfg.obs_dim}")
        if batch.include_rewards and not cfg.include_rewards:
            raise ModelContractError("batch carries reward tokens but the model embeds none")

        kind = batch.token_kind.reshape(-1)
        n = kind.shape[0]

        state_idx = np.flatnonzero(kind == KIND_STATE)
        obs_sel = Tensor(batch.obs_feats.reshape(n, cfg.obs_dim)[state_idx])
        hidden = gelu(linear(obs_sel, p["obs_mlp.w1"], p["obs_mlp.b1"]))
        obs_rows = linear(hidden, p["obs_mlp.w2"], p["obs_mlp.b2"])
        x = scatter_rows(obs_rows, state_idx, n)

        act_mask = ((kind == KIND_ACTION) | (kind == KIND_PAD)).astype(np.float32)[:, None]
        x = x + embedding(p["act_emb"], batch.action_ids.reshape(-1)) * act_mask

        if cfg.include_rewards:
            rew_mask = (kind == KIND_REWARD).astype(np.float32)[:, None]
            rew = Tensor(batch.rewards.reshape(n, 1))
            x = x + linear(rew, p["reward_emb.w"], p["reward_emb.b"]) * rew_mask

        x = x.reshape((b, t, cfg.d_model))
        x = x + take_rows(p["pos_emb"], np.arange(t))
        return dropout(x, cfg.dropout, dropout_rng, training)

    def forward(self, batch: TokenizedBatch, training: bool = False,
                dropout_rng: np.random.Generator | None = None) -> Tensor:
        """Action logits, shape (batch, positions, 8); read them at state positions."""
        cfg = self.cfg
        p = self.params
        if training and cfg.dropout > 0 and dropout_rng is None:
            raise ModelContractError("training forward needs a dropout rng")
        x = self.embed_tokens(batch, training, dropout_rng)
        for i in range(cfg.num_layers):
            h = layer_norm(x, p[f"block{i}.ln1.g"], p[f"block{i}.ln1.b"])
            h = causal_self_attention(h, self._block_weights(i), cfg.num_heads)
            x = x + dropout(h, cfg.dropout, dropout_rng, training)
            h = layer_norm(x, p[f"block{i}.ln2.g"], p[f"block{i}.ln2.b"])
            h = gelu(linear(h, p[f"block{i}.mlp.w1"], p[f"block{i}.mlp.b1"]))
            h = linear(h, p[f"block{i}.mlp.w2"], p[f"block{i}.mlp.b2"])
            x = x + dropout(h, cfg.dropout, dropout_rng, training)
        x = layer_norm(x, p["ln_f.g"], p["ln_f.b"])
        return linear(x, p["head.w"], p["head.b"])

    def loss(self, batch: TokenizedBatch, training: bool = False,
             dropout_rng: np.random.Generator | None = None) -> Tensor:
        """Mean masked cross-entropy over all action predictions in the batch."""
        logits = self.forward(batch, training, dropout_rng)
        b, t, v = logits.shape
        return cross_entropy_masked(
            logits.reshape((b * t, v)),
            batch.target_ids.reshape(-1),
            batch.loss_mask.reshape(-1),
        )


def init_model(cfg: ModelConfig, seed: int) -> PolicyModel:
    """Fresh parameters: truncated-normal projections, zero biases, unit norms."""
    rng = np.random.default_rng(np.random.SeedSequence([0x6D6F64656C, seed]))
    d, h = cfg.d_model, cfg.obs_embed_dim

    def w(*shape):
        return Tensor(trunc_normal(rng, shape, std=0.02), requires_grad=True)

    def zeros(*shape):
        return Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True)

    def ones(*shape):
        return Tensor(np.ones(shape, dtype=np.float32), requires_grad=True)

    params: dict[str, Tensor] = {
        "obs_mlp.w1": w(cfg.obs_dim, h),
        "obs_mlp.b1": zeros(h),
        "obs_mlp.w2": w(h, d),
        "obs_mlp.b2": zeros(d),
        "act_emb": w(cfg.action_vocab, d),
        "pos_emb": w(cfg.context_len, d),
    }
    if cfg.include_rewards:
        params["reward_emb.w"] = w(1, d)
        params["reward_emb.b"] = zeros(d)
    for i in range(cfg.num_layers):
        params[f"block{i}.ln1.g"] = ones(d)
        params[f"block{i}.ln1.b"] = zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            params[f"block{i}.attn.{name}"] = w(d, d)
        for name in ("bq", "bk", "bv", "bo"):
            params[f"block{i}.attn.{name}"] = zeros(d)
        params[f"block{i}.ln2.g"] = ones(d)
        params[f"block{i}.ln2.b"] = zeros(d)
        params[f"block{i}.mlp.w1"] = w(d, 4 * d)
        params[f"block{i}.mlp.b1"] = zeros(4 * d)
        params[f"block{i}.mlp.w2"] = w(4 * d, d)
        params[f"block{i}.mlp.b2"] = zeros(d)
    params["ln_f.g"] = ones(d)
    params["ln_f.b"] = zeros(d)
    params["head.w"] = w(d, 8)
    params["head.b"] = zeros(8)
    return PolicyModel(cfg, params)
