"""Autoregressive action selection against a demo-conditioned context.

The rollout context is [demo trajectories] + [current episode so far] +
[current state]. When that no longer fits the model's context window, the
oldest whole demo trajectory is dropped; the current episode never is.
"""

from __future__ import annotations

import numpy as np

from ..dataset import (
    KIND_ACTION,
    KIND_REWARD,
    KIND_STATE,
    PAD_ACTION,
    TokenizedBatch,
    tokens_per_step,
)
from ..gridworld import Observation, encode_observation
from ..numerics import no_grad
from .network import PolicyModel


class RolloutError(RuntimeError):
    """The current episode alone no longer fits the context window."""


_Token = tuple[int, np.ndarray | None, int, float]  # (kind, obs_vec, action_id, reward)


def _demo_tokens(record, include_rewards: bool) -> list[_Token]:
    toks: list[_Token] = []
    for st in record.steps:
        toks.append((KIND_STATE, encode_observation(st.obs), PAD_ACTION, 0.0))
        toks.append((KIND_ACTION, None, st.action, 0.0))
        if include_rewards:
            toks.append((KIND_REWARD, None, PAD_ACTION, st.reward))
    return toks


def _batch_from_tokens(tokens: list[_Token], obs_dim: int, include_rewards: bool) -> TokenizedBatch:
    t = len(tokens)
    kind = np.zeros(t, dtype=np.uint8)
    obs = np.zeros((t, obs_dim), dtype=np.float32)
    actions = np.full(t, PAD_ACTION, dtype=np.int32)
    rewards = np.zeros(t, dtype=np.float32)
    for i, (k, o, a, r) in enumerate(tokens):
        kind[i] = k
        if o is not None:
            obs[i] = o
        actions[i] = a
        rewards[i] = r
    zeros_i = np.zeros(t, dtype=np.int32)
    return TokenizedBatch(
        token_kind=kind[None],
        obs_feats=obs[None],
        action_ids=actions[None],
        rewards=rewards[None],
        target_ids=zeros_i[None],
        loss_mask=np.zeros((1, t), dtype=bool),
        traj_index=np.zeros((1, t), dtype=np.int16),
        include_rewards=include_rewards,
    )


class EpisodeContext:
    """Incremental context for one evaluation episode."""

    def __init__(self, model: PolicyModel, demos):
        self.model = model
        self.include_rewards = model.cfg.include_rewards
        self.context_len = model.cfg.context_len
        self.demos = [_demo_tokens(d, self.include_rewards) for d in demos]
        self.episode: list[_Token] = []
        self.demos_dropped = 0

    def observe(self, obs: Observation) -> None:
        self.episode.append((KIND_STATE, encode_observation(obs), PAD_ACTION, 0.0))

    def record_action(self, action: int) -> None:
        self.episode.append((KIND_ACTION, None, int(action), 0.0))

    def record_reward(self, reward: float) -> None:
        if self.include_rewards:
            self.episode.append((KIND_REWARD, None, PAD_ACTION, float(reward)))

    def _fitted_tokens(self) -> list[_Token]:
        demo_total = sum(len(d) for d in self.demos)
        while self.demos and demo_total + len(self.episode) > self.context_len:
            demo_total -= len(self.demos[0])
            self.demos.pop(0)
            self.demos_dropped += 1
        if demo_total + len(self.episode) > self.context_len:
            raise RolloutError(
                f"current episode needs {len(self.episode)} tokens alone; context is {self.context_len}"
            )
        out: list[_Token] = []
        for d in self.demos:
            out.extend(d)
        out.extend(self.episode)
        return out

    def action_logits(self) -> np.ndarray:
        """Logits at the final (state) position for the observation just fed."""
        tokens = self._fitted_tokens()
        if not tokens or tokens[-1][0] != KIND_STATE:
            raise RolloutError("action_logits() must follow observe()")
        batch = _batch_from_tokens(tokens, self.model.cfg.obs_dim, self.include_rewards)
        with no_grad():
            logits = self.model.forward(batch, training=False)
        return logits.data[0, -1]


def select_action(logits: np.ndarray, mode: str = "greedy",
                  temperature: float = 1.0, rng: np.random.Generator | None = None) -> int:
    if mode == "greedy":
        return int(np.argmax(logits))
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode needs an rng")
        if temperature <= 0:
            raise ValueError("temperature must be > 0")
        z = logits / temperature
        z = z - z.max()
        p = np.exp(z)
        p /= p.sum()
        return int(rng.choice(len(p), p=p))
    raise ValueError(f"unknown decoding mode {mode!r}")


def predict_action(
    model: PolicyModel,
    demos,
    current_obs: Observation,
    episode_history=(),
    mode: str = "greedy",
    temperature: float = 1.0,
    rng: np.random.Generator | None = None,
) -> int:
    """One-shot form of the rollout step: build context, read final logits, decode.

    ``episode_history`` is the current episode's (obs, action[, reward])
    steps so far; ``current_obs`` is the state to act on.
    """
    ctx = EpisodeContext(model, demos)
    for item in episode_history:
        obs, action = item[0], item[1]
        ctx.observe(obs)
        ctx.record_action(action)
        if model.cfg.include_rewards:
            ctx.record_reward(item[2])
    ctx.observe(current_obs)
    return select_action(ctx.action_logits(), mode, temperature, rng)


def episode_token_budget(max_steps: int, include_rewards: bool) -> int:
    """Worst-case current-episode token count (trailing state included)."""
    return max_steps * tokens_per_step(include_rewards) + 1
