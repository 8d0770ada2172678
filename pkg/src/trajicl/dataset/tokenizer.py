"""Token layout for transformer input.

Each timestep of a trajectory becomes (state, action) tokens, or
(state, action, reward) when reward tokens are enabled. Trajectories are
stacked contiguously in sample order, then the tail is padded with the
pad action id. Loss is taken at state positions of real content only.
When a sample is longer than the context, whole leading trajectories are
dropped; the query trajectory is never dropped or split.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..gridworld import encode_observation
from .sequences import SequenceSample

PAD_ACTION = 31
ACTION_VOCAB = 32

KIND_PAD, KIND_STATE, KIND_ACTION, KIND_REWARD = 0, 1, 2, 3


class TokenizeError(ValueError):
    pass


@dataclass
class TokenizedBatch:
    """Fixed-length token arrays, batch-first.

    token_kind : (B, L) uint8   0 pad / 1 state / 2 action / 3 reward
    obs_feats  : (B, L, D) float32, zero except at state positions
    action_ids : (B, L) int32, PAD_ACTION except at action positions
    rewards    : (B, L) float32, zero except at reward positions
    target_ids : (B, L) int32, the step's action at state positions
    loss_mask  : (B, L) bool, true exactly at content state positions
    traj_index : (B, L) int16, trajectory slot per position, -1 for pad
    """

    token_kind: np.ndarray
    obs_feats: np.ndarray
    action_ids: np.ndarray
    rewards: np.ndarray
    target_ids: np.ndarray
    loss_mask: np.ndarray
    traj_index: np.ndarray
    include_rewards: bool

    @property
    def batch_size(self) -> int:
        return self.token_kind.shape[0]

    @property
    def length(self) -> int:
        return self.token_kind.shape[1]

    @property
    def obs_dim(self) -> int:
        return self.obs_feats.shape[-1]


def tokens_per_step(include_rewards: bool) -> int:
    return 3 if include_rewards else 2


def trajectory_token_count(n_steps: int, include_rewards: bool) -> int:
    return n_steps * tokens_per_step(include_rewards)


def tokenize(sample: SequenceSample, include_rewards: bool, context_len: int) -> TokenizedBatch:
    """Lay one SequenceSample out as a (1, context_len) token batch."""
    per = tokens_per_step(include_rewards)
    counts = [trajectory_token_count(len(r.steps), include_rewards) for r in sample.records]
    if counts and counts[-1] > context_len:
        raise TokenizeError(
            f"query trajectory needs {counts[-1]} tokens but context is {context_len}"
        )
    records = list(sample.records)
    while sum(trajectory_token_count(len(r.steps), include_rewards) for r in records) > context_len:
        records.pop(0)  # drop the oldest whole trajectory, never the query

    obs_dim = encode_observation(records[0].steps[0].obs).shape[0]
    kind = np.zeros(context_len, dtype=np.uint8)
    obs = np.zeros((context_len, obs_dim), dtype=np.float32)
    actions = np.full(context_len, PAD_ACTION, dtype=np.int32)
    rewards = np.zeros(context_len, dtype=np.float32)
    targets = np.zeros(context_len, dtype=np.int32)
    mask = np.zeros(context_len, dtype=bool)
    traj = np.full(context_len, -1, dtype=np.int16)

    # Trajectory slot indices refer to the original sample positions so the
    # query keeps its slot number even after leading drops.
    first_kept = len(sample.records) - len(records)
    pos = 0
    for ti, rec in enumerate(records):
        for st in rec.steps:
            kind[pos] = KIND_STATE
            obs[pos] = encode_observation(st.obs)
            targets[pos] = st.action
            mask[pos] = True
            traj[pos] = first_kept + ti
            pos += 1
            kind[pos] = KIND_ACTION
            actions[pos] = st.action
            traj[pos] = first_kept + ti
            pos += 1
            if include_rewards:
                kind[pos] = KIND_REWARD
                rewards[pos] = st.reward
                traj[pos] = first_kept + ti
                pos += 1
    assert pos == sum(trajectory_token_count(len(r.steps), include_rewards) for r in records)

    return TokenizedBatch(
        token_kind=kind[None],
        obs_feats=obs[None],
        action_ids=actions[None],
        rewards=rewards[None],
        target_ids=targets[None],
        loss_mask=mask[None],
        traj_index=traj[None],
        include_rewards=include_rewards,
    )


def stack_tokenized(batches: list[TokenizedBatch]) -> TokenizedBatch:
    """Concatenate equal-length token batches along the batch axis."""
    if not batches:
        raise TokenizeError("cannot stack zero batches")
    lengths = {b.length for b in batches}
    flags = {b.include_rewards for b in batches}
    if len(lengths) != 1 or len(flags) != 1:
        raise TokenizeError(f"inconsistent batches: lengths {lengths}, reward flags {flags}")
    return TokenizedBatch(
        token_kind=np.concatenate([b.token_kind for b in batches]),
        obs_feats=np.concatenate([b.obs_feats for b in batches]),
        action_ids=np.concatenate([b.action_ids for b in batches]),
        rewards=np.concatenate([b.rewards for b in batches]),
        target_ids=np.concatenate([b.target_ids for b in batches]),
        loss_mask=np.concatenate([b.loss_mask for b in batches]),
        traj_index=np.concatenate([b.traj_index for b in batches]),
        include_rewards=batches[0].include_rewards,
    )


def detokenize(batch: TokenizedBatch):
    """Recover the (obs vector, action, reward) stream per trajectory.

    Returns one list per batch row; each trajectory is a list of
    (obs_feats, action, reward-or-None) tuples in original step order.
    """
    out = []
    for b in range(batch.batch_size):
        trajs: dict[int, list] = {}
        pos = 0
        kind = batch.token_kind[b]
        while pos < batch.length and kind[pos] != KIND_PAD:
            ti = int(batch.traj_index[b, pos])
            if kind[pos] != KIND_STATE:
                raise TokenizeError(f"malformed layout: expected state token at {pos}")
            obs_vec = batch.obs_feats[b, pos].copy()
            action = int(batch.action_ids[b, pos + 1])
            reward = None
            nxt = pos + 2
            if batch.include_rewards:
                reward = float(batch.rewards[b, pos + 2])
                nxt = pos + 3
            trajs.setdefault(ti, []).append((obs_vec, action, reward))
            pos = nxt
        out.append([trajs[k] for k in sorted(trajs)])
    return out
