"""Evaluation policies: the transformer, the hashmap baseline, the expert
oracle, and a uniform-random floor.

All policies expose begin_episode / act / after_step. The expert is the
only one allowed to read the environment state; the others act on
observations.
"""

from __future__ import annotations

import numpy as np

from ..expert import bfs_plan
from ..gridworld import NUM_ACTIONS, EnvState, Observation, derive_rng
from ..model import EpisodeContext, PolicyModel, select_action

_HASHMAP_SALT = 0x686D6170
_SAMPLE_SALT = 0x73616D70


class TransformerPolicy:
    """Frozen policy model conditioned on demo trajectories."""

    def __init__(self, model: PolicyModel, mode: str = "greedy", temperature: float = 1.0):
        self.model = model
        self.mode = mode
        self.temperature = temperature
        self.ctx: EpisodeContext | None = None
        self._rng: np.random.Generator | None = None

    def begin_episode(self, level, demos, episode_seed: int, seed_index: int = 0) -> None:
        self.ctx = EpisodeContext(self.model, demos)
        self._rng = derive_rng(_SAMPLE_SALT, episode_seed, seed_index)

    def act(self, state: EnvState, obs: Observation) -> int:
        self.ctx.observe(obs)
        action = select_action(self.ctx.action_logits(), self.mode, self.temperature, self._rng)
        self.ctx.record_action(action)
        return action

    def after_step(self, obs: Observation, action: int, reward: float) -> None:
        self.ctx.record_reward(reward)


class HashmapPolicy:
    """Exact-match state lookup over the context demos.

    On a hit, copies the demonstrated action (the most recent demo wins on
    conflicts); on a miss, acts uniformly at random. An oracle under
    deterministic dynamics, brittle under stochastic ones.
    """

    def __init__(self):
        self.table: dict[bytes, int] = {}
        self._rng: np.random.Generator | None = None
        self.hits = 0
        self.misses = 0

    def begin_episode(self, level, demos, episode_seed: int, seed_index: int = 0) -> None:
        self.table = {}
        for demo in demos:  # later demos overwrite earlier ones
            for st in demo.steps:
                self.table[st.obs.key()] = st.action
        self._rng = derive_rng(_HASHMAP_SALT, episode_seed, seed_index)

    def act(self, state: EnvState, obs: Observation) -> int:
        action = self.table.get(obs.key())
        if action is None:
            self.misses += 1
            return int(self._rng.integers(NUM_ACTIONS))
        self.hits += 1
        return int(action)

    def after_step(self, obs: Observation, action: int, reward: float) -> None:
        pass


def hashmap_action(demos, obs: Observation, rng: np.random.Generator) -> int:
    """One-shot form of the hashmap lookup (miss falls back to uniform)."""
    table: dict[bytes, int] = {}
    for demo in demos:
        for st in demo.steps:
            table[st.obs.key()] = st.action
    hit = table.get(obs.key())
    return int(rng.integers(NUM_ACTIONS)) if hit is None else int(hit)


class ExpertPolicy:
    """The shortest-path oracle, used as the upper reference bound."""

    def begin_episode(self, level, demos, episode_seed: int, seed_index: int = 0) -> None:
        self.level = level

    def act(self, state: EnvState, obs: Observation) -> int:
        return bfs_plan(self.level, state.pos)

    def after_step(self, obs: Observation, action: int, reward: float) -> None:
        pass


class RandomPolicy:
    def begin_episode(self, level, demos, episode_seed: int, seed_index: int = 0) -> None:
        self._rng = derive_rng(0x726E64, episode_seed, seed_index)

    def act(self, state: EnvState, obs: Observation) -> int:
        return int(self._rng.integers(NUM_ACTIONS))

    def after_step(self, obs: Observation, action: int, reward: float) -> None:
        pass
