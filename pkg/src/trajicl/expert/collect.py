"""Expert rollouts and success-filtered demonstration collection.

The expert is closed-loop: it replans from the realized state every step,
so sticky-action perturbations get corrected and stochastic-dynamics
datasets contain diverse successful trajectories rather than one script.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from ..gridworld import DynamicsConfig, Level, Observation, TaskSpec, derive_seed, generate_level, reset, step
from .planner import bfs_plan

log = logging.getLogger(__name__)

_EPISODE_SALT = 0x657069


@dataclass(frozen=True)
class DemoStep:
    obs: Observation
    action: int       # the action the expert chose (stickiness may override it)
    reward: float


@dataclass(frozen=True)
class Demonstration:
    """One expert episode, replayable bit-exactly from (level, episode_seed)."""

    task_id: str
    level_seed: int
    episode_seed: int
    steps: tuple[DemoStep, ...]
    episodic_return: float
    success: bool


def episode_seed_for(level_seed: int, episode_index: int) -> int:
    return derive_seed(_EPISODE_SALT, level_seed, episode_index)


def rollout_expert(level: Level, dyn: DynamicsConfig, episode_seed: int) -> Demonstration:
    """Run the replanning expert for one episode, recording every transition."""
    state, obs = reset(level, dyn, episode_seed)
    steps: list[DemoStep] = []
    total = 0.0
    final_reward = 0.0
    while not state.done:
        action = bfs_plan(level, state.pos)
        state, next_obs, reward, done = step(state, action)
        steps.append(DemoStep(obs=obs, action=action, reward=reward))
        obs = next_obs
        total += reward
        final_reward = reward
    return Demonstration(
        task_id=level.task_id,
        level_seed=level.seed,
        episode_seed=int(episode_seed),
        steps=tuple(steps),
        episodic_return=total,
        success=final_reward == dyn.reward_goal,
    )


def collect_demonstrations(
    task: TaskSpec,
    level_seeds: list[int],
    episodes_per_level: int,
    dyn: DynamicsConfig,
) -> list[Demonstration]:
    """Roll the expert on each level, keeping only successful episodes.

    A level whose first ``episodes_per_level`` episodes all fail gets extra
    attempts up to a 3x budget, then is skipped with a warning.
    """
    if episodes_per_level < 1:
        raise ValueError("episodes_per_level must be >= 1")
    kept: list[Demonstration] = []
    skipped = 0
    for level_seed in level_seeds:
        level = generate_level(task, level_seed)
        successes: list[Demonstration] = []
        attempts = 0
        budget = 3 * episodes_per_level
        # Roll the nominal episode count, keep the successes; a level with
        # none gets extra attempts until the first success or the budget.
        while attempts < budget and (attempts < episodes_per_level or not successes):
            demo = rollout_expert(level, dyn, episode_seed_for(level_seed, attempts))
            attempts += 1
            if demo.success:
                successes.append(demo)
        if not successes:
            skipped += 1
            log.warning(
                "task %s level %d: no successful expert episode in %d attempts; skipping level",
                task.task_id, level_seed, attempts,
            )
        kept.extend(successes)
    if skipped:
        log.warning("task %s: skipped %d/%d levels with zero successes", task.task_id, skipped, len(level_seeds))
    return kept


def replay_matches(demo: Demonstration, level: Level, dyn: DynamicsConfig) -> bool:
    """Feed the recorded actions back through the env and compare rewards/observations."""
    state, obs = reset(level, dyn, demo.episode_seed)
    for rec in demo.steps:
        if obs.key() != rec.obs.key():
            return False
        state, obs, reward, done = step(state, rec.action)
        if reward != rec.reward:
            return False
    return state.done
