"""Environment dynamics: reset/step, observations, and ASCII rendering.

step() is pure: it returns a fresh EnvState. Stickiness draws are a
deterministic function of (episode_seed, step_count), so a trajectory is
fully determined by (level, episode_seed, action sequence).
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .core import (
    ACTION_DELTAS,
    CELL_CHARS,
    CUE_A,
    CUE_B,
    FLOOR,
    GOAL,
    LAVA,
    NUM_ACTIONS,
    NUM_CELL_CODES,
    TRAP,
    WALL,
    DynamicsConfig,
    EnvState,
    GridworldError,
    Level,
    Observation,
    ProtocolError,
)

_STICKY_SALT = 0x737469636B794143


class ContractViolationError(GridworldError):
    """step() called on a finished episode."""


_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """Stateless 64-bit mix; platform-stable uniform bits for sticky draws."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def observe(state: EnvState) -> Observation:
    level, dyn = state.level, state.dynamics
    c = dyn.crop_size
    half = c // 2
    crop = np.full((c, c), WALL, dtype=np.uint8)
    r0, c0 = state.pos[0] - half, state.pos[1] - half
    src_r0, src_c0 = max(r0, 0), max(c0, 0)
    src_r1, src_c1 = min(r0 + c, level.height), min(c0 + c, level.width)
    if src_r0 < src_r1 and src_c0 < src_c1:
        crop[src_r0 - r0 : src_r1 - r0, src_c0 - c0 : src_c1 - c0] = level.grid[src_r0:src_r1, src_c0:src_c1]
    crop.setflags(write=False)
    cell = level.cell(state.pos)
    cue = 1 if cell == CUE_A else 2 if cell == CUE_B else 0
    x = state.pos[1] / (level.width - 1)
    y = state.pos[0] / (level.height - 1)
    return Observation(
        crop=crop,
        agent_xy=(x, y),
        steps_remaining=1.0 - state.step_count / dyn.max_steps,
        cue=cue,
    )


def reset(level: Level, dyn: DynamicsConfig, episode_seed: int) -> tuple[EnvState, Observation]:
    cell = level.cell(level.start)
    cues = (1,) if cell == CUE_A else (2,) if cell == CUE_B else ()
    state = EnvState(
        level=level,
        dynamics=dyn,
        episode_seed=int(episode_seed),
        pos=level.start,
        step_count=0,
        prev_action=None,
        done=False,
        cues_seen=cues,
    )
    return state, observe(state)


def _sticky_draw(state: EnvState) -> float:
    mixed = _splitmix64((state.episode_seed & _MASK64) ^ _STICKY_SALT)
    return _splitmix64(mixed ^ state.step_count) / 2**64


def step(state: EnvState, action: int) -> tuple[EnvState, Observation, float, bool]:
    """Advance one step. Returns (new_state, observation, reward, done)."""
    if state.done:
        raise ContractViolationError("step() called on a finished episode")
    if not isinstance(action, (int, np.integer)) or not 0 <= int(action) < NUM_ACTIONS:
        raise ProtocolError(f"action must be an integer in [0, {NUM_ACTIONS}), got {action!r}")
    action = int(action)
    dyn = state.dynamics

    executed = action
    if dyn.sticky_prob > 0.0 and state.prev_action is not None:
        if _sticky_draw(state) < dyn.sticky_prob:
            executed = state.prev_action

    dr, dc = ACTION_DELTAS[executed]
    target = (state.pos[0] + dr, state.pos[1] + dc)
    cell = state.level.cell(target)

    pos = state.pos
    reward = 0.0
    done = False
    if cell == WALL:
        reward = dyn.reward_wall_bump
    elif cell == LAVA:
        if dyn.lava_lethal:
            pos, reward, done = target, 0.0, True
        else:
            reward = dyn.reward_wall_bump
    elif cell == GOAL:
        pos, reward, done = target, dyn.reward_goal, True
    elif cell == TRAP:
        pos, reward, done = target, dyn.reward_trap, True
    else:
        pos = target

    step_count = state.step_count + 1
    if step_count >= dyn.max_steps:
        done = True

    new_cell = state.level.cell(pos)
    cues = state.cues_seen
    if new_cell == CUE_A and pos != state.pos:
        cues = cues + (1,)
    elif new_cell == CUE_B and pos != state.pos:
        cues = cues + (2,)

    new_state = replace(
        state,
        pos=pos,
        step_count=step_count,
        prev_action=executed,
        done=done,
        cues_seen=cues,
    )
    return new_state, observe(new_state), reward, done


def encoded_observation_dim(crop_size: int) -> int:
    """One-hot crop channels plus (x, y, steps-remaining, cue)."""
    return crop_size * crop_size * NUM_CELL_CODES + 4


def encode_observation(obs: Observation) -> np.ndarray:
    """Flatten an Observation into a fixed-size float32 feature vector."""
    flat = obs.crop.ravel()
    onehot = np.zeros((flat.size, NUM_CELL_CODES), dtype=np.float32)
    onehot[np.arange(flat.size), flat] = 1.0
    scalars = np.array(
        [obs.agent_xy[0], obs.agent_xy[1], obs.steps_remaining, obs.cue / 2.0],
        dtype=np.float32,
    )
    return np.concatenate([onehot.ravel(), scalars])


def render_ascii(level: Level, agent_pos: tuple[int, int] | None = None) -> str:
    rows = []
    for r in range(level.height):
        row = []
        for c in range(level.width):
            if agent_pos == (r, c):
                row.append("@")
            elif (r, c) == level.start and agent_pos is None:
                row.append("S")
            else:
                row.append(CELL_CHARS[int(level.grid[r, c])])
        rows.append("".join(row))
    return "\n".join(rows)
