"""MDP-facing types for the procedural gridworld task family.

A task is a family of levels sharing layout rules and rewards; a level is
one concrete grid determined by (task_id, seed). Dynamics (stickiness,
step budget, rewards) live in DynamicsConfig so the same level can be run
deterministically or with sticky actions.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

# Grid cell codes (uint8 in Level.grid). Order is the one-hot channel order.
FLOOR, WALL, LAVA, GOAL, TRAP, DOOR, CUE_A, CUE_B = range(8)
NUM_CELL_CODES = 8

CELL_CHARS = {FLOOR: ".", WALL: "#", LAVA: "~", GOAL: "G", TRAP: "X", DOOR: "+", CUE_A: "a", CUE_B: "b"}

# Eight compass directions, clockwise from north, as (dr, dc).
ACTION_DELTAS = ((-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))
ACTION_NAMES = ("N", "NE", "E", "SE", "S", "SW", "W", "NW")
NUM_ACTIONS = 8

HAZARD_CELLS = frozenset({WALL, LAVA, TRAP})
WALKABLE_CELLS = frozenset({FLOOR, DOOR, CUE_A, CUE_B, GOAL, TRAP})


class GridworldError(Exception):
    pass


class GenerationError(GridworldError):
    """The generator could not produce a solvable layout."""


class ProtocolError(GridworldError):
    """Caller violated the environment step contract."""


class GeneratorKind(str, enum.Enum):
    MULTI_ROOM = "MultiRoom"
    MULTI_ROOM_LAVA = "MultiRoomLava"
    SIMPLE_CROSSING = "SimpleCrossing"
    LAVA_CROSSING = "LavaCrossing"
    MAZE_WALK = "MazeWalk"
    LABYRINTH = "Labyrinth"
    MEMENTO_FORK = "MementoFork"


class TaskRole(str, enum.Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True)
class TaskSpec:
    """One procedurally generated task family."""

    task_id: str
    kind: GeneratorKind
    width: int = 11
    height: int = 11
    rooms: int = 2           # room count (MultiRoom*) or crossing count (*Crossing)
    hazard_density: float = 0.0
    fork_arity: int = 2      # MementoFork only
    cue: bool = True         # MementoFork: show cue cells
    role: TaskRole = TaskRole.TRAIN

    def __post_init__(self):
        if self.width < 5 or self.height < 5:
            raise ValueError(f"{self.task_id}: grid must be at least 5x5, got {self.width}x{self.height}")
        if self.kind is GeneratorKind.MEMENTO_FORK and self.fork_arity not in (2, 4):
            raise ValueError(f"{self.task_id}: Memento fork arity must be 2 or 4, got {self.fork_arity}")
        if not 0.0 <= self.hazard_density <= 1.0:
            raise ValueError(f"{self.task_id}: hazard_density must be in [0, 1]")


@dataclass(frozen=True)
class Level:
    """One solvable instance of a task: bit-identical for equal (task_id, seed)."""

    task_id: str
    seed: int
    grid: np.ndarray          # (H, W) uint8 cell codes
    start: tuple[int, int]    # (row, col)
    goals: tuple[tuple[int, int], ...]

    @property
    def height(self) -> int:
        return int(self.grid.shape[0])

    @property
    def width(self) -> int:
        return int(self.grid.shape[1])

    def cell(self, pos: tuple[int, int]) -> int:
        r, c = pos
        if not (0 <= r < self.height and 0 <= c < self.width):
            return WALL
        return int(self.grid[r, c])


@dataclass(frozen=True)
class DynamicsConfig:
    """Transition/reward parameters shared by every level of a run."""

    sticky_prob: float = 0.0
    max_steps: int = 56
    reward_goal: float = 1.0
    reward_trap: float = -1.0
    reward_wall_bump: float = -0.01
    lava_lethal: bool = True
    discount: float = 1.0
    crop_size: int = 9

    def __post_init__(self):
        if not 0.0 <= self.sticky_prob <= 1.0:
            raise ValueError(f"sticky_prob must be in [0, 1], got {self.sticky_prob}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")
        if self.crop_size < 1 or self.crop_size % 2 == 0:
            raise ValueError("crop_size must be odd and >= 1")


@dataclass(frozen=True)
class EnvState:
    """A value type: step() returns a new state, never mutates."""

    level: Level
    dynamics: DynamicsConfig
    episode_seed: int
    pos: tuple[int, int]
    step_count: int = 0
    prev_action: int | None = None   # previously *executed* action
    done: bool = False
    cues_seen: tuple[int, ...] = ()


@dataclass(frozen=True)
class Observation:
    """The agent's view: local crop plus normalized scalars.

    Fixed size for all tasks. Out-of-bounds cells are coded as Wall. The
    cue code is nonzero only while the agent stands on a cue cell.
    """

    crop: np.ndarray          # (C, C) uint8, agent at the center
    agent_xy: tuple[float, float]
    steps_remaining: float
    cue: int                  # 0 none, 1 CueA, 2 CueB

    def key(self) -> bytes:
        """Bit-exact identity used by the hashmap baseline and accuracy."""
        scalars = np.array([*self.agent_xy, self.steps_remaining, self.cue], dtype=np.float32)
        return self.crop.tobytes() + scalars.tobytes()


def stable_task_hash(task_id: str) -> int:
    """Platform-stable integer for seeding (python hash() is randomized)."""
    return zlib.crc32(task_id.encode("utf-8"))


def derive_rng(*entropy: int) -> np.random.Generator:
    """Deterministic generator from a tuple of integers."""
    return np.random.default_rng(np.random.SeedSequence([int(e) & 0xFFFFFFFFFFFFFFFF for e in entropy]))


def derive_seed(*entropy: int) -> int:
    """Deterministic 63-bit integer seed from a tuple of integers."""
    ss = np.random.SeedSequence([int(e) & 0xFFFFFFFFFFFFFFFF for e in entropy])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
