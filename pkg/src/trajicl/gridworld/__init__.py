"""Procedurally generated gridworld task families with sticky-action dynamics."""

from .core import (
    ACTION_DELTAS,
    ACTION_NAMES,
    CUE_A,
    CUE_B,
    DOOR,
    FLOOR,
    GOAL,
    HAZARD_CELLS,
    LAVA,
    NUM_ACTIONS,
    NUM_CELL_CODES,
    TRAP,
    WALL,
    DynamicsConfig,
    EnvState,
    GenerationError,
    GeneratorKind,
    GridworldError,
    Level,
    Observation,
    ProtocolError,
    TaskRole,
    TaskSpec,
    derive_rng,
    derive_seed,
    stable_task_hash,
)
from .env import (
    ContractViolationError,
    encode_observation,
    encoded_observation_dim,
    observe,
    render_ascii,
    reset,
    step,
)
from .generators import generate_level, is_solvable, reachable_cells
from .registry import default_task_registry, find_task, load_task_registry, save_task_registry
