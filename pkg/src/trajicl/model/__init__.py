"""Causal-transformer policy: init, forward, training, checkpoints, rollout."""

from .checkpoint import (
    CheckpointError,
    load_checkpoint,
    read_manifest,
    restore_rng,
    rng_state,
    save_checkpoint,
)
from .config import PRESETS, ModelConfig, TrainConfig, count_params, model_preset
from .network import ModelContractError, PolicyModel, init_model
from .rollout import (
    EpisodeContext,
    RolloutError,
    episode_token_budget,
    predict_action,
    select_action,
)
from .training import TrainingAbortedError, TrainResult, train
