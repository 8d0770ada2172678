"""Trajectory storage, bursty sequence construction, and tokenization."""

from .records import TrajectoryRecord, group_by_level, records_from_demonstrations
from .sequences import (
    SequenceConfig,
    SequenceConstructionError,
    SequenceSample,
    build_bursty_sequence,
    build_sequence,
    build_single_trajectory_sequence,
)
from .store import DatasetIOError, dataset_stats, format_stats, read_dataset, write_dataset
from .tokenizer import (
    ACTION_VOCAB,
    KIND_ACTION,
    KIND_PAD,
    KIND_REWARD,
    KIND_STATE,
    PAD_ACTION,
    TokenizeError,
    TokenizedBatch,
    detokenize,
    stack_tokenized,
    tokenize,
    tokens_per_step,
    trajectory_token_count,
)
