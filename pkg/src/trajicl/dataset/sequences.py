"""Multi-trajectory training sequence construction.

The central dial is trajectory burstiness p_b: the probability that a
sequence contains at least two trajectories from the same level, one of
them pinned to the final (query) slot. Non-bursty draws use pairwise
distinct levels so p_b stays a sharp dial. Shuffling permutes whole
trajectories only; transitions inside a trajectory keep their order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .records import TrajectoryRecord


class SequenceConstructionError(ValueError):
    """The pool cannot support the requested draw."""


@dataclass(frozen=True)
class SequenceSample:
    """An ordered pick of trajectories; the last one is the query."""

    records: tuple[TrajectoryRecord, ...]
    is_bursty: bool
    query_level: tuple[str, int]

    @property
    def trajectory_ids(self) -> tuple[str, ...]:
        return tuple(r.traj_id for r in self.records)


@dataclass(frozen=True)
class SequenceConfig:
    """Sequence-builder settings consumed by the training loop."""

    mode: str = "multi"          # "multi" or "single"
    num_trajectories: int = 3    # E, multi mode only
    burstiness: float = 1.0      # p_b
    include_rewards: bool = False

    def __post_init__(self):
        if self.mode not in ("multi", "single"):
            raise ValueError(f"mode must be 'multi' or 'single', got {self.mode!r}")
        if not 0.0 <= self.burstiness <= 1.0:
            raise ValueError(f"burstiness must be in [0, 1], got {self.burstiness}")
        if self.mode == "multi" and self.num_trajectories < 2:
            raise ValueError("multi mode needs num_trajectories >= 2")


def _check_single_task(pool: dict[int, list[TrajectoryRecord]]) -> str:
    tasks = {r.task_id for recs in pool.values() for r in recs}
    if len(tasks) != 1:
        raise SequenceConstructionError(f"pool must hold exactly one task, got {sorted(tasks)}")
    return next(iter(tasks))


def _pick(rng: np.random.Generator, items: list):
    return items[int(rng.integers(len(items)))]


def build_bursty_sequence(
    pool: dict[int, list[TrajectoryRecord]],
    num_trajectories: int,
    burstiness: float,
    rng: np.random.Generator,
) -> SequenceSample:
    """Draw an E-trajectory sequence with burstiness probability p_b.

    Bursty draw: a level with >=2 trajectories contributes a context copy
    and the query; the remaining slots come from distinct other levels.
    Non-bursty draw: E trajectories from E distinct levels. Either way the
    non-query slots are shuffled.
    """
    e = num_trajectories
    if e < 2:
        raise SequenceConstructionError("multi-trajectory sequences need E >= 2")
    if not 0.0 <= burstiness <= 1.0:
        raise SequenceConstructionError(f"burstiness must be in [0, 1], got {burstiness}")
    task_id = _check_single_task(pool)
    levels = sorted(pool)
    total = sum(len(v) for v in pool.values())
    if total < e or len(levels) < 2:
        raise SequenceConstructionError(
            f"pool too small: {total} trajectories across {len(levels)} levels for E={e}"
        )

    bursty = bool(rng.random() < burstiness)
    if bursty:
        eligible = [lv for lv in levels if len(pool[lv]) >= 2]
        if not eligible or len(levels) < e - 1:
            raise SequenceConstructionError(
                f"bursty draw impossible: {len(eligible)} levels with >=2 trajectories, "
                f"{len(levels)} levels total, E={e}"
            )
        query_level = _pick(rng, eligible)
        i, j = rng.choice(len(pool[query_level]), size=2, replace=False)
        context = [pool[query_level][int(i)]]
        query = pool[query_level][int(j)]
        others = [lv for lv in levels if lv != query_level]
        for k in rng.permutation(len(others))[: e - 2]:
            context.append(_pick(rng, pool[others[int(k)]]))
    else:
        if len(levels) < e:
            raise SequenceConstructionError(
                f"non-bursty draw impossible: {len(levels)} levels for E={e} distinct slots"
            )
        chosen = [levels[int(k)] for k in rng.permutation(len(levels))[:e]]
        picks = [_pick(rng, pool[lv]) for lv in chosen]
        query = picks[-1]
        query_level = query.level_seed
        context = picks[:-1]

    order = rng.permutation(len(context))
    records = tuple(context[int(k)] for k in order) + (query,)
    return SequenceSample(records=records, is_bursty=bursty, query_level=(task_id, int(query_level)))


def build_single_trajectory_sequence(
    pool: dict[int, list[TrajectoryRecord]],
    rng: np.random.Generator,
) -> SequenceSample:
    """One uniformly drawn trajectory (the degenerate E=1 sequence)."""
    task_id = _check_single_task(pool) if pool else None
    flat = [r for lv in sorted(pool) for r in pool[lv]]
    if not flat:
        raise SequenceConstructionError("empty pool")
    query = _pick(rng, flat)
    return SequenceSample(records=(query,), is_bursty=False, query_level=(task_id, query.level_seed))


def build_sequence(
    pool: dict[int, list[TrajectoryRecord]],
    cfg: SequenceConfig,
    rng: np.random.Generator,
) -> SequenceSample:
    if cfg.mode == "single":
        return build_single_trajectory_sequence(pool, rng)
    return build_bursty_sequence(pool, cfg.num_trajectories, cfg.burstiness, rng)
