"""Trajectory records and level-keyed pools."""

from __future__ import annotations

from dataclasses import dataclass

from ..expert import Demonstration, DemoStep


@dataclass(frozen=True)
class TrajectoryRecord:
    """A stored expert episode with a stable identity."""

    traj_id: str
    task_id: str
    level_seed: int
    episode_seed: int
    steps: tuple[DemoStep, ...]
    episodic_return: float
    success: bool

    @classmethod
    def from_demonstration(cls, demo: Demonstration) -> "TrajectoryRecord":
        return cls(
            traj_id=f"{demo.task_id}/{demo.level_seed}/{demo.episode_seed}",
            task_id=demo.task_id,
            level_seed=demo.level_seed,
            episode_seed=demo.episode_seed,
            steps=demo.steps,
            episodic_return=demo.episodic_return,
            success=demo.success,
        )


def records_from_demonstrations(demos) -> list[TrajectoryRecord]:
    return [TrajectoryRecord.from_demonstration(d) for d in demos]


def group_by_level(records) -> dict[int, list[TrajectoryRecord]]:
    """Pool records by level seed (insertion order preserved)."""
    pool: dict[int, list[TrajectoryRecord]] = {}
    for r in records:
        pool.setdefault(r.level_seed, []).append(r)
    return pool
