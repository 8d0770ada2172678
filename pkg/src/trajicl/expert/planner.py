"""Shortest-path oracle policy.

Plans over the true level grid (it knows the real goal, including the
cue-correct Memento arm), avoiding walls, lava, and traps. Ties between
equally short moves break by fixed action-index order, so plans are
deterministic.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..gridworld import ACTION_DELTAS, GOAL, HAZARD_CELLS, Level


class PlanningError(RuntimeError):
    """No hazard-free path from the given position to a goal."""


_UNREACHED = np.iinfo(np.int32).max

_field_cache: dict[tuple[str, int], np.ndarray] = {}


def goal_distance_field(level: Level) -> np.ndarray:
    """(H, W) int32 array of 8-connected move counts to the nearest goal,
    walking only non-hazard cells. Unreachable cells hold a sentinel."""
    key = (level.task_id, level.seed)
    cached = _field_cache.get(key)
    if cached is not None:
        return cached
    h, w = level.grid.shape
    dist = np.full((h, w), _UNREACHED, dtype=np.int32)
    queue = deque()
    for g in level.goals:
        dist[g] = 0
        queue.append(g)
    grid = level.grid
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in ACTION_DELTAS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and dist[nr, nc] == _UNREACHED:
                if int(grid[nr, nc]) not in HAZARD_CELLS:
                    dist[nr, nc] = d
                    queue.append((nr, nc))
    dist.setflags(write=False)
    if len(_field_cache) > 8192:
        _field_cache.clear()
    _field_cache[key] = dist
    return dist


def clear_plan_cache() -> None:
    _field_cache.clear()


def path_length(level: Level, position: tuple[int, int] | None = None) -> int:
    """Shortest hazard-free move count from ``position`` (default start)."""
    pos = position if position is not None else level.start
    d = int(goal_distance_field(level)[pos])
    if d == _UNREACHED:
        raise PlanningError(f"no path to goal from {pos} on {level.task_id}/{level.seed}")
    return d


def bfs_plan(level: Level, position: tuple[int, int]) -> int:
    """First action of a shortest 8-connected hazard-avoiding path to the goal."""
    h, w = level.grid.shape
    r, c = position
    if not (0 <= r < h and 0 <= c < w) or int(level.grid[r, c]) in HAZARD_CELLS:
        raise PlanningError(f"position {position} is not a live cell on {level.task_id}/{level.seed}")
    dist = goal_distance_field(level)
    if dist[r, c] == _UNREACHED:
        raise PlanningError(f"no path to goal from {position} on {level.task_id}/{level.seed}")
    if dist[r, c] == 0:
        raise PlanningError(f"position {position} is already a goal cell")
    best_action, best_d = None, dist[r, c]
    for a, (dr, dc) in enumerate(ACTION_DELTAS):
        nr, nc = r + dr, c + dc
        if not (0 <= nr < h and 0 <= nc < w):
            continue
        if int(level.grid[nr, nc]) in HAZARD_CELLS:
            continue
        if dist[nr, nc] < best_d:
            best_d = dist[nr, nc]
            best_action = a
    if best_action is None:
        raise PlanningError(f"no improving move from {position} on {level.task_id}/{level.seed}")
    return best_action
