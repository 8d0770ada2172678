"""Procedural level generators.

Seven desk-scale task families sharing one contract: generate_level is
deterministic in (task_id, seed), and every returned level has a
hazard-free 8-connected path from start to the true goal. Layouts that
fail the reachability check are rejected and rebuilt from a derived
sub-seed, up to a bounded number of attempts.
"""

from __future__ import annotations

from collections import deque

import numpy as np

from .core import (
    ACTION_DELTAS,
    CUE_A,
    CUE_B,
    DOOR,
    FLOOR,
    GOAL,
    HAZARD_CELLS,
    LAVA,
    TRAP,
    WALL,
    GenerationError,
    GeneratorKind,
    Level,
    TaskSpec,
    derive_rng,
    stable_task_hash,
)

_MAX_ATTEMPTS = 16
_GEN_SALT = 0x67656E


class _RetryLayout(Exception):
    """Internal: this layout draw is geometrically invalid, try the next sub-seed."""


def reachable_cells(grid: np.ndarray, start: tuple[int, int]) -> set[tuple[int, int]]:
    """8-connected flood fill from start over non-hazard cells."""
    h, w = grid.shape
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        for dr, dc in ACTION_DELTAS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and (nr, nc) not in seen:
                if int(grid[nr, nc]) not in HAZARD_CELLS:
                    seen.add((nr, nc))
                    queue.append((nr, nc))
    return seen


def is_solvable(grid: np.ndarray, start: tuple[int, int], goals) -> bool:
    if int(grid[start]) in HAZARD_CELLS:
        return False
    reach = reachable_cells(grid, start)
    return any(g in reach for g in goals)


def generate_level(spec: TaskSpec, seed: int) -> Level:
    """Build a solvable level, deterministic in (spec.task_id, seed)."""
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    builder = _BUILDERS[spec.kind]
    for attempt in range(_MAX_ATTEMPTS):
        rng = derive_rng(_GEN_SALT, stable_task_hash(spec.task_id), seed, attempt)
        try:
            grid, start, goals = builder(spec, rng)
        except _RetryLayout:
            continue
        if is_solvable(grid, start, goals):
            grid.setflags(write=False)
            return Level(task_id=spec.task_id, seed=int(seed), grid=grid, start=start, goals=tuple(goals))
    raise GenerationError(
        f"task {spec.task_id!r}: no solvable layout for seed {seed} after {_MAX_ATTEMPTS} attempts"
    )


def _empty(spec: TaskSpec) -> np.ndarray:
    grid = np.full((spec.height, spec.width), FLOOR, dtype=np.uint8)
    grid[0, :] = WALL
    grid[-1, :] = WALL
    grid[:, 0] = WALL
    grid[:, -1] = WALL
    return grid


def _pick_floor(grid: np.ndarray, rng: np.random.Generator, region) -> tuple[int, int]:
    """Random FLOOR cell within ((r0, r1), (c0, c1)) bounds, inclusive."""
    (r0, r1), (c0, c1) = region
    cells = [(r, c) for r in range(r0, r1 + 1) for c in range(c0, c1 + 1) if grid[r, c] == FLOOR]
    if not cells:
        raise _RetryLayout
    return cells[int(rng.integers(len(cells)))]


def _sprinkle_hazards(grid: np.ndarray, rng: np.random.Generator, density: float, protected) -> None:
    """Turn a fraction of open floor into lava speckles (solvability re-checked upstream)."""
    if density <= 0:
        return
    h, w = grid.shape
    candidates = [
        (r, c)
        for r in range(1, h - 1)
        for c in range(1, w - 1)
        if grid[r, c] == FLOOR and (r, c) not in protected
    ]
    n = int(round(0.15 * density * len(candidates)))
    if n == 0:
        return
    idx = rng.permutation(len(candidates))[:n]
    for i in idx:
        grid[candidates[i]] = LAVA


def _divider_positions(rng: np.random.Generator, n_rooms: int, span: int) -> list[int]:
    """n_rooms-1 divider offsets, every room at least 2 cells wide."""
    if span < 3 * n_rooms + 1:
        raise _RetryLayout
    dividers: list[int] = []
    lo = 3
    for i in range(n_rooms - 1):
        remaining = n_rooms - 1 - i - 1
        hi = span - 4 - 3 * remaining
        if hi < lo:
            raise _RetryLayout
        d = int(rng.integers(lo, hi + 1))
        dividers.append(d)
        lo = d + 3
    return dividers


def _build_multi_room(spec: TaskSpec, rng: np.random.Generator, lava_walls: bool = False):
    grid = _empty(spec)
    h, w = grid.shape
    vertical = bool(rng.integers(2))  # dividers as columns (True) or rows
    span = w if vertical else h
    dividers = _divider_positions(rng, max(2, spec.rooms), span)
    wall_code = LAVA if lava_walls else WALL
    gap_code = FLOOR if lava_walls else DOOR
    for d in dividers:
        if vertical:
            grid[1:-1, d] = wall_code
            grid[int(rng.integers(1, h - 1)), d] = gap_code
        else:
            grid[d, 1:-1] = wall_code
            grid[d, int(rng.integers(1, w - 1))] = gap_code

    bounds = [0] + dividers + [span - 1]
    first = (bounds[0] + 1, bounds[1] - 1)
    last = (bounds[-2] + 1, bounds[-1] - 1)
    if vertical:
        start = _pick_floor(grid, rng, ((1, h - 2), first))
        goal = _pick_floor(grid, rng, ((1, h - 2), last))
    else:
        start = _pick_floor(grid, rng, (first, (1, w - 2)))
        goal = _pick_floor(grid, rng, (last, (1, w - 2)))
    if start == goal:
        raise _RetryLayout
    _sprinkle_hazards(grid, rng, spec.hazard_density, {start, goal})
    grid[goal] = GOAL
    return grid, start, [goal]


def _build_crossing(spec: TaskSpec, rng: np.random.Generator, lava_streams: bool = False):
    grid = _empty(spec)
    h, w = grid.shape
    code = LAVA if lava_streams else WALL
    n_streams = max(1, spec.rooms)
    v_candidates = list(range(2, w - 2, 2))
    h_candidates = list(range(2, h - 2, 2))
    streams = []
    for _ in range(n_streams):
        if rng.integers(2) and v_candidates:
            col = v_candidates.pop(int(rng.integers(len(v_candidates))))
            streams.append(("v", col))
        elif h_candidates:
            row = h_candidates.pop(int(rng.integers(len(h_candidates))))
            streams.append(("h", row))
        elif v_candidates:
            col = v_candidates.pop(int(rng.integers(len(v_candidates))))
            streams.append(("v", col))
        else:
            raise _RetryLayout
    for kind, coord in streams:
        if kind == "v":
            grid[1:-1, coord] = code
        else:
            grid[coord, 1:-1] = code
    # carve one opening per stream after all streams are laid down
    for kind, coord in streams:
        if kind == "v":
            grid[int(rng.integers(1, h - 1)), coord] = FLOOR
        else:
            grid[coord, int(rng.integers(1, w - 1))] = FLOOR

    start = (1, 1)
    goal = (h - 2, w - 2)
    if grid[start] != FLOOR or grid[goal] != FLOOR:
        raise _RetryLayout
    _sprinkle_hazards(grid, rng, spec.hazard_density, {start, goal})
    grid[goal] = GOAL
    return grid, start, [goal]


def _build_maze_walk(spec: TaskSpec, rng: np.random.Generator):
    """Recursive-backtracker maze on odd cell coordinates."""
    h = spec.height if spec.height % 2 == 1 else spec.height - 1
    w = spec.width if spec.width % 2 == 1 else spec.width - 1
    grid = np.full((h, w), WALL, dtype=np.uint8)
    cells = [(r, c) for r in range(1, h - 1, 2) for c in range(1, w - 1, 2)]
    start = cells[int(rng.integers(len(cells)))]
    grid[start] = FLOOR
    stack = [start]
    while stack:
        r, c = stack[-1]
        options = []
        for dr, dc in ((-2, 0), (2, 0), (0, -2), (0, 2)):
            nr, nc = r + dr, c + dc
            if 1 <= nr < h - 1 and 1 <= nc < w - 1 and grid[nr, nc] == WALL:
                options.append((nr, nc))
        if not options:
            stack.pop()
            continue
        nr, nc = options[int(rng.integers(len(options)))]
        grid[(r + nr) // 2, (c + nc) // 2] = FLOOR
        grid[nr, nc] = FLOOR
        stack.append((nr, nc))

    # goal: the carved cell farthest from start (8-connected distance)
    dist = {start: 0}
    queue = deque([start])
    far, far_d = start, 0
    while queue:
        pos = queue.popleft()
        for dr, dc in ACTION_DELTAS:
            np_ = (pos[0] + dr, pos[1] + dc)
            if 0 <= np_[0] < h and 0 <= np_[1] < w and np_ not in dist and grid[np_] == FLOOR:
                dist[np_] = dist[pos] + 1
                if dist[np_] > far_d:
                    far, far_d = np_, dist[np_]
                queue.append(np_)
    if far == start:
        raise _RetryLayout
    grid[far] = GOAL
    return grid, start, [far]


def _build_labyrinth(spec: TaskSpec, rng: np.random.Generator):
    """Concentric wall rings with one offset opening each; goal at the center."""
    grid = _empty(spec)
    h, w = grid.shape
    offset = 2
    side_cycle = int(rng.integers(4))
    while h - 2 * offset >= 3 and w - 2 * offset >= 3:
        r0, r1 = offset, h - 1 - offset
        c0, c1 = offset, w - 1 - offset
        grid[r0, c0 : c1 + 1] = WALL
        grid[r1, c0 : c1 + 1] = WALL
        grid[r0 : r1 + 1, c0] = WALL
        grid[r0 : r1 + 1, c1] = WALL
        side = side_cycle % 4
        side_cycle += 2 + int(rng.integers(2))  # opening migrates around the ring
        if side == 0 and c1 - 1 >= c0 + 1:
            grid[r0, int(rng.integers(c0 + 1, c1))] = FLOOR
        elif side == 1 and r1 - 1 >= r0 + 1:
            grid[int(rng.integers(r0 + 1, r1)), c1] = FLOOR
        elif side == 2 and c1 - 1 >= c0 + 1:
            grid[r1, int(rng.integers(c0 + 1, c1))] = FLOOR
        elif r1 - 1 >= r0 + 1:
            grid[int(rng.integers(r0 + 1, r1)), c0] = FLOOR
        else:
            raise _RetryLayout
        offset += 2

    center = (h // 2, w // 2)
    if grid[center] != FLOOR:
        raise _RetryLayout
    corners = [(1, 1), (1, w - 2), (h - 2, 1), (h - 2, w - 2)]
    start = corners[int(rng.integers(4))]
    if grid[start] != FLOOR:
        raise _RetryLayout
    grid[center] = GOAL
    return grid, start, [center]


def _build_memento(spec: TaskSpec, rng: np.random.Generator):
    """Cue-memory fork: cue cell(s) at the corridor head select the goal arm."""
    grid = np.full((spec.height, spec.width), WALL, dtype=np.uint8)
    h, w = grid.shape
    mid = h // 2
    arity = spec.fork_arity
    arm = 5
    if arity == 2:
        if h < 2 * arm + 3 or w < 8:
            raise _RetryLayout
        jc = w - 2
    else:
        if h < 2 * arm + 3 or w < arm + 8:
            raise _RetryLayout
        jc = w - 2 - arm

    grid[mid, 1 : jc + 1] = FLOOR
    if arity == 2:
        ends = [(mid - arm, jc), (mid + arm, jc)]
        for i in range(1, arm + 1):
            grid[mid - i, jc] = FLOOR
            grid[mid + i, jc] = FLOOR
        cue_cells = [(mid, 1)]
    else:
        ends = [(mid - arm, jc), (mid - arm, jc + arm), (mid + arm, jc + arm), (mid + arm, jc)]
        for i in range(1, arm + 1):
            grid[mid - i, jc] = FLOOR          # N
            grid[mid - i, jc + i] = FLOOR      # NE diagonal
            grid[mid + i, jc + i] = FLOOR      # SE diagonal
            grid[mid + i, jc] = FLOOR          # S
        cue_cells = [(mid, 1), (mid, 3)]

    cues = [int(rng.integers(2)) for _ in cue_cells]  # 0 -> CueA, 1 -> CueB
    goal_idx = 0
    for bit in cues:
        goal_idx = goal_idx * 2 + bit
    if spec.cue:
        for pos, bit in zip(cue_cells, cues):
            grid[pos] = CUE_B if bit else CUE_A

    for i, end in enumerate(ends):
        grid[end] = GOAL if i == goal_idx else TRAP
    start = (mid, 1)
    return grid, start, [ends[goal_idx]]


_BUILDERS = {
    GeneratorKind.MULTI_ROOM: lambda s, r: _build_multi_room(s, r, lava_walls=False),
    GeneratorKind.MULTI_ROOM_LAVA: lambda s, r: _build_multi_room(s, r, lava_walls=True),
    GeneratorKind.SIMPLE_CROSSING: lambda s, r: _build_crossing(s, r, lava_streams=False),
    GeneratorKind.LAVA_CROSSING: lambda s, r: _build_crossing(s, r, lava_streams=True),
    GeneratorKind.MAZE_WALK: _build_maze_walk,
    GeneratorKind.LABYRINTH: _build_labyrinth,
    GeneratorKind.MEMENTO_FORK: _build_memento,
}
