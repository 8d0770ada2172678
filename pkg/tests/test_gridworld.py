import math

import numpy as np
import pytest

from trajicl.gridworld import (
    ACTION_DELTAS,
    CUE_A,
    CUE_B,
    FLOOR,
    GOAL,
    LAVA,
    TRAP,
    WALL,
    ContractViolationError,
    DynamicsConfig,
    GeneratorKind,
    Level,
    ProtocolError,
    TaskRole,
    TaskSpec,
    default_task_registry,
    encode_observation,
    encoded_observation_dim,
    generate_level,
    load_task_registry,
    render_ascii,
    reset,
    save_task_registry,
    step,
)


def oracle_bfs_reachable(grid: np.ndarray, start, goal) -> bool:
    """Independent solvability oracle: plain queue-based 8-connected BFS."""
    from collections import deque

    blocked = {WALL, LAVA, TRAP}
    h, w = grid.shape
    seen = {start}
    q = deque([start])
    while q:
        r, c = q.popleft()
        if (r, c) == goal:
            return True
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == dc == 0:
                    continue
                n = (r + dr, c + dc)
                if 0 <= n[0] < h and 0 <= n[1] < w and n not in seen and int(grid[n]) not in blocked:
                    seen.add(n)
                    q.append(n)
    return False


def make_level(spec_kind=GeneratorKind.MULTI_ROOM, seed=0, **kw):
    spec = TaskSpec("t", spec_kind, kw.pop("width", 11), kw.pop("height", 11), **kw)
    return generate_level(spec, seed)


def open_level(w=7, h=7, goal=(5, 5)):
    """Hand-built empty room for dynamics tests."""
    grid = np.full((h, w), FLOOR, dtype=np.uint8)
    grid[0, :] = grid[-1, :] = WALL
    grid[:, 0] = grid[:, -1] = WALL
    grid[goal] = GOAL
    return Level(task_id="open", seed=0, grid=grid, start=(1, 1), goals=(goal,))


# -- generation ---------------------------------------------------------------


def test_generation_deterministic():
    spec = TaskSpec("maze", GeneratorKind.MAZE_WALK, 9, 9)
    a = generate_level(spec, 7)
    b = generate_level(spec, 7)
    assert np.array_equal(a.grid, b.grid)
    assert a.start == b.start and a.goals == b.goals


def test_generation_varies_with_seed():
    spec = TaskSpec("maze", GeneratorKind.MAZE_WALK, 9, 9)
    grids = {generate_level(spec, s).grid.tobytes() for s in range(20)}
    assert len(grids) > 10


def test_memento_f2_exactly_one_goal_one_trap():
    spec = TaskSpec("m2", GeneratorKind.MEMENTO_FORK, 13, 13, fork_arity=2)
    for seed in range(20):
        lvl = generate_level(spec, seed)
        assert int((lvl.grid == GOAL).sum()) == 1
        assert int((lvl.grid == TRAP).sum()) == 1


def test_memento_f4_goal_and_three_traps():
    spec = TaskSpec("m4", GeneratorKind.MEMENTO_FORK, 13, 13, fork_arity=4)
    for seed in range(20):
        lvl = generate_level(spec, seed)
        assert int((lvl.grid == GOAL).sum()) == 1
        assert int((lvl.grid == TRAP).sum()) == 3


def test_memento_cue_cells_present():
    spec = TaskSpec("m2", GeneratorKind.MEMENTO_FORK, 13, 13, fork_arity=2)
    lvl = generate_level(spec, 3)
    n_cues = int(((lvl.grid == CUE_A) | (lvl.grid == CUE_B)).sum())
    assert n_cues == 1
    assert lvl.cell(lvl.start) in (CUE_A, CUE_B)


def test_lavacrossing_thousand_seeds_solvable_by_oracle():
    spec = TaskSpec("lc", GeneratorKind.LAVA_CROSSING, 9, 9, rooms=1)
    for seed in range(1000):
        lvl = generate_level(spec, seed)
        assert oracle_bfs_reachable(lvl.grid, lvl.start, lvl.goals[0]), f"seed {seed} unsolvable"


@pytest.mark.parametrize("spec", default_task_registry(), ids=lambda s: s.task_id)
def test_every_registry_task_generates_solvable_levels(spec):
    for seed in range(25):
        lvl = generate_level(spec, seed)
        assert oracle_bfs_reachable(lvl.grid, lvl.start, lvl.goals[0])
        assert int(lvl.grid[lvl.start]) not in (WALL, LAVA, TRAP)


def test_generation_rejects_negative_seed():
    with pytest.raises(ValueError):
        generate_level(TaskSpec("t", GeneratorKind.MAZE_WALK, 9, 9), -1)


def test_taskspec_validation():
    with pytest.raises(ValueError):
        TaskSpec("bad", GeneratorKind.MAZE_WALK, 3, 9)
    with pytest.raises(ValueError):
        TaskSpec("bad", GeneratorKind.MEMENTO_FORK, 13, 13, fork_arity=3)


# -- reset / observe ----------------------------------------------------------


def test_reset_deterministic_observation():
    lvl = make_level(seed=2)
    dyn = DynamicsConfig()
    _, obs1 = reset(lvl, dyn, 99)
    _, obs2 = reset(lvl, dyn, 99)
    assert obs1.key() == obs2.key()


def test_reset_crop_center_is_start_cell():
    lvl = make_level(seed=3)
    dyn = DynamicsConfig(crop_size=9)
    _, obs = reset(lvl, dyn, 0)
    assert obs.crop[4, 4] == FLOOR
    assert obs.steps_remaining == 1.0


def test_observation_out_of_bounds_coded_as_wall():
    lvl = open_level()
    dyn = DynamicsConfig(crop_size=9)
    _, obs = reset(lvl, dyn, 0)  # start (1,1): crop extends past the border
    assert obs.crop[0, 0] == WALL


# -- step dynamics ------------------------------------------------------------


def test_deterministic_dynamics_executes_chosen_action():
    lvl = open_level()
    dyn = DynamicsConfig(sticky_prob=0.0, max_steps=50)
    state, _ = reset(lvl, dyn, 0)
    for i in range(20):
        a = [2, 6][i % 2]  # E, W
        state, _, _, done = step(state, a)
        assert state.prev_action == a
        if done:
            break


def test_step_into_goal_rewards_and_terminates():
    lvl = open_level(goal=(1, 2))
    dyn = DynamicsConfig()
    state, _ = reset(lvl, dyn, 0)
    state, _, reward, done = step(state, 2)  # E onto the goal
    assert reward == 1.0 and done and state.done


def test_step_into_wall_bumps():
    lvl = open_level()
    dyn = DynamicsConfig()
    state, _ = reset(lvl, dyn, 0)
    state, _, reward, done = step(state, 0)  # N into border
    assert reward == -0.01 and not done
    assert state.pos == lvl.start


def test_step_into_lava_is_lethal_with_zero_reward():
    lvl = open_level()
    grid = lvl.grid.copy()
    grid[1, 2] = LAVA
    lvl = Level("open", 0, grid, (1, 1), lvl.goals)
    state, _ = reset(lvl, DynamicsConfig(), 0)
    state, _, reward, done = step(state, 2)
    assert reward == 0.0 and done


def test_step_into_trap_penalizes_and_terminates():
    lvl = open_level()
    grid = lvl.grid.copy()
    grid[2, 2] = TRAP
    lvl = Level("open", 0, grid, (1, 1), lvl.goals)
    state, _ = reset(lvl, DynamicsConfig(), 0)
    state, _, reward, done = step(state, 3)  # SE
    assert reward == -1.0 and done


def test_timeout_terminates():
    lvl = open_level()
    dyn = DynamicsConfig(max_steps=3)
    state, _ = reset(lvl, dyn, 0)
    done = False
    for _ in range(3):
        state, _, _, done = step(state, 0)
    assert done


def test_step_rejects_bad_action_and_done_state():
    lvl = open_level(goal=(1, 2))
    state, _ = reset(lvl, DynamicsConfig(), 0)
    with pytest.raises(ProtocolError):
        step(state, 8)
    state, _, _, _ = step(state, 2)
    with pytest.raises(ContractViolationError):
        step(state, 0)


def test_sticky_frequency_within_99pct_binomial_ci():
    """Monte-Carlo check: override frequency matches p_s = 0.1."""
    lvl = open_level(w=9, h=9, goal=(7, 7))
    n_steps = 10**5
    dyn = DynamicsConfig(sticky_prob=0.1, max_steps=n_steps + 1)
    state, _ = reset(lvl, dyn, 1234)
    overrides = 0
    trials = 0
    for i in range(n_steps):
        chosen = [2, 6][i % 2]  # alternate E and W: chosen always != prev executed unless overridden
        prev = state.prev_action
        state, _, _, _ = step(state, chosen)
        if prev is not None and chosen != prev:
            trials += 1
            if state.prev_action == prev:
                overrides += 1
    p_hat = overrides / trials
    half_width = 2.576 * math.sqrt(0.1 * 0.9 / trials)
    assert abs(p_hat - 0.1) < half_width, f"p_hat={p_hat:.4f} outside CI +-{half_width:.4f}"


def test_trajectory_fully_determined_by_seed_and_actions():
    lvl = make_level(seed=5)
    dyn = DynamicsConfig(sticky_prob=0.3, max_steps=30)
    actions = np.random.default_rng(0).integers(0, 8, size=30)

    def run():
        out = []
        state, obs = reset(lvl, dyn, 777)
        for a in actions:
            if state.done:
                break
            state, obs, r, d = step(state, int(a))
            out.append((obs.key(), r, d))
        return out

    assert run() == run()


def test_reward_bounds_invariant():
    lvl = make_level(GeneratorKind.MULTI_ROOM_LAVA, seed=1)
    dyn = DynamicsConfig(sticky_prob=0.2, max_steps=40)
    rng = np.random.default_rng(3)
    allowed = {1.0, -1.0, -0.01, 0.0}
    for ep in range(20):
        state, _ = reset(lvl, dyn, ep)
        total = 0.0
        while not state.done:
            state, _, r, _ = step(state, int(rng.integers(8)))
            assert r in allowed
            total += r
        assert -1 - 0.01 * dyn.max_steps <= total <= 1.0


# -- observation encoding ------------------------------------------------------


def test_encoded_dim_formula():
    lvl = make_level(seed=0)
    dyn = DynamicsConfig(crop_size=9)
    _, obs = reset(lvl, dyn, 0)
    vec = encode_observation(obs)
    assert vec.shape == (encoded_observation_dim(9),)
    assert encoded_observation_dim(9) == 9 * 9 * 8 + 4


def test_encoding_bit_identical_for_equal_observations():
    lvl = make_level(seed=0)
    dyn = DynamicsConfig()
    _, obs1 = reset(lvl, dyn, 0)
    _, obs2 = reset(lvl, dyn, 0)
    assert np.array_equal(encode_observation(obs1), encode_observation(obs2))


def test_all_wall_crop_one_hot_mass_in_wall_channel():
    from trajicl.gridworld import Observation

    crop = np.full((9, 9), WALL, dtype=np.uint8)
    obs = Observation(crop=crop, agent_xy=(0.0, 0.0), steps_remaining=1.0, cue=0)
    vec = encode_observation(obs)
    onehot = vec[:-4].reshape(81, 8)
    assert np.all(onehot[:, WALL] == 1.0)
    assert onehot.sum() == 81


# -- registry / rendering ------------------------------------------------------


def test_registry_round_trip(tmp_path):
    specs = default_task_registry()
    path = tmp_path / "tasks.yaml"
    save_task_registry(specs, path)
    loaded = load_task_registry(path)
    assert loaded == specs


def test_registry_rejects_duplicate_ids(tmp_path):
    specs = default_task_registry()
    save_task_registry(specs + [specs[0]], tmp_path / "t.yaml")
    with pytest.raises(ValueError):
        load_task_registry(tmp_path / "t.yaml")


def test_registry_train_test_roles_disjoint():
    specs = default_task_registry()
    train = {s.task_id for s in specs if s.role is TaskRole.TRAIN}
    test = {s.task_id for s in specs if s.role is TaskRole.TEST}
    assert train and test and not (train & test)


def test_render_ascii_shows_start_goal_agent():
    lvl = make_level(seed=4)
    txt = render_ascii(lvl)
    assert "S" in txt and "G" in txt
    txt2 = render_ascii(lvl, agent_pos=lvl.start)
    assert "@" in txt2
