"""Few-shot / zero-shot evaluation protocol.

For every held-out level and every k: condition the policy on k fresh
expert demos of that level, roll out a fixed number of episodes, and
aggregate returns over levels with std taken across model seeds. Demo
episode seeds and rollout episode seeds come from disjoint streams, and
level seeds are deterministic, so sweep cells stay paired.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..expert import rollout_expert
from ..gridworld import DynamicsConfig, TaskSpec, derive_seed, generate_level, reset, step
from .metrics import accuracy_counts

log = logging.getLogger(__name__)

_DEMO_SALT = 0x6576646D   # demo-collection episode seeds
_ROLL_SALT = 0x6576726C   # rollout episode seeds (disjoint stream)

EVAL_CSV_COLUMNS = ["task", "k", "seed", "level_seed", "episode", "episodic_return", "steps", "matched", "matches"]


@dataclass(frozen=True)
class EvalProtocol:
    k_demos: tuple[int, ...] = (0, 1, 3, 5)
    episodes_per_level: int = 5
    num_levels: int = 20
    model_seeds: int = 3
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    decode_mode: str = "greedy"
    temperature: float = 1.0
    level_seed_base: int = 100_000   # clear of training level seeds

    def __post_init__(self):
        if any(k < 0 for k in self.k_demos):
            raise ValueError("k values must be >= 0")
        if self.num_levels < 1 or self.episodes_per_level < 1 or self.model_seeds < 1:
            raise ValueError("num_levels, episodes_per_level, model_seeds must be >= 1")


@dataclass
class EvalRow:
    task: str
    k: int
    seed: int
    level_seed: int
    episode: int
    episodic_return: float
    steps: int
    matched: int
    matches: int


@dataclass
class EvalEntry:
    k: int
    mean_return: float
    std_return: float
    accuracy: float | None


@dataclass
class EvalReport:
    task_id: str
    entries: list[EvalEntry]
    accuracy: float | None          # headline: pooled at the smallest k >= 1
    quadrant: str | None
    skipped_levels: int
    rows: list[EvalRow]

    def entry(self, k: int) -> EvalEntry:
        for e in self.entries:
            if e.k == k:
                return e
        raise KeyError(f"no entry for k={k}")

    def to_json_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "entries": [asdict(e) for e in self.entries],
            "accuracy": self.accuracy,
            "quadrant": self.quadrant,
            "skipped_levels": self.skipped_levels,
            "num_rows": len(self.rows),
        }


def collect_eval_demos(task: TaskSpec, level, k: int, dyn: DynamicsConfig):
    """k fresh successful expert demos for one level; None if the budget runs out."""
    demos = []
    attempts = 0
    budget = 3 * k + 3
    while len(demos) < k and attempts < budget:
        seed = derive_seed(_DEMO_SALT, level.seed, attempts)
        demo = rollout_expert(level, dyn, seed)
        attempts += 1
        if demo.success:
            demos.append(demo)
    return demos if len(demos) == k else None


def run_episode(policy, level, dyn: DynamicsConfig, demos, episode_seed: int, seed_index: int):
    """One rollout; returns (episodic_return, [(obs, action), ...])."""
    policy.begin_episode(level, demos, episode_seed, seed_index)
    state, obs = reset(level, dyn, episode_seed)
    steps = []
    total = 0.0
    while not state.done:
        action = policy.act(state, obs)
        state, next_obs, reward, done = step(state, action)
        policy.after_step(obs, action, reward)
        steps.append((obs, action))
        obs = next_obs
        total += reward
    return total, steps


def evaluate_policy(policies, task: TaskSpec, protocol: EvalProtocol) -> EvalReport:
    """Run the protocol for one task.

    ``policies`` is one policy per model seed (a bare policy is treated as
    a single seed). Levels with no successful expert demos are skipped and
    counted in the report.
    """
    if not isinstance(policies, (list, tuple)):
        policies = [policies]
    if len(policies) != protocol.model_seeds:
        raise ValueError(f"got {len(policies)} policies for {protocol.model_seeds} model seeds")
    dyn = protocol.dynamics
    level_seeds = [protocol.level_seed_base + i for i in range(protocol.num_levels)]

    rows: list[EvalRow] = []
    skipped = 0
    demo_cache: dict[tuple[int, int], list | None] = {}
    for level_seed in level_seeds:
        level = generate_level(task, level_seed)
        for k in protocol.k_demos:
            demos = demo_cache.get((level_seed, k))
            if (level_seed, k) not in demo_cache:
                demos = collect_eval_demos(task, level, k, dyn)
                demo_cache[(level_seed, k)] = demos
            if demos is None:
                skipped += 1
                log.warning("task %s level %d: could not collect %d expert demos; skipping",
                            task.task_id, level_seed, k)
                continue
            for seed_index, policy in enumerate(policies):
                for episode in range(protocol.episodes_per_level):
                    episode_seed = derive_seed(_ROLL_SALT, level_seed, episode)
                    ret, steps = run_episode(policy, level, dyn, demos, episode_seed, seed_index)
                    matched, matches = accuracy_counts(steps, demos) if k > 0 else (0, 0)
                    rows.append(EvalRow(
                        task=task.task_id, k=k, seed=seed_index, level_seed=level_seed,
                        episode=episode, episodic_return=ret, steps=len(steps),
                        matched=matched, matches=matches,
                    ))

    entries = []
    for k in protocol.k_demos:
        k_rows = [r for r in rows if r.k == k]
        if not k_rows:
            continue
        seed_means = []
        seed_accs = []
        for s in range(protocol.model_seeds):
            s_rows = [r for r in k_rows if r.seed == s]
            seed_means.append(float(np.mean([r.episodic_return for r in s_rows])))
            matched = sum(r.matched for r in s_rows)
            if matched:
                seed_accs.append(sum(r.matches for r in s_rows) / matched)
        entries.append(EvalEntry(
            k=k,
            mean_return=float(np.mean(seed_means)),
            std_return=float(np.std(seed_means)),
            accuracy=float(np.mean(seed_accs)) if seed_accs else None,
        ))

    headline = None
    for e in entries:
        if e.k >= 1 and e.accuracy is not None:
            headline = e.accuracy
            break
    return EvalReport(task_id=task.task_id, entries=entries, accuracy=headline,
                      quadrant=None, skipped_levels=skipped, rows=rows)


def write_report_json(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_json_dict(), indent=2, sort_keys=True) + "\n")


def write_report_csv(report: EvalReport, path: str | Path) -> None:
    """One row per task x k x seed x level x episode, fixed column order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_CSV_COLUMNS)
        for r in report.rows:
            writer.writerow([r.task, r.k, r.seed, r.level_seed, r.episode,
                             f"{r.episodic_return:.6f}", r.steps, r.matched, r.matches])
