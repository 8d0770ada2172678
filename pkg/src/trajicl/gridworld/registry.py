"""Task registry: the named task catalog and its YAML serialization."""

from __future__ import annotations

from pathlib import Path

import yaml

from .core import GeneratorKind, TaskRole, TaskSpec


def default_task_registry() -> list[TaskSpec]:
    """Desk-scale catalog: multi-room navigation, lethal hazards, mazes of
    increasing size, and cue-memory forks, with disjoint train/test roles."""
    t, e = TaskRole.TRAIN, TaskRole.TEST
    return [
        TaskSpec("multiroom-n2", GeneratorKind.MULTI_ROOM, 11, 11, rooms=2, role=t),
        TaskSpec("multiroom-n3", GeneratorKind.MULTI_ROOM, 13, 11, rooms=3, role=t),
        TaskSpec("multiroom-lava-n2", GeneratorKind.MULTI_ROOM_LAVA, 11, 11, rooms=2, role=t),
        TaskSpec("simplecrossing-n1", GeneratorKind.SIMPLE_CROSSING, 9, 9, rooms=1, role=t),
        TaskSpec("simplecrossing-n2", GeneratorKind.SIMPLE_CROSSING, 11, 11, rooms=2, role=t),
        TaskSpec("lavacrossing-n1", GeneratorKind.LAVA_CROSSING, 9, 9, rooms=1, role=t),
        TaskSpec("mazewalk-9", GeneratorKind.MAZE_WALK, 9, 9, role=t),
        TaskSpec("labyrinth-11", GeneratorKind.LABYRINTH, 11, 11, role=e),
        TaskSpec("mazewalk-13", GeneratorKind.MAZE_WALK, 13, 13, role=e),
        TaskSpec("memento-f2", GeneratorKind.MEMENTO_FORK, 13, 13, fork_arity=2, role=e),
        TaskSpec("memento-f4", GeneratorKind.MEMENTO_FORK, 13, 13, fork_arity=4, role=e),
    ]


def save_task_registry(specs: list[TaskSpec], path: str | Path) -> None:
    entries = []
    for s in specs:
        entries.append(
            {
                "task_id": s.task_id,
                "kind": s.kind.value,
                "width": s.width,
                "height": s.height,
                "rooms": s.rooms,
                "hazard_density": s.hazard_density,
                "fork_arity": s.fork_arity,
                "cue": s.cue,
                "role": s.role.value,
            }
        )
    Path(path).write_text(yaml.safe_dump({"tasks": entries}, sort_keys=False))


def load_task_registry(path: str | Path) -> list[TaskSpec]:
    raw = yaml.safe_load(Path(path).read_text())
    specs = [
        TaskSpec(
            task_id=e["task_id"],
            kind=GeneratorKind(e["kind"]),
            width=int(e.get("width", 11)),
            height=int(e.get("height", 11)),
            rooms=int(e.get("rooms", 2)),
            hazard_density=float(e.get("hazard_density", 0.0)),
            fork_arity=int(e.get("fork_arity", 2)),
            cue=bool(e.get("cue", True)),
            role=TaskRole(e.get("role", "train")),
        )
        for e in raw["tasks"]
    ]
    ids = [s.task_id for s in specs]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate task ids in registry: {dupes}")
    return specs


def find_task(specs: list[TaskSpec], task_id: str) -> TaskSpec:
    for s in specs:
        if s.task_id == task_id:
            return s
    raise KeyError(f"unknown task id {task_id!r}; registry has {[s.task_id for s in specs]}")
