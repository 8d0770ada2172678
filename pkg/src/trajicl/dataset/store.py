"""Versioned binary container for trajectory records.

Layout (all little-endian):
    8-byte magic | u32 version | u64 record count | length-prefixed
    records | u32 CRC32 of every preceding byte.

Reads are all-or-nothing: a bad magic, unknown version, truncation, or
checksum mismatch raises before any record is returned.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..expert import DemoStep
from ..gridworld import Observation
from .records import TrajectoryRecord

MAGIC = b"TRAJDAT\x01"
VERSION = 1

_HEADER = struct.Struct("<8sIQ")
_REC_LEN = struct.Struct("<I")
_REC_FIXED = struct.Struct("<QQBfBH")
_STEP_SCALARS = struct.Struct("<fffBBf")
_CRC = struct.Struct("<I")


class DatasetIOError(IOError):
    pass


def _encode_record(rec: TrajectoryRecord) -> bytes:
    task = rec.task_id.encode("utf-8")
    if not rec.steps:
        raise DatasetIOError(f"record {rec.traj_id} has no steps")
    crop_size = rec.steps[0].obs.crop.shape[0]
    parts = [struct.pack("<H", len(task)), task]
    parts.append(
        _REC_FIXED.pack(
            rec.level_seed,
            rec.episode_seed,
            1 if rec.success else 0,
            rec.episodic_return,
            crop_size,
            len(rec.steps),
        )
    )
    for st in rec.steps:
        if st.obs.crop.shape != (crop_size, crop_size):
            raise DatasetIOError(f"record {rec.traj_id}: inconsistent crop sizes")
        parts.append(st.obs.crop.tobytes())
        parts.append(
            _STEP_SCALARS.pack(
                st.obs.agent_xy[0],
                st.obs.agent_xy[1],
                st.obs.steps_remaining,
                st.obs.cue,
                st.action,
                st.reward,
            )
        )
    return b"".join(parts)


def _decode_record(buf: bytes, task_cache: dict) -> TrajectoryRecord:
    off = 0
    (tlen,) = struct.unpack_from("<H", buf, off)
    off += 2
    task_id = buf[off : off + tlen].decode("utf-8")
    task_id = task_cache.setdefault(task_id, task_id)
    off += tlen
    level_seed, episode_seed, success, ret, crop_size, n_steps = _REC_FIXED.unpack_from(buf, off)
    off += _REC_FIXED.size
    steps = []
    crop_bytes = crop_size * crop_size
    for _ in range(n_steps):
        crop = np.frombuffer(buf, dtype=np.uint8, count=crop_bytes, offset=off).reshape(crop_size, crop_size)
        crop.setflags(write=False)
        off += crop_bytes
        x, y, rem, cue, action, reward = _STEP_SCALARS.unpack_from(buf, off)
        off += _STEP_SCALARS.size
        obs = Observation(crop=crop, agent_xy=(x, y), steps_remaining=rem, cue=cue)
        steps.append(DemoStep(obs=obs, action=action, reward=reward))
    if off != len(buf):
        raise DatasetIOError("record payload has trailing bytes")
    return TrajectoryRecord(
        traj_id=f"{task_id}/{level_seed}/{episode_seed}",
        task_id=task_id,
        level_seed=level_seed,
        episode_seed=episode_seed,
        steps=tuple(steps),
        episodic_return=ret,
        success=bool(success),
    )


def write_dataset(records: list[TrajectoryRecord], path: str | Path) -> None:
    body = bytearray(_HEADER.pack(MAGIC, VERSION, len(records)))
    for rec in records:
        payload = _encode_record(rec)
        body += _REC_LEN.pack(len(payload))
        body += payload
    body += _CRC.pack(zlib.crc32(bytes(body)))
    Path(path).write_bytes(bytes(body))


def read_dataset(path: str | Path) -> list[TrajectoryRecord]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size + _CRC.size:
        raise DatasetIOError(f"{path}: truncated file ({len(data)} bytes)")
    magic, version, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DatasetIOError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise DatasetIOError(f"{path}: unsupported format version {version}")
    (stored_crc,) = _CRC.unpack_from(data, len(data) - _CRC.size)
    if zlib.crc32(data[: -_CRC.size]) != stored_crc:
        raise DatasetIOError(f"{path}: checksum mismatch")
    records = []
    off = _HEADER.size
    end = len(data) - _CRC.size
    task_cache: dict = {}
    for _ in range(count):
        if off + _REC_LEN.size > end:
            raise DatasetIOError(f"{path}: record table overruns file")
        (plen,) = _REC_LEN.unpack_from(data, off)
        off += _REC_LEN.size
        if off + plen > end:
            raise DatasetIOError(f"{path}: record payload overruns file")
        records.append(_decode_record(data[off : off + plen], task_cache))
        off += plen
    if off != end:
        raise DatasetIOError(f"{path}: {end - off} unexpected trailing bytes")
    return records


def dataset_stats(records: list[TrajectoryRecord]) -> dict:
    """Level counts, per-task trajectory counts, and length summaries."""
    by_task: dict[str, list[TrajectoryRecord]] = {}
    for r in records:
        by_task.setdefault(r.task_id, []).append(r)
    tasks = {}
    for task_id, recs in sorted(by_task.items()):
        lengths = [len(r.steps) for r in recs]
        tasks[task_id] = {
            "trajectories": len(recs),
            "levels": len({r.level_seed for r in recs}),
            "mean_length": float(np.mean(lengths)),
            "min_length": int(min(lengths)),
            "max_length": int(max(lengths)),
            "mean_return": float(np.mean([r.episodic_return for r in recs])),
        }
    return {"total_trajectories": len(records), "tasks": tasks}


def format_stats(stats: dict) -> str:
    lines = [f"total trajectories: {stats['total_trajectories']}"]
    for task_id, s in stats["tasks"].items():
        lines.append(
            f"  {task_id}: {s['trajectories']} trajectories over {s['levels']} levels, "
            f"length {s['mean_length']:.1f} (min {s['min_length']}, max {s['max_length']}), "
            f"mean return {s['mean_return']:.3f}"
        )
    return "\n".join(lines)
