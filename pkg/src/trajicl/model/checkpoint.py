"""Checkpoint container: JSON manifest + CRC-protected float32 tensor blobs."""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..numerics import OptimizerState, Tensor
from .config import ModelConfig
from .network import PolicyModel

MAGIC = b"TRJCKPT\x01"
VERSION = 1

_HEAD = struct.Struct("<8sII")
_BLOB_HEAD = struct.Struct("<HB")


class CheckpointError(IOError):
    pass


def _pack_tensor(name: str, arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr, dtype=np.float32).tobytes()
    nb = name.encode("utf-8")
    head = _BLOB_HEAD.pack(len(nb), arr.ndim) + nb
    dims = struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + dims + struct.pack("<Q", len(data)) + data + struct.pack("<I", zlib.crc32(data))


def _unpack_tensor(buf: bytes, off: int) -> tuple[str, np.ndarray, int]:
    nlen, ndim = _BLOB_HEAD.unpack_from(buf, off)
    off += _BLOB_HEAD.size
    name = buf[off : off + nlen].decode("utf-8")
    off += nlen
    shape = struct.unpack_from(f"<{ndim}I", buf, off)
    off += 4 * ndim
    (nbytes,) = struct.unpack_from("<Q", buf, off)
    off += 8
    data = buf[off : off + nbytes]
    off += nbytes
    (crc,) = struct.unpack_from("<I", buf, off)
    off += 4
    if zlib.crc32(data) != crc:
        raise CheckpointError(f"tensor {name!r}: checksum mismatch")
    arr = np.frombuffer(data, dtype="<f4").reshape(shape).copy()
    return name, arr, off


def rng_state(rng: np.random.Generator) -> dict:
    return rng.bit_generator.state


def restore_rng(state: dict) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


def save_checkpoint(
    model: PolicyModel,
    path: str | Path,
    train_step: int = 0,
    epoch: int = -1,
    dataset_fingerprint: str | None = None,
    rng_states: dict | None = None,
    optimizer: OptimizerState | None = None,
) -> None:
    tensors: dict[str, np.ndarray] = {k: p.data for k, p in model.params.items()}
    manifest = {
        "format_version": VERSION,
        "config": asdict(model.cfg),
        "train_step": train_step,
        "epoch": epoch,
        "dataset_fingerprint": dataset_fingerprint,
        "rng_states": rng_states,
        "param_names": sorted(model.params),
        "optimizer": None,
    }
    if optimizer is not None:
        manifest["optimizer"] = {
            "beta1": optimizer.beta1,
            "beta2": optimizer.beta2,
            "eps": optimizer.eps,
            "weight_decay": optimizer.weight_decay,
            "step_count": optimizer.step_count,
        }
        for k, v in optimizer.m.items():
            tensors[f"opt.m.{k}"] = v
        for k, v in optimizer.v.items():
            tensors[f"opt.v.{k}"] = v

    mbytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    parts = [_HEAD.pack(MAGIC, VERSION, len(mbytes)), mbytes, struct.pack("<I", zlib.crc32(mbytes))]
    parts.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        parts.append(_pack_tensor(name, tensors[name]))
    Path(path).write_bytes(b"".join(parts))


def read_manifest(path: str | Path) -> dict:
    buf = Path(path).read_bytes()
    if len(buf) < _HEAD.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, mlen = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    mbytes = buf[_HEAD.size : _HEAD.size + mlen]
    (mcrc,) = struct.unpack_from("<I", buf, _HEAD.size + mlen)
    if zlib.crc32(mbytes) != mcrc:
        raise CheckpointError(f"{path}: manifest checksum mismatch")
    return json.loads(mbytes.decode("utf-8"))


def load_checkpoint(
    path: str | Path,
    expected_config: ModelConfig | None = None,
) -> tuple[PolicyModel, dict, OptimizerState | None]:
    """Rebuild (model, manifest, optimizer-state) from a checkpoint file."""
    buf = Path(path).read_bytes()
    manifest = read_manifest(path)
    cfg = ModelConfig(**manifest["config"])
    if expected_config is not None and cfg != expected_config:
        raise CheckpointError(
            f"{path}: checkpoint config {cfg} does not match expected {expected_config}"
        )
    magic, version, mlen = _HEAD.unpack_from(buf, 0)
    off = _HEAD.size + mlen + 4
    (n_tensors,) = struct.unpack_from("<I", buf, off)
    off += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        name, arr, off = _unpack_tensor(buf, off)
        tensors[name] = arr
    if off != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - off} trailing bytes")

    params = {}
    for name in manifest["param_names"]:
        if name not in tensors:
            raise CheckpointError(f"{path}: missing tensor {name!r}")
        params[name] = Tensor(tensors[name], requires_grad=True)
    model = PolicyModel(cfg, params)

    opt = None
    if manifest.get("optimizer"):
        o = manifest["optimizer"]
        opt = OptimizerState(
            beta1=o["beta1"], beta2=o["beta2"], eps=o["eps"],
            weight_decay=o["weight_decay"], step_count=o["step_count"],
        )
        for name in manifest["param_names"]:
            if f"opt.m.{name}" in tensors:
                opt.m[name] = tensors[f"opt.m.{name}"]
                opt.v[name] = tensors[f"opt.v.{name}"]
    return model, manifest, opt
