"""The training loop: bursty sequence batches, AdamW with cosine annealing,
per-epoch checkpoints, and a fixed heldout-level loss track."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..dataset import (
    SequenceConfig,
    build_sequence,
    group_by_level,
    stack_tokenized,
    tokenize,
)
from ..numerics import OptimizerState, adamw_step, clip_grad_norm, cosine_lr, no_grad
from .checkpoint import load_checkpoint, restore_rng, rng_state, save_checkpoint
from .config import TrainConfig
from .network import PolicyModel

log = logging.getLogger(__name__)

_DATA_SALT = 0x64617461
_DROP_SALT = 0x64726F70
_HELDOUT_SALT = 0x68656C64


class TrainingAbortedError(RuntimeError):
    """Loss or gradients went non-finite; the last good parameters were saved."""

    def __init__(self, message: str, checkpoint_path: Path | None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


@dataclass
class TrainResult:
    model: PolicyModel
    loss_curve: list[dict]
    checkpoint_path: Path | None
    epoch_checkpoints: list[Path] = field(default_factory=list)


def _min_levels(seq_cfg: SequenceConfig) -> int:
    return 1 if seq_cfg.mode == "single" else max(2, seq_cfg.num_trajectories)


def _task_pools(records) -> dict[str, dict]:
    by_task: dict[str, list] = {}
    for r in records:
        by_task.setdefault(r.task_id, []).append(r)
    return {task: group_by_level(recs) for task, recs in sorted(by_task.items())}


def _split_heldout(pools: dict[str, dict], fraction: float, seq_cfg: SequenceConfig, seed: int):
    """Hold out a fraction of levels per task; None when any task is too small."""
    need = _min_levels(seq_cfg)
    rng = np.random.default_rng(np.random.SeedSequence([_HELDOUT_SALT, seed]))
    train_pools: dict[str, dict] = {}
    held_pools: dict[str, dict] = {}
    for task, pool in pools.items():
        levels = sorted(pool)
        n_held = int(len(levels) * fraction)
        if n_held < need or len(levels) - n_held < need:
            return pools, None
        order = rng.permutation(len(levels))
        held_keys = {levels[int(i)] for i in order[:n_held]}
        train_pools[task] = {k: v for k, v in pool.items() if k not in held_keys}
        held_pools[task] = {k: v for k, v in pool.items() if k in held_keys}
    return train_pools, held_pools


def _trim_padding(batch):
    """Drop all-padding tail columns: loss and gradients are unchanged
    (pad keys after the content are causally masked anyway), compute shrinks."""
    import dataclasses

    content = int(np.max((batch.token_kind != 0).sum(axis=1)))
    t = max(1, content)
    if t >= batch.length:
        return batch
    return dataclasses.replace(
        batch,
        token_kind=batch.token_kind[:, :t],
        obs_feats=batch.obs_feats[:, :t],
        action_ids=batch.action_ids[:, :t],
        rewards=batch.rewards[:, :t],
        target_ids=batch.target_ids[:, :t],
        loss_mask=batch.loss_mask[:, :t],
        traj_index=batch.traj_index[:, :t],
    )


def _build_batch(pools: dict[str, dict], seq_cfg: SequenceConfig, context_len: int, batch_size: int, rng):
    """batch_size sequences, each from a single uniformly drawn task pool."""
    tasks = sorted(pools)
    seqs = []
    for _ in range(batch_size):
        task = tasks[int(rng.integers(len(tasks)))] if len(tasks) > 1 else tasks[0]
        seqs.append(build_sequence(pools[task], seq_cfg, rng))
    batch = stack_tokenized([tokenize(s, seq_cfg.include_rewards, context_len) for s in seqs])
    return _trim_padding(batch)


def train(
    model: PolicyModel,
    records,
    seq_cfg: SequenceConfig,
    train_cfg: TrainConfig,
    out_dir: str | Path | None = None,
    dataset_fingerprint: str | None = None,
    resume_from: str | Path | None = None,
    keep_epoch_checkpoints: bool = True,
) -> TrainResult:
    """Train in place; returns the loss curve and final checkpoint path.

    Fully reproducible from train_cfg.seed: data order, dropout masks, and
    heldout slice all derive from it on separate streams.
    """
    if not records:
        raise ValueError("empty training dataset")
    if seq_cfg.include_rewards != model.cfg.include_rewards:
        raise ValueError("sequence reward tokens and model reward embedding disagree")
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    pools = _task_pools(records)
    train_pools, held_pools = _split_heldout(pools, train_cfg.heldout_fraction, seq_cfg, train_cfg.seed)
    n_train = sum(len(v) for pool in train_pools.values() for v in pool.values())

    e_eff = seq_cfg.num_trajectories if seq_cfg.mode == "multi" else 1
    steps_per_epoch = train_cfg.batches_per_epoch or max(
        1, round(n_train / (e_eff * train_cfg.batch_size))
    )
    total_steps = train_cfg.epochs * steps_per_epoch

    data_rng = np.random.default_rng(np.random.SeedSequence([_DATA_SALT, train_cfg.seed]))
    dropout_rng = np.random.default_rng(np.random.SeedSequence([_DROP_SALT, train_cfg.seed]))
    opt = OptimizerState(weight_decay=train_cfg.weight_decay)
    start_epoch = 0
    global_step = 0
    loss_curve: list[dict] = []

    if resume_from is not None:
        loaded, manifest, opt_loaded = load_checkpoint(resume_from, expected_config=model.cfg)
        model.params = loaded.params
        if opt_loaded is not None:
            opt = opt_loaded
            opt.weight_decay = train_cfg.weight_decay
        states = manifest.get("rng_states") or {}
        if "data" in states:
            data_rng = restore_rng(states["data"])
        if "dropout" in states:
            dropout_rng = restore_rng(states["dropout"])
        start_epoch = manifest["epoch"] + 1
        global_step = manifest["train_step"]
        log.info("resumed from %s at epoch %d, step %d", resume_from, start_epoch, global_step)

    held_batch = None
    if held_pools is not None:
        held_rng = np.random.default_rng(np.random.SeedSequence([_HELDOUT_SALT, train_cfg.seed, 1]))
        n_levels = sum(len(pool) for pool in held_pools.values())
        n_seq = min(64, 2 * n_levels)
        held_batch = _build_batch(held_pools, seq_cfg, model.cfg.context_len, n_seq, held_rng)

    def heldout_loss() -> float | None:
        if held_batch is None:
            return None
        with no_grad():
            return float(model.loss(held_batch, training=False).item())

    def save(path: Path, epoch: int) -> None:
        save_checkpoint(
            model,
            path,
            train_step=global_step,
            epoch=epoch,
            dataset_fingerprint=dataset_fingerprint,
            rng_states={"data": rng_state(data_rng), "dropout": rng_state(dropout_rng)},
            optimizer=opt,
        )

    epoch_paths: list[Path] = []
    last_good: Path | None = None
    for epoch in range(start_epoch, train_cfg.epochs):
        epoch_losses = []
        for _ in range(steps_per_epoch):
            batch = _build_batch(train_pools, seq_cfg, model.cfg.context_len, train_cfg.batch_size, data_rng)
            loss = model.loss(batch, training=True, dropout_rng=dropout_rng)
            loss_val = float(loss.item())
            if not math.isfinite(loss_val):
                if out_path is not None:
                    last_good = out_path / "ckpt-aborted-lastgood.bin"
                    save(last_good, epoch - 1)
                raise TrainingAbortedError(
                    f"non-finite loss {loss_val} at step {global_step}", last_good
                )
            model.zero_grads()
            loss.backward()
            grads = model.grads()
            clip_grad_norm(grads, train_cfg.grad_clip)
            lr = cosine_lr(global_step, total_steps, train_cfg.lr_max, train_cfg.lr_min)
            adamw_step(model.params, grads, opt, lr)
            model.zero_grads()
            global_step += 1
            epoch_losses.append(loss_val)

        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "heldout_loss": heldout_loss(),
            "lr": cosine_lr(min(global_step, total_steps), total_steps, train_cfg.lr_max, train_cfg.lr_min),
            "step": global_step,
        }
        loss_curve.append(entry)
        log.info(
            "epoch %d: train %.4f heldout %s lr %.2e",
            epoch, entry["train_loss"],
            "n/a" if entry["heldout_loss"] is None else f"{entry['heldout_loss']:.4f}",
            entry["lr"],
        )
        if out_path is not None and keep_epoch_checkpoints:
            p = out_path / f"ckpt-epoch{epoch:03d}.bin"
            save(p, epoch)
            epoch_paths.append(p)

    final_path = None
    if out_path is not None:
        final_path = out_path / "ckpt-final.bin"
        save(final_path, train_cfg.epochs - 1)
    return TrainResult(model=model, loss_curve=loss_curve, checkpoint_path=final_path, epoch_checkpoints=epoch_paths)
