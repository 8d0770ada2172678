"""Command implementations behind the CLI: data generation, training,
evaluation, axis sweeps, and plot-ready report aggregation."""

from __future__ import annotations

import csv
import dataclasses
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..dataset import dataset_stats, format_stats, read_dataset, records_from_demonstrations, write_dataset
from ..evaluation import (
    EvalProtocol,
    EvalReport,
    ExpertPolicy,
    HashmapPolicy,
    RandomPolicy,
    TransformerPolicy,
    evaluate_policy,
    write_report_csv,
    write_report_json,
)
from ..expert import collect_demonstrations
from ..gridworld import encoded_observation_dim
from ..model import TrainConfig, init_model, load_checkpoint, train
from .config import ConfigError, RunConfig, config_to_dict, dump_config
from .manifest import RunManifest, sha256_file

log = logging.getLogger(__name__)

SWEEP_CSV_COLUMNS = ["axis", "value", "task", "k", "seed", "episodic_return", "accuracy"]
SWEEP_AXES = (
    "burstiness",
    "dataset_size",
    "model_size",
    "task_diversity",
    "stochasticity_matrix",
    "k_shot",
    "reward_tokens",
)


class CommandError(RuntimeError):
    """A command could not run (missing inputs, bad arguments)."""


def _replace(cfg, **kw):
    return dataclasses.replace(cfg, **kw)


# -- gen-data ------------------------------------------------------------------


def cmd_gen_data(cfg: RunConfig, out_dir: str | Path | None = None) -> Path:
    """Collect success-filtered expert datasets for every train task."""
    out = Path(out_dir or cfg.out_dir) / "data"
    out.mkdir(parents=True, exist_ok=True)
    dyn = cfg.data.dynamics()
    manifest = RunManifest("gen-data", config_to_dict(cfg))
    all_records = []
    for spec in cfg.train_tasks():
        seeds = [cfg.data.level_seed_base + i for i in range(cfg.data.levels_per_task)]
        demos = collect_demonstrations(spec, seeds, cfg.data.episodes_per_level, dyn)
        records = records_from_demonstrations(demos)
        path = out / f"{spec.task_id}.traj"
        write_dataset(records, path)
        manifest.add_output(path)
        all_records.extend(records)
        log.info("gen-data: %s -> %d trajectories", spec.task_id, len(records))
    stats = dataset_stats(all_records)
    stats_path = out / "stats.txt"
    stats_path.write_text(format_stats(stats) + "\n")
    manifest.add_output(stats_path)
    manifest.write(out / "manifest.json")
    return out


def _dataset_paths(cfg: RunConfig, data_dir: Path) -> list[Path]:
    paths = [data_dir / f"{spec.task_id}.traj" for spec in cfg.train_tasks()]
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise CommandError(
            f"missing dataset files {missing}; run gen-data first (looked in {data_dir})"
        )
    return paths


def _load_records(paths: list[Path]):
    records = []
    for p in paths:
        records.extend(read_dataset(p))
    if not records:
        raise CommandError(f"datasets {', '.join(map(str, paths))} hold zero trajectories")
    return records


# -- train ---------------------------------------------------------------------


def cmd_train(
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    seeds: list[int] | None = None,
    resume: str | Path | None = None,
) -> list[Path]:
    """Train one model per seed; emits checkpoints, loss CSVs, manifests."""
    root = Path(out_dir or cfg.out_dir)
    data_dir = root / "data"
    paths = _dataset_paths(cfg, data_dir)
    records = _load_records(paths)
    fingerprint = ",".join(sha256_file(p)[:16] for p in paths)
    obs_dim = encoded_observation_dim(cfg.data.crop_size)
    model_cfg = cfg.model.model_config(obs_dim)
    seeds = list(seeds) if seeds is not None else [cfg.train.seed]

    finals = []
    for seed in seeds:
        run_dir = root / f"train-seed{seed}"
        run_dir.mkdir(parents=True, exist_ok=True)
        manifest = RunManifest("train", config_to_dict(cfg), seeds=[seed])
        for p in paths:
            manifest.add_input(p)
        model = init_model(model_cfg, seed)
        tcfg = _replace(cfg.train, seed=seed)
        result = train(
            model, records, cfg.sequence, tcfg,
            out_dir=run_dir,
            dataset_fingerprint=fingerprint,
            resume_from=resume,
        )
        loss_csv = run_dir / "loss.csv"
        with open(loss_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epoch", "step", "train_loss", "heldout_loss", "lr"])
            for e in result.loss_curve:
                writer.writerow([e["epoch"], e["step"], f"{e['train_loss']:.6f}",
                                 "" if e["heldout_loss"] is None else f"{e['heldout_loss']:.6f}",
                                 f"{e['lr']:.3e}"])
        manifest.add_output(loss_csv)
        manifest.add_output(result.checkpoint_path)
        manifest.note("final_train_loss", result.loss_curve[-1]["train_loss"])
        manifest.write(run_dir / "manifest.json")
        finals.append(result.checkpoint_path)
        log.info("train: seed %d done, final loss %.4f", seed, result.loss_curve[-1]["train_loss"])
    return finals


# -- eval ----------------------------------------------------------------------


def _eval_protocol(cfg: RunConfig) -> EvalProtocol:
    dyn = _replace(cfg.data.dynamics(), sticky_prob=cfg.eval.sticky_prob)
    return EvalProtocol(
        k_demos=tuple(cfg.eval.k_demos),
        episodes_per_level=cfg.eval.episodes_per_level,
        num_levels=cfg.eval.num_levels,
        model_seeds=cfg.eval.model_seeds,
        dynamics=dyn,
        decode_mode=cfg.eval.decode_mode,
        temperature=cfg.eval.temperature,
        level_seed_base=cfg.eval.level_seed_base,
    )


def _build_policies(cfg: RunConfig, checkpoint_dir: Path):
    baseline = cfg.eval.baseline
    n = cfg.eval.model_seeds
    if baseline == "transformer":
        policies = []
        obs_dim = encoded_observation_dim(cfg.data.crop_size)
        expected = cfg.model.model_config(obs_dim)
        for s in range(n):
            path = checkpoint_dir / f"train-seed{s}" / "ckpt-final.bin"
            if not path.exists():
                raise CommandError(f"missing checkpoint {path}; train seed {s} first")
            model, _, _ = load_checkpoint(path, expected_config=expected)
            policies.append(TransformerPolicy(model, cfg.eval.decode_mode, cfg.eval.temperature))
        return policies
    if baseline == "hashmap":
        return [HashmapPolicy() for _ in range(n)]
    if baseline == "expert":
        return [ExpertPolicy() for _ in range(n)]
    if baseline == "random":
        return [RandomPolicy() for _ in range(n)]
    raise ConfigError(f"unknown eval baseline {baseline!r}")


def cmd_eval(
    cfg: RunConfig,
    out_dir: str | Path | None = None,
    checkpoint_dir: str | Path | None = None,
) -> dict[str, EvalReport]:
    """Evaluate the configured policy on every eval task; JSON + CSV per task."""
    root = Path(out_dir or cfg.out_dir)
    ckpt_dir = Path(checkpoint_dir) if checkpoint_dir is not None else root
    eval_dir = root / "eval"
    eval_dir.mkdir(parents=True, exist_ok=True)
    protocol = _eval_protocol(cfg)
    policies = _build_policies(cfg, ckpt_dir)
    manifest = RunManifest("eval", config_to_dict(cfg), seeds=range(cfg.eval.model_seeds))

    reports = {}
    for spec in cfg.eval_tasks():
        report = evaluate_policy(policies, spec, protocol)
        base = eval_dir / f"{cfg.eval.baseline}-{spec.task_id}"
        write_report_json(report, base.with_suffix(".json"))
        write_report_csv(report, base.with_suffix(".csv"))
        manifest.add_output(base.with_suffix(".json"))
        manifest.add_output(base.with_suffix(".csv"))
        reports[spec.task_id] = report
        for e in report.entries:
            log.info("eval %s %s k=%d: return %.3f +- %.3f",
                     cfg.eval.baseline, spec.task_id, e.k, e.mean_return, e.std_return)
    manifest.write(eval_dir / "manifest.json")
    return reports


# -- stats / print-config --------------------------------------------------------


def cmd_stats(dataset_paths: list[str | Path]) -> str:
    records = []
    for p in dataset_paths:
        if not Path(p).exists():
            raise CommandError(f"no such dataset file: {p}")
        records.extend(read_dataset(p))
    return format_stats(dataset_stats(records))


def cmd_print_config(cfg: RunConfig) -> str:
    return dump_config(cfg)


# -- sweep -----------------------------------------------------------------------


def _seed_rows_from_report(report: EvalReport, axis: str, value, model_seeds: int):
    rows = []
    for k in sorted({r.k for r in report.rows}):
        for s in range(model_seeds):
            s_rows = [r for r in report.rows if r.k == k and r.seed == s]
            if not s_rows:
                continue
            matched = sum(r.matched for r in s_rows)
            acc = sum(r.matches for r in s_rows) / matched if matched else ""
            rows.append({
                "axis": axis,
                "value": value,
                "task": report.task_id,
                "k": k,
                "seed": s,
                "episodic_return": float(np.mean([r.episodic_return for r in s_rows])),
                "accuracy": acc,
            })
    return rows


def _sweep_cells(cfg: RunConfig, axis: str, values: list):
    """Per-cell configs. Cells share eval level seeds by construction."""
    if axis == "burstiness":
        return [(f"pb{v}", _replace(cfg, sequence=_replace(cfg.sequence, burstiness=float(v))), v)
                for v in values]
    if axis == "dataset_size":
        return [(f"levels{int(v)}", _replace(cfg, data=_replace(cfg.data, levels_per_task=int(v))), v)
                for v in values]
    if axis == "model_size":
        return [(f"model-{v}", _replace(cfg, model=_replace(cfg.model, preset=str(v))), v)
                for v in values]
    if axis == "task_diversity":
        base_tasks = [s.task_id for s in cfg.train_tasks()]
        budget = cfg.data.levels_per_task * len(base_tasks)
        cells = []
        for v in values:
            n = int(v)
            if n < 1 or n > len(base_tasks):
                raise ConfigError(f"task_diversity value {n} outside 1..{len(base_tasks)}")
            cells.append((
                f"tasks{n}",
                _replace(
                    cfg,
                    tasks=_replace(cfg.tasks, train=tuple(base_tasks[:n])),
                    data=_replace(cfg.data, levels_per_task=budget // n),
                ),
                n,
            ))
        return cells
    if axis == "reward_tokens":
        cells = []
        for v in values:
            flag = bool(v)
            cells.append((
                f"rewards-{'on' if flag else 'off'}",
                _replace(
                    cfg,
                    sequence=_replace(cfg.sequence, include_rewards=flag),
                    model=_replace(cfg.model, include_rewards=flag),
                ),
                flag,
            ))
        return cells
    if axis == "k_shot":
        ks = tuple(int(v) for v in values)
        return [("kshot", _replace(cfg, eval=_replace(cfg.eval, k_demos=ks)), "all")]
    raise ConfigError(f"unknown sweep axis {axis!r}; have {SWEEP_AXES}")


_DATA_AXES = {"dataset_size", "task_diversity"}  # cells that need their own dataset


def cmd_sweep(
    cfg: RunConfig,
    axis: str,
    values: list,
    out_dir: str | Path | None = None,
) -> int:
    """Run one experiment axis end to end; returns the number of failed cells."""
    root = Path(out_dir or cfg.out_dir) / f"sweep-{axis}"
    root.mkdir(parents=True, exist_ok=True)
    seeds = list(range(cfg.eval.model_seeds))
    manifest = RunManifest("sweep", config_to_dict(cfg), seeds=seeds)
    manifest.note("axis", axis)
    manifest.note("values", list(values))

    rows = []
    failures = []
    if axis == "stochasticity_matrix":
        rows, failures = _sweep_stochasticity(cfg, root, seeds)
    else:
        cells = _sweep_cells(cfg, axis, values)
        shared_data = None
        if axis not in _DATA_AXES:
            shared_root = root / "shared"
            cmd_gen_data(cfg, out_dir=shared_root)
            shared_data = shared_root
        for name, cell_cfg, value in cells:
            cell_dir = root / name
            try:
                if shared_data is None:
                    cmd_gen_data(cell_cfg, out_dir=cell_dir)
                    cmd_train(cell_cfg, out_dir=cell_dir, seeds=seeds)
                else:
                    _train_with_data(cell_cfg, cell_dir, shared_data, seeds)
                reports = cmd_eval(cell_cfg, out_dir=cell_dir, checkpoint_dir=cell_dir)
                for report in reports.values():
                    rows.extend(_seed_rows_from_report(report, axis, value, cfg.eval.model_seeds))
            except Exception as exc:  # record, continue with remaining cells
                log.exception("sweep cell %s failed", name)
                failures.append({"cell": name, "error": f"{type(exc).__name__}: {exc}"})

    summary = root / "summary.csv"
    with open(summary, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_CSV_COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
    manifest.add_output(summary)
    manifest.note("failures", failures)
    manifest.write(root / "manifest.json")
    if failures:
        log.error("sweep finished with %d failed cells", len(failures))
    return len(failures)


def _train_with_data(cell_cfg: RunConfig, cell_dir: Path, data_root: Path, seeds: list[int]):
    """Train into cell_dir while reading datasets from a shared data dir."""
    cell_dir.mkdir(parents=True, exist_ok=True)
    link = cell_dir / "data"
    if not link.exists():
        link.symlink_to((data_root / "data").resolve(), target_is_directory=True)
    return cmd_train(cell_cfg, out_dir=cell_dir, seeds=seeds)


def _sweep_stochasticity(cfg: RunConfig, root: Path, seeds: list[int]):
    """2x2 train-dynamics x eval-dynamics table."""
    p = cfg.data.sticky_prob if cfg.data.sticky_prob > 0 else 0.1
    rows, failures = [], []
    table = {}
    for train_name, train_p in (("deterministic", 0.0), ("sticky", p)):
        cell_dir = root / f"train-{train_name}"
        cell_cfg = _replace(cfg, data=_replace(cfg.data, sticky_prob=train_p))
        try:
            cmd_gen_data(cell_cfg, out_dir=cell_dir)
            cmd_train(cell_cfg, out_dir=cell_dir, seeds=seeds)
            for eval_name, eval_p in (("deterministic", 0.0), ("sticky", p)):
                eval_cfg = _replace(cell_cfg, eval=_replace(cell_cfg.eval, sticky_prob=eval_p))
                out_cell = cell_dir / f"eval-{eval_name}"
                reports = cmd_eval(eval_cfg, out_dir=out_cell, checkpoint_dir=cell_dir)
                cell_rows = []
                for report in reports.values():
                    cell_rows.extend(_seed_rows_from_report(
                        report, "stochasticity_matrix", f"{train_name}/{eval_name}",
                        cfg.eval.model_seeds))
                rows.extend(cell_rows)
                one_shot = [r for r in cell_rows if r["k"] >= 1]
                returns = [r["episodic_return"] for r in one_shot] or [float("nan")]
                table[(train_name, eval_name)] = (float(np.mean(returns)), float(np.std(returns)))
        except Exception as exc:
            log.exception("stochasticity cell train-%s failed", train_name)
            failures.append({"cell": f"train-{train_name}", "error": f"{type(exc).__name__}: {exc}"})

    matrix = root / "matrix.csv"
    with open(matrix, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["train_dynamics", "eval_deterministic_mean", "eval_deterministic_std",
                         "eval_sticky_mean", "eval_sticky_std"])
        for train_name in ("deterministic", "sticky"):
            det = table.get((train_name, "deterministic"), (float("nan"), float("nan")))
            stoch = table.get((train_name, "sticky"), (float("nan"), float("nan")))
            writer.writerow([train_name, f"{det[0]:.4f}", f"{det[1]:.4f}",
                             f"{stoch[0]:.4f}", f"{stoch[1]:.4f}"])
    return rows, failures


# -- report ------------------------------------------------------------------------


def cmd_report(run_dirs: list[str | Path], out_dir: str | Path) -> list[Path]:
    """Aggregate eval/sweep CSVs into plot-ready mean +- std tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eval_csvs: list[Path] = []
    sweep_csvs: list[Path] = []
    for d in run_dirs:
        p = Path(d)
        if not p.exists():
            raise CommandError(f"no such run directory: {p}")
        eval_csvs.extend(sorted(p.rglob("eval/*.csv")))
        eval_csvs.extend(sorted(p.rglob("eval-*/eval/*.csv")))
        sweep_csvs.extend(sorted(p.rglob("sweep-*/summary.csv")))
    eval_csvs = sorted(set(eval_csvs))
    if not eval_csvs and not sweep_csvs:
        raise CommandError(f"no eval or sweep CSVs found under {[str(d) for d in run_dirs]}")

    written = []
    if eval_csvs:
        grouped = defaultdict(list)  # (task, k) -> per-seed means
        for path in eval_csvs:
            per_seed = defaultdict(list)
            with open(path) as fh:
                reader = csv.DictReader(fh)
                expected = {"task", "k", "seed", "episodic_return"}
                if reader.fieldnames is None or not expected.issubset(reader.fieldnames):
                    raise CommandError(f"schema mismatch in {path}: columns {reader.fieldnames}")
                for row in reader:
                    per_seed[(row["task"], int(row["k"]), int(row["seed"]))].append(
                        float(row["episodic_return"]))
            for (task, k, seed), vals in per_seed.items():
                grouped[(task, k)].append(float(np.mean(vals)))
        path = out / "kshot-curve.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["task", "k", "mean_return", "std_return", "n_seeds"])
            for (task, k), vals in sorted(grouped.items()):
                writer.writerow([task, k, f"{np.mean(vals):.6f}", f"{np.std(vals):.6f}", len(vals)])
        written.append(path)

    sweep_grouped = defaultdict(list)  # (axis, value, task, k) -> seed returns
    for path in sweep_csvs:
        with open(path) as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != SWEEP_CSV_COLUMNS:
                raise CommandError(f"schema mismatch in {path}: columns {reader.fieldnames}")
            for row in reader:
                key = (row["axis"], row["value"], row["task"], int(row["k"]))
                sweep_grouped[key].append(float(row["episodic_return"]))
    for axis in sorted({k[0] for k in sweep_grouped}):
        path = out / f"{axis}-curve.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["value", "task", "k", "mean_return", "std_return", "n_seeds"])
            for (ax, value, task, k), vals in sorted(sweep_grouped.items()):
                if ax != axis:
                    continue
                writer.writerow([value, task, k, f"{np.mean(vals):.6f}", f"{np.std(vals):.6f}", len(vals)])
        written.append(path)
    return written
