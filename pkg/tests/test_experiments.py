import csv
import json
from pathlib import Path

import pytest
import yaml

from trajicl.experiments import (
    CommandError,
    ConfigError,
    apply_env_overrides,
    cmd_eval,
    cmd_gen_data,
    cmd_report,
    cmd_sweep,
    cmd_train,
    config_from_dict,
    dump_config,
    load_config,
)
from trajicl.experiments.cli import main

MICRO = {
    "name": "micro",
    "tasks": {"train": ["multiroom-n2"], "test": ["labyrinth-11"]},
    "data": {"levels_per_task": 6, "episodes_per_level": 2, "max_steps": 40},
    "sequence": {"mode": "multi", "num_trajectories": 2, "burstiness": 1.0},
    "model": {"preset": "tiny", "num_layers": 1, "d_model": 32, "num_heads": 2,
              "obs_embed_dim": 16, "context_len": 160, "dropout": 0.0},
    "train": {"batch_size": 4, "epochs": 1, "batches_per_epoch": 2, "lr_max": 1e-3,
              "heldout_fraction": 0.0, "seed": 0},
    "eval": {"k_demos": [0, 1], "episodes_per_level": 1, "num_levels": 2,
             "model_seeds": 1, "baseline": "hashmap"},
}


def micro_cfg(tmp_path, **overrides):
    raw = json.loads(json.dumps(MICRO))
    raw["out_dir"] = str(tmp_path / "run")
    for key, section in overrides.items():
        raw.setdefault(key, {}).update(section)
    return config_from_dict(raw)


def test_config_defaults_and_dump_round_trip():
    cfg = config_from_dict({})
    text = dump_config(cfg)
    again = config_from_dict(yaml.safe_load(text))
    assert again == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        config_from_dict({"train": {"learning_rate": 1.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"nonsense": {}})


def test_env_overrides_nested_and_typed():
    raw = apply_env_overrides(
        {"train": {"seed": 0}},
        environ={"TRAJICL_TRAIN__SEED": "7", "TRAJICL_DATA__STICKY_PROB": "0.25",
                 "TRAJICL_NAME": "enved", "PATH": "/ignored"},
    )
    cfg = config_from_dict(raw)
    assert cfg.train.seed == 7
    assert cfg.data.sticky_prob == 0.25
    assert cfg.name == "enved"


def test_load_config_file_plus_env(tmp_path, monkeypatch):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({"train": {"epochs": 3}}))
    monkeypatch.setenv("TRAJICL_TRAIN__EPOCHS", "5")
    cfg = load_config(path)
    assert cfg.train.epochs == 5


def test_gen_data_outputs_and_determinism(tmp_path):
    cfg = micro_cfg(tmp_path)
    out = cmd_gen_data(cfg)
    data = out / "multiroom-n2.traj"
    assert data.exists()
    assert (out / "stats.txt").exists()
    assert (out / "manifest.json").exists()
    first = data.read_bytes()
    cmd_gen_data(cfg)
    assert data.read_bytes() == first  # byte-identical rerun


def test_train_then_eval_transformer(tmp_path):
    cfg = micro_cfg(tmp_path, eval={"baseline": "transformer"})
    cmd_gen_data(cfg)
    finals = cmd_train(cfg, seeds=[0])
    assert finals[0].exists()
    run = Path(cfg.out_dir)
    loss_csv = run / "train-seed0" / "loss.csv"
    assert loss_csv.exists()
    header = loss_csv.read_text().splitlines()[0]
    assert header == "epoch,step,train_loss,heldout_loss,lr"
    reports = cmd_eval(cfg)
    report = reports["labyrinth-11"]
    assert [e.k for e in report.entries] == [0, 1]
    assert (run / "eval" / "transformer-labyrinth-11.csv").exists()
    assert (run / "eval" / "transformer-labyrinth-11.json").exists()


def test_train_missing_dataset_is_clean_error(tmp_path):
    cfg = micro_cfg(tmp_path)
    with pytest.raises(CommandError, match="gen-data"):
        cmd_train(cfg)


def test_eval_hashmap_needs_no_checkpoint(tmp_path):
    cfg = micro_cfg(tmp_path)
    reports = cmd_eval(cfg)
    assert "labyrinth-11" in reports


def test_eval_missing_checkpoint_is_clean_error(tmp_path):
    cfg = micro_cfg(tmp_path, eval={"baseline": "transformer"})
    with pytest.raises(CommandError, match="checkpoint"):
        cmd_eval(cfg)


def test_cli_print_config_and_exit_codes(tmp_path, capsys):
    assert main(["print-config"]) == 0
    out = capsys.readouterr().out
    assert "sequence:" in out and "burstiness:" in out

    # configuration error -> exit 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("train:\n  nonsense: 1\n")
    assert main(["print-config", "--config", str(bad)]) == 2


def test_cli_gen_data_stats_train_eval(tmp_path, capsys):
    cfg_path = tmp_path / "cfg.yaml"
    raw = json.loads(json.dumps(MICRO))
    raw["out_dir"] = str(tmp_path / "run")
    cfg_path.write_text(yaml.safe_dump(raw))

    assert main(["gen-data", "--config", str(cfg_path)]) == 0
    data = tmp_path / "run" / "data" / "multiroom-n2.traj"
    assert data.exists()

    assert main(["stats", str(data)]) == 0
    out = capsys.readouterr().out
    assert "multiroom-n2" in out

    assert main(["train", "--config", str(cfg_path), "--seeds", "0"]) == 0
    assert main(["eval", "--config", str(cfg_path)]) == 0
    out = capsys.readouterr().out
    assert "labyrinth-11 k=0" in out and "labyrinth-11 k=1" in out


def test_sweep_burstiness_and_report(tmp_path):
    cfg = micro_cfg(tmp_path, eval={"baseline": "transformer"})
    failures = cmd_sweep(cfg, "burstiness", [0.0, 1.0])
    assert failures == 0
    summary = Path(cfg.out_dir) / "sweep-burstiness" / "summary.csv"
    assert summary.exists()
    with open(summary) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["value"] for r in rows} == {"0.0", "1.0"}
    assert set(rows[0]) == {"axis", "value", "task", "k", "seed", "episodic_return", "accuracy"}
    # shared-data cells must reference one dataset generation
    assert (Path(cfg.out_dir) / "sweep-burstiness" / "shared" / "data").exists()

    written = cmd_report([cfg.out_dir], tmp_path / "report")
    names = {p.name for p in written}
    assert "burstiness-curve.csv" in names


def test_report_empty_dir_is_clean_error(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(CommandError):
        cmd_report([tmp_path / "empty"], tmp_path / "out")


def test_sweep_rejects_unknown_axis(tmp_path):
    cfg = micro_cfg(tmp_path)
    with pytest.raises(ConfigError):
        cmd_sweep(cfg, "nonsense", [1])
