"""Experiment orchestration: run configs, manifests, CLI commands, sweeps."""

from .commands import (
    SWEEP_AXES,
    SWEEP_CSV_COLUMNS,
    CommandError,
    cmd_eval,
    cmd_gen_data,
    cmd_print_config,
    cmd_report,
    cmd_stats,
    cmd_sweep,
    cmd_train,
)
from .config import (
    ConfigError,
    DataConfig,
    EvalSection,
    ModelSection,
    RunConfig,
    TasksConfig,
    apply_env_overrides,
    config_from_dict,
    config_to_dict,
    dump_config,
    load_config,
)
from .manifest import RunManifest, config_hash, read_manifest, sha256_file, sha256_text
