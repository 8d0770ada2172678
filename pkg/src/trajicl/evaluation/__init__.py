"""Few-shot evaluation, baselines, accuracy metric, and failure quadrants."""

from .clustering import QUADRANT_NAMES, QuadrantClustering, kmeans_quadrants, quadrant_name
from .metrics import accuracy_counts, demo_action_table, in_context_action_accuracy
from .policies import ExpertPolicy, HashmapPolicy, RandomPolicy, TransformerPolicy, hashmap_action
from .protocol import (
    EVAL_CSV_COLUMNS,
    EvalEntry,
    EvalProtocol,
    EvalReport,
    EvalRow,
    collect_eval_demos,
    evaluate_policy,
    run_episode,
    write_report_csv,
    write_report_json,
)
