"""Oracle policies and success-filtered demonstration collection."""

from .collect import (
    Demonstration,
    DemoStep,
    collect_demonstrations,
    episode_seed_for,
    replay_matches,
    rollout_expert,
)
from .planner import PlanningError, bfs_plan, clear_plan_cache, goal_distance_field, path_length
