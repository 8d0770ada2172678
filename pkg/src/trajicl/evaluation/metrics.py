"""In-context action accuracy: of the rollout steps whose observation
appears in the context demos, the fraction where the agent copied the
demonstrated action. Absent (None) when no rollout state matches."""

from __future__ import annotations


def demo_action_table(demos) -> dict[bytes, int]:
    table: dict[bytes, int] = {}
    for demo in demos:  # later demos win, same rule as the hashmap baseline
        for st in demo.steps:
            table[st.obs.key()] = st.action
    return table


def accuracy_counts(rollout_steps, demos) -> tuple[int, int]:
    """(matched_states, matching_actions) for one rollout against its demos."""
    table = demo_action_table(demos)
    matched = 0
    matches = 0
    for obs, action in rollout_steps:
        demo_action = table.get(obs.key())
        if demo_action is None:
            continue
        matched += 1
        if action == demo_action:
            matches += 1
    return matched, matches


def in_context_action_accuracy(rollout_steps, demos) -> float | None:
    matched, matches = accuracy_counts(rollout_steps, demos)
    if matched == 0:
        return None
    return matches / matched
