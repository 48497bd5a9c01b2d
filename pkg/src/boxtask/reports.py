"""Plot-ready behavioral summaries: attempt/observe counts, consecutive
repeats, first-action classification, final-rule and generalization rates."""

from __future__ import annotations

from collections import Counter
from typing import Sequence

from .task import Attempt, GENERALIZATION_TRIALS, Observe, TaskSetup
from .trajectories import Trajectory


def consecutive_repeats(traj: Trajectory) -> int:
    """How many trials retried the exact key-box pair attempted on the
    previous trial."""
    repeats = 0
    prev = None
    for rec in traj.records:
        if isinstance(rec.action, Attempt):
            pair = (rec.action.key_id, rec.action.box_id)
            if pair == prev:
                repeats += 1
            prev = pair
        else:
            prev = None
    return repeats


def first_action_kind(traj: Trajectory, setup: TaskSetup) -> str:
    """'observe', 'attempt-color-match', or 'attempt-other' for trial 1."""
    if not traj.records:
        return "none"
    action = traj.records[0].action
    if isinstance(action, Observe):
        return "observe"
    key = next(k for k in setup.keys if k.id == action.key_id)
    box = next(b for b in setup.boxes if b.id == action.box_id)
    return "attempt-color-match" if key.color == box.color else "attempt-other"


def _hist(values) -> dict[str, int]:
    return {str(k): v for k, v in sorted(Counter(values).items())}


def correct_generalization_count(traj: Trajectory) -> int:
    correct = {t.correct_key_id for t in GENERALIZATION_TRIALS}
    return sum(1 for choice in traj.generalization if choice in correct)


def summarize_runs(trajectories: Sequence[Trajectory], setup: TaskSetup) -> dict:
    """Aggregate a batch of simulated or played runs into the quantities the
    population figures are drawn from."""
    n = len(trajectories)
    completed = [t for t in trajectories if t.completed(len(setup.boxes))]
    rules = Counter(t.final_rule for t in trajectories if t.final_rule)
    rules_completed = Counter(t.final_rule for t in completed if t.final_rule)
    gen_counts = [correct_generalization_count(t) for t in trajectories if t.generalization]
    out = {
        "runs": n,
        "completion_rate": len(completed) / n if n else 0.0,
        "trials_to_termination": _hist(t.n_trials for t in trajectories),
        "attempt_counts": _hist(t.n_attempts() for t in trajectories),
        "observe_counts": _hist(t.n_observes() for t in trajectories),
        "consecutive_repeats": _hist(consecutive_repeats(t) for t in trajectories),
        "first_action": _hist(first_action_kind(t, setup) for t in trajectories),
        "final_rule_distribution": dict(rules),
        "final_rule_distribution_completed": dict(rules_completed),
    }
    if completed:
        out["number_rule_fraction_completed"] = rules_completed.get("number", 0) / len(completed)
    if gen_counts:
        out["generalization_correct_mean"] = sum(gen_counts) / (
            len(gen_counts) * len(GENERALIZATION_TRIALS)
        )
    return out
