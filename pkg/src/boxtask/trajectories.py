"""Trajectory records and the delimiter-separated interchange format shared
by simulation, the session service, and fitting.

Columns: subject_id, trial, action_type (attempt|observe), box_id, key_id
(empty for observe), outcome (0/1 for attempts, revealed count for observes).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .task import Attempt, Observe, Outcome

COLUMNS = ("subject_id", "trial", "action_type", "box_id", "key_id", "outcome")


class TrajectoryFormatError(ValueError):
    """Malformed trajectory rows; message lists offending line numbers."""


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    action: Attempt | Observe
    outcome: Outcome


@dataclass
class Trajectory:
    """One subject's ordered trial records plus run-level results."""

    subject_id: str
    variant: str = ""
    records: list[TrialRecord] = field(default_factory=list)
    final_hypothesis: str | None = None
    final_rule: str | None = None
    generalization: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    log: list[str] = field(default_factory=list)

    @property
    def n_trials(self) -> int:
        return len(self.records)

    def completed(self, n_boxes: int = 5) -> bool:
        return sum(1 for r in self.records if isinstance(r.action, Attempt) and r.outcome.success) == n_boxes

    def n_attempts(self) -> int:
        return sum(1 for r in self.records if isinstance(r.action, Attempt))

    def n_observes(self) -> int:
        return sum(1 for r in self.records if isinstance(r.action, Observe))


def _record_row(subject_id: str, rec: TrialRecord) -> list[str]:
    if isinstance(rec.action, Attempt):
        return [
            subject_id,
            str(rec.trial),
            "attempt",
            rec.action.box_id,
            rec.action.key_id,
            "1" if rec.outcome.success else "0",
        ]
    return [
        subject_id,
        str(rec.trial),
        "observe",
        rec.action.box_id,
        "",
        str(rec.outcome.revealed_number),
    ]


def write_trajectories(path: str | Path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "w", newline="") as f:
        f.write(dumps_trajectories(trajectories))


def dumps_trajectories(trajectories: Iterable[Trajectory]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(COLUMNS)
    for traj in trajectories:
        for rec in traj.records:
            writer.writerow(_record_row(traj.subject_id, rec))
    return buf.getvalue()


def _parse_rows(rows, boxes=None, keys=None) -> list[Trajectory]:
    box_ids = {b.id for b in boxes} if boxes is not None else None
    key_ids = {k.id for k in keys} if keys is not None else None
    by_subject: dict[str, Trajectory] = {}
    errors: list[str] = []
    for lineno, row in rows:
        if len(row) != len(COLUMNS):
            errors.append(f"line {lineno}: expected {len(COLUMNS)} columns, got {len(row)}")
            continue
        subject, trial_s, kind, box_id, key_id, outcome_s = [c.strip() for c in row]
        try:
            trial = int(trial_s)
            if trial < 1:
                raise ValueError
        except ValueError:
            errors.append(f"line {lineno}: bad trial {trial_s!r}")
            continue
        if box_ids is not None and box_id not in box_ids:
            errors.append(f"line {lineno}: unknown box {box_id!r}")
            continue
        if kind == "attempt":
            if not key_id:
                errors.append(f"line {lineno}: attempt rows need a key_id")
                continue
            if key_ids is not None and key_id not in key_ids:
                errors.append(f"line {lineno}: unknown key {key_id!r}")
                continue
            if outcome_s not in ("0", "1"):
                errors.append(f"line {lineno}: attempt outcome must be 0 or 1, got {outcome_s!r}")
                continue
            rec = TrialRecord(trial, Attempt(box_id, key_id), Outcome(success=outcome_s == "1"))
        elif kind == "observe":
            if key_id:
                errors.append(f"line {lineno}: observe rows leave key_id empty")
                continue
            try:
                revealed = int(outcome_s)
            except ValueError:
                errors.append(f"line {lineno}: observe outcome must be a count, got {outcome_s!r}")
                continue
            rec = TrialRecord(trial, Observe(box_id), Outcome(revealed_number=revealed))
        else:
            errors.append(f"line {lineno}: unknown action_type {kind!r}")
            continue
        traj = by_subject.setdefault(subject, Trajectory(subject_id=subject))
        if traj.records and rec.trial != traj.records[-1].trial + 1:
            errors.append(
                f"line {lineno}: trial {rec.trial} does not follow {traj.records[-1].trial}"
            )
            continue
        if not traj.records and rec.trial != 1:
            errors.append(f"line {lineno}: subject {subject!r} must start at trial 1")
            continue
        traj.records.append(rec)
    if errors:
        raise TrajectoryFormatError("; ".join(errors))
    return list(by_subject.values())


def loads_trajectories(text: str, boxes=None, keys=None) -> list[Trajectory]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise TrajectoryFormatError("empty trajectory data")
    start = 2 if [c.strip() for c in rows[0]] == list(COLUMNS) else 1
    body = [(i, row) for i, row in enumerate(rows[start - 1 :], start=start) if row]
    if not body:
        raise TrajectoryFormatError("no trajectory rows")
    return _parse_rows(body, boxes=boxes, keys=keys)


def read_trajectories(path: str | Path, boxes=None, keys=None) -> list[Trajectory]:
    """Parse and validate a trajectory file; raises TrajectoryFormatError with
    line numbers on malformed rows."""
    with open(path, newline="") as f:
        return loads_trajectories(f.read(), boxes=boxes, keys=keys)
