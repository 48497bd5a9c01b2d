"""HTTP session service hosting live Box Task episodes for the play UI.

Sessions walk the four phases practice -> test -> generalization -> done.
The test-phase wall clock is authoritative here: actions after the time
limit get 410 and the session moves on to generalization. Completed events
append to a JSONL log so a restart loses nothing.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .prompts import TEACHER_SCRIPT
from .task import (
    Attempt,
    AttemptOnOpenBoxError,
    BoxTaskEnv,
    EnvConfig,
    GENERALIZATION_TRIALS,
    Observe,
    TaskSetup,
    UnknownIdError,
    EMPIRICAL_RELIABILITY,
)
from .trajectories import Trajectory, TrialRecord, dumps_trajectories

DEFAULT_TIME_LIMIT = 300.0
PHASES = ("practice", "test", "generalization", "done")

# Served sessions enforce the wall clock, not the trial budget.
_SERVE_MAX_TRIALS = 100_000


def default_session_config(seed: int) -> EnvConfig:
    """The in-person play condition: hidden counts, empirically unreliable keys."""
    return EnvConfig(
        reliability=EMPIRICAL_RELIABILITY,
        observability="partial",
        max_trials=_SERVE_MAX_TRIALS,
        seed=seed,
    )


@dataclass
class Session:
    session_id: str
    env: BoxTaskEnv
    phase: str = "practice"
    started_at: float | None = None
    time_limit: float = DEFAULT_TIME_LIMIT
    trajectory: Trajectory = field(default_factory=lambda: Trajectory(subject_id=""))
    choices: dict[int, str] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def remaining(self, now: float) -> float:
        if self.started_at is None:
            return self.time_limit
        return max(0.0, self.time_limit - (now - self.started_at))

    def expired(self, now: float) -> bool:
        return self.started_at is not None and now - self.started_at > self.time_limit


class ActionRequest(BaseModel):
    type: str
    box_id: str
    key_id: str | None = None


class ChoiceRequest(BaseModel):
    trial: int
    key_id: str


class CreateRequest(BaseModel):
    seed: int | None = None
    subject_id: str | None = None


def _box_payload(env: BoxTaskEnv, full: bool) -> list[dict]:
    out = []
    for box in env.boxes:
        item = {
            "id": box.id,
            "color": box.color,
            "shape": box.shape,
            "position": box.position,
        }
        if full:
            item["number"] = box.true_number
        out.append(item)
    return out


def _key_payload(env: BoxTaskEnv) -> list[dict]:
    return [
        {"id": k.id, "color": k.color, "number": k.number, "shape": k.shape}
        for k in env.keys
    ]


def _state_payload(session: Session, now: float) -> dict:
    env = session.env
    state = env.state
    revealed = {
        env.boxes[i].id: next(iter(state.number_belief[i]))
        for i in range(len(env.boxes))
        if state.observed[i] and env.config.observability == "partial"
    }
    history = []
    for rec in session.trajectory.records:
        if isinstance(rec.action, Attempt):
            history.append(
                {
                    "trial": rec.trial,
                    "type": "attempt",
                    "box_id": rec.action.box_id,
                    "key_id": rec.action.key_id,
                    "success": rec.outcome.success,
                }
            )
        else:
            history.append(
                {
                    "trial": rec.trial,
                    "type": "observe",
                    "box_id": rec.action.box_id,
                    "revealed_number": rec.outcome.revealed_number,
                }
            )
    return {
        "session_id": session.session_id,
        "phase": session.phase,
        "open": {env.boxes[i].id: state.open_flags[i] for i in range(len(env.boxes))},
        "revealed": revealed,
        "trial_index": state.trial_index,
        "remaining_seconds": session.remaining(now),
        "history": history,
        "generalization_choices": dict(session.choices),
    }


def _generalization_payload() -> dict:
    trials = []
    for i, trial in enumerate(GENERALIZATION_TRIALS):
        trials.append(
            {
                "trial": i,
                "box": {
                    "id": trial.box.id,
                    "color": trial.box.color,
                    "shape": trial.box.shape,
                    "number": trial.box.true_number,
                },
                "candidates": [
                    {"id": k.id, "color": k.color, "number": k.number, "shape": k.shape}
                    for k in trial.candidates
                ],
            }
        )
    return {"trials": trials}


class SessionLog:
    """Append-only JSONL event log; replaying it rebuilds every session."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def append(self, event: dict) -> None:
        if self.path is None:
            return
        with self._lock:
            with open(self.path, "a") as f:
                f.write(json.dumps(event) + "\n")

    def events(self) -> list[dict]:
        if self.path is None or not self.path.exists():
            return []
        with open(self.path) as f:
            return [json.loads(line) for line in f if line.strip()]


def create_app(
    setup: TaskSetup | None = None,
    time_limit: float = DEFAULT_TIME_LIMIT,
    log_path: str | Path | None = None,
    clock: Callable[[], float] = time.monotonic,
    recover: bool = True,
) -> FastAPI:
    app = FastAPI(title="boxtask sessions")
    sessions: dict[str, Session] = {}
    log = SessionLog(log_path)

    def _make_session(session_id: str, seed: int, subject_id: str | None) -> Session:
        if setup is not None:
            config = replace(setup.config, max_trials=_SERVE_MAX_TRIALS, seed=seed)
            env = BoxTaskEnv(config, setup.boxes, setup.keys)
        else:
            env = BoxTaskEnv(default_session_config(seed))
        env.reset()
        session = Session(session_id=session_id, env=env, time_limit=time_limit)
        session.trajectory = Trajectory(subject_id=subject_id or session_id, variant="human")
        return session

    def _get(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def _apply_action(session: Session, req: ActionRequest) -> dict:
        env = session.env
        if req.type == "attempt":
            if not req.key_id:
                raise HTTPException(status_code=422, detail="attempt needs key_id")
            action = Attempt(box_id=req.box_id, key_id=req.key_id)
        elif req.type == "observe":
            action = Observe(box_id=req.box_id)
        else:
            raise HTTPException(status_code=422, detail=f"unknown action type {req.type!r}")
        try:
            state, outcome = env.step(action)
        except AttemptOnOpenBoxError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except UnknownIdError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        session.trajectory.records.append(TrialRecord(state.trial_index, action, outcome))
        if isinstance(action, Attempt):
            payload = {"type": "attempt", "success": outcome.success}
        else:
            payload = {"type": "observe", "revealed_number": outcome.revealed_number}
        if all(state.open_flags):
            session.phase = "generalization"
        return payload

    @app.post("/sessions")
    def create_session(req: CreateRequest | None = None) -> JSONResponse:
        req = req or CreateRequest()
        seed = req.seed if req.seed is not None else secrets.randbits(32)
        session_id = secrets.token_hex(8)
        session = _make_session(session_id, seed, req.subject_id)
        sessions[session_id] = session
        log.append(
            {
                "event": "create",
                "session_id": session_id,
                "seed": seed,
                "subject_id": session.trajectory.subject_id,
                "time_limit": time_limit,
            }
        )
        full = session.env.config.observability == "full"
        return JSONResponse(
            {
                "session_id": session_id,
                "phase": session.phase,
                "instruction": TEACHER_SCRIPT,
                "time_limit": time_limit,
                "boxes": _box_payload(session.env, full),
                "keys": _key_payload(session.env),
            }
        )

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            now = clock()
            if session.phase == "test" and session.expired(now):
                session.phase = "generalization"
                log.append({"event": "expired", "session_id": session_id})
            return _state_payload(session, now)

    @app.post("/sessions/{session_id}/begin-test")
    def begin_test(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            if session.phase != "practice":
                raise HTTPException(status_code=409, detail=f"cannot begin test in {session.phase}")
            session.phase = "test"
            session.started_at = clock()
            log.append({"event": "begin_test", "session_id": session_id})
            return _state_payload(session, clock())

    @app.post("/sessions/{session_id}/actions")
    def post_action(session_id: str, req: ActionRequest) -> dict:
        session = _get(session_id)
        with session.lock:
            now = clock()
            if session.phase != "test":
                raise HTTPException(status_code=409, detail=f"no actions in {session.phase} phase")
            if session.expired(now):
                session.phase = "generalization"
                log.append({"event": "expired", "session_id": session_id})
                raise HTTPException(status_code=410, detail="time limit reached")
            outcome = _apply_action(session, req)
            log.append(
                {
                    "event": "action",
                    "session_id": session_id,
                    "action": req.model_dump(),
                    "outcome": outcome,
                }
            )
            return {"outcome": outcome, "state": _state_payload(session, now)}

    @app.get("/sessions/{session_id}/generalization")
    def get_generalization(session_id: str) -> dict:
        session = _get(session_id)
        with session.lock:
            if session.phase not in ("generalization", "done"):
                raise HTTPException(
                    status_code=409, detail="generalization phase has not started"
                )
            return _generalization_payload()

    @app.post("/sessions/{session_id}/generalization")
    def post_choice(session_id: str, req: ChoiceRequest) -> dict:
        session = _get(session_id)
        with session.lock:
            if session.phase != "generalization":
                raise HTTPException(status_code=409, detail=f"no choices in {session.phase} phase")
            if req.trial < 0 or req.trial >= len(GENERALIZATION_TRIALS):
                raise HTTPException(status_code=422, detail="trial out of range")
            if req.trial in session.choices:
                raise HTTPException(status_code=409, detail="choice already submitted")
            candidates = {k.id for k in GENERALIZATION_TRIALS[req.trial].candidates}
            if req.key_id not in candidates:
                raise HTTPException(status_code=422, detail="key not among candidates")
            session.choices[req.trial] = req.key_id
            session.trajectory.generalization = [
                session.choices.get(i, "") for i in range(len(GENERALIZATION_TRIALS))
            ]
            log.append(
                {
                    "event": "choice",
                    "session_id": session_id,
                    "trial": req.trial,
                    "key_id": req.key_id,
                }
            )
            if len(session.choices) == len(GENERALIZATION_TRIALS):
                session.phase = "done"
                log.append({"event": "done", "session_id": session_id})
            return {"phase": session.phase, "choices": dict(session.choices)}

    @app.get("/sessions/{session_id}/trajectory")
    def download_trajectory(session_id: str) -> PlainTextResponse:
        session = _get(session_id)
        with session.lock:
            return PlainTextResponse(
                dumps_trajectories([session.trajectory]), media_type="text/csv"
            )

    if recover and log_path:
        _recover_sessions(sessions, log, time_limit, _make_session)

    app.state.sessions = sessions
    return app


def _recover_sessions(sessions, log: SessionLog, time_limit: float, make_session) -> None:
    """Rebuild sessions by replaying the event log; env determinism makes the
    replayed outcomes identical to the originals."""
    for event in log.events():
        kind = event.get("event")
        sid = event.get("session_id")
        if kind == "create":
            session = make_session(sid, int(event["seed"]), event.get("subject_id"))
            session.time_limit = float(event.get("time_limit", time_limit))
            sessions[sid] = session
        elif sid not in sessions:
            continue
        elif kind == "begin_test":
            sessions[sid].phase = "test"
            # restarted service restarts the clock; recovered sessions keep playing
            sessions[sid].started_at = time.monotonic()
        elif kind == "action":
            session = sessions[sid]
            req = ActionRequest(**event["action"])
            action = (
                Attempt(req.box_id, req.key_id)
                if req.type == "attempt"
                else Observe(req.box_id)
            )
            state, outcome = session.env.step(action)
            session.trajectory.records.append(TrialRecord(state.trial_index, action, outcome))
            if all(state.open_flags):
                session.phase = "generalization"
        elif kind == "expired":
            sessions[sid].phase = "generalization"
        elif kind == "choice":
            session = sessions[sid]
            session.choices[int(event["trial"])] = event["key_id"]
            session.trajectory.generalization = [
                session.choices.get(i, "") for i in range(len(GENERALIZATION_TRIALS))
            ]
        elif kind == "done":
            sessions[sid].phase = "done"
