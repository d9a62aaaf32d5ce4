"""Interactive teaching sessions over HTTP+JSON.

A human teacher drives the loop the batch harness runs automatically:
pick tasks, watch outcomes and model output, stop when satisfied. The
model family behind a session stays hidden behind a blind label until the
session is stopped; ground-truth abilities never leave the server while a
session is active. Finished episodes are appended to a JSONL store whose
records replay deterministically through the engine.

Payload field names are documented in docs/api.md.
"""

from __future__ import annotations

import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import rng
from .elo import EloStudent, apply_update, sample_attempt, true_mastery
from .modelio import make_tracer
from .scenario import (
    STOP_HUMAN,
    STOP_STEP_CAP,
    AttemptRecord,
    EpisodeLog,
    Scenario,
)

BLIND_LABELS = ("A", "B", "C")


class CreateSessionRequest(BaseModel):
    condition: Optional[str] = None  # explicit family (operator mode) or None


class AttemptRequest(BaseModel):
    task_id: int
    decision_ms: Optional[int] = Field(default=None, ge=0)


class Session:
    """One live teaching episode; all mutations are serialized by `lock`."""

    def __init__(
        self,
        session_id: str,
        condition: str,
        blind_label: str,
        student: EloStudent,
        tracer,
        scenario: Scenario,
        entropy: tuple[int, ...],
        index: int,
    ):
        self.session_id = session_id
        self.condition = condition
        self.blind_label = blind_label
        self.student = student
        self.tracer = tracer
        self.scenario = scenario
        self.status = "active"
        self.created_at = datetime.now(timezone.utc).isoformat()
        self.lock = threading.Lock()
        self.log = EpisodeLog(student_index=index, rng_seed=entropy, condition=condition)
        self.log.true_ability_trace.append(tuple(float(a) for a in student.abilities))
        self.estimate_trace: Optional[list[list[float]]] = None
        estimates = tracer.ability_estimates()
        if estimates is not None:
            self.estimate_trace = [[float(a) for a in estimates]]

    @property
    def step(self) -> int:
        return len(self.log.records)

    def state_view(self) -> dict:
        """Blinded view: no model family, no ground truth."""
        if self.estimate_trace is None:
            abilities = {"available": False, "trace": None}
        else:
            abilities = {"available": True, "trace": [list(row) for row in self.estimate_trace]}
        return {
            "session_id": self.session_id,
            "blind_label": self.blind_label,
            "status": self.status,
            "step": self.step,
            "max_steps": self.scenario.max_steps,
            "num_tasks": self.scenario.num_tasks,
            "num_skills": self.scenario.num_skills,
            "skill_map": [[k + 1 for k in ks] for ks in self.scenario.skill_map],
            "history": [
                {
                    "step": r.step,
                    "task_id": r.task_id + 1,
                    "success": r.success,
                    "decision_ms": r.decision_ms,
                }
                for r in self.log.records
            ],
            "predicted_probs": [float(p) for p in self.tracer.predict()],
            "ability_estimates": abilities,
        }

    def debrief_view(self) -> dict:
        premature = self.log.stop_reason != STOP_STEP_CAP and (
            self.log.steps_to_true_mastery is None
        )
        return {
            "session_id": self.session_id,
            "blind_label": self.blind_label,
            "condition": self.condition,
            "status": self.status,
            "steps": self.step,
            "stop_reason": self.log.stop_reason,
            "premature": premature,
            "steps_to_true_mastery": self.log.steps_to_true_mastery,
            "true_ability_trace": [list(v) for v in self.log.true_ability_trace],
        }


class SessionStore:
    def __init__(
        self,
        models: dict,
        scenario: Scenario,
        log_path,
        master_seed: Optional[int] = None,
    ):
        if not models:
            raise ValueError("no trained models available")
        self.models = models
        self.scenario = scenario
        self.log_path = Path(log_path) if log_path else None
        if master_seed is None:
            master_seed = int(np.random.SeedSequence().entropy % (2**63))
        self.master_seed = master_seed
        self.service_rng = rng.stream_rng(master_seed, "service", 0)
        # Stable within one server run; hides which family sits behind a label.
        families = sorted(models)
        labels = list(BLIND_LABELS[: len(families)])
        self.service_rng.shuffle(labels)
        self.label_of = dict(zip(families, labels))
        self.sessions: dict[str, Session] = {}
        self.counter = 0
        self.lock = threading.Lock()

    def create(self, condition: Optional[str]) -> Session:
        with self.lock:
            if condition is None:
                condition = str(self.service_rng.choice(sorted(self.models)))
            if condition not in self.models:
                raise KeyError(condition)
            index = self.counter
            self.counter += 1
        entropy = rng.seed_entropy(self.master_seed, rng.STREAM_SESSION, index)
        student = EloStudent(self.scenario, rng.rng_from_entropy(entropy))
        tracer = make_tracer(self.models[condition], self.scenario)
        session = Session(
            session_id=uuid.uuid4().hex,
            condition=condition,
            blind_label=self.label_of[condition],
            student=student,
            tracer=tracer,
            scenario=self.scenario,
            entropy=entropy,
            index=index,
        )
        with self.lock:
            self.sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self.lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise KeyError(session_id)
        return session

    def persist(self, session: Session) -> None:
        if self.log_path is None:
            return
        with self.lock:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(session.log.to_json_line() + "\n")


def create_app(
    models: dict,
    scenario: Scenario,
    log_path=None,
    master_seed: Optional[int] = None,
) -> FastAPI:
    app = FastAPI(title="ktsim session service")
    store = SessionStore(models, scenario, log_path, master_seed)
    app.state.store = store

    @app.post("/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        try:
            session = store.create(request.condition)
        except KeyError as err:
            raise HTTPException(status_code=503, detail=f"model not loaded: {err}")
        return {"session_id": session.session_id, "blind_label": session.blind_label}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        with session.lock:
            return session.state_view()

    @app.post("/sessions/{session_id}/attempts")
    def post_attempt(session_id: str, request: AttemptRequest):
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        if not 1 <= request.task_id <= session.scenario.num_tasks:
            raise HTTPException(status_code=422, detail="invalid task id")
        with session.lock:
            if session.status != "active":
                raise HTTPException(status_code=409, detail=f"session is {session.status}")
            task = request.task_id - 1
            probs = session.tracer.predict()
            estimates = session.tracer.ability_estimates()
            success = sample_attempt(session.student, task)
            apply_update(session.student, task, success)
            session.tracer.update(task, success)
            session.log.records.append(
                AttemptRecord(
                    step=session.step + 1,
                    task_id=task,
                    success=success,
                    predicted_probs=tuple(float(p) for p in probs),
                    ability_estimates=(
                        None if estimates is None else tuple(float(a) for a in estimates)
                    ),
                    decision_ms=request.decision_ms,
                )
            )
            session.log.true_ability_trace.append(
                tuple(float(a) for a in session.student.abilities)
            )
            if session.log.steps_to_true_mastery is None and true_mastery(session.student):
                session.log.steps_to_true_mastery = session.step
            if session.estimate_trace is not None:
                new_estimates = session.tracer.ability_estimates()
                session.estimate_trace.append([float(a) for a in new_estimates])
            capped = session.step >= session.scenario.max_steps
            if capped:
                session.status = "capped"
                session.log.stop_reason = STOP_STEP_CAP
            view = session.state_view()
        if capped:
            store.persist(session)
        return {"success": bool(success), "state": view}

    @app.post("/sessions/{session_id}/stop")
    def post_stop(session_id: str):
        try:
            session = store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")
        persist = False
        with session.lock:
            if session.status == "active":
                session.status = "stopped"
                session.log.stop_reason = STOP_HUMAN
                persist = True
            elif session.status == "capped":
                pass  # already persisted at the cap; debrief is still available
            else:
                raise HTTPException(status_code=409, detail="session already stopped")
            view = session.debrief_view()
        if persist:
            store.persist(session)
        return view

    return app
