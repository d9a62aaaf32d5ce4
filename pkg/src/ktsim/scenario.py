"""Curriculum definition, tracer contract, and episode data model.

Task and skill ids are 0-based everywhere in memory. All external formats
(config files, episode logs, HTTP payloads) use 1-based ids; the shift
happens only in the (de)serialization helpers in this module.
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

STOP_MODEL_MASTERY = "model_predicted_mastery"
STOP_STEP_CAP = "step_cap"
STOP_HUMAN = "human_stop"

STOP_REASONS = (STOP_MODEL_MASTERY, STOP_STEP_CAP, STOP_HUMAN)


@dataclass(frozen=True)
class Scenario:
    """Static curriculum: tasks, skills, difficulties, and learning rates."""

    num_tasks: int
    num_skills: int
    skill_map: tuple[tuple[int, ...], ...]  # per task, sorted 0-based skill ids
    difficulties: tuple[float, ...]
    slope: float = 1.0
    kappa_success: float = 1.0
    kappa_failure: float = 0.5
    mastery_threshold: float = 1.5
    max_steps: int = 30

    def skills_of(self, task: int) -> tuple[int, ...]:
        return self.skill_map[task]

    def mastery_probability_bar(self, task: int) -> float:
        """Per-skill success probability that corresponds to the mastery
        threshold on this task's difficulty (logistic in ability units)."""
        z = self.slope * (self.mastery_threshold - self.difficulties[task])
        return 1.0 / (1.0 + np.exp(-z))

    def task_probability_bar(self, task: int) -> float:
        """Task-level success probability of a student sitting exactly at
        the mastery threshold on every involved skill (product form)."""
        return self.mastery_probability_bar(task) ** len(self.skill_map[task])

    def to_dict(self) -> dict:
        return {
            "num_tasks": self.num_tasks,
            "num_skills": self.num_skills,
            "skill_map": [[k + 1 for k in ks] for ks in self.skill_map],
            "difficulties": list(self.difficulties),
            "slope": self.slope,
            "kappa_success": self.kappa_success,
            "kappa_failure": self.kappa_failure,
            "mastery_threshold": self.mastery_threshold,
            "max_steps": self.max_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            num_tasks=int(d["num_tasks"]),
            num_skills=int(d["num_skills"]),
            skill_map=tuple(
                tuple(sorted(int(k) - 1 for k in ks)) for ks in d["skill_map"]
            ),
            difficulties=tuple(float(b) for b in d["difficulties"]),
            slope=float(d["slope"]),
            kappa_success=float(d["kappa_success"]),
            kappa_failure=float(d["kappa_failure"]),
            mastery_threshold=float(d["mastery_threshold"]),
            max_steps=int(d["max_steps"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def default_scenario() -> Scenario:
    """The four-task / two-skill curriculum used throughout the study.

    Tasks 1 and 2 each train one skill, tasks 3 and 4 train both; task 3
    is the easy one. Success deltas are twice the failure deltas.
    """
    return Scenario(
        num_tasks=4,
        num_skills=2,
        skill_map=((0,), (1,), (0, 1), (0, 1)),
        difficulties=(1.0, 1.0, 0.0, 1.0),
        slope=1.0,
        kappa_success=1.0,
        kappa_failure=0.5,
        mastery_threshold=1.5,
        max_steps=30,
    )


def validate_scenario(s: Scenario) -> list[str]:
    """Return all invariant violations; an empty list means the scenario is valid."""
    errors: list[str] = []
    if s.num_tasks < 1:
        errors.append("num_tasks must be positive")
    if s.num_skills < 1:
        errors.append("num_skills must be positive")
    if len(s.skill_map) != s.num_tasks:
        errors.append(
            f"skill_map has {len(s.skill_map)} entries for {s.num_tasks} tasks"
        )
    if len(s.difficulties) != s.num_tasks:
        errors.append(
            f"difficulties has {len(s.difficulties)} entries for {s.num_tasks} tasks"
        )
    seen_skills: set[int] = set()
    for j, ks in enumerate(s.skill_map):
        if len(ks) == 0:
            errors.append(f"empty skill set for task {j + 1}")
        for k in ks:
            if not 0 <= k < s.num_skills:
                errors.append(f"task {j + 1} references invalid skill {k + 1}")
            seen_skills.add(k)
    for k in range(s.num_skills):
        if k not in seen_skills:
            errors.append(f"orphan skill {k + 1} not required by any task")
    if s.slope <= 0:
        errors.append("non-positive slope")
    if s.kappa_success <= 0 or s.kappa_failure <= 0:
        errors.append("non-positive learning rate")
    if s.max_steps < 1:
        errors.append("max_steps must be >= 1")
    return errors


@dataclass
class AttemptRecord:
    """One task attempt: what was predicted at decision time and what happened."""

    step: int  # 1-based
    task_id: int  # 0-based internally
    success: bool
    predicted_probs: tuple[float, ...]
    ability_estimates: Optional[tuple[float, ...]] = None  # absent for DKT
    decision_ms: Optional[int] = None  # interactive sessions only

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "task_id": self.task_id + 1,
            "success": self.success,
            "predicted_probs": list(self.predicted_probs),
            "ability_estimates": (
                None if self.ability_estimates is None else list(self.ability_estimates)
            ),
            "decision_ms": self.decision_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttemptRecord":
        est = d.get("ability_estimates")
        return cls(
            step=int(d["step"]),
            task_id=int(d["task_id"]) - 1,
            success=bool(d["success"]),
            predicted_probs=tuple(float(p) for p in d["predicted_probs"]),
            ability_estimates=None if est is None else tuple(float(a) for a in est),
            decision_ms=None if d.get("decision_ms") is None else int(d["decision_ms"]),
        )


@dataclass
class EpisodeLog:
    """Full trajectory of one teaching episode, ground truth included."""

    student_index: int
    rng_seed: tuple[int, ...]
    condition: str
    records: list[AttemptRecord] = field(default_factory=list)
    true_ability_trace: list[tuple[float, ...]] = field(default_factory=list)
    stop_reason: str = STOP_STEP_CAP
    steps_to_true_mastery: Optional[int] = None  # None = censored

    @property
    def steps_to_stop(self) -> int:
        return len(self.records)

    def to_dict(self) -> dict:
        return {
            "student_index": self.student_index,
            "rng_seed": list(self.rng_seed),
            "condition": self.condition,
            "records": [r.to_dict() for r in self.records],
            "true_ability_trace": [list(v) for v in self.true_ability_trace],
            "stop_reason": self.stop_reason,
            "steps_to_true_mastery": self.steps_to_true_mastery,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeLog":
        stm = d.get("steps_to_true_mastery")
        return cls(
            student_index=int(d["student_index"]),
            rng_seed=tuple(int(x) for x in d["rng_seed"]),
            condition=str(d["condition"]),
            records=[AttemptRecord.from_dict(r) for r in d["records"]],
            true_ability_trace=[tuple(float(a) for a in v) for v in d["true_ability_trace"]],
            stop_reason=str(d["stop_reason"]),
            steps_to_true_mastery=None if stm is None else int(stm),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> "EpisodeLog":
        return cls.from_dict(json.loads(line))


def write_episode_logs(path, logs) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for log in logs:
            fh.write(log.to_json_line() + "\n")


def read_episode_logs(path) -> list[EpisodeLog]:
    logs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                logs.append(EpisodeLog.from_json_line(line))
    return logs


class Tracer(ABC):
    """Contract every knowledge-tracing model implements.

    A tracer consumes a sequence of (task, success) attempts and predicts,
    at any point, the success probability for every task. predict() must be
    deterministic given the state and must return values in [0, 1].
    """

    @abstractmethod
    def reset(self) -> None:
        """Return to the fresh-student state."""

    @abstractmethod
    def update(self, task: int, success: bool) -> None:
        """Consume one observed attempt."""

    @abstractmethod
    def predict(self) -> np.ndarray:
        """Success probability for each task, shape (num_tasks,)."""

    @abstractmethod
    def ability_estimates(self) -> Optional[np.ndarray]:
        """Per-skill ability estimates, or None if the model has none."""

    @abstractmethod
    def mastery_predicted(self, scenario: Scenario) -> bool:
        """Whether the model would end teaching now."""
