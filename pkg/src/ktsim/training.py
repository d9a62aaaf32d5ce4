"""Training-data generation, model fitting, and held-out accuracy.

Training students pick tasks uniformly at random and always run the full
step cap, which maximizes state-space coverage and is identical for every
model family.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import bkt, dkt, pfa, rng
from .elo import EloStudent, apply_update, sample_attempt, true_mastery
from .modelio import make_tracer
from .scenario import Scenario, Tracer


@dataclass
class Trajectory:
    """One simulated student's attempt sequence."""

    student_index: int
    rng_seed: tuple[int, ...]
    attempts: list[tuple[int, int]] = field(default_factory=list)  # (task, success)

    def to_dict(self) -> dict:
        return {
            "student_index": self.student_index,
            "rng_seed": list(self.rng_seed),
            "attempts": [[task + 1, success] for task, success in self.attempts],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trajectory":
        return cls(
            student_index=int(d["student_index"]),
            rng_seed=tuple(int(x) for x in d["rng_seed"]),
            attempts=[(int(t) - 1, int(x)) for t, x in d["attempts"]],
        )


@dataclass
class Dataset:
    master_seed: int
    trajectories: list[Trajectory]

    def __len__(self) -> int:
        return len(self.trajectories)

    def attempt_lists(self) -> list[list[tuple[int, int]]]:
        return [t.attempts for t in self.trajectories]


def generate_dataset(
    n: int,
    scenario: Scenario,
    master_seed: int,
    stop_at_mastery: bool = True,
) -> Dataset:
    """Simulate n students with uniformly random task choices.

    With stop_at_mastery (the study protocol) an episode ends as soon as
    the simulated student reaches true mastery, or at the step cap;
    otherwise every trajectory runs exactly scenario.max_steps attempts.
    Task choices and outcomes come from separate per-student streams so
    outcome streams stay comparable across generation policies.
    """
    if n < 1:
        raise ValueError("need at least one student")
    trajectories = []
    for i in range(n):
        outcome_entropy = rng.seed_entropy(master_seed, rng.STREAM_TRAIN, i)
        outcome_rng = rng.rng_from_entropy(outcome_entropy)
        policy_rng = rng.stream_rng(master_seed, rng.STREAM_TRAIN_POLICY, i)
        student = EloStudent(scenario, outcome_rng)
        trajectory = Trajectory(student_index=i, rng_seed=outcome_entropy)
        for _ in range(scenario.max_steps):
            if stop_at_mastery and true_mastery(student):
                break
            task = int(policy_rng.integers(scenario.num_tasks))
            success = sample_attempt(student, task)
            apply_update(student, task, success)
            trajectory.attempts.append((task, int(success)))
        trajectories.append(trajectory)
    return Dataset(master_seed=master_seed, trajectories=trajectories)


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in dataset.trajectories:
            fh.write(json.dumps(t.to_dict(), separators=(",", ":")) + "\n")


def load_dataset(path, master_seed: int = 0) -> Dataset:
    trajectories = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                trajectories.append(Trajectory.from_dict(json.loads(line)))
    return Dataset(master_seed=master_seed, trajectories=trajectories)


def split_dataset(
    dataset: Dataset, train_fraction: float = 0.8, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Disjoint student-level split, stable for a given seed."""
    order = np.random.default_rng(seed).permutation(len(dataset.trajectories))
    n_train = int(round(len(order) * train_fraction))
    train = [dataset.trajectories[i] for i in order[:n_train]]
    test = [dataset.trajectories[i] for i in order[n_train:]]
    return (
        Dataset(dataset.master_seed, train),
        Dataset(dataset.master_seed, test),
    )


def skill_sequences(
    trajectories: Sequence[Trajectory], scenario: Scenario
) -> list[list[np.ndarray]]:
    """Per-skill observation sequences: every attempt on a task involving
    the skill contributes its outcome to that skill's sequence."""
    sequences: list[list[np.ndarray]] = [[] for _ in range(scenario.num_skills)]
    for trajectory in trajectories:
        per_skill: list[list[int]] = [[] for _ in range(scenario.num_skills)]
        for task, success in trajectory.attempts:
            for k in scenario.skills_of(task):
                per_skill[k].append(success)
        for k in range(scenario.num_skills):
            if per_skill[k]:
                sequences[k].append(np.array(per_skill[k], dtype=np.int64))
    return sequences


# DKT configuration for the replication pipeline: the heavily
# overparameterized regime (no early stopping) whose closed-loop pathology
# the study reports; fit_bptt's own defaults stay the general-purpose ones.
REPLICATION_DKT = dkt.DktConfig(hidden_size=320, max_epochs=200, patience=10**9)


def replication_dkt_config(seed: int) -> dkt.DktConfig:
    return dataclasses.replace(REPLICATION_DKT, seed=seed)


def train_all(
    dataset: Dataset,
    scenario: Scenario,
    seed: int = 0,
    dkt_config: dkt.DktConfig | None = None,
) -> tuple[dict, dict]:
    """Fit all three families on the same data.

    Returns ({"bkt": ..., "pfa": ..., "dkt": ...}, per-family diagnostics).
    The default DKT configuration is the replication one.
    """
    if not dataset.trajectories:
        raise ValueError("empty dataset")
    attempts = dataset.attempt_lists()

    bkt_model, bkt_diag = bkt.fit_em(skill_sequences(dataset.trajectories, scenario), seed=seed)
    pfa_model, pfa_diag = pfa.fit_mle(attempts, scenario)
    config = dkt_config or replication_dkt_config(seed)
    dkt_model, dkt_diag = dkt.fit_bptt(attempts, scenario.num_tasks, config)

    models = {"bkt": bkt_model, "pfa": pfa_model, "dkt": dkt_model}
    diagnostics = {"bkt": bkt_diag, "pfa": pfa_diag, "dkt": dkt_diag}
    return models, diagnostics


def accuracy_of_tracer(tracer: Tracer, trajectories: Sequence[Trajectory]) -> float:
    """Predict-then-update accuracy: the attempted task's probability is
    thresholded at 0.5 (ties predict success) before the outcome enters
    the tracer, so the predicted outcome never leaks into its own input."""
    correct = 0
    total = 0
    for trajectory in trajectories:
        tracer.reset()
        for task, success in trajectory.attempts:
            predicted = tracer.predict()[task] >= 0.5
            correct += int(predicted == bool(success))
            total += 1
            tracer.update(task, bool(success))
    return correct / total


def evaluate_accuracy(model, test_dataset: Dataset, scenario: Scenario) -> float:
    """Held-out accuracy of a fitted model over every attempt."""
    if not test_dataset.trajectories:
        raise ValueError("empty test set")
    return accuracy_of_tracer(make_tracer(model, scenario), test_dataset.trajectories)
