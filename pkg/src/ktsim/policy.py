"""Expected-learning-gain task selection and model-specific stopping.

Each model family gets its own gain: BKT sums expected posterior movement
(including the learn transition, without which single-skill gains are an
exact martingale zero), PFA sums expected count-rate increments, DKT sums
expected prediction shifts across all tasks, and the ground-truth gain
uses the simulator's own update rule. Selection is a deterministic argmax
with lowest-index tie-breaking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import elo
from .bkt import BktTracer, advance, bayes_posterior
from .dkt import DktTracer
from .elo import EloStudent, task_success_prob, true_mastery
from .pfa import PfaTracer
from .scenario import Scenario, Tracer


@dataclass(frozen=True)
class GainVector:
    """Per-task expected gains and the selected task."""

    gains: tuple[float, ...]
    chosen_task: int
    tie_broken: bool


def gain_bkt(
    tracer: BktTracer, task: int, scenario: Scenario, include_transition: bool = True
) -> float:
    """Expected mastery-posterior gain summed over the task's skills.

    The outcome probability is the task-level prediction. With
    include_transition=False the expectation uses the bare Bayes posterior,
    which is exactly zero for single-skill tasks.
    """
    p_task = tracer.predict_task(task)
    total = 0.0
    for k in scenario.skills_of(task):
        params = tracer.model.skills[k]
        theta = float(tracer.posteriors[k])
        q_succ = bayes_posterior(theta, True, params)
        q_fail = bayes_posterior(theta, False, params)
        if include_transition:
            q_succ = advance(q_succ, params)
            q_fail = advance(q_fail, params)
        total += p_task * q_succ + (1.0 - p_task) * q_fail - theta
    return total


def gain_pfa(tracer: PfaTracer, task: int, scenario: Scenario) -> float:
    """Expected ability increment: gamma on success, rho on failure."""
    p_task = tracer.predict_task(task)
    total = 0.0
    for k in scenario.skills_of(task):
        total += p_task * float(tracer.model.gamma[k]) + (1.0 - p_task) * float(
            tracer.model.rho[k]
        )
    return total


def gain_dkt(tracer: DktTracer, task: int, scenario: Scenario) -> float:
    """Expected prediction shift summed over every task's output."""
    p_task = float(tracer.predict()[task])
    delta_success, delta_failure = tracer.hypothetical_deltas(task)
    return float(np.sum(p_task * delta_success + (1.0 - p_task) * delta_failure))


def gain_elo_true(student: EloStudent, task: int, scenario: Scenario) -> float:
    """Ground-truth expected ability gain under the simulator's update."""
    p_task = task_success_prob(student, task)
    total = 0.0
    for k in scenario.skills_of(task):
        p_k = elo.skill_success_prob(
            student.abilities[k], scenario.difficulties[task], scenario.slope
        )
        total += (1.0 - p_k) * (
            p_task * scenario.kappa_success + (1.0 - p_task) * scenario.kappa_failure
        )
    return total


class EloOracleTracer(Tracer):
    """Pseudo-tracer exposing the ground truth; used for the oracle condition."""

    def __init__(self, student: EloStudent, scenario: Scenario):
        self.student = student
        self.scenario = scenario

    def reset(self) -> None:
        pass  # the wrapped student owns its state

    def update(self, task: int, success: bool) -> None:
        pass  # the episode loop updates the student directly

    def predict(self) -> np.ndarray:
        return np.array(
            [task_success_prob(self.student, j) for j in range(self.scenario.num_tasks)]
        )

    def ability_estimates(self) -> Optional[np.ndarray]:
        return self.student.abilities.copy()

    def mastery_predicted(self, scenario: Scenario) -> bool:
        return true_mastery(self.student)


def select_task(gains) -> GainVector:
    """Argmax with deterministic lowest-index tie-breaking."""
    gains = tuple(float(g) for g in gains)
    if not gains:
        raise ValueError("no candidate tasks")
    for j, g in enumerate(gains):
        if not math.isfinite(g):
            raise ValueError(f"non-finite gain for task {j + 1}")
    best = max(gains)
    chosen = gains.index(best)
    tie_broken = gains.count(best) > 1
    return GainVector(gains=gains, chosen_task=chosen, tie_broken=tie_broken)


def gain_vector(tracer: Tracer, scenario: Scenario) -> GainVector:
    """Gains for every task under the tracer's model family, plus the choice."""
    if isinstance(tracer, BktTracer):
        gains = [gain_bkt(tracer, j, scenario) for j in range(scenario.num_tasks)]
    elif isinstance(tracer, PfaTracer):
        gains = [gain_pfa(tracer, j, scenario) for j in range(scenario.num_tasks)]
    elif isinstance(tracer, DktTracer):
        gains = [gain_dkt(tracer, j, scenario) for j in range(scenario.num_tasks)]
    elif isinstance(tracer, EloOracleTracer):
        gains = [
            gain_elo_true(tracer.student, j, scenario) for j in range(scenario.num_tasks)
        ]
    else:
        raise TypeError(f"no gain rule for tracer type {type(tracer).__name__}")
    try:
        return select_task(gains)
    except ValueError as err:
        raise ValueError(f"{type(tracer).__name__}: {err}") from err


def should_stop(tracer: Tracer, scenario: Scenario) -> bool:
    """Dispatch to the model family's mastery rule."""
    return tracer.mastery_predicted(scenario)
