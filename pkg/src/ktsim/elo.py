"""Ground-truth simulated student.

Per-skill logistic success curves, task-level success as the product over
involved skills, and an asymmetric update in which both outcomes raise
ability (students never unlearn within a session; successes teach twice
as much as failures under the default rates).
"""

from __future__ import annotations

import numpy as np

from .scenario import Scenario


def skill_success_prob(theta: float, difficulty: float, slope: float) -> float:
    """Logistic success probability of one skill on one task."""
    z = slope * (theta - difficulty)
    if z >= 0.0:
        return float(1.0 / (1.0 + np.exp(-z)))
    expz = np.exp(z)
    return float(expz / (1.0 + expz))


class EloStudent:
    """Simulated learner with hidden per-skill abilities and a private RNG."""

    def __init__(self, scenario: Scenario, rng: np.random.Generator):
        self.scenario = scenario
        self.abilities = np.zeros(scenario.num_skills, dtype=np.float64)
        self.rng = rng

    def skill_probs(self, task: int) -> np.ndarray:
        """Success probability of each involved skill on this task."""
        s = self.scenario
        return np.array(
            [
                skill_success_prob(self.abilities[k], s.difficulties[task], s.slope)
                for k in s.skills_of(task)
            ]
        )


def task_success_prob(student: EloStudent, task: int) -> float:
    """Task-level success probability: product over the involved skills."""
    return float(np.prod(student.skill_probs(task)))


def sample_attempt(student: EloStudent, task: int) -> bool:
    """Draw one success/failure. Consumes exactly one random number."""
    return bool(student.rng.random() < task_success_prob(student, task))


def apply_update(student: EloStudent, task: int, success: bool) -> None:
    """Raise each involved skill by kappa * (1 - p_skill); others untouched.

    Both branches add a non-negative delta, so abilities never decrease.
    """
    s = student.scenario
    kappa = s.kappa_success if success else s.kappa_failure
    for k in s.skills_of(task):
        p_k = skill_success_prob(student.abilities[k], s.difficulties[task], s.slope)
        student.abilities[k] += kappa * (1.0 - p_k)


def true_mastery(student: EloStudent) -> bool:
    """Whether every skill ability has reached the mastery threshold."""
    return bool(np.all(student.abilities >= student.scenario.mastery_threshold))
