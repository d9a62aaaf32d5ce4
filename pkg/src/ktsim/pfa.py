"""Performance-factors tracer: logistic model over per-skill counts.

Skill ability is linear in past success/failure counts; a task prediction
sums the involved skill abilities and subtracts a per-task difficulty
intercept before the logistic link. Fitting is penalized maximum
likelihood, which reduces to logistic regression on an engineered design
matrix (one row per observed attempt, features from the running counts).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scenario import Scenario, Tracer


@dataclass(frozen=True)
class PfaModel:
    """Fitted coefficients, shared across students."""

    beta: np.ndarray  # (num_skills,) initial ability per skill
    gamma: np.ndarray  # (num_skills,) learning rate for successes
    rho: np.ndarray  # (num_skills,) learning rate for failures
    difficulty: np.ndarray  # (num_tasks,) per-task intercept

    def to_dict(self) -> dict:
        return {
            "family": "pfa",
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
            "rho": self.rho.tolist(),
            "difficulty": self.difficulty.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PfaModel":
        return cls(
            beta=np.asarray(d["beta"], dtype=np.float64),
            gamma=np.asarray(d["gamma"], dtype=np.float64),
            rho=np.asarray(d["rho"], dtype=np.float64),
            difficulty=np.asarray(d["difficulty"], dtype=np.float64),
        )


class PfaTracer(Tracer):
    """Running success/failure counts per skill."""

    def __init__(self, model: PfaModel, scenario: Scenario):
        self.model = model
        self.scenario = scenario
        self.successes = np.zeros(scenario.num_skills, dtype=np.int64)
        self.failures = np.zeros(scenario.num_skills, dtype=np.int64)

    def reset(self) -> None:
        self.successes[:] = 0
        self.failures[:] = 0

    def ability(self, skill: int) -> float:
        m = self.model
        return float(
            m.beta[skill]
            + m.gamma[skill] * self.successes[skill]
            + m.rho[skill] * self.failures[skill]
        )

    def predict_task(self, task: int) -> float:
        z = sum(self.ability(k) for k in self.scenario.skills_of(task))
        z -= float(self.model.difficulty[task])
        return float(1.0 / (1.0 + np.exp(-z)))

    def predict(self) -> np.ndarray:
        return np.array([self.predict_task(j) for j in range(self.scenario.num_tasks)])

    def update(self, task: int, success: bool) -> None:
        for k in self.scenario.skills_of(task):
            if success:
                self.successes[k] += 1
            else:
                self.failures[k] += 1

    def ability_estimates(self) -> Optional[np.ndarray]:
        return np.array([self.ability(k) for k in range(self.scenario.num_skills)])

    def mastery_predicted(self, scenario: Scenario) -> bool:
        return all(
            self.ability(k) >= scenario.mastery_threshold
            for k in range(scenario.num_skills)
        )


def build_design(
    trajectories: Sequence[Sequence[tuple[int, int]]], scenario: Scenario
) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix and outcomes for the MLE.

    Each attempt contributes one row built from that student's counts
    *before* the attempt. Columns: beta block, gamma block, rho block
    (num_skills each), then one -1 indicator per task difficulty.
    """
    s_dim = scenario.num_skills
    p_dim = 3 * s_dim + scenario.num_tasks
    n_rows = sum(len(t) for t in trajectories)
    design = np.zeros((n_rows, p_dim))
    outcomes = np.zeros(n_rows)
    row = 0
    for attempts in trajectories:
        succ = np.zeros(s_dim)
        fail = np.zeros(s_dim)
        for task, success in attempts:
            for k in scenario.skills_of(task):
                design[row, k] = 1.0
                design[row, s_dim + k] = succ[k]
                design[row, 2 * s_dim + k] = fail[k]
            design[row, 3 * s_dim + task] = -1.0
            outcomes[row] = success
            row += 1
            for k in scenario.skills_of(task):
                if success:
                    succ[k] += 1
                else:
                    fail[k] += 1
    return design, outcomes


def penalized_ll_and_grad(
    weights: np.ndarray, design: np.ndarray, outcomes: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Bernoulli log-likelihood with an L2 penalty, and its gradient."""
    z = design @ weights
    # log sigma(z) = -softplus(-z); log(1 - sigma(z)) = -softplus(z)
    softplus = np.logaddexp(0.0, z)
    ll = float(np.sum(outcomes * z - softplus)) - 0.5 * l2 * float(weights @ weights)
    p = 1.0 / (1.0 + np.exp(-z))
    grad = design.T @ (outcomes - p) - l2 * weights
    return ll, grad


def fit_mle(
    trajectories: Sequence[Sequence[tuple[int, int]]],
    scenario: Scenario,
    l2: float = 1e-4,
    grad_tol: float = 1e-6,
    max_iter: int = 1000,
) -> tuple[PfaModel, dict]:
    """Full-batch gradient ascent with backtracking line search.

    Stops when the gradient max-norm drops below grad_tol or after
    max_iter iterations. Raises RuntimeError on a non-finite objective.
    """
    if not trajectories:
        raise ValueError("empty dataset")
    design, outcomes = build_design(trajectories, scenario)
    weights = np.zeros(design.shape[1])

    ll, grad = penalized_ll_and_grad(weights, design, outcomes, l2)
    ll_history = [ll]
    step = 1.0 / max(1.0, float(np.abs(design).sum(axis=1).max()))
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        gnorm = float(np.max(np.abs(grad)))
        if gnorm < grad_tol:
            converged = True
            break
        g_sq = float(grad @ grad)
        accepted = False
        trial = step
        for _ in range(60):
            candidate = weights + trial * grad
            cand_ll, cand_grad = penalized_ll_and_grad(candidate, design, outcomes, l2)
            if not np.isfinite(cand_ll):
                raise RuntimeError(
                    f"non-finite objective during PFA fit (iter {iterations}, step {trial})"
                )
            if cand_ll >= ll + 1e-4 * trial * g_sq:
                accepted = True
                break
            trial *= 0.5
        if not accepted:
            break  # step underflow: gradient direction no longer improves
        weights, ll, grad = candidate, cand_ll, cand_grad
        ll_history.append(ll)
        # Grow the trial step when the first candidate was accepted.
        step = trial * 2.0 if trial == step else trial

    s_dim = scenario.num_skills
    model = PfaModel(
        beta=weights[:s_dim].copy(),
        gamma=weights[s_dim : 2 * s_dim].copy(),
        rho=weights[2 * s_dim : 3 * s_dim].copy(),
        difficulty=weights[3 * s_dim :].copy(),
    )
    diagnostics = {
        "ll_history": ll_history,
        "iterations": iterations,
        "converged": converged,
        "grad_max_norm": float(np.max(np.abs(grad))),
    }
    return model, diagnostics


def save(model: PfaModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)


def load(path) -> PfaModel:
    with open(path, "r", encoding="utf-8") as fh:
        return PfaModel.from_dict(json.load(fh))
