"""Bayesian knowledge tracing: one two-state HMM per skill.

State 1 means the skill is mastered; mastery is absorbing (no forgetting).
Emissions are guess/slip noise. The tracer keeps the filtered mastery
posterior per skill; fitting runs constrained Baum-Welch per skill.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .scenario import Scenario, Tracer

POSTERIOR_EPS = 1e-12
PARAM_FLOOR = 0.001
PARAM_CEIL = 0.999


@dataclass(frozen=True)
class BktParams:
    """Parameters of one skill's HMM."""

    p_start: float
    p_trans: float
    p_guess: float
    p_slip: float

    def validate(self) -> list[str]:
        errors = []
        for name in ("p_start", "p_trans", "p_guess", "p_slip"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                errors.append(f"{name}={v} outside (0,1)")
        if self.p_guess + self.p_slip >= 1.0:
            errors.append("p_guess + p_slip must be < 1")
        return errors


@dataclass(frozen=True)
class BktModel:
    """Fitted parameter set: one BktParams per skill."""

    skills: tuple[BktParams, ...]

    def to_dict(self) -> dict:
        return {
            "family": "bkt",
            "skills": [
                {
                    "p_start": p.p_start,
                    "p_trans": p.p_trans,
                    "p_guess": p.p_guess,
                    "p_slip": p.p_slip,
                }
                for p in self.skills
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BktModel":
        return cls(
            skills=tuple(
                BktParams(
                    p_start=float(p["p_start"]),
                    p_trans=float(p["p_trans"]),
                    p_guess=float(p["p_guess"]),
                    p_slip=float(p["p_slip"]),
                )
                for p in d["skills"]
            )
        )


def predict_skill(theta: float, params: BktParams) -> float:
    """P(correct) = theta*(1-slip) + (1-theta)*guess."""
    return theta * (1.0 - params.p_slip) + (1.0 - theta) * params.p_guess


def bayes_posterior(theta: float, success: bool, params: BktParams) -> float:
    """Condition the mastery probability on one observed outcome."""
    if success:
        num = (1.0 - params.p_slip) * theta
        den = num + params.p_guess * (1.0 - theta)
    else:
        num = params.p_slip * theta
        den = num + (1.0 - params.p_guess) * (1.0 - theta)
    if den <= 0.0:
        theta = min(max(theta, POSTERIOR_EPS), 1.0 - POSTERIOR_EPS)
        return bayes_posterior(theta, success, params)
    return num / den


def advance(q: float, params: BktParams) -> float:
    """Apply the learn transition: unmastered mass moves with p_trans."""
    return q + params.p_trans * (1.0 - q)


class BktTracer(Tracer):
    """Per-skill mastery posteriors; task predictions take the worst skill."""

    def __init__(self, model: BktModel, scenario: Scenario):
        self.model = model
        self.scenario = scenario
        self.posteriors = np.array([p.p_start for p in model.skills])

    def reset(self) -> None:
        self.posteriors = np.array([p.p_start for p in self.model.skills])

    def predict_task(self, task: int) -> float:
        """Smallest per-skill success prediction across the task's skills."""
        return min(
            predict_skill(self.posteriors[k], self.model.skills[k])
            for k in self.scenario.skills_of(task)
        )

    def predict(self) -> np.ndarray:
        return np.array([self.predict_task(j) for j in range(self.scenario.num_tasks)])

    def update(self, task: int, success: bool) -> None:
        for k in self.scenario.skills_of(task):
            q = bayes_posterior(self.posteriors[k], success, self.model.skills[k])
            self.posteriors[k] = advance(q, self.model.skills[k])

    def ability_estimates(self) -> Optional[np.ndarray]:
        return self.posteriors.copy()

    def mastery_predicted(self, scenario: Scenario) -> bool:
        return all(
            self.predict_task(j) >= scenario.mastery_probability_bar(j)
            for j in range(scenario.num_tasks)
        )


def _forward_backward(obs: np.ndarray, mask: np.ndarray, params: BktParams):
    """Scaled forward-backward over a padded batch of binary sequences.

    Padded positions carry emission probability 1 in both states, which
    leaves the recursions and the log-likelihood unaffected.

    Returns (gamma, xi, log_likelihood) where gamma is (N, T, 2) smoothed
    state posteriors and xi is (N, T-1, 2, 2) pairwise posteriors.
    """
    n, t_max = obs.shape
    ps, pt, pg, psl = params.p_start, params.p_trans, params.p_guess, params.p_slip

    e0 = np.where(obs == 1, pg, 1.0 - pg)
    e1 = np.where(obs == 1, 1.0 - psl, psl)
    e0 = np.where(mask, e0, 1.0)
    e1 = np.where(mask, e1, 1.0)

    alpha = np.zeros((n, t_max, 2))
    scale = np.zeros((n, t_max))

    a0 = (1.0 - ps) * e0[:, 0]
    a1 = ps * e1[:, 0]
    scale[:, 0] = a0 + a1
    alpha[:, 0, 0] = a0 / scale[:, 0]
    alpha[:, 0, 1] = a1 / scale[:, 0]
    for t in range(1, t_max):
        pred0 = alpha[:, t - 1, 0] * (1.0 - pt)
        pred1 = alpha[:, t - 1, 0] * pt + alpha[:, t - 1, 1]
        a0 = pred0 * e0[:, t]
        a1 = pred1 * e1[:, t]
        scale[:, t] = a0 + a1
        alpha[:, t, 0] = a0 / scale[:, t]
        alpha[:, t, 1] = a1 / scale[:, t]

    beta = np.ones((n, t_max, 2))
    for t in range(t_max - 2, -1, -1):
        b0 = e0[:, t + 1] * beta[:, t + 1, 0]
        b1 = e1[:, t + 1] * beta[:, t + 1, 1]
        beta[:, t, 0] = ((1.0 - pt) * b0 + pt * b1) / scale[:, t + 1]
        beta[:, t, 1] = b1 / scale[:, t + 1]

    gamma = alpha * beta
    gamma /= np.maximum(gamma.sum(axis=2, keepdims=True), 1e-300)

    xi = np.zeros((n, max(t_max - 1, 0), 2, 2))
    if t_max > 1:
        b0 = e0[:, 1:] * beta[:, 1:, 0] / scale[:, 1:]
        b1 = e1[:, 1:] * beta[:, 1:, 1] / scale[:, 1:]
        xi[:, :, 0, 0] = alpha[:, :-1, 0] * (1.0 - pt) * b0
        xi[:, :, 0, 1] = alpha[:, :-1, 0] * pt * b1
        xi[:, :, 1, 1] = alpha[:, :-1, 1] * b1

    log_likelihood = float(np.sum(np.log(scale)))
    return gamma, xi, log_likelihood


def _pad_sequences(sequences: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    n = len(sequences)
    t_max = max(len(s) for s in sequences)
    obs = np.zeros((n, t_max), dtype=np.int64)
    mask = np.zeros((n, t_max), dtype=bool)
    for i, s in enumerate(sequences):
        obs[i, : len(s)] = s
        mask[i, : len(s)] = True
    return obs, mask


def _em_run(
    obs: np.ndarray,
    mask: np.ndarray,
    init: BktParams,
    max_iter: int,
    tol: float,
) -> tuple[BktParams, list[float]]:
    """One Baum-Welch run from a given initialization."""
    params = init
    ll_history: list[float] = []
    pair_mask = mask[:, 1:] if mask.shape[1] > 1 else np.zeros((mask.shape[0], 0), bool)
    x = obs.astype(np.float64)
    for _ in range(max_iter):
        gamma, xi, ll = _forward_backward(obs, mask, params)
        ll_history.append(ll)

        g0 = np.where(mask, gamma[:, :, 0], 0.0)
        g1 = np.where(mask, gamma[:, :, 1], 0.0)
        ps = float(np.mean(gamma[:, 0, 1]))
        trans_num = float(np.sum(np.where(pair_mask, xi[:, :, 0, 1], 0.0)))
        trans_den = float(np.sum(np.where(pair_mask, gamma[:, :-1, 0], 0.0)))
        pt = trans_num / max(trans_den, 1e-300)
        pg = float(np.sum(g0 * x)) / max(float(np.sum(g0)), 1e-300)
        psl = float(np.sum(g1 * (1.0 - x))) / max(float(np.sum(g1)), 1e-300)

        lo, hi = 1e-6, 1.0 - 1e-6
        params = BktParams(
            p_start=min(max(ps, lo), hi),
            p_trans=min(max(pt, lo), hi),
            p_guess=min(max(pg, lo), hi),
            p_slip=min(max(psl, lo), hi),
        )
        if len(ll_history) >= 2:
            prev = ll_history[-2]
            if abs(ll - prev) / max(1.0, abs(prev)) < tol:
                break
    return params, ll_history


def _project_params(p: BktParams) -> BktParams:
    """Final clamp to [0.001, 0.999] with p_guess + p_slip < 1."""
    pg, psl = p.p_guess, p.p_slip
    if pg + psl >= 0.999:
        scale = 0.998 / (pg + psl)
        pg *= scale
        psl *= scale

    def clamp(v: float) -> float:
        return min(max(v, PARAM_FLOOR), PARAM_CEIL)

    return BktParams(clamp(p.p_start), clamp(p.p_trans), clamp(pg), clamp(psl))


def fit_em(
    sequences_by_skill: Sequence[Sequence[np.ndarray]],
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
    restarts: int = 5,
) -> tuple[BktModel, dict]:
    """Fit per-skill HMM parameters by Baum-Welch with random restarts.

    The first restart starts from conventional BKT priors; the rest are
    randomized to avoid the guess/slip mirror solution. Per restart the
    train log-likelihood is non-decreasing across iterations.

    Raises ValueError if a skill has no observations.
    """
    rng = np.random.default_rng(seed)
    fitted: list[BktParams] = []
    diagnostics: dict = {"ll_history": [], "restart_lls": []}
    for k, sequences in enumerate(sequences_by_skill):
        sequences = [np.asarray(s, dtype=np.int64) for s in sequences if len(s) > 0]
        if not sequences:
            raise ValueError(f"skill {k + 1} has no observation sequences")
        obs, mask = _pad_sequences(sequences)

        inits = [BktParams(0.3, 0.2, 0.2, 0.1)]
        for _ in range(restarts - 1):
            inits.append(
                BktParams(
                    p_start=float(rng.uniform(0.05, 0.6)),
                    p_trans=float(rng.uniform(0.05, 0.5)),
                    p_guess=float(rng.uniform(0.05, 0.4)),
                    p_slip=float(rng.uniform(0.02, 0.3)),
                )
            )

        best: tuple[float, BktParams, list[float]] | None = None
        restart_lls = []
        for init in inits:
            params, history = _em_run(obs, mask, init, max_iter, tol)
            _, _, final_ll = _forward_backward(obs, mask, params)
            restart_lls.append(final_ll)
            if best is None or final_ll > best[0]:
                best = (final_ll, params, history)
        assert best is not None
        fitted.append(_project_params(best[1]))
        diagnostics["ll_history"].append(best[2])
        diagnostics["restart_lls"].append(restart_lls)
    return BktModel(skills=tuple(fitted)), diagnostics


def save(model: BktModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=2)


def load(path) -> BktModel:
    with open(path, "r", encoding="utf-8") as fh:
        return BktModel.from_dict(json.load(fh))
