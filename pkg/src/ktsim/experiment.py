"""Batch replication of the simulation study.

Runs closed-loop teaching episodes per model condition with seed-paired
evaluation streams, aggregates stopping metrics, runs the paired signed-rank
test, and emits a reproducible report (summary + per-episode CSVs).
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import rng
from .elo import EloStudent, apply_update, sample_attempt, true_mastery
from .modelio import make_tracer
from .policy import EloOracleTracer, gain_vector, should_stop
from .scenario import (
    STOP_MODEL_MASTERY,
    STOP_STEP_CAP,
    AttemptRecord,
    EpisodeLog,
    Scenario,
    Tracer,
)

ORACLE_CONDITION = "elo-oracle"


@dataclass(frozen=True)
class EpisodeMetrics:
    seed_index: int
    steps_to_stop: int
    steps_to_true_mastery: Optional[int]  # None = censored
    premature: bool
    capped: bool


@dataclass
class ConditionResult:
    condition: str
    max_steps: int
    episodes: list[EpisodeMetrics]

    def imputed_mastery_steps(self) -> np.ndarray:
        """Censored episodes count as one past the cap (conservative)."""
        return np.array(
            [
                e.steps_to_true_mastery
                if e.steps_to_true_mastery is not None
                else self.max_steps + 1
                for e in self.episodes
            ],
            dtype=np.float64,
        )

    def summary(self) -> dict:
        steps_to_stop = np.array([e.steps_to_stop for e in self.episodes], dtype=np.float64)
        return {
            "condition": self.condition,
            "n": len(self.episodes),
            "median_steps_to_stop": float(np.median(steps_to_stop)),
            "median_steps_to_mastery": float(np.median(self.imputed_mastery_steps())),
            "premature_rate": float(np.mean([e.premature for e in self.episodes])),
            "cap_rate": float(np.mean([e.capped for e in self.episodes])),
            "censored_rate": float(
                np.mean([e.steps_to_true_mastery is None for e in self.episodes])
            ),
            "censored_imputed_at": self.max_steps + 1,
        }


def episode_metrics(log: EpisodeLog, scenario: Scenario) -> EpisodeMetrics:
    capped = log.stop_reason == STOP_STEP_CAP
    premature = not capped and log.steps_to_true_mastery is None
    return EpisodeMetrics(
        seed_index=log.student_index,
        steps_to_stop=log.steps_to_stop,
        steps_to_true_mastery=log.steps_to_true_mastery,
        premature=premature,
        capped=capped,
    )


def run_episode(
    condition: str,
    model,
    scenario: Scenario,
    master_seed: int,
    index: int,
) -> EpisodeLog:
    """One closed-loop episode: predict, select by gain, sample, update,
    stop on predicted mastery or at the step cap.

    The mastery check runs before the first attempt and after every update,
    so a tracer that immediately predicts mastery yields a 0-attempt episode.
    """
    entropy = rng.seed_entropy(master_seed, rng.STREAM_EVAL, index)
    student = EloStudent(scenario, rng.rng_from_entropy(entropy))
    if condition == ORACLE_CONDITION:
        tracer: Tracer = EloOracleTracer(student, scenario)
    else:
        tracer = make_tracer(model, scenario)
        tracer.reset()

    log = EpisodeLog(student_index=index, rng_seed=entropy, condition=condition)
    log.true_ability_trace.append(tuple(float(a) for a in student.abilities))

    stop_reason = None
    for t in range(1, scenario.max_steps + 1):
        if should_stop(tracer, scenario):
            stop_reason = STOP_MODEL_MASTERY
            break
        probs = tracer.predict()
        estimates = tracer.ability_estimates()
        selection = gain_vector(tracer, scenario)
        task = selection.chosen_task
        success = sample_attempt(student, task)
        apply_update(student, task, success)
        tracer.update(task, success)
        log.records.append(
            AttemptRecord(
                step=t,
                task_id=task,
                success=success,
                predicted_probs=tuple(float(p) for p in probs),
                ability_estimates=(
                    None if estimates is None else tuple(float(a) for a in estimates)
                ),
            )
        )
        log.true_ability_trace.append(tuple(float(a) for a in student.abilities))
        if log.steps_to_true_mastery is None and true_mastery(student):
            log.steps_to_true_mastery = t
    if stop_reason is None:
        stop_reason = STOP_MODEL_MASTERY if should_stop(tracer, scenario) else STOP_STEP_CAP
    log.stop_reason = stop_reason
    return log


def run_condition(
    condition: str,
    model,
    n: int,
    scenario: Scenario,
    master_seed: int,
) -> tuple[ConditionResult, list[EpisodeLog]]:
    """n seed-indexed episodes; indices are shared across conditions so
    results can be paired episode-by-episode."""
    if n < 1:
        raise ValueError("need at least one episode")
    logs = [run_episode(condition, model, scenario, master_seed, i) for i in range(n)]
    episodes = [episode_metrics(log, scenario) for log in logs]
    return ConditionResult(condition, scenario.max_steps, episodes), logs


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n_effective: int
    method: str  # "exact" | "normal"


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_p_value(ranks: np.ndarray, statistic: float) -> float:
    """Two-sided p from the exact null distribution of the positive rank
    sum, conditional on the observed (tie-averaged) ranks.

    Ranks are doubled so tie-averaged half-integers become exact integers,
    then the distribution is built by dynamic programming over subset sums.
    """
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1)
    counts[0] = 1.0
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    observed = int(np.rint(2.0 * statistic))
    cdf = float(counts[: observed + 1].sum()) / float(2.0 ** len(ranks))
    return min(1.0, 2.0 * cdf)


def _normal_p_value(ranks: np.ndarray, statistic: float, n: int) -> float:
    mean = n * (n + 1) / 4.0
    variance = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction over groups of equal absolute differences
    _, tie_counts = np.unique(ranks, return_counts=True)
    variance -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if variance <= 0:
        return 1.0
    z = (statistic - mean + 0.5) / math.sqrt(variance)  # continuity correction
    return min(1.0, 2.0 * 0.5 * math.erfc(-z / math.sqrt(2.0)))


def wilcoxon_signed_rank(
    paired_a: Sequence[float], paired_b: Sequence[float]
) -> WilcoxonResult:
    """Two-sided paired signed-rank test.

    Zero differences are dropped, tied absolute differences get averaged
    ranks, and the p-value is exact for up to 25 effective pairs, otherwise
    a normal approximation with continuity and tie corrections.
    """
    a = np.asarray(paired_a, dtype=np.float64)
    b = np.asarray(paired_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-d and of equal length")
    diffs = b - a
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        warnings.warn("all paired differences are zero; test has no signal")
        return WilcoxonResult(statistic=0.0, p_value=1.0, n_effective=0, method="exact")
    ranks = _average_ranks(np.abs(diffs))
    w_plus = float(ranks[diffs > 0].sum())
    w_minus = float(ranks[diffs < 0].sum())
    statistic = min(w_plus, w_minus)
    if n <= 25:
        return WilcoxonResult(statistic, _exact_p_value(ranks, statistic), n, "exact")
    return WilcoxonResult(statistic, _normal_p_value(ranks, statistic, n), n, "normal")


def replay_episode_log(
    log: EpisodeLog, scenario: Scenario, model=None
) -> list[str]:
    """Re-run a persisted episode (same seed, same task choices) and list
    every divergence from the recorded outcomes, predictions, and
    ground-truth trace. An empty list means the replay is exact."""
    mismatches: list[str] = []
    student = EloStudent(scenario, rng.rng_from_entropy(log.rng_seed))
    tracer: Optional[Tracer]
    if log.condition == ORACLE_CONDITION:
        tracer = EloOracleTracer(student, scenario)
    elif model is not None:
        tracer = make_tracer(model, scenario)
    else:
        tracer = None

    if log.true_ability_trace and tuple(student.abilities) != log.true_ability_trace[0]:
        mismatches.append("initial ability trace differs")
    for i, record in enumerate(log.records):
        if tracer is not None:
            replayed = tuple(float(p) for p in tracer.predict())
            if replayed != record.predicted_probs:
                mismatches.append(f"step {record.step}: predicted_probs differ")
        success = sample_attempt(student, record.task_id)
        if success != record.success:
            mismatches.append(f"step {record.step}: outcome differs")
        apply_update(student, record.task_id, record.success)
        if tracer is not None:
            tracer.update(record.task_id, record.success)
        expected = log.true_ability_trace[i + 1] if i + 1 < len(log.true_ability_trace) else None
        if expected is not None and tuple(float(a) for a in student.abilities) != expected:
            mismatches.append(f"step {record.step}: ability trace differs")
    return mismatches


def emit_report(
    results: dict[str, ConditionResult],
    scenario: Scenario,
    master_seed: int,
    out_dir,
) -> dict:
    """Write the per-condition summary, the pairwise test table, and one
    per-episode CSV per condition. Fully deterministic for a given input."""
    if not results:
        raise ValueError("no conditions to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for name, result in sorted(results.items()):
        with open(out_dir / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["seed", "condition", "steps_to_stop", "steps_to_mastery", "premature", "capped"]
            )
            for e in result.episodes:
                writer.writerow(
                    [
                        e.seed_index,
                        name,
                        e.steps_to_stop,
                        "" if e.steps_to_true_mastery is None else e.steps_to_true_mastery,
                        int(e.premature),
                        int(e.capped),
                    ]
                )

    tests = []
    names = sorted(results)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            ra, rb = results[a], results[b]
            if len(ra.episodes) != len(rb.episodes):
                continue  # unequal runs cannot be paired
            outcome = wilcoxon_signed_rank(
                ra.imputed_mastery_steps(), rb.imputed_mastery_steps()
            )
            tests.append(
                {
                    "a": a,
                    "b": b,
                    "metric": "steps_to_true_mastery",
                    "statistic": outcome.statistic,
                    "p_value": outcome.p_value,
                    "n_effective": outcome.n_effective,
                    "method": outcome.method,
                }
            )
    with open(out_dir / "tests.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["a", "b", "metric", "statistic", "p_value", "n_effective", "method"])
        for t in tests:
            writer.writerow(
                [t["a"], t["b"], t["metric"], t["statistic"], t["p_value"], t["n_effective"], t["method"]]
            )

    summary = {
        "scenario_hash": scenario.content_hash(),
        "scenario": scenario.to_dict(),
        "master_seed": master_seed,
        "eval_stream": rng.STREAM_EVAL,
        "conditions": {name: results[name].summary() for name in names},
        "pairwise_tests": tests,
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
