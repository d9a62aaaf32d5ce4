"""Independent oracles used to validate the implementation paths.

Everything here is deliberately written against the mathematical
definitions (path enumeration, generic matrix filtering, sign-assignment
enumeration, finite differences) and never calls the code paths it checks.
"""

from __future__ import annotations

import copy
import itertools

import numpy as np


def hmm_posterior_by_paths(p_start, p_trans, p_guess, p_slip, observations):
    """P(Z_{T+1}=1 | x_1..x_T) by summing over every hidden-state path.

    Exponential in T; only for short sequences.
    """
    observations = list(observations)
    t_len = len(observations)
    prior = {0: 1.0 - p_start, 1: p_start}
    trans = {(0, 0): 1.0 - p_trans, (0, 1): p_trans, (1, 0): 0.0, (1, 1): 1.0}

    def emit(state, x):
        if state == 0:
            return p_guess if x == 1 else 1.0 - p_guess
        return 1.0 - p_slip if x == 1 else p_slip

    total = 0.0
    mastered_next = 0.0
    for path in itertools.product((0, 1), repeat=t_len + 1):
        prob = prior[path[0]]
        for t in range(t_len):
            prob *= emit(path[t], observations[t]) * trans[(path[t], path[t + 1])]
        total += prob
        if path[-1] == 1:
            mastered_next += prob
    return mastered_next / total


def hmm_posterior_by_filter(p_start, p_trans, p_guess, p_slip, observations):
    """Same posterior via the generic matrix-form filter (condition on the
    observation, then propagate through the transition matrix)."""
    dist = np.array([1.0 - p_start, p_start])
    transition = np.array([[1.0 - p_trans, p_trans], [0.0, 1.0]])
    for x in observations:
        emission = np.array(
            [p_guess if x == 1 else 1.0 - p_guess, 1.0 - p_slip if x == 1 else p_slip]
        )
        dist = dist * emission
        dist = dist / dist.sum()
        dist = dist @ transition
    return float(dist[1])


def wilcoxon_p_by_enumeration(diffs):
    """Two-sided signed-rank p-value by enumerating all sign assignments.

    Uses tie-averaged ranks of the observed |differences| and the
    convention p = min(1, 2 * P(W+ <= min(W+, W-))).
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        return 0.0, 1.0
    abs_diffs = np.abs(diffs)
    order = np.argsort(abs_diffs, kind="stable")
    ranks = np.empty(n)
    sorted_abs = abs_diffs[order]
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    w_plus = ranks[diffs > 0].sum()
    w_minus = ranks[diffs < 0].sum()
    statistic = min(w_plus, w_minus)

    at_or_below = 0
    for signs in itertools.product((0, 1), repeat=n):
        w = sum(r for r, s in zip(ranks, signs) if s == 1)
        if w <= statistic + 1e-12:
            at_or_below += 1
    p = min(1.0, 2.0 * at_or_below / 2.0**n)
    return statistic, p


def central_difference_gradient(func, x, h=1e-5):
    """Elementwise central finite differences of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    x_flat = x.reshape(-1)
    for i in range(x_flat.size):
        original = x_flat[i]
        x_flat[i] = original + h
        upper = func(x)
        x_flat[i] = original - h
        lower = func(x)
        x_flat[i] = original
        flat[i] = (upper - lower) / (2.0 * h)
    return grad


def max_relative_error(analytic, numeric, floor=1e-8):
    """max |a-f| / max(|a|+|f|, floor) over all elements."""
    analytic = np.asarray(analytic, dtype=np.float64).reshape(-1)
    numeric = np.asarray(numeric, dtype=np.float64).reshape(-1)
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def expected_gain_by_rollout(tracer, task, scenario, summary):
    """Expected one-step change of `summary(tracer)` under the model's own
    outcome probability, measured by actually applying update() to copies."""
    p_task = float(tracer.predict()[task])
    base = summary(tracer)
    succ = copy.deepcopy(tracer)
    succ.update(task, True)
    fail = copy.deepcopy(tracer)
    fail.update(task, False)
    return p_task * (summary(succ) - base) + (1.0 - p_task) * (summary(fail) - base)
