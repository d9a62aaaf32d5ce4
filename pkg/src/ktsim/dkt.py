"""Recurrent knowledge tracer: one-hot attempt encoding into a gated
recurrent unit, sigmoid output head over tasks.

The network and its training loop are implemented directly in numpy so
gradients are exact, training is deterministic given a seed, and the
backward pass can be validated against finite differences. The model
offers no per-skill ability estimate; that absence is the point of using
it as the non-interpretable control.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scenario import Scenario, Tracer

GATE_KEYS = ("w_z", "w_r", "w_c")
BIAS_KEYS = ("b_z", "b_r", "b_c")
ALL_KEYS = GATE_KEYS + BIAS_KEYS + ("w_out", "b_out")


@dataclass
class DktConfig:
    """Training hyperparameters (not stated by the study; fixed here)."""

    hidden_size: int = 16
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    clip_norm: float = 5.0
    val_fraction: float = 0.1
    init_scale: float = 0.1
    seed: int = 0


@dataclass
class DktModel:
    """GRU weights plus the architecture header."""

    num_tasks: int
    hidden_size: int
    seed: int
    weights: dict = field(default_factory=dict)

    @property
    def input_size(self) -> int:
        return 2 * self.num_tasks


def encode(task: int, success: bool, num_tasks: int) -> np.ndarray:
    """One-hot 2m encoding: successes in the first block, failures in the second."""
    x = np.zeros(2 * num_tasks)
    x[task if success else task + num_tasks] = 1.0
    return x


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def step(h: np.ndarray, x: np.ndarray, weights: dict) -> np.ndarray:
    """One gated-recurrence update. Works on (H,) vectors or (B, H) batches."""
    single = h.ndim == 1
    if single:
        h = h[None, :]
        x = x[None, :]
    u = np.concatenate([h, x], axis=1)
    z = _sigmoid(u @ weights["w_z"].T + weights["b_z"])
    r = _sigmoid(u @ weights["w_r"].T + weights["b_r"])
    uc = np.concatenate([r * h, x], axis=1)
    c = np.tanh(uc @ weights["w_c"].T + weights["b_c"])
    h_new = (1.0 - z) * h + z * c
    return h_new[0] if single else h_new


def predict_from_state(h: np.ndarray, weights: dict) -> np.ndarray:
    """Per-task success probabilities from a hidden state."""
    return _sigmoid(weights["w_out"] @ h + weights["b_out"])


class DktTracer(Tracer):
    """Hidden-state wrapper implementing the tracer contract."""

    def __init__(self, model: DktModel, scenario: Scenario):
        if model.num_tasks != scenario.num_tasks:
            raise ValueError("model trained for a different number of tasks")
        self.model = model
        self.scenario = scenario
        self.h = np.zeros(model.hidden_size)

    def reset(self) -> None:
        self.h = np.zeros(self.model.hidden_size)

    def update(self, task: int, success: bool) -> None:
        x = encode(task, success, self.model.num_tasks)
        self.h = step(self.h, x, self.model.weights)

    def predict(self) -> np.ndarray:
        return predict_from_state(self.h, self.model.weights)

    def ability_estimates(self) -> Optional[np.ndarray]:
        return None

    def hypothetical_deltas(self, task: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-task probability change if the next attempt on `task`
        succeeded vs failed. Does not mutate the live state."""
        base = self.predict()
        w = self.model.weights
        m = self.model.num_tasks
        h_succ = step(self.h, encode(task, True, m), w)
        h_fail = step(self.h, encode(task, False, m), w)
        delta_success = predict_from_state(h_succ, w) - base
        delta_failure = predict_from_state(h_fail, w) - base
        return delta_success, delta_failure

    def mastery_predicted(self, scenario: Scenario) -> bool:
        probs = self.predict()
        return all(
            probs[j] >= scenario.mastery_probability_bar(j)
            for j in range(scenario.num_tasks)
        )


def init_weights(num_tasks: int, hidden_size: int, scale: float, seed: int) -> dict:
    """Semi-orthogonal rows scaled down, zero biases."""
    rng = np.random.default_rng(seed)

    def semi_orthogonal(rows: int, cols: int) -> np.ndarray:
        a = rng.standard_normal((cols, rows))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))  # canonical sign, deterministic
        return q.T * scale

    d = 2 * num_tasks
    weights = {
        "w_z": semi_orthogonal(hidden_size, hidden_size + d),
        "w_r": semi_orthogonal(hidden_size, hidden_size + d),
        "w_c": semi_orthogonal(hidden_size, hidden_size + d),
        "b_z": np.zeros(hidden_size),
        "b_r": np.zeros(hidden_size),
        "b_c": np.zeros(hidden_size),
        "w_out": semi_orthogonal(num_tasks, hidden_size),
        "b_out": np.zeros(num_tasks),
    }
    return weights


def _prepare_batch(
    sequences: Sequence[Sequence[tuple[int, int]]], num_tasks: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Pad a batch into input encodings and next-attempt targets.

    Targets exist for steps 1..T-1 of each sequence (the state after
    attempt t predicts attempt t+1).
    """
    b = len(sequences)
    t_max = max(len(s) for s in sequences)
    inputs = np.zeros((b, t_max, 2 * num_tasks))
    target_task = np.zeros((b, max(t_max - 1, 0)), dtype=np.int64)
    target_val = np.zeros((b, max(t_max - 1, 0)))
    target_mask = np.zeros((b, max(t_max - 1, 0)), dtype=bool)
    for i, seq in enumerate(sequences):
        for t, (task, success) in enumerate(seq):
            inputs[i, t] = encode(task, bool(success), num_tasks)
            if t >= 1:
                target_task[i, t - 1] = task
                target_val[i, t - 1] = success
                target_mask[i, t - 1] = True
    return inputs, target_task, target_val, target_mask


def loss_and_grads(
    weights: dict,
    inputs: np.ndarray,
    target_task: np.ndarray,
    target_val: np.ndarray,
    target_mask: np.ndarray,
) -> tuple[float, dict]:
    """Mean next-attempt cross-entropy over the batch, with exact gradients
    from backpropagation through time."""
    b, t_max, _ = inputs.shape
    hidden = weights["b_z"].shape[0]
    count = int(target_mask.sum())
    if count == 0:
        raise ValueError("batch contains no prediction targets")

    h = np.zeros((b, hidden))
    caches = []
    loss = 0.0
    for t in range(t_max):
        h_prev = h
        x = inputs[:, t]
        u = np.concatenate([h_prev, x], axis=1)
        z = _sigmoid(u @ weights["w_z"].T + weights["b_z"])
        r = _sigmoid(u @ weights["w_r"].T + weights["b_r"])
        uc = np.concatenate([r * h_prev, x], axis=1)
        c = np.tanh(uc @ weights["w_c"].T + weights["b_c"])
        h = (1.0 - z) * h_prev + z * c

        p_logit = None
        if t < t_max - 1:
            rows = np.nonzero(target_mask[:, t])[0]
            if rows.size:
                logits = h[rows] @ weights["w_out"].T + weights["b_out"]
                j = target_task[rows, t]
                lj = logits[np.arange(rows.size), j]
                y = target_val[rows, t]
                # softplus(l) - y*l is the stable binary cross-entropy
                loss += float(np.sum(np.logaddexp(0.0, lj) - y * lj))
                p_logit = (rows, j, lj, y)
        caches.append((h_prev, x, u, z, r, uc, c, h, p_logit))
    loss /= count
    if not np.isfinite(loss):
        raise RuntimeError("non-finite training loss (diverged)")

    grads = {k: np.zeros_like(v) for k, v in weights.items()}
    dh = np.zeros((b, hidden))
    for t in range(t_max - 1, -1, -1):
        h_prev, x, u, z, r, uc, c, h_t, p_logit = caches[t]
        if p_logit is not None:
            rows, j, lj, y = p_logit
            dlj = (_sigmoid(lj) - y) / count
            dlogits = np.zeros((rows.size, weights["b_out"].shape[0]))
            dlogits[np.arange(rows.size), j] = dlj
            grads["w_out"] += dlogits.T @ h_t[rows]
            grads["b_out"] += dlogits.sum(axis=0)
            dh_rows = dlogits @ weights["w_out"]
            dh[rows] += dh_rows

        dz = dh * (c - h_prev)
        dc = dh * z
        dh_prev = dh * (1.0 - z)

        dac = dc * (1.0 - c * c)
        grads["w_c"] += dac.T @ uc
        grads["b_c"] += dac.sum(axis=0)
        duc = dac @ weights["w_c"]
        drh = duc[:, :hidden]
        dr = drh * h_prev
        dh_prev += drh * r

        dar = dr * r * (1.0 - r)
        grads["w_r"] += dar.T @ u
        grads["b_r"] += dar.sum(axis=0)
        dh_prev += (dar @ weights["w_r"])[:, :hidden]

        daz = dz * z * (1.0 - z)
        grads["w_z"] += daz.T @ u
        grads["b_z"] += daz.sum(axis=0)
        dh_prev += (daz @ weights["w_z"])[:, :hidden]

        dh = dh_prev
    return loss, grads


def _batch_loss(weights: dict, batch) -> float:
    inputs, tt, tv, tm = batch
    b, t_max, _ = inputs.shape
    hidden = weights["b_z"].shape[0]
    count = int(tm.sum())
    h = np.zeros((b, hidden))
    loss = 0.0
    for t in range(t_max):
        h = step(h, inputs[:, t], weights)
        if t < t_max - 1:
            rows = np.nonzero(tm[:, t])[0]
            if rows.size:
                logits = h[rows] @ weights["w_out"].T + weights["b_out"]
                lj = logits[np.arange(rows.size), tt[rows, t]]
                y = tv[rows, t]
                loss += float(np.sum(np.logaddexp(0.0, lj) - y * lj))
    return loss / max(count, 1)


def _clip_global_norm(grads: dict, max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor


def fit_bptt(
    trajectories: Sequence[Sequence[tuple[int, int]]],
    num_tasks: int,
    config: DktConfig = DktConfig(),
) -> tuple[DktModel, dict]:
    """Train the recurrent tracer by backpropagation through time.

    Adaptive-moment updates with global gradient-norm clipping, mini-batches
    of sequences, early stopping on a held-out split. Fully deterministic
    given config.seed.
    """
    sequences = [s for s in trajectories if len(s) >= 2]
    if not sequences:
        raise ValueError("need at least one trajectory with two attempts")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(sequences))
    n_val = int(round(len(sequences) * config.val_fraction)) if len(sequences) >= 5 else 0
    val_idx = order[:n_val]
    train_idx = order[n_val:]
    train_seqs = [sequences[i] for i in train_idx]
    val_seqs = [sequences[i] for i in val_idx]
    val_batch = _prepare_batch(val_seqs, num_tasks) if val_seqs else None

    weights = init_weights(num_tasks, config.hidden_size, config.init_scale, config.seed)
    adam_m = {k: np.zeros_like(v) for k, v in weights.items()}
    adam_v = {k: np.zeros_like(v) for k, v in weights.items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    adam_t = 0

    best_loss = np.inf
    best_weights = {k: v.copy() for k, v in weights.items()}
    best_epoch = 0
    stale = 0
    train_losses: list[float] = []
    val_losses: list[float] = []

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(len(train_seqs))
        epoch_loss = 0.0
        epoch_weight = 0
        for start in range(0, len(perm), config.batch_size):
            chunk = [train_seqs[i] for i in perm[start : start + config.batch_size]]
            batch = _prepare_batch(chunk, num_tasks)
            loss, grads = loss_and_grads(weights, *batch)
            _clip_global_norm(grads, config.clip_norm)
            adam_t += 1
            for k in weights:
                adam_m[k] = beta1 * adam_m[k] + (1 - beta1) * grads[k]
                adam_v[k] = beta2 * adam_v[k] + (1 - beta2) * grads[k] ** 2
                m_hat = adam_m[k] / (1 - beta1**adam_t)
                v_hat = adam_v[k] / (1 - beta2**adam_t)
                weights[k] = weights[k] - config.learning_rate * m_hat / (
                    np.sqrt(v_hat) + eps
                )
            n_targets = int(batch[3].sum())
            epoch_loss += loss * n_targets
            epoch_weight += n_targets
        train_losses.append(epoch_loss / max(epoch_weight, 1))

        monitor = (
            _batch_loss(weights, val_batch) if val_batch is not None else train_losses[-1]
        )
        val_losses.append(monitor)
        if monitor < best_loss - 1e-9:
            best_loss = monitor
            best_weights = {k: v.copy() for k, v in weights.items()}
            best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break

    model = DktModel(
        num_tasks=num_tasks,
        hidden_size=config.hidden_size,
        seed=config.seed,
        weights=best_weights,
    )
    diagnostics = {
        "train_losses": train_losses,
        "val_losses": val_losses,
        "best_epoch": best_epoch,
        "epochs_run": len(train_losses),
    }
    return model, diagnostics


def save(model: DktModel, path) -> None:
    np.savez(
        path,
        header=np.array([model.num_tasks, model.hidden_size, model.seed], dtype=np.int64),
        **model.weights,
    )


def load(path) -> DktModel:
    data = np.load(path)
    header = data["header"]
    weights = {k: data[k] for k in ALL_KEYS}
    return DktModel(
        num_tasks=int(header[0]),
        hidden_size=int(header[1]),
        seed=int(header[2]),
        weights=weights,
    )
