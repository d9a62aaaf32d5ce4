import numpy as np
import pytest

from ktsim.dkt import (
    DktConfig,
    DktModel,
    DktTracer,
    _prepare_batch,
    encode,
    fit_bptt,
    init_weights,
    load,
    loss_and_grads,
    predict_from_state,
    save,
    step,
)
from ktsim.rng import stream_rng
from ktsim.scenario import default_scenario

from oracles import central_difference_gradient, max_relative_error


def zero_weights(num_tasks=4, hidden=8):
    d = 2 * num_tasks
    return {
        "w_z": np.zeros((hidden, hidden + d)),
        "w_r": np.zeros((hidden, hidden + d)),
        "w_c": np.zeros((hidden, hidden + d)),
        "b_z": np.zeros(hidden),
        "b_r": np.zeros(hidden),
        "b_c": np.zeros(hidden),
        "w_out": np.zeros((num_tasks, hidden)),
        "b_out": np.zeros(num_tasks),
    }


def make_tracer(weights=None, hidden=8, seed=0):
    model = DktModel(
        num_tasks=4,
        hidden_size=hidden,
        seed=seed,
        weights=weights if weights is not None else init_weights(4, hidden, 0.5, seed),
    )
    return DktTracer(model, default_scenario())


class TestEncode:
    def test_success_block(self):
        x = encode(1, True, 4)  # task 2 in external numbering
        assert x.tolist() == [0, 1, 0, 0, 0, 0, 0, 0]

    def test_failure_block(self):
        x = encode(1, False, 4)
        assert x.tolist() == [0, 0, 0, 0, 0, 1, 0, 0]

    def test_exactly_one_hot(self):
        for task in range(4):
            for success in (True, False):
                x = encode(task, success, 4)
                assert x.sum() == 1.0 and x.max() == 1.0


class TestStep:
    def test_zero_weights_fixed_point(self):
        w = zero_weights()
        h = step(np.zeros(8), encode(0, True, 4), w)
        assert np.allclose(h, 0.0)

    def test_deterministic(self):
        w = init_weights(4, 8, 0.3, 1)
        h0 = np.linspace(-0.5, 0.5, 8)
        x = encode(2, False, 4)
        assert np.array_equal(step(h0, x, w), step(h0, x, w))

    def test_bounded_from_zero_state(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            w = init_weights(4, 8, float(rng.uniform(0.1, 3.0)), trial)
            h = np.zeros(8)
            for t in range(50):
                h = step(h, encode(int(rng.integers(4)), bool(rng.integers(2)), 4), w)
                assert np.all(np.abs(h) < 1.0)

    def test_batched_matches_single(self):
        w = init_weights(4, 8, 0.4, 2)
        h = np.vstack([np.zeros(8), np.linspace(-0.3, 0.3, 8)])
        x = np.vstack([encode(0, True, 4), encode(3, False, 4)])
        batched = step(h, x, w)
        assert np.allclose(batched[0], step(h[0], x[0], w))
        assert np.allclose(batched[1], step(h[1], x[1], w))


class TestPredict:
    def test_zero_weights_half(self):
        tracer = make_tracer(zero_weights())
        assert np.allclose(tracer.predict(), 0.5)

    def test_output_bias_frozen(self):
        w = zero_weights()
        w["b_out"] = np.array([1.0, 0.0, 0.0, 0.0])
        p = predict_from_state(np.zeros(8), w)
        assert p[0] == pytest.approx(0.7310585786300049)
        assert np.allclose(p[1:], 0.5)

    def test_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(3)
        for trial in range(10):
            tracer = make_tracer(init_weights(4, 8, 1.0, trial))
            for _ in range(20):
                tracer.update(int(rng.integers(4)), bool(rng.integers(2)))
                p = tracer.predict()
                assert np.all(p > 0.0) and np.all(p < 1.0)


class TestHypotheticalDeltas:
    def test_zero_weights_all_zero(self):
        tracer = make_tracer(zero_weights())
        ds, df = tracer.hypothetical_deltas(1)
        assert np.allclose(ds, 0.0) and np.allclose(df, 0.0)

    def test_purity(self):
        tracer = make_tracer()
        tracer.update(0, True)
        before = tracer.h.copy()
        tracer.hypothetical_deltas(2)
        assert np.array_equal(tracer.h, before)

    def test_matches_recomputation(self):
        tracer = make_tracer(seed=5)
        tracer.update(1, False)
        base = tracer.predict()
        ds, df = tracer.hypothetical_deltas(3)
        w = tracer.model.weights
        h_s = step(tracer.h, encode(3, True, 4), w)
        h_f = step(tracer.h, encode(3, False, 4), w)
        assert np.allclose(ds, predict_from_state(h_s, w) - base, atol=0)
        assert np.allclose(df, predict_from_state(h_f, w) - base, atol=0)


class TestMastery:
    def test_all_high(self, scenario):
        w = zero_weights()
        w["b_out"] = np.full(4, 5.0)  # all predictions ~0.993
        tracer = make_tracer(w)
        assert tracer.mastery_predicted(scenario)

    def test_task3_bar_binds(self, scenario):
        w = zero_weights()
        w["b_out"] = np.array([3.0, 3.0, np.log(0.80 / 0.20), 3.0])  # task 3 at 0.80
        tracer = make_tracer(w)
        assert not tracer.mastery_predicted(scenario)

    def test_zero_weights_not_mastered(self, scenario):
        assert not make_tracer(zero_weights()).mastery_predicted(scenario)


class TestGradients:
    def test_bptt_matches_finite_differences(self):
        hidden, m = 4, 4
        weights = init_weights(m, hidden, 0.6, 9)
        batch = _prepare_batch([[(0, 1), (2, 0), (1, 1)]], m)
        _, grads = loss_and_grads(weights, *batch)
        for key in weights:
            def loss_of(tensor, key=key):
                trial = {k: (tensor if k == key else v) for k, v in weights.items()}
                return loss_and_grads(trial, *batch)[0]

            numeric = central_difference_gradient(loss_of, weights[key].copy())
            assert max_relative_error(grads[key], numeric) <= 1e-4, key


def random_trajectories(n, steps, seed):
    trajectories = []
    for i in range(n):
        policy = stream_rng(seed, "train-policy", i)
        trajectories.append(
            [(int(policy.integers(4)), int(policy.integers(2))) for _ in range(steps)]
        )
    return trajectories


class TestFitBptt:
    def test_loss_decreases(self):
        data = random_trajectories(40, 10, seed=1)
        config = DktConfig(hidden_size=8, max_epochs=10, patience=10, seed=0)
        _, diag = fit_bptt(data, 4, config)
        assert diag["train_losses"][-1] < diag["train_losses"][0]

    def test_deterministic(self):
        data = random_trajectories(20, 8, seed=2)
        config = DktConfig(hidden_size=6, max_epochs=5, seed=3)
        model_a, _ = fit_bptt(data, 4, config)
        model_b, _ = fit_bptt(data, 4, config)
        for key in model_a.weights:
            assert np.array_equal(model_a.weights[key], model_b.weights[key])

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            fit_bptt([], 4, DktConfig())


class TestPersistence:
    def test_round_trip(self, tmp_path):
        model = DktModel(num_tasks=4, hidden_size=8, seed=7, weights=init_weights(4, 8, 0.2, 7))
        path = tmp_path / "dkt.npz"
        save(model, path)
        again = load(path)
        assert again.num_tasks == 4 and again.hidden_size == 8 and again.seed == 7
        for key in model.weights:
            assert np.array_equal(again.weights[key], model.weights[key])
