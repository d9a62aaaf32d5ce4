import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ktsim.bkt import (
    BktModel,
    BktParams,
    BktTracer,
    advance,
    bayes_posterior,
    fit_em,
    load,
    predict_skill,
    save,
)
from ktsim.scenario import default_scenario

from oracles import hmm_posterior_by_filter, hmm_posterior_by_paths

PARAMS = BktParams(p_start=0.5, p_trans=0.3, p_guess=0.2, p_slip=0.1)

valid_params = st.builds(
    BktParams,
    p_start=st.floats(0.05, 0.95),
    p_trans=st.floats(0.01, 0.9),
    p_guess=st.floats(0.02, 0.45),
    p_slip=st.floats(0.02, 0.45),
)


def make_tracer(posteriors, params=PARAMS):
    model = BktModel(skills=(params, params))
    tracer = BktTracer(model, default_scenario())
    tracer.posteriors[:] = posteriors
    return tracer


class TestPredictSkill:
    def test_mastered(self):
        assert predict_skill(1.0, PARAMS) == pytest.approx(1.0 - PARAMS.p_slip)

    def test_unmastered(self):
        assert predict_skill(0.0, PARAMS) == pytest.approx(PARAMS.p_guess)

    def test_frozen_midpoint(self):
        assert predict_skill(0.5, PARAMS) == pytest.approx(0.55)


class TestPredictTask:
    def test_singleton_equals_skill(self):
        tracer = make_tracer([0.5, 0.9])
        assert tracer.predict_task(0) == pytest.approx(predict_skill(0.5, PARAMS))

    def test_min_rule(self):
        # per-skill predictions 0.55 and 0.70 on the two-skill task
        theta_high = (0.70 - PARAMS.p_guess) / (1.0 - PARAMS.p_slip - PARAMS.p_guess)
        tracer = make_tracer([0.5, theta_high])
        assert tracer.predict_task(2) == pytest.approx(0.55)

    def test_equal_predictions(self):
        tracer = make_tracer([0.5, 0.5])
        assert tracer.predict_task(2) == pytest.approx(0.55)


class TestBayesPosterior:
    def test_frozen_success(self):
        assert bayes_posterior(0.5, True, PARAMS) == pytest.approx(0.45 / 0.55)

    def test_frozen_failure(self):
        assert bayes_posterior(0.5, False, PARAMS) == pytest.approx(0.05 / 0.45)

    def test_certainty_absorbing(self):
        assert bayes_posterior(1.0, True, PARAMS) == 1.0
        assert bayes_posterior(1.0, False, PARAMS) == 1.0

    def test_degenerate_denominator_clamps(self):
        degenerate = BktParams(p_start=0.5, p_trans=0.3, p_guess=1e-300, p_slip=0.1)
        q = bayes_posterior(0.0, True, degenerate)
        assert 0.0 <= q <= 1.0


class TestAdvance:
    def test_frozen(self):
        assert advance(0.8181818181818181, PARAMS) == pytest.approx(0.8727272727272727)

    def test_absorbing(self):
        assert advance(1.0, PARAMS) == 1.0

    def test_no_transition_identity(self):
        frozen = BktParams(0.5, 0.0, 0.2, 0.1)
        assert advance(0.37, frozen) == pytest.approx(0.37)

    @given(st.floats(0, 1), valid_params)
    def test_result_in_band(self, q, params):
        out = advance(q, params)
        assert q <= out <= 1.0


class TestUpdate:
    def test_single_skill_composition(self):
        tracer = make_tracer([0.5, 0.123])
        tracer.update(0, True)
        assert tracer.posteriors[0] == pytest.approx(0.8727272727272727)
        assert tracer.posteriors[1] == pytest.approx(0.123)

    def test_two_skill_failure(self):
        tracer = make_tracer([0.5, 0.5])
        tracer.update(2, False)
        assert tracer.posteriors[0] == pytest.approx(0.37777777777777777)
        assert tracer.posteriors[1] == pytest.approx(0.37777777777777777)

    def test_consistent_evidence_converges(self):
        params = BktParams(p_start=0.5, p_trans=0.0, p_guess=0.2, p_slip=0.1)
        up = make_tracer([0.5, 0.5], params)
        down = make_tracer([0.5, 0.5], params)
        last_up, last_down = 0.5, 0.5
        for _ in range(40):
            up.update(0, True)
            down.update(0, False)
            assert up.posteriors[0] >= last_up
            assert down.posteriors[0] <= last_down
            last_up, last_down = up.posteriors[0], down.posteriors[0]
        assert last_up > 0.999
        assert last_down < 0.001

    def test_reset(self):
        tracer = make_tracer([0.9, 0.9])
        tracer.reset()
        assert np.allclose(tracer.posteriors, PARAMS.p_start)


class TestMasteryPredicted:
    def test_all_confident(self, scenario):
        sure = BktParams(p_start=0.5, p_trans=0.3, p_guess=0.2, p_slip=0.01)
        tracer = make_tracer([1.0, 1.0], sure)
        # predictions are 0.99 everywhere, above both bars
        assert tracer.mastery_predicted(scenario)

    def test_task3_bar_binds(self, scenario):
        sure = BktParams(p_start=0.5, p_trans=0.3, p_guess=0.2, p_slip=0.2)
        tracer = make_tracer([1.0, 1.0], sure)
        # predictions are 0.80 < 0.8176 bar on task 3
        assert not tracer.mastery_predicted(scenario)

    def test_fresh_state_not_mastered(self, scenario):
        tracer = BktTracer(BktModel(skills=(PARAMS, PARAMS)), scenario)
        assert not tracer.mastery_predicted(scenario)


class TestMartingale:
    @given(st.floats(0.001, 0.999), valid_params)
    def test_posterior_expectation_preserves_theta(self, theta, params):
        p = predict_skill(theta, params)
        q1 = bayes_posterior(theta, True, params)
        q0 = bayes_posterior(theta, False, params)
        assert p * q1 + (1 - p) * q0 == pytest.approx(theta, abs=1e-12)


class TestOracleEquivalence:
    def test_recursive_update_matches_path_enumeration(self):
        rng = np.random.default_rng(7)
        scenario = default_scenario()
        for _ in range(50):
            params = BktParams(
                p_start=float(rng.uniform(0.05, 0.95)),
                p_trans=float(rng.uniform(0.01, 0.9)),
                p_guess=float(rng.uniform(0.02, 0.45)),
                p_slip=float(rng.uniform(0.02, 0.45)),
            )
            obs = rng.integers(0, 2, size=int(rng.integers(1, 9)))
            tracer = BktTracer(BktModel(skills=(params, params)), scenario)
            for x in obs:
                tracer.update(0, bool(x))
            by_paths = hmm_posterior_by_paths(
                params.p_start, params.p_trans, params.p_guess, params.p_slip, obs
            )
            by_filter = hmm_posterior_by_filter(
                params.p_start, params.p_trans, params.p_guess, params.p_slip, obs
            )
            assert by_filter == pytest.approx(by_paths, abs=1e-12)
            assert tracer.posteriors[0] == pytest.approx(by_paths, abs=1e-10)


class TestFitEm:
    def _simulate_hmm(self, params, n, t_len, rng):
        sequences = []
        for _ in range(n):
            mastered = rng.random() < params.p_start
            obs = np.zeros(t_len, dtype=np.int64)
            for t in range(t_len):
                p_correct = 1 - params.p_slip if mastered else params.p_guess
                obs[t] = int(rng.random() < p_correct)
                if not mastered and rng.random() < params.p_trans:
                    mastered = True
            sequences.append(obs)
        return sequences

    def test_log_likelihood_monotone(self):
        rng = np.random.default_rng(11)
        truth = BktParams(0.2, 0.3, 0.2, 0.1)
        sequences = self._simulate_hmm(truth, 120, 20, rng)
        _, diag = fit_em([sequences], seed=0, restarts=2)
        for history in diag["ll_history"]:
            diffs = np.diff(history)
            assert np.all(diffs >= -1e-8)

    def test_recovery_smoke(self):
        rng = np.random.default_rng(5)
        truth = BktParams(0.2, 0.3, 0.2, 0.1)
        sequences = self._simulate_hmm(truth, 300, 25, rng)
        model, _ = fit_em([sequences], seed=0)
        got = model.skills[0]
        assert got.p_start == pytest.approx(truth.p_start, abs=0.12)
        assert got.p_trans == pytest.approx(truth.p_trans, abs=0.12)
        assert got.p_guess == pytest.approx(truth.p_guess, abs=0.12)
        assert got.p_slip == pytest.approx(truth.p_slip, abs=0.12)

    def test_degenerate_all_success(self):
        sequences = [[np.array([1])] * 20]
        model, _ = fit_em(sequences, seed=0, restarts=2)
        p = model.skills[0]
        first_step = p.p_start * (1 - p.p_slip) + (1 - p.p_start) * p.p_guess
        assert first_step > 0.9
        errors = p.validate()
        assert errors == []

    def test_empty_skill_errors(self):
        with pytest.raises(ValueError, match="skill 2"):
            fit_em([[np.array([1, 0])], []], seed=0)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        model = BktModel(skills=(PARAMS, BktParams(0.11, 0.22, 0.33, 0.44)))
        path = tmp_path / "bkt.json"
        save(model, path)
        assert load(path) == model
