import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boal import ensemble
from boal.ensemble import EnsembleState, EvaluationError, Expert, LossSpec
from boal.errors import ValidationError

from conftest import ConstantExpert, gap_experts, stub_episode


def constant_state(values, log_weights=None, eta=1.0):
    experts = [ConstantExpert(f"e{i}", v) for i, v in enumerate(values)]
    lw = np.zeros(len(experts)) if log_weights is None else log_weights
    return EnsembleState(experts, lw, eta)


class TestPredict:
    def test_uniform_average(self, episode):
        state = constant_state([2.0, 4.0])
        assert ensemble.predict(state, episode, 1) == pytest.approx(3.0)

    def test_concentrated_ignores_floored_experts(self, episode):
        experts = [ConstantExpert(f"e{i}", v) for i, v in enumerate([9.0, 5.0, 7.0])]
        state = EnsembleState.concentrated(experts, 1)
        assert ensemble.predict(state, episode, 1) == pytest.approx(5.0)

    def test_log_weight_tilt(self, episode):
        # weights (1, e^-1) -> p = (0.7311, 0.2689)
        state = constant_state([0.0, 1.0], log_weights=[0.0, -1.0])
        assert ensemble.predict(state, episode, 1) == pytest.approx(0.2689, abs=1e-4)

    def test_expert_failure_names_expert(self, episode):
        class Boom(Expert):
            def _predict(self, episode, t):
                raise RuntimeError("nope")

        state = EnsembleState([Boom("bad"), ConstantExpert("ok", 1.0)], [0.0, 0.0])
        with pytest.raises(EvaluationError, match="bad"):
            ensemble.predict(state, episode, 1)

    def test_out_of_range_step(self, episode):
        state = constant_state([1.0, 2.0])
        with pytest.raises(ValidationError):
            ensemble.predict(state, episode, episode.horizon + 1)


class TestUpdate:
    def test_zero_losses_identity(self, episode):
        state = constant_state([1.0, 2.0], log_weights=[0.0, -0.3])
        new = ensemble.update(state, [0.0, 0.0])
        assert np.array_equal(new.probabilities, state.probabilities)

    def test_single_unit_loss(self):
        state = constant_state([0.0, 0.0])
        new = ensemble.update(state, [0.0, 1.0])
        assert new.probabilities == pytest.approx([0.7311, 0.2689], abs=1e-4)

    def test_equal_losses_cancel(self):
        state = constant_state([0.0, 0.0], log_weights=[0.2, -0.4])
        for c in (0.5, 3.0, 700.0):
            new = ensemble.update(state, [c, c])
            assert new.probabilities == pytest.approx(state.probabilities, abs=1e-12)

    @pytest.mark.parametrize("bad", [[math.nan, 0.0], [-0.1, 0.0], [math.inf, 0.0]])
    def test_invalid_losses_rejected(self, bad):
        state = constant_state([0.0, 0.0])
        with pytest.raises(ValidationError):
            ensemble.update(state, bad)

    def test_wrong_length_rejected(self):
        state = constant_state([0.0, 0.0])
        with pytest.raises(ValidationError):
            ensemble.update(state, [0.0, 0.0, 0.0])

    def test_log_weights_stay_finite_under_huge_losses(self):
        state = constant_state([0.0, 0.0])
        for _ in range(50):
            state = ensemble.update(state, [0.0, 900.0])
            assert np.all(np.isfinite(state.log_weights))


class TestLossesFromLabel:
    def test_squared(self, episode):
        state = constant_state([1.0, 3.0])
        losses = ensemble.losses_from_label(state, episode, 1, 1.0, LossSpec("squared"))
        assert losses == pytest.approx([0.0, 4.0])

    def test_absolute(self, episode):
        state = constant_state([1.0, 3.0])
        losses = ensemble.losses_from_label(state, episode, 1, 1.0, LossSpec("absolute"))
        assert losses == pytest.approx([0.0, 2.0])

    def test_exact_predictions_zero_loss(self, episode):
        state = constant_state([2.5, 2.5])
        for kind in ("squared", "absolute"):
            losses = ensemble.losses_from_label(state, episode, 1, 2.5, LossSpec(kind))
            assert losses == pytest.approx([0.0, 0.0])

    def test_clip_caps_losses(self, episode):
        state = constant_state([0.0, 10.0])
        losses = ensemble.losses_from_label(
            state, episode, 1, 0.0, LossSpec("squared", clip=5.0)
        )
        assert losses == pytest.approx([0.0, 5.0])

    def test_nonfinite_label_rejected(self, episode):
        state = constant_state([0.0, 1.0])
        with pytest.raises(ValidationError):
            ensemble.losses_from_label(state, episode, 1, math.nan)

    def test_invalid_loss_spec(self):
        with pytest.raises(ValidationError):
            LossSpec("huber")
        with pytest.raises(ValidationError):
            LossSpec("squared", clip=0.0)


class TestScore:
    def test_agreeing_experts_score_zero(self, episode):
        state = constant_state([4.2, 4.2, 4.2])
        assert ensemble.score(state, episode, 1) == pytest.approx(0.0)

    def test_uniform_two_expert_variance(self, episode):
        state = constant_state([2.0, 4.0])
        assert ensemble.score(state, episode, 1) == pytest.approx(1.0)

    def test_outlier_with_no_mass(self, episode):
        experts = [ConstantExpert("near", 2.0), ConstantExpert("far", 100.0)]
        state = EnsembleState.concentrated(experts, 0)
        assert ensemble.score(state, episode, 1) <= 1e-6

    def test_spread_max_pairwise_gap(self, episode):
        state = constant_state([2.0, 4.0, 3.0])
        assert ensemble.score_spread(state, episode, 1) == pytest.approx(2.0)

    def test_spread_all_equal(self, episode):
        state = constant_state([3.0, 3.0, 3.0])
        assert ensemble.score_spread(state, episode, 1) == pytest.approx(0.0)

    def test_spread_ignores_weights(self, episode):
        experts = [ConstantExpert("near", 2.0), ConstantExpert("far", 100.0)]
        state = EnsembleState.concentrated(experts, 0)
        assert ensemble.score_spread(state, episode, 1) == pytest.approx(98.0)


class TestScoreTrace:
    def test_single_step_matches_score(self, episode):
        state = constant_state([1.0, 5.0])
        trace = ensemble.score_trace(state, episode, 3, 3)
        assert trace.shape == (1,)
        assert trace[0] == pytest.approx(ensemble.score(state, episode, 3))

    def test_concentrated_weights_all_zero(self, episode):
        experts = [ConstantExpert("a", 1.0), ConstantExpert("b", 9.0)]
        state = EnsembleState.concentrated(experts, 0)
        trace = ensemble.score_trace(state, episode, 1, episode.horizon)
        assert np.all(trace <= 1e-12)

    def test_gap_squared_over_two(self):
        episode = stub_episode(horizon=3)
        state = EnsembleState(gap_experts([2.0, 4.0, 6.0]), [0.0, 0.0])
        trace = ensemble.score_trace(state, episode, 1, 3)
        assert trace == pytest.approx([1.0, 4.0, 9.0])

    def test_range_validation(self, episode):
        state = constant_state([0.0, 1.0])
        with pytest.raises(ValidationError):
            ensemble.score_trace(state, episode, 0, 3)
        with pytest.raises(ValidationError):
            ensemble.score_trace(state, episode, 5, 3)
        with pytest.raises(ValidationError):
            ensemble.score_trace(state, episode, 1, episode.horizon + 1)


class TestStateValidation:
    def test_needs_two_experts(self):
        with pytest.raises(ValidationError):
            EnsembleState([ConstantExpert("solo", 1.0)], [0.0])

    def test_rejects_nonfinite_log_weights(self):
        experts = [ConstantExpert("a", 1.0), ConstantExpert("b", 2.0)]
        with pytest.raises(ValidationError):
            EnsembleState(experts, [0.0, -math.inf])

    def test_rejects_bad_eta(self):
        experts = [ConstantExpert("a", 1.0), ConstantExpert("b", 2.0)]
        with pytest.raises(ValidationError):
            EnsembleState(experts, [0.0, 0.0], eta=0.0)

    def test_immutable(self):
        state = constant_state([1.0, 2.0])
        with pytest.raises(AttributeError):
            state.eta = 2.0
        with pytest.raises(ValueError):
            state.log_weights[0] = 1.0


# ---------------------------------------------------------------------------
# Property suite
# ---------------------------------------------------------------------------

finite_losses = st.lists(
    st.floats(min_value=0.0, max_value=50.0, allow_nan=False), min_size=2, max_size=6
)


@settings(max_examples=200, deadline=None)
@given(losses=finite_losses, eta=st.floats(min_value=0.05, max_value=4.0))
def test_normalization_after_updates(losses, eta):
    n = len(losses)
    state = EnsembleState([ConstantExpert(f"e{i}", float(i)) for i in range(n)], np.zeros(n), eta)
    state = ensemble.update(state, losses)
    p = state.probabilities
    assert abs(p.sum() - 1.0) <= 1e-9
    assert np.all(p >= 0.0) and np.all(p <= 1.0)


@settings(max_examples=100, deadline=None)
@given(
    losses=finite_losses,
    shift=st.floats(min_value=0.0, max_value=100.0, allow_nan=False),
)
def test_shift_invariance(losses, shift):
    n = len(losses)
    state = EnsembleState([ConstantExpert(f"e{i}", float(i)) for i in range(n)], np.zeros(n))
    a = ensemble.update(state, losses).probabilities
    b = ensemble.update(state, [l + shift for l in losses]).probabilities
    assert a == pytest.approx(b, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    li=st.floats(min_value=0.0, max_value=20.0),
    gap=st.floats(min_value=1e-6, max_value=20.0),
)
def test_monotonicity_from_equal_weights(li, gap):
    state = constant_state([0.0, 1.0, 2.0])
    new = ensemble.update(state, [li, li + gap, li])
    p = new.probabilities
    assert p[0] > p[1]
    assert p[2] > p[1]


@settings(max_examples=100, deadline=None)
@given(data=st.data())
def test_weighted_variance_identity(data):
    n = data.draw(st.integers(min_value=2, max_value=6))
    preds = data.draw(
        st.lists(
            st.floats(min_value=-50, max_value=50, allow_nan=False),
            min_size=n,
            max_size=n,
        )
    )
    lw = data.draw(
        st.lists(
            st.floats(min_value=-5, max_value=0, allow_nan=False), min_size=n, max_size=n
        )
    )
    episode = stub_episode()
    state = EnsembleState([ConstantExpert(f"e{i}", v) for i, v in enumerate(preds)], lw)
    s = ensemble.score(state, episode, 1)
    p = state.probabilities
    f = np.array(preds)
    y = p @ f
    alt = p @ f**2 - y**2
    assert s >= -1e-12
    assert s == pytest.approx(alt, rel=1e-6, abs=1e-9)


def test_score_zero_iff_supported_experts_agree(episode):
    agree = EnsembleState.concentrated(
        [ConstantExpert("a", 5.0), ConstantExpert("b", -3.0)], 0
    )
    assert ensemble.score(agree, episode, 1) <= 1e-12
    disagree = constant_state([5.0, -3.0])
    assert ensemble.score(disagree, episode, 1) > 0.0


def test_cumulative_loss_dominance():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = rng.integers(2, 6)
        steps = rng.integers(3, 12)
        state = EnsembleState(
            [ConstantExpert(f"e{i}", 0.0) for i in range(n)], np.zeros(n), eta=1.0
        )
        best = int(rng.integers(0, n))
        prev = state.probabilities[best]
        for _ in range(steps):
            losses = rng.uniform(0.5, 3.0, n)
            losses[best] = rng.uniform(0.0, 0.4)  # strictly minimal each step
            state = ensemble.update(state, losses)
            cur = state.probabilities[best]
            assert cur >= prev - 1e-12
            prev = cur


def test_prediction_memoization_counts_calls():
    class Counting(Expert):
        def __init__(self):
            super().__init__("count")
            self.calls = 0

        def _predict(self, episode, t):
            self.calls += 1
            return 1.0

    counting = Counting()
    episode = stub_episode()
    state = EnsembleState([counting, ConstantExpert("c", 0.0)], [0.0, 0.0])
    ensemble.score(state, episode, 2)
    ensemble.predict(state, episode, 2)
    ensemble.score_trace(state, episode, 2, 2)
    assert counting.calls <= 2  # point cache + one trace fill, never more
