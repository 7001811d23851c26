import numpy as np
import pytest

from oracles import rstdp_scalar
from rsnn.errors import ContractViolation, InvalidParameterError
from rsnn.network import S2Activity
from rsnn.plasticity import (LearningConfig, Outcome, OutcomeWindow, Signal, afferent_times,
                             apply_stdp_update, apply_update, extract_features, rstdp_delta,
                             select_winner, signal_for, stdp_delta, update_window)

CFG = LearningConfig(m_r_plus=0.025, m_r_minus=-0.025, m_p_plus=0.01, m_p_minus=-0.005)


def window_with(correct, incorrect, capacity=100):
    win = OutcomeWindow(capacity)
    for _ in range(correct):
        win.push(Outcome.CORRECT)
    for _ in range(incorrect):
        win.push(Outcome.INCORRECT)
    return win


class TestRstdp:
    @pytest.mark.parametrize("w", [0.0, 1.0])
    @pytest.mark.parametrize("signal", [Signal.REWARD, Signal.PUNISH])
    @pytest.mark.parametrize("order", [True, False])
    def test_bounds_are_fixed_points(self, w, signal, order):
        assert rstdp_delta(w, order, signal, 0.7, 0.3, CFG) == 0.0

    def test_reward_causal_example(self):
        assert rstdp_delta(0.5, True, Signal.REWARD, 0.4, 0.0, CFG) == pytest.approx(0.0025)

    def test_punish_acausal_example(self):
        assert rstdp_delta(0.5, False, Signal.PUNISH, 0.0, 0.6, CFG) == pytest.approx(0.0015)

    def test_no_signal_is_contract_violation(self):
        with pytest.raises(ContractViolation):
            rstdp_delta(0.5, True, Signal.NONE, 0.5, 0.5, CFG)

    def test_vectorised_matches_scalar_oracle(self):
        rng = np.random.default_rng(0)
        w = rng.random(200)
        order = rng.random(200) < 0.5
        for signal in (Signal.REWARD, Signal.PUNISH):
            got = rstdp_delta(w, order, signal, 0.3, 0.7, CFG)
            want = [rstdp_scalar(x, o, signal.value, 0.3, 0.7, 0.025, -0.025, 0.01, -0.005)
                    for x, o in zip(w, order)]
            assert np.allclose(got, want, rtol=0, atol=1e-15)

    def test_config_signs(self):
        with pytest.raises(InvalidParameterError):
            LearningConfig(-0.1, -0.1, 0.1, -0.1)
        with pytest.raises(InvalidParameterError):
            LearningConfig(0.1, 0.1, 0.1, -0.1)
        with pytest.raises(InvalidParameterError):
            LearningConfig(0.1, -0.1, 0.1, -0.1, window_n=0)


class TestStdp:
    def test_examples(self):
        assert stdp_delta(1.0, True) == 0.0
        assert stdp_delta(1.0, False) == 0.0
        assert stdp_delta(0.5, True, 0.004) == pytest.approx(0.001)
        assert stdp_delta(0.5, False, a_minus=-0.003) == pytest.approx(-0.00075)


class TestWindow:
    def test_seven_three(self):
        assert window_with(7, 3).factors() == pytest.approx((0.3, 0.7))

    def test_all_correct(self):
        a_r, a_p = window_with(5, 0).factors()
        assert a_r == 0.0 and a_p == 1.0
        assert rstdp_delta(0.5, True, Signal.REWARD, a_r, a_p, CFG) == 0.0

    def test_empty(self):
        assert OutcomeWindow(10).factors() == (0.0, 0.0)

    def test_silent_not_stored(self):
        win = window_with(1, 1)
        assert update_window(win, Outcome.SILENT) == (0.5, 0.5)
        assert len(win) == 2

    def test_slides(self):
        win = window_with(10, 0, capacity=10)
        for _ in range(4):
            win.push(Outcome.INCORRECT)
        assert (win.n_correct, win.n_incorrect) == (6, 4)
        assert win.factors() == pytest.approx((0.4, 0.6))

    def test_signal_for(self):
        assert signal_for(None, 0) is Signal.NONE
        assert signal_for(1, 1) is Signal.REWARD
        assert signal_for(0, 1) is Signal.PUNISH


def activity(times, pots=None):
    t = np.asarray(times, dtype=float)
    return S2Activity(t, np.zeros_like(t) if pots is None else np.asarray(pots, dtype=float))


class TestWinner:
    def test_none(self):
        assert select_winner(activity(np.full((2, 2, 2), np.inf))) is None

    def test_earliest(self):
        t = np.full((2, 2, 2), np.inf)
        t[0, 0, 1], t[1, 1, 0], t[0, 1, 1] = 4, 2, 8
        assert select_winner(activity(t)) == (1, 1, 0)

    def test_tie_by_potential(self):
        t = np.full((2, 1, 2), np.inf)
        t[0, 0, 0] = t[1, 0, 1] = 3
        v = np.zeros_like(t)
        v[0, 0, 0], v[1, 0, 1] = 1.4, 1.9
        assert select_winner(activity(t, v)) == (1, 0, 1)

    def test_tie_lexicographic(self):
        t = np.full((2, 2, 2), np.inf)
        t[1, 0, 0] = t[0, 1, 1] = 5
        assert select_winner(activity(t)) == (0, 1, 1)

    def test_restricted_to_lattice(self):
        t = np.full((3, 2, 2), np.inf)
        t[0, 0, 0], t[2, 1, 1] = 1, 6
        assert select_winner(activity(t), lattice=2) == (2, 1, 1)
        assert select_winner(activity(t), lattice=1) is None


class TestApplyUpdate:
    def test_all_causal_reward_potentiates(self):
        rng = np.random.default_rng(1)
        weights = rng.uniform(0.05, 0.95, (3, 4, 2, 2))
        before = weights.copy()
        pre = np.ones((4, 2, 2))
        apply_update(weights, (1, 0, 0), pre, 3, Signal.REWARD, window_with(1, 1), CFG)
        assert np.all(weights[1] > before[1])
        assert np.array_equal(weights[[0, 2]], before[[0, 2]])

    def test_mixed_matches_scalar_oracle(self):
        weights = np.zeros((1, 1, 1, 3))
        weights[0, 0, 0] = [0.2, 0.6, 0.9]
        pre = np.array([[[2.0, 5.0, np.inf]]])
        win = window_with(1, 1)
        apply_update(weights, (0, 0, 0), pre, 4, Signal.REWARD, win, CFG)
        want = [w + rstdp_scalar(w, t <= 4, "reward", 0.5, 0.5, 0.025, -0.025, 0.01, -0.005)
                for w, t in zip([0.2, 0.6, 0.9], [2.0, 5.0, np.inf])]
        assert np.allclose(weights[0, 0, 0], want, rtol=0, atol=1e-15)

    def test_bad_lattice(self):
        with pytest.raises(ContractViolation):
            apply_update(np.zeros((2, 1, 1, 1)), (5, 0, 0), np.zeros((1, 1, 1)), 1,
                         Signal.REWARD, window_with(1, 0), CFG)

    def test_bad_shape(self):
        with pytest.raises(ContractViolation):
            apply_update(np.zeros((2, 1, 2, 2)), (0, 0, 0), np.zeros((1, 1, 1)), 1,
                         Signal.REWARD, window_with(1, 0), CFG)

    def test_no_signal_leaves_weights(self):
        weights = np.full((1, 1, 1, 1), 0.5)
        with pytest.raises(ContractViolation):
            apply_update(weights, (0, 0, 0), np.zeros((1, 1, 1)), 1, Signal.NONE,
                         window_with(1, 0), CFG)
        assert weights[0, 0, 0, 0] == 0.5

    def test_stdp_update(self):
        weights = np.full((1, 1, 1, 2), 0.5)
        apply_stdp_update(weights, (0, 0, 0), np.array([[[1.0, 9.0]]]), 5)
        assert weights[0, 0, 0].tolist() == pytest.approx([0.501, 0.49925])

    def test_afferent_times(self):
        lat = np.arange(2 * 5 * 5, dtype=float).reshape(2, 5, 5)
        assert np.array_equal(afferent_times(lat, (0, 1, 2), 3), lat[:, 1:4, 2:5])


class TestFeatures:
    def test_silent_first_spike(self):
        assert np.array_equal(extract_features(activity(np.full((5, 2, 2), np.inf)), "first_spike"),
                              np.zeros(5))

    def test_one_hot(self):
        t = np.full((5, 2, 2), np.inf)
        t[2, 1, 0], t[4, 0, 0] = 3, 7
        assert extract_features(activity(t), "first-spike").tolist() == [0, 0, 1, 0, 0]

    def test_counts_and_potentials(self):
        rng = np.random.default_rng(2)
        t = np.where(rng.random((4, 3, 3)) < 0.4, 1.0, np.inf)
        v = rng.random((4, 3, 3))
        act = activity(t, v)
        want = [sum(np.isfinite(x) for x in t[k].ravel()) for k in range(4)]
        assert extract_features(act, "spike_count").tolist() == want
        assert extract_features(act, "count").tolist() == want
        assert np.array_equal(extract_features(act, "potential"), v.reshape(4, -1).max(axis=1))

    def test_unknown(self):
        with pytest.raises(InvalidParameterError):
            extract_features(activity(np.zeros((1, 1, 1))), "rate")
