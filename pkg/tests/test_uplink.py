import json

import numpy as np
import pytest

from app.services.errors import ConfigurationError, InfeasibleSelectionError, NumericalError
from app.services.uplink import (
    SelectionMatrix,
    UplinkScenario,
    exhaustive_select,
    greedy_select,
    hermitian_solve,
    mmse_combiner,
    mmse_combiners,
    mmse_sinrs,
    simulate_uplink_symbols,
    sinr_uplink,
    sum_rate_uplink,
    uplink_report,
)
from helpers import full_selection, random_channels, random_unit_vectors


def _scenario(rng, K=3, n_sub=8, snr=2.0, M=4, sigma2=1.0):
    return UplinkScenario(channels=random_channels(rng, K, n_sub), transmit_snr=snr, M=M, sigma2=sigma2)


class TestSelectionMatrix:
    def test_matrix_and_apply(self, rng):
        S = SelectionMatrix(n_sub=5, omega=(3, 0))
        channels = random_channels(rng, 2, 5)

        expected = np.array([[0, 0, 0, 1, 0], [1, 0, 0, 0, 0]], dtype=float)
        np.testing.assert_array_equal(S.matrix(), expected)
        np.testing.assert_array_equal(S.apply(channels), channels @ S.matrix().T)
        assert S.n_rf == 2

    def test_coerces_indices(self):
        S = SelectionMatrix(n_sub=4, omega=[np.int64(2), 1])
        assert S.omega == (2, 1)

    @pytest.mark.parametrize("omega", [(), (1, 1), (0, 4), (-1,)])
    def test_rejects_invalid(self, omega):
        with pytest.raises(InfeasibleSelectionError):
            SelectionMatrix(n_sub=4, omega=omega)


class TestScenario:
    def test_broadcasts_snr(self, rng):
        scen = _scenario(rng, K=3, snr=5.0)
        np.testing.assert_array_equal(scen.transmit_snr, [5.0, 5.0, 5.0])
        assert scen.K == 3
        assert scen.n_sub == 8

    @pytest.mark.parametrize("kwargs", [{"snr": -1.0}, {"sigma2": 0.0}, {"M": 0}])
    def test_rejects_invalid(self, rng, kwargs):
        with pytest.raises(ConfigurationError):
            _scenario(rng, **kwargs)


class TestCombiner:
    def test_single_user_is_matched_filter(self, rng):
        scen = _scenario(rng, K=1)
        S = full_selection(8, 5)
        w = mmse_combiner(S, scen, 0)
        g = S.apply(scen.channels)[0]

        assert np.linalg.norm(w) == pytest.approx(1.0)
        assert abs(np.vdot(w, g)) == pytest.approx(np.linalg.norm(g), rel=1e-12)

    def test_unit_norm(self, rng):
        scen = _scenario(rng, K=4)
        combiners = mmse_combiners(full_selection(8, 6), scen)
        assert combiners.shape == (4, 6)
        np.testing.assert_allclose(np.linalg.norm(combiners, axis=1), 1.0)

    def test_mmse_beats_random_combiners(self, rng):
        scen = _scenario(rng, K=2, snr=10.0)
        S = full_selection(8, 5)
        combiners = mmse_combiners(S, scen)
        best = [sinr_uplink(S, combiners, scen, k) for k in range(2)]

        for _ in range(10_000):
            candidates = random_unit_vectors(rng, 2, 5)
            for k in range(2):
                assert sinr_uplink(S, candidates, scen, k) <= best[k] * (1 + 1e-9)

    def test_zero_channel_gives_zero_combiner(self, rng):
        channels = random_channels(rng, 2, 6)
        channels[1] = 0
        scen = UplinkScenario(channels=channels, transmit_snr=1.0, M=4)
        S = full_selection(6, 3)

        np.testing.assert_array_equal(mmse_combiner(S, scen, 1), np.zeros(3))
        report = uplink_report(S, scen)
        assert report.per_user_sinr[1] == 0.0
        assert report.per_user_rate[1] == 0.0


class TestSinr:
    def test_matches_formula(self, rng):
        scen = _scenario(rng, K=2, snr=np.array([1.5, 0.5]), M=3)
        S = full_selection(8, 4)
        combiners = random_unit_vectors(rng, 2, 4)
        g = S.apply(scen.channels)
        w = combiners[0]

        signal = 1.5 * abs(np.vdot(w, g[0])) ** 2
        expected = signal / (0.5 * abs(np.vdot(w, g[1])) ** 2 + 3)
        assert sinr_uplink(S, combiners, scen, 0) == pytest.approx(expected, rel=1e-12)

    def test_silent_user_has_zero_sinr(self, rng):
        scen = _scenario(rng, K=2, snr=np.array([0.0, 1.0]))
        S = full_selection(8, 4)
        assert sinr_uplink(S, mmse_combiners(S, scen), scen, 0) == 0.0

    def test_single_user_rate(self, rng):
        scen = _scenario(rng, K=1, snr=3.0, M=4)
        S = full_selection(8, 5)
        gain = np.linalg.norm(S.apply(scen.channels)[0]) ** 2
        assert sum_rate_uplink(S, scen) == pytest.approx(np.log2(1 + 3.0 * gain / 4), rel=1e-12)

    def test_closed_form_matches_explicit_combiners(self, rng):
        for _ in range(20):
            scen = _scenario(rng, K=3, snr=rng.uniform(0.1, 10, 3), sigma2=rng.uniform(0.5, 2))
            S = full_selection(8, 5)
            assert sum_rate_uplink(S, scen) == pytest.approx(uplink_report(S, scen).sum_rate, rel=1e-10)

    def test_sigma2_cancels_with_normalized_snr(self, rng):
        channels = random_channels(rng, 3, 8)
        S = full_selection(8, 4)
        a = uplink_report(S, UplinkScenario(channels, 2.0, M=4, sigma2=1.0))
        b = uplink_report(S, UplinkScenario(channels, 2.0, M=4, sigma2=7.5))
        np.testing.assert_allclose(a.per_user_sinr, b.per_user_sinr, rtol=1e-10)

    def test_monte_carlo_agrees(self, rng):
        for _ in range(20):
            scen = _scenario(rng, K=3, snr=rng.uniform(0.5, 5, 3))
            S = full_selection(8, 4)
            combiners = mmse_combiners(S, scen)
            analytic = np.array([sinr_uplink(S, combiners, scen, k) for k in range(3)])
            empirical = simulate_uplink_symbols(S, combiners, scen, n_symbols=100_000, rng=rng)
            np.testing.assert_allclose(empirical, analytic, rtol=0.02)

    def test_mmse_sinrs_all_zero_gains(self):
        sinr = mmse_sinrs(np.zeros((3, 2), dtype=complex), np.ones(2), 4.0)
        np.testing.assert_array_equal(sinr, [0.0, 0.0])


class TestGreedy:
    def test_trace_is_non_decreasing(self, rng):
        for _ in range(100):
            scen = _scenario(rng, K=3, n_sub=12, snr=rng.uniform(0.5, 5))
            report = greedy_select(scen, 4)
            assert len(report.trace) == 4
            assert np.all(np.diff(report.trace) >= -1e-9)
            assert report.trace[-1] == pytest.approx(report.sum_rate, rel=1e-9)

    def test_single_user_first_pick_is_strongest(self, rng):
        scen = _scenario(rng, K=1, n_sub=10)
        report = greedy_select(scen, 3)
        assert report.selection.omega[0] == int(np.argmax(np.abs(scen.channels[0])))

    def test_selection_is_distinct(self, rng):
        report = greedy_select(_scenario(rng, K=2, n_sub=8), 8)
        assert sorted(report.selection.omega) == list(range(8))
        assert report.combiners.shape == (2, 8)

    def test_close_to_exhaustive(self, rng):
        ratios = []
        for _ in range(50):
            scen = _scenario(rng, K=2, n_sub=8, snr=rng.uniform(0.5, 5))
            greedy = greedy_select(scen, 3).sum_rate
            optimum = exhaustive_select(scen, 3).sum_rate
            assert greedy <= optimum + 1e-9
            ratios.append(greedy / optimum)
        assert np.mean(ratios) >= 0.9

    def test_rejects_more_users_than_chains(self, rng):
        with pytest.raises(InfeasibleSelectionError):
            greedy_select(_scenario(rng, K=4), 3)

    @pytest.mark.parametrize("n_rf", [0, 9])
    def test_rejects_budget_out_of_range(self, rng, n_rf):
        with pytest.raises(InfeasibleSelectionError):
            greedy_select(_scenario(rng, K=1), n_rf)


class TestExhaustive:
    def test_full_budget_selects_everything(self, rng):
        report = exhaustive_select(_scenario(rng, K=2, n_sub=5), 5)
        assert report.selection.omega == (0, 1, 2, 3, 4)

    def test_guard(self, rng):
        with pytest.raises(InfeasibleSelectionError):
            exhaustive_select(_scenario(rng, K=2, n_sub=40), 20)


def test_hermitian_solve_rejects_singular():
    with pytest.raises(NumericalError):
        hermitian_solve(np.zeros((3, 3), dtype=complex), np.ones(3))


def test_report_serializes_to_json(rng):
    report = greedy_select(_scenario(rng, K=2, n_sub=6), 3)
    payload = json.loads(json.dumps(report.to_dict()))

    assert len(payload["selection"]) == 3
    assert len(payload["combiners"]) == 2
    assert len(payload["combiners"][0][0]) == 2
    assert payload["beams"] is None
