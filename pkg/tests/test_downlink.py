import numpy as np
import pytest

from app.services import uplink
from app.services.downlink import (
    DownlinkScenario,
    PowerAllocation,
    coupling_matrix,
    dual_uplink_selection,
    mmse_precoder,
    mmse_precoders,
    optimize_downlink,
    simulate_downlink_symbols,
    sinr_downlink,
    sinr_from_coupling,
    waterfill,
    waterfill_from_coupling,
)
from app.services.errors import ConfigurationError, DegenerateChannelError
from helpers import full_selection, random_channels


def _orthogonal_channels(gains):
    return np.diag(np.sqrt(np.asarray(gains, dtype=float))).astype(complex)


def _sum_rate(gains, p, noise):
    return float(np.sum(np.log2(1 + np.asarray(p) * np.asarray(gains) / noise)))


class TestScenario:
    @pytest.mark.parametrize(
        "kwargs",
        [{"total_power": 0.0}, {"t_max": 0}, {"eps_th": 0.0}, {"sigma2": -1.0}],
    )
    def test_rejects_invalid(self, rng, kwargs):
        params = {"channels": random_channels(rng, 2, 4), "total_power": 1.0, "M": 4, **kwargs}
        with pytest.raises(ConfigurationError):
            DownlinkScenario(**params)

    def test_noise_level(self, rng):
        scen = DownlinkScenario(random_channels(rng, 2, 4), total_power=1.0, M=8, sigma2=0.5)
        assert scen.noise_level == 4.0
        assert scen.K == 2


class TestPowerAllocation:
    def test_uniform(self):
        allocation = PowerAllocation.uniform(4, 2.0)
        np.testing.assert_allclose(allocation.p, 0.5)

    def test_rejects_wrong_total(self):
        with pytest.raises(ConfigurationError):
            PowerAllocation(p=np.array([0.5, 0.4]), total_power=1.0)

    def test_rejects_negative(self):
        with pytest.raises(ConfigurationError):
            PowerAllocation(p=np.array([1.5, -0.5]), total_power=1.0)


class TestPrecoders:
    def test_single_user_is_matched_filter(self, rng):
        scen = DownlinkScenario(random_channels(rng, 1, 6), total_power=2.0, M=4)
        S = full_selection(6, 4)
        w = mmse_precoder(S, scen, np.array([2.0]), 0)
        g = S.apply(scen.channels)[0]

        assert np.linalg.norm(w) == pytest.approx(1.0)
        assert coupling_matrix(S, scen, w[None, :])[0, 0] == pytest.approx(np.linalg.norm(g), rel=1e-12)

    def test_symmetric_users_get_equal_sinr(self):
        channels = np.array([[1.0, 0.3], [0.3, 1.0]], dtype=complex)
        scen = DownlinkScenario(channels, total_power=2.0, M=2)
        S = full_selection(2)
        p = np.array([1.0, 1.0])
        precoders = mmse_precoders(S, scen, p)
        sinr = [sinr_downlink(S, precoders, scen, p, k) for k in range(2)]
        assert sinr[0] == pytest.approx(sinr[1], rel=1e-12)

    def test_zero_noise_still_defines_precoders(self, rng):
        scen = DownlinkScenario(random_channels(rng, 2, 6), total_power=1.0, M=4, sigma2=0.0)
        precoders = mmse_precoders(full_selection(6, 4), scen, np.array([0.5, 0.5]))
        np.testing.assert_allclose(np.linalg.norm(precoders, axis=1), 1.0)


class TestSinr:
    def test_matches_formula(self, rng):
        scen = DownlinkScenario(random_channels(rng, 2, 5), total_power=3.0, M=4, sigma2=0.7)
        S = full_selection(5, 3)
        p = np.array([2.0, 1.0])
        precoders = mmse_precoders(S, scen, p)
        a = coupling_matrix(S, scen, precoders)

        signal = p[0] * abs(a[0, 0]) ** 2 / 4
        expected = signal / (p[1] * abs(a[0, 1]) ** 2 / 4 + 0.7)
        assert sinr_downlink(S, precoders, scen, p, 0) == pytest.approx(expected, rel=1e-12)

    def test_coupling_form_agrees(self, rng):
        scen = DownlinkScenario(random_channels(rng, 3, 6), total_power=3.0, M=4, sigma2=1.3)
        S = full_selection(6, 4)
        p = np.array([1.5, 1.0, 0.5])
        precoders = mmse_precoders(S, scen, p)
        coupling = np.abs(coupling_matrix(S, scen, precoders)) ** 2

        direct = [sinr_downlink(S, precoders, scen, p, k) for k in range(3)]
        np.testing.assert_allclose(sinr_from_coupling(coupling, p, scen.noise_level), direct, rtol=1e-12)

    def test_zero_power_user(self, rng):
        scen = DownlinkScenario(random_channels(rng, 2, 4), total_power=1.0, M=2)
        S = full_selection(4, 2)
        p = np.array([0.0, 1.0])
        assert sinr_downlink(S, mmse_precoders(S, scen, p), scen, p, 0) == 0.0

    def test_monte_carlo_agrees(self, rng):
        for _ in range(20):
            scen = DownlinkScenario(random_channels(rng, 3, 6), total_power=3.0, M=4)
            S = full_selection(6, 4)
            p = rng.dirichlet(np.ones(3)) * 3.0
            precoders = mmse_precoders(S, scen, p)
            analytic = [sinr_downlink(S, precoders, scen, p, k) for k in range(3)]
            empirical = simulate_downlink_symbols(S, precoders, scen, p, n_symbols=100_000, rng=rng)
            np.testing.assert_allclose(empirical, analytic, rtol=0.02)


class TestWaterfill:
    def test_single_user_takes_everything(self):
        p = waterfill_from_coupling(np.array([[2.0]]), 1.0, 5.0, np.array([5.0]))
        np.testing.assert_allclose(p, [5.0])

    def test_identical_users_split_equally(self):
        coupling = np.eye(4) * 3.0
        p = waterfill_from_coupling(coupling, 1.0, 2.0, np.full(4, 0.5))
        np.testing.assert_allclose(p, 0.5)

    def test_active_set_hand_values(self):
        coupling = np.diag([4.0, 1.0, 0.25])
        p = waterfill_from_coupling(coupling, 1.0, 3.0, np.ones(3), active_set=True)
        np.testing.assert_allclose(p, [1.875, 1.125, 0.0], atol=1e-12)

    def test_rescaled_clamp(self):
        coupling = np.diag([4.0, 1.0, 0.25])
        p = waterfill_from_coupling(coupling, 1.0, 3.0, np.ones(3))
        np.testing.assert_allclose(p, np.array([2.5, 1.75, 0.0]) * 3.0 / 4.25, atol=1e-12)

    @pytest.mark.parametrize("active_set", [True, False], ids=["active_set", "rescale"])
    def test_matches_simplex_grid(self, rng, active_set):
        noise, total, steps = 1.0, 3.0, 200
        a, b = np.meshgrid(np.linspace(0, 1, steps + 1), np.linspace(0, 1, steps + 1))
        simplex = a + b <= 1 + 1e-12
        grid = total * np.column_stack([a[simplex], b[simplex], np.clip(1 - a[simplex] - b[simplex], 0, None)])
        for _ in range(20):
            gains = rng.uniform(0.1, 5.0, 3)
            p = waterfill_from_coupling(np.diag(gains), noise, total, np.ones(3), active_set=active_set)
            best_grid = float(np.max(np.sum(np.log2(1 + grid * gains / noise), axis=1)))
            # variación máxima del objetivo dentro de una celda del grid
            resolution = 2 * (total / steps) * gains.max() / (noise * np.log(2))
            tolerance = 1e-12 if active_set else resolution

            assert p.sum() == pytest.approx(total)
            assert np.all(p >= 0)
            assert _sum_rate(gains, p, noise) >= best_grid - tolerance

    def test_zero_gain_user_gets_nothing(self):
        p = waterfill_from_coupling(np.diag([2.0, 0.0]), 1.0, 1.0, np.array([0.5, 0.5]))
        np.testing.assert_allclose(p, [1.0, 0.0])

    def test_all_zero_gains_raise(self):
        with pytest.raises(DegenerateChannelError):
            waterfill_from_coupling(np.zeros((2, 2)), 1.0, 1.0, np.array([0.5, 0.5]))

    def test_wrapper_returns_allocation(self, rng):
        scen = DownlinkScenario(random_channels(rng, 3, 6), total_power=2.0, M=4)
        S = full_selection(6, 4)
        p_prev = np.full(3, 2.0 / 3)
        allocation = waterfill(S, mmse_precoders(S, scen, p_prev), scen, p_prev)
        assert isinstance(allocation, PowerAllocation)
        assert allocation.p.sum() == pytest.approx(2.0)


class TestOptimize:
    def test_single_user(self, rng):
        channels = random_channels(rng, 1, 8)
        report = optimize_downlink(channels, total_power=4.0, n_rf=3, M=4, sigma2=1.0)
        gain = np.linalg.norm(report.selection.apply(channels)[0]) ** 2

        assert report.sum_rate == pytest.approx(np.log2(1 + 4.0 * gain / 4), rel=1e-10)
        np.testing.assert_allclose(report.power, [4.0])
        assert report.selection.omega[0] == int(np.argmax(np.abs(channels[0])))

    def test_orthogonal_channels_reach_fixed_point(self):
        gains = [4.0, 1.0, 0.25]
        report = optimize_downlink(
            _orthogonal_channels(gains), total_power=3.0, n_rf=3, M=1, sigma2=1.0, active_set=True,
        )
        assert report.converged
        assert report.iterations == 2
        assert report.p_change_trace[-1] < 1e-12
        np.testing.assert_allclose(report.power, [1.875, 1.125, 0.0], atol=1e-12)
        assert report.sum_rate == pytest.approx(_sum_rate(gains, [1.875, 1.125, 0.0], 1.0), rel=1e-12)

    def test_powers_and_traces(self, rng):
        report = optimize_downlink(random_channels(rng, 3, 8), total_power=5.0, n_rf=4, M=4)
        assert report.power.sum() == pytest.approx(5.0)
        assert report.final_power.sum() == pytest.approx(5.0)
        assert len(report.trace) == report.iterations + 1
        assert len(report.p_change_trace) == report.iterations
        assert report.combiners.shape == (3, 4)

    def test_never_below_uniform_power(self, rng):
        for _ in range(200):
            report = optimize_downlink(random_channels(rng, 3, 8), total_power=rng.uniform(0.5, 20), n_rf=4, M=4)
            assert report.sum_rate >= report.trace[0] - 1e-12

    def test_warns_without_convergence(self, rng, capsys):
        report = optimize_downlink(random_channels(rng, 3, 8), 5.0, 4, t_max=1, eps_th=1e-12, M=4)
        assert not report.converged
        assert report.iterations == 1
        assert "Sin convergencia" in capsys.readouterr().out

    @pytest.mark.parametrize("update_selection", [False, True])
    def test_selection_call_count(self, rng, monkeypatch, update_selection):
        calls = []
        original = uplink.greedy_select

        def counting(scen, n_rf):
            calls.append(n_rf)
            return original(scen, n_rf)

        monkeypatch.setattr(uplink, "greedy_select", counting)
        report = optimize_downlink(
            random_channels(rng, 3, 8), 5.0, 4, t_max=5, eps_th=1e-12, M=4, update_selection=update_selection,
        )
        expected = 1 + report.iterations if update_selection else 1
        assert len(calls) == expected

    def test_dual_selection_with_zero_noise(self, rng):
        scen = DownlinkScenario(random_channels(rng, 2, 6), total_power=1.0, M=4, sigma2=0.0)
        assert dual_uplink_selection(scen, np.array([0.5, 0.5]), 3).n_rf == 3
