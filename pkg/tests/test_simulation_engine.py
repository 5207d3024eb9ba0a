import csv
import json
from dataclasses import fields

import numpy as np
import pytest
from pydantic import ValidationError

from app.services.errors import ConfigurationError
from app.services.simulation.config import PRESETS, ExperimentConfig, phi_grid, snr_linear
from app.services.simulation.engine import (
    MANIFEST_NAME,
    SimulationEngine,
    channel_checksum,
    run_convergence_trace,
    run_cost_report,
    run_pattern_export,
    run_sum_rate_sweep,
)
from app.services.simulation.state import RESULT_COLUMNS, ResultRow


def _read_csv(path):
    with path.open(encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


class TestConfig:
    def test_presets_fill_dimensions(self):
        config = ExperimentConfig(scenario="dense")
        assert (config.M, config.K, config.n_rf) == (128, 30, 30)
        assert ExperimentConfig().M == PRESETS["normal"]["M"]

    def test_preset_conflict(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(scenario="normal", M=32)

    def test_custom_requires_dimensions(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(scenario="custom", M=16, K=4)

    def test_users_cannot_exceed_chains(self, small_config_data):
        small_config_data.update(K=3, n_rf=2)
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate(small_config_data)

    def test_rejects_empty_grid_and_unknown_keys(self, small_config_data):
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({**small_config_data, "snr_grid_db": []})
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({**small_config_data, "n_users": 3})

    def test_hash_tracks_content(self, small_config):
        same = ExperimentConfig.model_validate(small_config.model_dump(mode="json"))
        assert same.config_hash() == small_config.config_hash()
        assert small_config.model_copy(update={"seed": 12}).config_hash() != small_config.config_hash()

    def test_ula_elevation_option(self, small_config_data):
        assert ExperimentConfig.model_validate(small_config_data).pattern.ula_fixed_psi == pytest.approx(np.pi / 2)

        matched = ExperimentConfig.model_validate({**small_config_data, "pattern": {"ula_fixed_psi_deg": None}})
        assert matched.pattern.ula_fixed_psi is None
        with pytest.raises(ValidationError):
            ExperimentConfig.model_validate({**small_config_data, "pattern": {"ula_fixed_psi_deg": 120.0}})

    def test_phi_grid(self):
        grid = phi_grid(0.5)
        assert grid.size == 720
        assert grid[-1] == np.pi
        assert grid[0] > -np.pi
        np.testing.assert_allclose(np.diff(grid), np.radians(0.5))

    def test_snr_linear(self):
        assert snr_linear(10.0) == pytest.approx(10.0)
        assert snr_linear(0.0) == 1.0


class TestSweep:
    def test_writes_sorted_results(self, small_config, tmp_path):
        manifest = run_sum_rate_sweep(small_config, tmp_path / "run", max_workers=2)
        rows = _read_csv(tmp_path / "run" / "results.csv")

        assert manifest["files"] == ["results.csv", "timings.csv"]
        assert manifest["summary"] == {"rows": 16, "failed_trials": []}
        assert list(rows[0].keys()) == RESULT_COLUMNS
        assert len(rows) == 16
        keys = [(int(r["trial"]), r["architecture"], r["direction"], float(r["snr_db"])) for r in rows]
        assert keys[0] == (0, "dcaa", "uplink", 0.0)
        assert keys[-1] == (1, "ula", "downlink", 10.0)
        assert all(len(r["per_user_sinr"].split(";")) == 2 for r in rows)
        assert {r["converged"] for r in rows} <= {"true", "false"}

        timings = _read_csv(tmp_path / "run" / "timings.csv")
        assert [t["trial"] for t in timings] == ["0", "1"]
        assert (tmp_path / "run" / MANIFEST_NAME).exists()

    def test_trial_time_lives_only_in_timings(self, small_config, tmp_path):
        run_sum_rate_sweep(small_config, tmp_path / "run", max_workers=1)
        timings = _read_csv(tmp_path / "run" / "timings.csv")

        assert [f.name for f in fields(ResultRow)] == RESULT_COLUMNS
        assert all(float(t["duration_ms"]) >= 0 for t in timings)
        assert {t["status"] for t in timings} == {"ok"}

    def test_same_config_same_bytes(self, small_config, tmp_path):
        run_sum_rate_sweep(small_config, tmp_path / "a", max_workers=1)
        run_sum_rate_sweep(small_config, tmp_path / "b", max_workers=2)
        assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()

    def test_architectures_share_channels(self, small_config, tmp_path):
        run_sum_rate_sweep(small_config, tmp_path)
        rows = _read_csv(tmp_path / "results.csv")
        for trial in ("0", "1"):
            checksums = {r["channel_checksum"] for r in rows if r["trial"] == trial}
            assert len(checksums) == 1
        assert rows[0]["channel_checksum"] != rows[-1]["channel_checksum"]

    def test_sum_rate_grows_with_snr(self, small_config, tmp_path):
        run_sum_rate_sweep(small_config, tmp_path)
        rows = _read_csv(tmp_path / "results.csv")
        for low, high in zip(rows[0::2], rows[1::2]):
            assert float(high["sum_rate_bps_hz"]) > float(low["sum_rate_bps_hz"])

    def test_failed_trial_is_skipped(self, small_config, tmp_path, monkeypatch):
        engine = SimulationEngine(small_config, tmp_path)
        original = engine.run_trial

        def flaky(trial):
            if trial == 1:
                raise RuntimeError("canal inválido")
            return original(trial)

        monkeypatch.setattr(engine, "run_trial", flaky)
        manifest = engine.sweep()

        assert manifest["summary"] == {"rows": 8, "failed_trials": [1]}
        timings = _read_csv(tmp_path / "timings.csv")
        assert [t["status"] for t in timings] == ["ok", "error"]

    def test_dump_channels(self, small_config, tmp_path):
        config = small_config.model_copy(update={"dump_channels": True})
        manifest = run_sum_rate_sweep(config, tmp_path)
        dump = json.loads((tmp_path / "channels.json").read_text(encoding="utf-8"))

        assert "channels.json" in manifest["files"]
        assert sorted(dump) == ["0", "1"]
        assert len(dump["0"][1]["rays"]) == 6
        engine = SimulationEngine(config, tmp_path)
        assert dump["1"][0]["content_hash"] == engine.draw_trial_channels(1)[0].content_hash()

    def test_default_out_dir_uses_hash(self, small_config, results_dir):
        manifest = run_sum_rate_sweep(small_config)
        assert manifest["out_dir"] == str(results_dir / small_config.config_hash()[:12])


class TestChannels:
    def test_adding_users_keeps_existing_channels(self, small_config):
        more = small_config.model_copy(update={"K": 3, "n_rf": 3})
        first = SimulationEngine(small_config).draw_trial_channels(0)
        second = SimulationEngine(more).draw_trial_channels(0)
        assert [p.content_hash() for p in first] == [p.content_hash() for p in second[:2]]

    def test_seed_changes_channels(self, small_config):
        other = small_config.model_copy(update={"seed": 99})
        a = SimulationEngine(small_config).draw_trial_channels(0)
        b = SimulationEngine(other).draw_trial_channels(0)
        assert channel_checksum(a) != channel_checksum(b)

    def test_architecture_channel_shapes(self, small_config):
        engine = SimulationEngine(small_config)
        paths = engine.draw_trial_channels(0)
        dcaa, none = engine.architecture_channels("dcaa", paths)
        ula, assignment = engine.architecture_channels("ula", paths)

        assert dcaa.shape == (2, 2 * engine.cylinder().N)
        assert none is None
        assert ula.shape == (2, 4)
        assert assignment.K == 2


class TestConverge:
    def test_writes_one_row_per_iteration(self, small_config, tmp_path):
        manifest = run_convergence_trace(small_config, tmp_path)

        assert manifest["files"] == ["convergence_dcaa.csv", "convergence_ula.csv"]
        for architecture in ("dcaa", "ula"):
            rows = _read_csv(tmp_path / f"convergence_{architecture}.csv")
            assert list(rows[0].keys()) == ["iter", "sum_rate_bps_hz", "p_change_l1"]
            assert [int(r["iter"]) for r in rows] == list(range(1, len(rows) + 1))
            assert len(rows) == manifest["summary"][architecture]["iterations"]

    def test_rejects_uplink_only(self, small_config, tmp_path):
        config = small_config.model_copy(update={"direction": "uplink"})
        with pytest.raises(ConfigurationError):
            run_convergence_trace(config, tmp_path)


class TestPattern:
    def test_exports(self, small_config, tmp_path):
        manifest = run_pattern_export(small_config, tmp_path)

        assert manifest["files"] == ["pattern_sub0.csv", "pattern_sub3.csv", "pattern_cylinder.csv", "roster.json"]
        rows = _read_csv(tmp_path / "pattern_sub0.csv")
        assert len(rows) == 36 * 2
        assert max(float(r["af_db"]) for r in rows) == 0.0
        assert min(float(r["af_db"]) for r in rows) >= -300.0 - 1e-9

        envelope = _read_csv(tmp_path / "pattern_cylinder.csv")
        sub0 = {(r["phi_rad"], r["theta_rad"]): float(r["af_abs"]) for r in rows}
        for row in envelope:
            assert float(row["af_abs"]) >= sub0[(row["phi_rad"], row["theta_rad"])] * (1 - 1e-9)

        roster = json.loads((tmp_path / "roster.json").read_text(encoding="utf-8"))
        assert roster["N"] == 3
        assert len(roster["subarrays"]) == 6

    def test_pattern_for_other_array_size(self, small_config_data, tmp_path):
        small_config_data["pattern"] = {"phi_step_deg": 30.0, "M": 16}
        manifest = run_pattern_export(ExperimentConfig.model_validate(small_config_data), tmp_path)
        assert manifest["summary"] == {"M": 16, "N": 13}

    @pytest.mark.parametrize("pattern", [{"subarrays": [6]}, {"theta_deg": [200.0]}])
    def test_rejects_bad_grid(self, small_config_data, tmp_path, pattern):
        small_config_data["pattern"] = pattern
        with pytest.raises(ConfigurationError):
            run_pattern_export(ExperimentConfig.model_validate(small_config_data), tmp_path)


class TestCost:
    def test_dense_scenario_report(self, tmp_path):
        manifest = run_cost_report(ExperimentConfig(scenario="dense"), tmp_path)
        report = json.loads((tmp_path / "cost_report.json").read_text(encoding="utf-8"))

        assert manifest["summary"] == {"N": 104}
        assert report == manifest["report"]
        assert report["cost_cylinder"] == 89560.64
        assert report["cost_ula"] == 1511427.84

    def test_explicit_prices(self, small_config_data, tmp_path):
        small_config_data["prices"] = {"c_an": "1", "c_ps": "10", "c_sw": "2"}
        report = run_cost_report(ExperimentConfig.model_validate(small_config_data), tmp_path)["report"]
        # M=4, N=3, n_rf=2
        assert report["cost_cylinder"] == 2 * 3 * 4 * 1 + 2 * 3 * 2
        assert report["cost_ula"] == 3 * 2 * 4 * 10 + 3 * 4 * 1

    def test_unknown_band(self, small_config_data, tmp_path):
        small_config_data["price_band"] = "60GHz"
        with pytest.raises(ConfigurationError):
            run_cost_report(ExperimentConfig.model_validate(small_config_data), tmp_path)
