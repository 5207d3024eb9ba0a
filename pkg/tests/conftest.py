import json

import numpy as np
import pytest

from app.config import settings
from app.services.cylinder import design_cylinder
from app.services.geometry import make_config, make_subarray
from app.services.simulation.config import ExperimentConfig


F_C = 47.2e9


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def sub16():
    return make_subarray(make_config(16, F_C), 0.3)


@pytest.fixture(scope="session")
def cylinder16():
    return design_cylinder(16, F_C)


SMALL_CONFIG = {
    "scenario": "custom",
    "M": 4,
    "K": 2,
    "n_rf": 2,
    "n_trials": 2,
    "snr_grid_db": [0.0, 10.0],
    "seed": 11,
    "channel": {"n_clusters": 2, "n_rays": 3},
    "algorithm": {"t_max": 5},
    "pattern": {"phi_step_deg": 10.0, "theta_deg": [90.0, 60.0], "subarrays": [0, 3]},
}


@pytest.fixture
def small_config_data():
    return json.loads(json.dumps(SMALL_CONFIG))


@pytest.fixture
def small_config(small_config_data):
    return ExperimentConfig.model_validate(small_config_data)


@pytest.fixture
def results_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "results_dir", str(tmp_path / "results"))
    return tmp_path / "results"
