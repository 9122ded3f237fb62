"""Tests for experiment configuration parsing."""

import json
import math
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from ensemble_ldp.config import ExperimentConfig, load_config
from ensemble_ldp.domains import IntervalUnion
from ensemble_ldp.errors import ConfigError


def _base(**overrides):
    data = {
        "scenario": "equilibrium",
        "field": {"kind": "radial", "beta": 2.0, "coefficients": [0.0, 0.0, 1.0]},
        "domain": {"geometry": {"kind": "disc", "radius": 2.0}, "resolution": 20},
    }
    data.update(overrides)
    return data


class TestParsing:
    """Valid documents become frozen dataclasses with defaults filled in."""

    def test_defaults(self):
        config = ExperimentConfig.from_dict(_base())
        assert config.n_grid == (8, 16, 24, 32, 48, 64)
        assert config.tolerances.kkt_max == 1e-3
        assert config.bm.degrees == (10, 20, 30, 40, 50)
        assert config.solver.polish_every == 25

    def test_grid_built_from_geometry(self):
        grid = ExperimentConfig.from_dict(_base()).build_grid()
        assert grid.kind == "disc"
        assert grid.n_nodes > 0

    def test_unbounded_domain(self):
        config = ExperimentConfig.from_dict(_base(
            field={"kind": "polynomial", "beta": 2.0, "coefficients": [0.0, 0.0, 0.5]},
            domain={"unbounded": "real_line", "resolution": 50}))
        grid = config.build_grid()
        assert grid.unbounded and grid.truncation_radius > 1.0

    def test_ldp_window(self):
        config = ExperimentConfig.from_dict(_base(
            scenario="ldp", window={"kind": "intervals", "intervals": [[1.0, 3.0]]}))
        assert isinstance(config.window, IntervalUnion)

    def test_circle_tau_scale(self):
        config = ExperimentConfig.from_dict(_base(
            field={"kind": "radial", "beta": 2.0, "coefficients": [0.0]},
            domain={"geometry": {"kind": "circle", "radius": 1.0}, "resolution": 60,
                    "tau_scale": 1.0 / (2.0 * math.pi)}))
        assert math.isclose(config.build_grid().tau_mass.sum(), 1.0)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(_base(seeds=[3, 4])))
        assert load_config(path).seeds == (3, 4)


class TestRejection:
    """Unknown keys and inconsistent values fail closed."""

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(colour="red"))

    def test_unknown_tolerance_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(tolerances={"gap": 0.1}))

    def test_unknown_scenario(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(scenario="sweep"))

    def test_missing_field(self):
        data = _base()
        del data["field"]
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(data)

    def test_n_grid_not_increasing(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(n_grid=[8, 8, 16]))

    def test_burn_in_not_below_sweeps(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(sweeps=100, burn_in=100))

    def test_ldp_without_window(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(scenario="ldp"))

    def test_domain_needs_one_kind(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(_base(domain={"resolution": 10}))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(ConfigError):
            load_config(path)
