import json

import numpy as np
import pytest

from core.config import (ConfigManager, GridSettings, RunConfig, config_from_dict, get_config,
                         reset_config)
from core.errors import ConfigError
from core.scenarios import HazardModel, SemiMarkovModel
from core.superop import SIGMA_MINUS
from core.waiting_time import Erlang, Exponential


def _write(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_defaults():
    config = RunConfig()
    assert config.waiting_time == Erlang(2, 1.0)
    assert config.grid == GridSettings()
    assert config.model_type == "semi_markov"
    np.testing.assert_allclose(config.rho0().entries, 0.5)
    assert isinstance(config.build_model(), SemiMarkovModel)
    assert len(config.time_grid()) == 2001


def test_save_and_load_round_trip(tmp_path):
    manager = ConfigManager()
    manager.config.waiting_time = Exponential(2.5)
    manager.config.grid = GridSettings(t_end=4.0, n_points=41)
    path = manager.save_settings(tmp_path / "saved.json")
    loaded = ConfigManager(path).config
    assert loaded.waiting_time == Exponential(2.5)
    assert loaded.grid == GridSettings(t_end=4.0, n_points=41)
    assert loaded.solver == manager.config.solver
    np.testing.assert_allclose(loaded.kraus_map().operators, manager.config.kraus_map().operators)
    np.testing.assert_allclose(loaded.initial_state, manager.config.initial_state)


def test_hazard_model(tmp_path):
    data = {"model": {"type": "hazard_tcl", "lindblad": [[[0, 0], [1, 0]]]}}
    config = ConfigManager(_write(tmp_path, data)).config
    model = config.build_model()
    assert isinstance(model, HazardModel)
    np.testing.assert_allclose(config.lindblad_operators()[0], SIGMA_MINUS)
    assert config.to_dict()["model"]["type"] == "hazard_tcl"


def test_complex_entries():
    data = {"initial_state": [[0.5, [0.0, -0.5]], [[0.0, 0.5], 0.5]]}
    config = config_from_dict(data)
    assert config.rho0().entries[0, 1] == pytest.approx(-0.5j)


def test_malformed_json_names_the_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "grid": {,\n}', encoding="utf-8")
    with pytest.raises(ConfigError, match="line 2"):
        ConfigManager(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        ConfigManager(tmp_path / "absent.json")


@pytest.mark.parametrize("data, field", [
    ({"grid": {"bogus": 1}}, "grid.bogus"),
    ({"grid": {"n_points": 2.5}}, "grid.n_points"),
    ({"grid": {"n_points": 1}}, "grid"),
    ({"solver": {"tcl_tolerance": "small"}}, "solver.tcl_tolerance"),
    ({"kraus": [[[1, 0], [0, -1]]], "hilbert_dim": 2, "extra": 1}, "extra"),
    ({"kraus": [[[1, 0], [0, 0.5]]]}, "kraus"),
    ({"kraus": [[[1, 0]]]}, "kraus[0]"),
    ({"hilbert_dim": 0}, "hilbert_dim"),
    ({"hilbert_dim": 3}, "kraus"),
    ({"model": {"type": "hazard_tcl"}}, "model.lindblad"),
    ({"model": {"type": "quantum_walk"}}, "model.type"),
    ({"initial_state": [[1, 0], [0, 1]]}, "initial_state"),
    ({"waiting_time": {"type": "gamma"}}, "waiting_time.type"),
])
def test_errors_name_the_field(data, field):
    with pytest.raises(ConfigError) as info:
        config_from_dict(data)
    assert info.value.field == field


def test_global_instance(tmp_path):
    first = get_config()
    assert get_config() is first
    path = _write(tmp_path, {"grid": {"t_end": 3.0}})
    other = get_config(path)
    assert other is not first
    assert other.config.grid.t_end == 3.0
    reset_config()
    assert get_config() is not other


def test_global_instance_follows_the_file(tmp_path):
    path = _write(tmp_path, {"grid": {"t_end": 3.0}})
    assert get_config(path).config.grid.t_end == 3.0
    assert get_config(str(path)) is get_config(path)
    assert get_config().config.grid == GridSettings()


def test_save_given_config(tmp_path):
    manager = ConfigManager()
    override = RunConfig(waiting_time=Exponential(3.0))
    path = manager.save_settings(tmp_path / "effective.json", override)
    assert ConfigManager(path).config.waiting_time == Exponential(3.0)
    assert manager.config.waiting_time == Erlang(2, 1.0)
