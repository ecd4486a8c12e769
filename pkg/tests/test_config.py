"""
Tests for experiment configuration loading and validation
"""

import json

import pytest

from RisAlign import config
from RisAlign.config import ExperimentConfig, build_config, load_config_file, merge_overrides
from RisAlign.error_handler import ConfigurationError


class TestExperimentConfig:
    def test_counts_accept_scientific_notation(self):
        experiment = build_config({"command": "outage", "seed": 1, "trials": "1e6"})
        assert experiment.trials == 1_000_000
        assert build_config({"command": "outage", "seed": 1, "trials": 2.5e5}).trials == 250_000

    def test_trials_follow_target_outage(self):
        assert build_config({"command": "outage", "seed": 1, "target_p_out": 1e-4}).trials == 1_000_000
        assert build_config({"command": "outage", "seed": 1, "target_p_out": 0.003}).trials == 33_334
        assert build_config({"command": "outage", "seed": 1}).trials == config.DEFAULT_TRIALS

    def test_explicit_trials_beat_target(self):
        experiment = build_config({"command": "outage", "seed": 1, "target_p_out": 1e-4, "trials": "2e4"})
        assert experiment.trials == 20_000

    def test_target_outage_range(self):
        with pytest.raises(ConfigurationError, match="target_p_out"):
            build_config({"command": "outage", "seed": 1, "target_p_out": 1.5})

    def test_fractional_count_rejected(self):
        with pytest.raises(ConfigurationError):
            build_config({"command": "outage", "seed": 1, "trials": "1.5"})

    @pytest.mark.parametrize("command", ["outage", "sweep-angle", "moments"])
    def test_seed_required_for_monte_carlo(self, command):
        with pytest.raises(ConfigurationError, match="seed"):
            build_config({"command": command})

    def test_deterministic_commands_need_no_seed(self):
        assert build_config({"command": "spacing"}).seed is None
        assert build_config({"command": "series"}).seed is None

    def test_series_density_check_needs_seed_and_output(self):
        with pytest.raises(ConfigurationError, match="seed"):
            build_config({"command": "series", "series": {"trials": 1000}, "density_output": "d.csv"})
        with pytest.raises(ConfigurationError, match="density_output"):
            build_config({"command": "series", "seed": 3, "series": {"trials": 1000}})

    def test_seed_range(self):
        with pytest.raises(ConfigurationError):
            build_config({"command": "outage", "seed": 2**64})

    def test_coherent_window(self):
        with pytest.raises(ConfigurationError, match="coherent"):
            build_config({"command": "outage", "seed": 1, "alignment": {"kind": "coherent", "level": 4}})
        experiment = build_config(
            {"command": "outage", "seed": 1, "alignment": {"kind": "coherent", "level": 4, "convention": "appendixA"}}
        )
        assert experiment.alignment.level == 4

    def test_unknown_command(self):
        with pytest.raises(ConfigurationError):
            build_config({"command": "plot"})

    def test_users_need_channel_or_position(self):
        with pytest.raises(ConfigurationError, match="user 0"):
            build_config({"command": "ma-budget", "multi_access": {"users": [{"rate": 1.0, "distance": 5.0}]}})

    def test_slot_matrix_shape(self):
        users = [{"rate": 1.0, "channel": 1.0}, {"rate": 1.0, "channel": 0.5}]
        with pytest.raises(ConfigurationError, match="2x2"):
            build_config({"command": "ma-budget", "multi_access": {"users": users, "slots": [[1.0, 0.5]]}})

    def test_grid_points(self):
        grid = {"start_db": 0, "stop_db": 10, "step_db": 5}
        experiment = build_config({"command": "outage", "seed": 1, "grid": grid})
        assert experiment.grid.points_db() == [0.0, 5.0, 10.0]
        explicit = build_config({"command": "outage", "seed": 1, "grid": {"values_db": [3, 7]}})
        assert explicit.grid.points_db() == [3.0, 7.0]

    def test_echo_leaves_out_non_semantic_fields(self):
        experiment = build_config(
            {"command": "outage", "seed": 1, "output": "a.csv", "workers": 4, "log_level": "DEBUG", "log_dir": "/tmp"}
        )
        echo = experiment.echo()
        assert not config.NON_SEMANTIC_FIELDS & set(echo)
        assert echo["seed"] == 1
        assert echo["geometry"] == {"M": 8, "dx": 0.5, "u0": 0.0}

    def test_echo_is_independent_of_workers(self):
        base = {"command": "outage", "seed": 1}
        assert build_config({**base, "workers": 1}).echo() == build_config({**base, "workers": 8}).echo()

    def test_scatter_scale_default_depends_on_kind(self):
        assert build_config({"command": "pattern"}).distribution.b == 1.0
        rician = build_config({"command": "pattern", "distribution": {"kind": "rician"}}).distribution
        assert (rician.s, rician.b) == (config.DEFAULT_RICIAN_S, config.DEFAULT_RICIAN_B)
        assert build_config({"command": "pattern", "distribution": {"kind": "rician", "b": 2}}).distribution.b == 2.0

    def test_model_validate_directly(self):
        assert ExperimentConfig(command="pattern").pattern.points == 2048


class TestLoadConfigFile:
    def test_yaml(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("command: outage\nseed: 7\ntrials: 1e6\ngeometry:\n  M: 4\n")
        data = load_config_file(path)
        assert data["geometry"] == {"M": 4}
        assert build_config(data).trials == 1_000_000

    def test_json(self, tmp_path):
        path = tmp_path / "exp.json"
        path.write_text(json.dumps({"command": "spacing", "spacing": {"M": [5, 10]}}))
        assert build_config(load_config_file(path)).spacing.M == [5, 10]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.yml"
        path.write_text("")
        assert load_config_file(path) == {}

    def test_unsupported_extension(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text("command = 'outage'")
        with pytest.raises(ConfigurationError, match="unsupported"):
            load_config_file(path)

    def test_malformed_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("command: [outage\n")
        with pytest.raises(ConfigurationError, match="cannot parse"):
            load_config_file(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(ConfigurationError, match="cannot parse"):
            load_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="cannot read"):
            load_config_file(tmp_path / "missing.yaml")

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigurationError, match="mapping"):
            load_config_file(path)

    def test_shipped_configs_validate(self):
        from pathlib import Path

        configs = sorted((Path(__file__).parent.parent / "configs").glob("*.*"))
        assert configs
        for path in configs:
            build_config(load_config_file(path))


class TestMergeOverrides:
    def test_nested_values_win(self):
        base = {"geometry": {"M": 4, "dx": 0.5}, "seed": 1}
        merged = merge_overrides(base, {"geometry": {"M": 8}, "seed": 2})
        assert merged == {"geometry": {"M": 8, "dx": 0.5}, "seed": 2}
        assert base["geometry"]["M"] == 4


class TestDefaultWorkers:
    def test_environment(self, monkeypatch):
        monkeypatch.setenv(config.ENV_WORKERS, "5")
        assert config.default_workers() == 5

    def test_invalid_environment(self, monkeypatch):
        monkeypatch.setenv(config.ENV_WORKERS, "many")
        with pytest.raises(ConfigurationError):
            config.default_workers()

    def test_fallback(self, monkeypatch):
        monkeypatch.delenv(config.ENV_WORKERS, raising=False)
        assert 1 <= config.default_workers() <= 8
