"""
Tests for settings and experiment configuration.
"""

import json
from pathlib import Path

import pytest

from behavior_hmm.config import (
    BEHAVIOR_NAMES,
    DEFAULT_NODE_BUDGET,
    ExperimentConfig,
    QuantizerConfig,
    RunConfig,
    Settings,
    TrainConfig,
)
from behavior_hmm.errors import ConfigurationError, StorageError


class TestSettings:

    def test_defaults(self, monkeypatch):
        for name in ("BEHAVIOR_HMM_LOG_LEVEL", "BEHAVIOR_HMM_NODE_BUDGET",
                     "BEHAVIOR_HMM_WORKERS", "BEHAVIOR_HMM_EMISSION_FLOOR"):
            monkeypatch.delenv(name, raising=False)
        settings = Settings.from_env()
        assert settings.log_level == "INFO"
        assert settings.node_budget == DEFAULT_NODE_BUDGET
        assert settings.workers == 1
        assert settings.emission_floor == 1e-3

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("BEHAVIOR_HMM_LOG_LEVEL", "debug")
        monkeypatch.setenv("BEHAVIOR_HMM_NODE_BUDGET", "5000")
        settings = Settings()
        assert settings.log_level == "DEBUG"
        assert settings.node_budget == 5000

    def test_explicit_arguments_win(self, monkeypatch):
        monkeypatch.setenv("BEHAVIOR_HMM_WORKERS", "8")
        assert Settings(workers=2).workers == 2

    def test_unparseable_environment_value(self, monkeypatch):
        monkeypatch.setenv("BEHAVIOR_HMM_WORKERS", "many")
        with pytest.raises(ConfigurationError):
            Settings()

    def test_invalid_values(self):
        with pytest.raises(ConfigurationError):
            Settings(log_level="chatty")
        with pytest.raises(ConfigurationError):
            Settings(node_budget=0)


class TestExperimentConfig:

    def test_defaults_are_valid(self):
        config = ExperimentConfig()
        config.validate()
        assert config.behaviors == BEHAVIOR_NAMES
        assert str(config.resolved_models_dir).endswith("models")

    def test_from_dict_with_nested_sections(self):
        config = ExperimentConfig.from_dict({
            "behaviors": ["rectangle", "hourglass"],
            "runs_per_behavior": 3,
            "quantizer": {"trigger_angle": 25.0},
            "train": {"emission_floor": 0.0},
        })
        assert config.behaviors == ("rectangle", "hourglass")
        assert config.quantizer == QuantizerConfig(trigger_angle=25.0)
        assert config.train == TrainConfig(emission_floor=0.0)

    def test_unknown_keys_are_rejected(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"runs": 3})
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"filter": {"sigma": 1.0}})

    def test_invalid_values(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"behaviors": ["circle"]})
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"runs_per_behavior": 0})
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"seed": -1})
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"quantizer": {"n_bins": 5}})

    def test_json_file_round_trip(self, tmp_path):
        config = ExperimentConfig(runs_per_behavior=4, models_dir="trained")
        path = tmp_path / "experiment.json"
        path.write_text(json.dumps(config.to_dict()))
        assert ExperimentConfig.from_json(path) == config

    def test_shipped_config_loads(self):
        config = ExperimentConfig.from_json(Path(__file__).parent.parent / "configs" / "experiment.json")
        assert config.runs_per_behavior == 10
        assert config.training_runs_per_behavior == 50

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(StorageError):
            ExperimentConfig.from_json(tmp_path / "absent.json")
        (tmp_path / "bad.json").write_text("{")
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_json(tmp_path / "bad.json")

    def test_with_overrides(self):
        assert ExperimentConfig().with_overrides(workers=4).workers == 4

    def test_settings_fill_keys_the_file_leaves_out(self):
        settings = Settings(node_budget=777, workers=3, emission_floor=0.0)
        config = ExperimentConfig.from_dict({"train": {"max_iterations": 5}}, settings)
        assert config.node_budget == 777
        assert config.workers == 3
        assert config.train == TrainConfig(max_iterations=5, emission_floor=0.0)

    def test_file_values_win_over_settings(self):
        settings = Settings(node_budget=777, workers=3, emission_floor=0.0)
        config = ExperimentConfig.from_dict(
            {"workers": 1, "node_budget": 99, "train": {"emission_floor": 0.01}}, settings
        )
        assert (config.workers, config.node_budget, config.train.emission_floor) == (1, 99, 0.01)

    def test_settings_values_are_validated_with_the_config(self):
        with pytest.raises(ConfigurationError):
            ExperimentConfig.from_dict({"train": {"emission_floor": 0.5}}, Settings())


class TestRunConfig:

    @pytest.mark.parametrize("changes", [
        {"scale": 0.4}, {"scale": 1.6}, {"direction": "up"}, {"speed": 0.0},
        {"sample_rate": -1.0}, {"position_noise_sigma": -0.1}, {"seed": -3},
    ])
    def test_out_of_range(self, changes):
        with pytest.raises(ConfigurationError):
            RunConfig(**changes).validate()

    def test_emission_floor_must_stay_below_uniform(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(emission_floor=0.1).validate(n_symbols=10)
        TrainConfig(emission_floor=0.05).validate(n_symbols=10)
