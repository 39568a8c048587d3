"""Tests for configuration loading and environment overrides."""

import json

import pytest

from pim_olap_sim.config.settings import Settings, default_config_path, load_dram_config, load_settings
from pim_olap_sim.models.errors import ConfigValidationError


class TestLoadDramConfig:
    """Packaged JSON, overrides and error reporting."""

    def test_packaged_defaults(self):
        cfg = load_dram_config()

        assert default_config_path().is_file()
        assert cfg.channels == 8
        assert cfg.ranks_per_channel == 4
        assert cfg.timing.tCCD_S == 4
        assert cfg.timing.tRCD == 22
        assert cfg.clock_period == 0.625
        assert cfg.mode_switch == 2000.0
        assert cfg.host.query_overhead_ns == 200_000.0

    def test_nested_override_keeps_siblings(self):
        cfg = load_dram_config(overrides={"timing": {"tCCD_S": 5}})

        assert cfg.timing.tCCD_S == 5
        assert cfg.timing.tCCD_L == 8

    def test_config_from_path(self, tmp_path):
        document = json.loads(default_config_path().read_text(encoding="utf-8"))
        document["channels"] = 2
        path = tmp_path / "small.json"
        path.write_text(json.dumps(document), encoding="utf-8")

        assert load_dram_config(path).channels == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError, match="not found"):
            load_dram_config(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{channels: 8", encoding="utf-8")

        with pytest.raises(ConfigValidationError, match="not valid JSON"):
            load_dram_config(path)

    def test_wrong_type_is_reported_by_field(self):
        with pytest.raises(ConfigValidationError) as exc_info:
            load_dram_config(overrides={"channels": "many"})

        assert any(e.startswith("channels") for e in exc_info.value.errors)
        assert exc_info.value.exit_code == 2

    def test_invariants_checked(self):
        with pytest.raises(ConfigValidationError, match="power of two"):
            load_dram_config(overrides={"ranks_per_channel": 3})


class TestSettings:
    """Environment variables with the PIMSIM_ prefix."""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("PIMSIM_LOG_LEVEL", raising=False)
        settings = Settings()

        assert settings.log_level == "INFO"
        assert settings.log_format == "json"
        assert settings.default_seed == 7
        assert settings.sweep_workers == 1

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("PIMSIM_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("PIMSIM_SWEEP_WORKERS", "4")

        settings = Settings()

        assert settings.log_level == "DEBUG"
        assert settings.sweep_workers == 4

    def test_dram_environment_override(self, monkeypatch):
        monkeypatch.setenv("PIMSIM_DRAM__CHANNELS", "4")

        settings = load_settings()

        assert settings.dram.channels == 4
        assert settings.dram.ranks_per_channel == 4
        assert settings.dram.timing.tRCD == 22
