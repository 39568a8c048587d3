"""Application configuration settings."""

import json
from importlib import resources
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from pim_olap_sim.models.errors import ConfigValidationError
from pim_olap_sim.models.hardware import DramConfig


DEFAULT_CONFIG_NAME = "ddr4_8gb_x8_3200.json"


class Settings(BaseSettings):
    """Application settings loaded from environment variables (prefix ``PIMSIM_``).

    Nested DRAM fields use ``__`` as delimiter, e.g. ``PIMSIM_DRAM__TIMING__TCCD_S=5``.
    """

    model_config = SettingsConfigDict(
        env_prefix="PIMSIM_",
        env_nested_delimiter="__",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging configuration
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="json")  # json or text

    # Simulation defaults
    default_seed: int = Field(default=7, ge=0)
    sweep_workers: int = Field(default=1, ge=1)
    store_dir: str = Field(default="./stores")
    dram: DramConfig = Field(default_factory=DramConfig)


def default_config_path() -> Path:
    return Path(str(resources.files("pim_olap_sim") / "data" / DEFAULT_CONFIG_NAME))


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_dram_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> DramConfig:
    """Read a DramConfig JSON document, apply overrides, and validate it."""
    # Local import: the topology service imports the models this module exposes.
    from pim_olap_sim.services.dram_topology import validate_config

    config_path = Path(path) if path is not None else default_config_path()
    try:
        document = json.loads(config_path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ConfigValidationError([f"config file not found: {config_path}"]) from e
    except json.JSONDecodeError as e:
        raise ConfigValidationError([f"config file is not valid JSON: {e}"]) from e

    document.pop("$comment", None)
    if overrides:
        document = _deep_merge(document, overrides)
    try:
        cfg = DramConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigValidationError(
            [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        ) from e
    return validate_config(cfg)


def load_settings(config_path: Optional[Union[str, Path]] = None) -> Settings:
    """Settings with the DRAM section taken from a JSON file plus env overrides.

    Values set through ``PIMSIM_DRAM__*`` win over the file.
    """
    env_settings = Settings()
    env_overrides = env_settings.model_dump(exclude_unset=True).get("dram", {})
    dram = load_dram_config(config_path, env_overrides)
    return env_settings.model_copy(update={"dram": dram})


# Global settings instance
settings = Settings()
