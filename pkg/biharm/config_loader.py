"""Utilities for loading biharm run configuration."""

from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load .env file if it exists (before any config loading)
try:
    from dotenv import load_dotenv

    load_dotenv(Path.cwd() / ".env", override=False)
except ImportError:
    # python-dotenv not installed, skip
    pass

ENV_PREFIX = "BIHARM_"

CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"
EXAMPLE_CONFIG_FILE = CONFIG_DIR / "study.example.yaml"


class ConfigurationError(RuntimeError):
    """Raised when a run configuration cannot be loaded or is invalid."""


class BiharmSettings(BaseSettings):
    """Process-wide knobs read from ``BIHARM_*`` variables or ``.env``."""

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )
    jobs: int = Field(1, ge=1, description="Default worker processes for ladders")
    events_enabled: bool = Field(True, description="Emit JSON study events on biharm.events")
    log_level: str = Field("INFO", description="Default logging level")


@lru_cache(maxsize=1)
def get_settings() -> BiharmSettings:
    return BiharmSettings()


class RunConfig(BaseModel):
    """Validated parameters for one CLI run."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    dim: int = Field(2, ge=1)
    m_list: List[int] = Field(default_factory=lambda: [8, 16, 32, 64])
    scheme: Literal["centered", "one-sided"] = "centered"
    case: str = "sine4"
    cg_tol: float = 1e-10
    cg_maxit: Optional[int] = Field(None, ge=1)
    preconditioner: Literal["none", "jacobi"] = "none"
    out: Optional[str] = None
    format: Literal["csv", "json", "pretty"] = "csv"
    seed: int = 0
    jobs: int = Field(1, ge=1)

    @field_validator("m_list", mode="before")
    @classmethod
    def _split_m_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [int(part) for part in value.split(",") if part.strip()]
        if isinstance(value, int):
            return [value]
        return value

    @field_validator("m_list")
    @classmethod
    def _check_m_list(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("m_list must not be empty")
        if any(m < 4 for m in value):
            raise ValueError(f"every m must be >= 4, got {value}")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"m_list must be strictly increasing, got {value}")
        return value

    @field_validator("scheme", mode="before")
    @classmethod
    def _normalize_scheme(cls, value: Any) -> Any:
        if isinstance(value, str):
            value = value.strip().lower().replace("_", "-")
            return {"mirror": "centered", "centered-mirror": "centered", "one-sided-zero": "one-sided"}.get(
                value, value
            )
        return value

    @field_validator("cg_tol")
    @classmethod
    def _check_tol(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError(f"cg_tol must lie in (0, 1), got {value}")
        return value


_ENV_FIELDS = {
    "dim": "DIM",
    "m_list": "M_LIST",
    "scheme": "SCHEME",
    "case": "CASE",
    "cg_tol": "CG_TOL",
    "cg_maxit": "CG_MAXIT",
    "preconditioner": "PRECONDITIONER",
    "out": "OUT",
    "format": "FORMAT",
    "seed": "SEED",
    "jobs": "JOBS",
}


def _load_yaml(path: Path) -> dict:
    if not path.exists():
        raise ConfigurationError(f"Configuration file missing: {path}")
    try:
        with path.open("r", encoding="utf-8") as handle:
            raw = yaml.safe_load(handle) or {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"Cannot parse {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path} must contain a mapping at top level")
    return raw


def _env_overrides(environ: Mapping[str, str]) -> Dict[str, Any]:
    """Values from ``BIHARM_<FIELD>`` variables; pydantic coerces the strings."""
    overrides: Dict[str, Any] = {}
    for field_name, suffix in _ENV_FIELDS.items():
        value = environ.get(f"{ENV_PREFIX}{suffix}")
        if value is not None and value.strip() != "":
            overrides[field_name] = value
    return overrides


def load_run_config(
    config_path: Optional[os.PathLike[str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    *,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge defaults, a YAML/JSON file, ``BIHARM_*`` variables and explicit overrides.

    Later sources win. ``None`` values in ``overrides`` are ignored so that
    unset CLI flags fall through.

    Raises:
        ConfigurationError: for a missing or unparsable file or invalid values.
    """
    data: Dict[str, Any] = {"jobs": get_settings().jobs}
    if config_path:
        data.update(_load_yaml(Path(config_path)))
    data.update(_env_overrides(os.environ if environ is None else environ))
    if overrides:
        data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return RunConfig(**data)
    except PydanticValidationError as exc:
        raise ConfigurationError(f"Invalid run configuration: {exc}") from exc


def dump_run_config(config: RunConfig) -> str:
    """Serialize the run configuration to JSON for debugging/logging."""
    return config.model_dump_json(indent=2)


__all__ = [
    "BiharmSettings",
    "ConfigurationError",
    "RunConfig",
    "dump_run_config",
    "get_settings",
    "load_run_config",
]
