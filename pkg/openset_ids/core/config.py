"""
Run Configuration

This module defines RunConfig, the single serializable description of a
pipeline run. A run is configured from an optional YAML file, then flag
overrides; the effective configuration is echoed next to every output so a
persisted config re-runs to identical results.
"""

import hashlib
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import orjson
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

load_dotenv()

logger = logging.getLogger(__name__)

DATA_DIR_ENV = "OPENSET_IDS_DATA_DIR"
LOG_LEVEL_ENV = "OPENSET_IDS_LOG_LEVEL"

DEFAULT_TRAIN_FILE = "kddcup.data"
DEFAULT_TEST_FILE = "corrected"

# Odd decades 1e-5 .. 1e5 for both C and gamma
ODD_DECADES = [1e-5, 1e-3, 1e-1, 1e1, 1e3, 1e5]

DEFAULT_WITHHELD = ["back", "portsweep", "guess_passwd"]

# Sections whose values change trained models; hashed into artifacts
MODEL_SECTIONS = ("preprocess", "kernel", "calibration")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Section):
    train: Optional[Path] = None
    test: Optional[Path] = None
    taxonomy: Optional[Path] = None
    output_dir: Path = Path("openset_output")


class PreprocessConfig(_Section):
    downsample_factor: int = Field(100, ge=1)
    min_class_count: int = Field(20, ge=0)
    seed: int = 42
    joint_scaling: bool = False


class KernelConfig(_Section):
    c: float = Field(1000.0, gt=0)
    gamma: float = Field(0.1, gt=0)
    grid_search: bool = False
    grid_c: List[float] = Field(default_factory=lambda: list(ODD_DECADES))
    grid_gamma: List[float] = Field(default_factory=lambda: list(ODD_DECADES))
    folds: int = Field(3, ge=2)
    tol: float = Field(1e-3, gt=0)
    max_iter: int = Field(10_000_000, ge=1)
    cache_mb: int = Field(256, ge=1)
    class_weighting: bool = False

    @field_validator("grid_c", "grid_gamma")
    @classmethod
    def _positive_grid(cls, values: List[float]) -> List[float]:
        if not values or any(v <= 0 for v in values):
            raise ValueError("grid values must be a non-empty list of positive numbers")
        return sorted(set(values))


class CalibrationConfig(_Section):
    tail_size: Optional[int] = Field(None, ge=3)
    tail_offset: float = Field(10.0, gt=0)
    delta_tau: float = Field(0.001, ge=0, le=1)
    nu: float = Field(0.1, gt=0, le=1)
    platt_folds: int = Field(3, ge=2)


def _check_thresholds(values: List[float]) -> List[float]:
    if any(v < 0 or v > 1 for v in values):
        raise ValueError("thresholds must lie in [0, 1]")
    if list(values) != sorted(values):
        raise ValueError("thresholds must be sorted ascending")
    return values


class EvaluationConfig(_Section):
    thresholds: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3])
    weight_step: float = Field(0.01, gt=0, le=1)
    write_predictions: bool = False
    per_class_probabilities: bool = False

    @field_validator("thresholds")
    @classmethod
    def _sorted_thresholds(cls, values: List[float]) -> List[float]:
        return _check_thresholds(values)


class DeskConfig(_Section):
    per_class_cap: int = Field(2000, ge=1)
    withheld: List[str] = Field(default_factory=lambda: list(DEFAULT_WITHHELD))
    thresholds: List[float] = Field(default_factory=lambda: [0.1, 0.3])

    @field_validator("thresholds")
    @classmethod
    def _sorted_thresholds(cls, values: List[float]) -> List[float]:
        return _check_thresholds(values)


class RunConfig(_Section):
    """Everything needed to reproduce a run."""

    paths: PathsConfig = Field(default_factory=PathsConfig)
    preprocess: PreprocessConfig = Field(default_factory=PreprocessConfig)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)
    desk: DeskConfig = Field(default_factory=DeskConfig)
    workers: int = Field(1, ge=1)

    def resolved_train_path(self) -> Path:
        return self.paths.train or default_data_dir() / DEFAULT_TRAIN_FILE

    def resolved_test_path(self) -> Path:
        return self.paths.test or default_data_dir() / DEFAULT_TEST_FILE

    def fingerprint(self) -> str:
        """SHA-256 over the model-affecting sections."""
        payload = {name: getattr(self, name).model_dump(mode="json") for name in MODEL_SECTIONS}
        return hashlib.sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).hexdigest()


def default_data_dir() -> Path:
    return Path(os.getenv(DATA_DIR_ENV, "data"))


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build the effective RunConfig.

    Args:
        path: Optional YAML config file
        overrides: Nested dict of flag values; ``None`` entries are ignored

    Returns:
        Validated RunConfig
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e.strerror}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {path} must hold a mapping")

    data = _merge(data, _drop_none(overrides or {}))
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"invalid config value for {where}: {first['msg']}") from e


def _drop_none(values: Dict[str, Any]) -> Dict[str, Any]:
    cleaned = {}
    for key, value in values.items():
        if isinstance(value, dict):
            value = _drop_none(value)
            if value:
                cleaned[key] = value
        elif value is not None:
            cleaned[key] = value
    return cleaned


def write_effective_config(config: RunConfig, output_dir: Path) -> Path:
    """Echo the effective config into ``output_dir`` for provenance."""
    output_dir.mkdir(parents=True, exist_ok=True)
    target = output_dir / "effective_config.yaml"
    with open(target, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.model_dump(mode="json"), f, sort_keys=True)
    logger.debug("effective config written to %s", target)
    return target
