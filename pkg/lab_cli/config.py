"""
Experiment Configuration
One JSON file per command, flag overrides, seed propagation and the provenance hash
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError, model_validator

from gen_models.diffusion import GeneratorTrainConfig
from grad_core.errors import ConfigError
from grad_core.hashing import config_hash
from hpe_teacher.teacher_trainer import TeacherTrainConfig
from hpe_teacher.texture_baseline import BaselineTrainConfig
from shapeworld.dataset_builder import DatasetConfig
from steer.config import GuidanceConfig

logger = logging.getLogger(__name__)

SEEDED_BLOCKS = ("dataset", "teacher", "baseline", "generator")
Paradigm = Literal["ddim", "flow"]


class SweepSpec(BaseModel):
    parameter: Literal["alpha", "guided_steps"] = "alpha"
    values: List[float] = Field(default_factory=lambda: [0.0, 2.5, 5.0, 10.0], min_length=2)
    seeds: int = Field(default=5, ge=3)
    paradigm: Paradigm = "ddim"


class HealingConfig(BaseModel):
    paradigms: List[Paradigm] = Field(default_factory=lambda: ["flow", "ddim"], min_length=1)
    stop_fractions: List[float] = Field(default_factory=lambda: [0.2, 0.6], min_length=1)
    flow_stop_fraction: float = Field(default=0.2, gt=0, le=1)
    ddim_stop_fraction: float = Field(default=0.6, gt=0, le=1)
    seeds: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _fractions(self) -> "HealingConfig":
        if any(not 0 < f <= 1 for f in self.stop_fractions):
            raise ValueError("stop fractions must lie in (0, 1]")
        for name in ("flow_stop_fraction", "ddim_stop_fraction"):
            if getattr(self, name) not in self.stop_fractions:
                raise ValueError(f"{name}={getattr(self, name)} must be one of stop_fractions {self.stop_fractions}")
        return self


class ExperimentConfig(BaseModel):
    seed: int = 0
    output_dir: str = "runs/default"
    paradigm: Paradigm = "ddim"
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    teacher: TeacherTrainConfig = Field(default_factory=TeacherTrainConfig)
    baseline: BaselineTrainConfig = Field(default_factory=BaselineTrainConfig)
    generator: GeneratorTrainConfig = Field(default_factory=GeneratorTrainConfig)
    guidance: GuidanceConfig = Field(default_factory=GuidanceConfig)
    sweep: SweepSpec = Field(default_factory=SweepSpec)
    healing: HealingConfig = Field(default_factory=HealingConfig)

    @model_validator(mode="before")
    @classmethod
    def _propagate_seed(cls, data: Any) -> Any:
        """Blocks without their own seed inherit the global one"""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        seed = data.get("seed", 0)
        for name in SEEDED_BLOCKS:
            block = dict(data.get(name) or {})
            block.setdefault("seed", seed)
            if name == "generator":
                ae = dict(block.get("autoencoder") or {})
                ae.setdefault("seed", block["seed"])
                block["autoencoder"] = ae
            data[name] = block
        return data

    def config_hash(self) -> str:
        return config_hash(self)


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply dotted block.field=value assignments; values parse as JSON when they can"""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like block.field=value, got {item!r}")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"empty override key in {item!r}")
        node = data
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = {}
                node[part] = child
            if not isinstance(child, dict):
                raise ConfigError(f"override {key} descends into a non-block value")
            node = child
        node[parts[-1]] = _parse_value(raw)
    return data


def load_experiment_config(
    path: Optional[str] = None,
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
    overrides: Sequence[str] = (),
) -> ExperimentConfig:
    data: Dict[str, Any] = {}
    if path:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}")
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except ValueError as e:
            raise ConfigError(f"config file {config_path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config file {config_path} must hold a JSON object")
    if seed is not None:
        data["seed"] = seed
    if output_dir is not None:
        data["output_dir"] = output_dir
    data = apply_overrides(data, overrides)
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    logger.debug(f"config hash {config.config_hash()}")
    return config


def worker_count() -> int:
    """Worker pool size from STEERLAB_THREADS (default 1 = run inline)"""
    raw = os.getenv("STEERLAB_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise ConfigError(f"STEERLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, count)


def revalidate(model: BaseModel, update: Dict[str, Any]) -> BaseModel:
    """Copy of model with update applied and validated; flag values go through here"""
    try:
        return type(model).model_validate({**model.model_dump(), **update})
    except ValidationError as e:
        raise ConfigError(f"invalid {type(model).__name__}: {e}") from e
