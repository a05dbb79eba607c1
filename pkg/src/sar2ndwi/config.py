"""Top-level pipeline configuration and its JSON round-trip.

One PipelineConfig drives all stages; every stage that writes an output
directory echoes the fully resolved settings there as
effective_config.json so every run records exactly what produced it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import NORMALIZATION_MODES, PER_CHIP_MINMAX
from .errors import ConfigError
from .training import TrainConfig
from .unet import UNetConfig

CONFIG_FORMAT_VERSION = 1
EFFECTIVE_CONFIG_NAME = "effective_config.json"


@dataclass
class PipelineConfig:
    scene_root: str = "scenes"
    chip_dir: str = "chips"
    manifest_path: str = "chips/manifest.json"
    cloud_threshold: float = 0.0
    normalization_mode: str = PER_CHIP_MINMAX
    split_seed: int = 0
    train_fraction: float = 0.8
    split_unit: str = "scene"
    histogram_bins: int = 256
    model: UNetConfig = field(default_factory=UNetConfig)
    training: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0.0 <= self.cloud_threshold <= 1.0:
            raise ConfigError(f"cloud_threshold must be in [0, 1], got {self.cloud_threshold}")
        if self.normalization_mode not in NORMALIZATION_MODES:
            raise ConfigError(f"unknown normalization mode {self.normalization_mode!r}")
        if self.split_unit not in ("scene", "chip"):
            raise ConfigError(f"split unit must be 'scene' or 'chip', got {self.split_unit!r}")
        if self.histogram_bins < 2:
            raise ConfigError(f"histogram_bins must be at least 2, got {self.histogram_bins}")

    def to_dict(self) -> dict:
        return {
            "format_version": CONFIG_FORMAT_VERSION,
            "scene_root": self.scene_root,
            "chip_dir": self.chip_dir,
            "manifest_path": self.manifest_path,
            "cloud_threshold": self.cloud_threshold,
            "normalization_mode": self.normalization_mode,
            "split_seed": self.split_seed,
            "train_fraction": self.train_fraction,
            "split_unit": self.split_unit,
            "histogram_bins": self.histogram_bins,
            "model": self.model.to_dict(),
            "training": self.training.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        version = d.pop("format_version", CONFIG_FORMAT_VERSION)
        if version != CONFIG_FORMAT_VERSION:
            raise ConfigError(f"unsupported config version {version}")
        model = d.pop("model", None)
        training = d.pop("training", None)
        known = {f for f in cls.__dataclass_fields__ if f not in ("model", "training")}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            model=UNetConfig.from_dict(model) if model else UNetConfig(),
            training=TrainConfig.from_dict(training) if training else TrainConfig(),
            **d,
        )


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return PipelineConfig.from_dict(doc)


def save_config(config: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=1) + "\n")


def write_effective_config(config: PipelineConfig, out_dir: str | Path) -> Path:
    """Echo the resolved configuration into an output directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / EFFECTIVE_CONFIG_NAME
    save_config(config, target)
    return target
