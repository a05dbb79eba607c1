"""Radar-to-water-index pipeline: chips, thresholds, network, metrics."""

from .chipio import read_chip, write_chip
from .config import PipelineConfig, load_config, save_config
from .dataset import (
    Batch,
    ChipRecord,
    DatasetManifest,
    RadarChip,
    Scene,
    load_manifest,
    preprocess_scenes,
    save_manifest,
)
from .errors import Sar2NdwiError
from .evaluation import evaluate_split, render_table
from .indices import NdwiMap, compute_ndwi, rescale_to_signed, rescale_to_unit
from .metrics import ConfusionCounts, MetricsReport, R2Accumulator, accuracy, auc, mean_iou, r2
from .otsu import Histogram, OtsuResult, WaterMask, binarize, build_histogram, otsu_threshold
from .training import TrainConfig, TrainReport, train
from .unet import UNetConfig, UNetParams, build, forward, predict
from .weights_io import load_weights, save_weights

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "ChipRecord",
    "ConfusionCounts",
    "DatasetManifest",
    "Histogram",
    "MetricsReport",
    "NdwiMap",
    "OtsuResult",
    "PipelineConfig",
    "R2Accumulator",
    "RadarChip",
    "Sar2NdwiError",
    "Scene",
    "TrainConfig",
    "TrainReport",
    "UNetConfig",
    "UNetParams",
    "WaterMask",
    "accuracy",
    "auc",
    "binarize",
    "build",
    "build_histogram",
    "compute_ndwi",
    "evaluate_split",
    "forward",
    "load_config",
    "load_manifest",
    "load_weights",
    "mean_iou",
    "otsu_threshold",
    "predict",
    "preprocess_scenes",
    "r2",
    "read_chip",
    "render_table",
    "rescale_to_signed",
    "rescale_to_unit",
    "save_config",
    "save_manifest",
    "save_weights",
    "train",
    "write_chip",
]
