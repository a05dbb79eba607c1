"""Command-line interface: preprocess, train, evaluate, predict, otsu.

Every subcommand exits 0 on success. Domain failures (bad inputs, bad
config, malformed files) print one `ErrorClass: message` line to stderr
and exit 1 instead of tracing back.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .chipio import read_chip, write_chip, write_pgm
from .config import PipelineConfig, load_config, write_effective_config
from .dataset import (
    TEST,
    TRAIN,
    carve_validation,
    load_manifest,
    manifest_stream,
    preprocess_scenes,
    save_manifest,
)
from .errors import DegenerateHistogramError, DimensionError, Sar2NdwiError
from .evaluation import FALLBACK_THRESHOLD, evaluate_split, render_table
from .indices import UNIT, NdwiMap
from .otsu import binarize, build_histogram, otsu_threshold
from .training import train as run_training
from .unet import build, predict
from .weights_io import load_weights, save_weights

SPLIT_LABELS = {TRAIN: "Training", TEST: "Testing"}


def _load_pipeline_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    for name in ("scene_root", "chip_dir", "manifest_path", "cloud_threshold",
                 "normalization_mode", "split_seed", "train_fraction",
                 "split_unit", "histogram_bins"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    cfg.__post_init__()  # revalidate after overrides
    for name in ("loss", "learning_rate", "batch_size", "max_epochs",
                 "patience", "rng_seed"):
        value = getattr(args, f"train_{name}", None)
        if value is not None:
            cfg.training = replace(cfg.training, **{name: value})
    return cfg


def cmd_preprocess(args) -> int:
    cfg = _load_pipeline_config(args)
    manifest = preprocess_scenes(
        cfg.scene_root,
        cfg.chip_dir,
        cloud_threshold=cfg.cloud_threshold,
        normalization_mode=cfg.normalization_mode,
        split_seed=cfg.split_seed,
        train_fraction=cfg.train_fraction,
        split_unit=cfg.split_unit,
    )
    save_manifest(manifest, cfg.manifest_path)
    write_effective_config(cfg, Path(cfg.chip_dir))
    counts = manifest.counts()
    print(f"{counts['total']} chips")
    print(f"train={counts['train']} test={counts['test']} excluded={counts['excluded']}")
    print(f"manifest written to {cfg.manifest_path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_pipeline_config(args)
    manifest = load_manifest(cfg.manifest_path)
    tc = cfg.training
    train_ids = [r.chip_id for r in manifest.records_for(TRAIN)]
    fit_ids, val_ids = carve_validation(train_ids, tc.validation_fraction, tc.rng_seed)
    train_stream = manifest_stream(fit_ids, cfg.chip_dir, tc.batch_size, tc.rng_seed)
    val_stream = manifest_stream(val_ids, cfg.chip_dir, tc.batch_size, None)

    params = build(cfg.model, seed=tc.rng_seed)
    best, report = run_training(params, train_stream, val_stream, tc)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_weights(best, out_dir / "weights.cbwt")
    (out_dir / "train_report.json").write_text(json.dumps(report.to_dict(), indent=1))
    write_effective_config(cfg, out_dir)
    last = report.epochs[-1]
    print(
        f"trained {len(report.epochs)} epochs ({report.stopped}); "
        f"selected epoch {report.selected_epoch}; "
        f"final train_loss={last.train_loss:.6f} val_loss={last.val_loss:.6f}"
    )
    print(f"weights written to {out_dir / 'weights.cbwt'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load_pipeline_config(args)
    manifest = load_manifest(cfg.manifest_path)
    params = load_weights(args.weights)
    reports = {}
    for split in args.splits.split(","):
        split = split.strip()
        if split not in SPLIT_LABELS:
            raise DimensionError(f"unknown split {split!r}; choose from train,test")
        reports[SPLIT_LABELS[split]] = evaluate_split(
            params, manifest, split, cfg.chip_dir,
            batch_size=cfg.training.batch_size, bins=cfg.histogram_bins,
        )
    table = render_table(reports)
    print(table)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        payload = {label.lower(): r.to_dict() for label, r in reports.items()}
        (out_dir / "metrics.json").write_text(json.dumps(payload, indent=1))
        (out_dir / "metrics.txt").write_text(table + "\n")
        write_effective_config(cfg, out_dir)
        print(f"metrics written to {out_dir / 'metrics.json'}")
    return 0


def _prediction_path(out_dir: Path, radar_path: Path) -> Path:
    stem = radar_path.name
    for suffix in (".cbch", ".radar"):
        if stem.endswith(suffix):
            stem = stem[: -len(suffix)]
    return out_dir / f"{stem}.ndwi.cbch"


def cmd_predict(args) -> int:
    params = load_weights(args.weights)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for radar_file in args.inputs:
        radar_path = Path(radar_file)
        radar = read_chip(radar_path)
        result = predict(params, radar)
        target = _prediction_path(out_dir, radar_path)
        write_chip(target, result.values.astype(np.float32))
        if args.pgm:
            write_pgm(target.with_suffix(".pgm"), result.values)
        print(f"{radar_path} -> {target}")
    return 0


def cmd_otsu(args) -> int:
    values = read_chip(args.input)
    if values.shape[2] != 1:
        raise DimensionError(
            f"{args.input}: threshold input must be single-channel, got {values.shape[2]}"
        )
    m = NdwiMap(values[:, :, 0].astype(np.float64), UNIT)
    try:
        result = otsu_threshold(build_histogram(m, args.bins))
        threshold, note = result.threshold_value, ""
        print(f"t_star={result.t_star}")
    except DegenerateHistogramError:
        # A constant map has no usable histogram; the mask pipeline documents
        # a midpoint fallback, but a bare threshold query has no answer.
        if not args.mask_out:
            raise
        threshold, note = FALLBACK_THRESHOLD, " (degenerate histogram, midpoint fallback)"
    print(f"threshold_value={threshold:.6f}{note}")
    if args.mask_out:
        mask = binarize(m, threshold)
        write_chip(args.mask_out, mask.values.astype(np.float32))
        print(f"mask written to {args.mask_out}")
    return 0


def _add_config_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="pipeline config JSON; flags below override it")
    p.add_argument("--scenes", dest="scene_root", help="scene directory root")
    p.add_argument("--chips", dest="chip_dir", help="chip directory")
    p.add_argument("--manifest", dest="manifest_path", help="manifest JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sar2ndwi",
        description="Predict optical water-index maps from radar chips.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="chip scenes, normalize, filter, split")
    _add_config_options(p)
    p.add_argument("--cloud-threshold", dest="cloud_threshold", type=float)
    p.add_argument("--normalization", dest="normalization_mode",
                   choices=("per_chip_minmax", "global_minmax"))
    p.add_argument("--split-seed", dest="split_seed", type=int)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--split-unit", dest="split_unit", choices=("scene", "chip"))
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="fit the network on the train split")
    _add_config_options(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--loss", dest="train_loss")
    p.add_argument("--learning-rate", dest="train_learning_rate", type=float)
    p.add_argument("--batch-size", dest="train_batch_size", type=int)
    p.add_argument("--epochs", dest="train_max_epochs", type=int)
    p.add_argument("--patience", dest="train_patience", type=int)
    p.add_argument("--seed", dest="train_rng_seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="report metrics over dataset splits")
    _add_config_options(p)
    p.add_argument("--weights", required=True, help="trained weights file")
    p.add_argument("--splits", default="train,test",
                   help="comma-separated splits to evaluate")
    p.add_argument("--out", help="directory for metrics.json / metrics.txt")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="predict index maps for radar chips")
    p.add_argument("--weights", required=True, help="trained weights file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--pgm", action="store_true",
                   help="also write an 8-bit preview image per prediction")
    p.add_argument("inputs", nargs="+", help="radar chip files")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("otsu", help="threshold a unit-scale index chip")
    p.add_argument("input", help="single-channel unit-scale chip file")
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--mask-out", dest="mask_out", help="write the binary mask here")
    p.set_defaults(func=cmd_otsu)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (Sar2NdwiError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
