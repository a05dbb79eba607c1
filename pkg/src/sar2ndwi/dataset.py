"""Scene ingestion, chipping, normalization, splits, and batch iteration.

A scene is a 512x512 acquisition pair: two radar polarization bands (VV,
VH), the optical green and near-infrared bands, and a binary cloud mask.
Scenes arrive as one directory per scene containing one chip-format file
per band (vv.cbch, vh.cbch, green.cbch, nir.cbch, clouds.cbch) plus an
optional meta.json with an event id.

Each scene is cut into a fixed 4x4 grid of 128x128 chips in row-major
order; the partition is lossless. Chips with cloud cover above the
configured threshold are excluded, the rest are split 80/20 into train
and test, and radar/target chip files are materialized for batching.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chipio import read_chip, write_chip
from .errors import (
    ConfigError,
    DimensionError,
    EmptyDatasetError,
    FormatError,
    MissingChipError,
    NonFiniteError,
)
from .indices import compute_ndwi, rescale_to_unit

SCENE_SIZE = 512
CHIP_SIZE = 128
CHIP_GRID = SCENE_SIZE // CHIP_SIZE  # 4x4 = 16 chips per scene

TRAIN = "train"
TEST = "test"
EXCLUDED = "excluded"
SPLITS = (TRAIN, TEST, EXCLUDED)

PER_CHIP_MINMAX = "per_chip_minmax"
GLOBAL_MINMAX = "global_minmax"
NORMALIZATION_MODES = (PER_CHIP_MINMAX, GLOBAL_MINMAX)

RADAR_CHANNELS = ("vv", "vh")
BAND_FILES = {
    "vv": "vv.cbch",
    "vh": "vh.cbch",
    "green": "green.cbch",
    "nir": "nir.cbch",
    "clouds": "clouds.cbch",
}

MANIFEST_FORMAT_VERSION = 1


@dataclass
class Scene:
    """One acquisition: radar bands, optical bands, cloud mask."""

    scene_id: str
    event_id: str
    s1_bands: np.ndarray  # (H, W, 2), channel 0 = VV, channel 1 = VH
    s2_bands: dict[str, np.ndarray]  # must include "green" and "nir"
    cloud_mask: np.ndarray  # (H, W), values in {0, 1}

    def __post_init__(self):
        shape = self.s1_bands.shape[:2]
        if self.s1_bands.ndim != 3 or self.s1_bands.shape[2] != 2:
            raise DimensionError(
                f"{self.scene_id}: radar stack must be (H, W, 2), got {self.s1_bands.shape}"
            )
        for band in ("green", "nir"):
            if band not in self.s2_bands:
                raise FormatError(f"{self.scene_id}: missing optical band {band!r}")
        for band, arr in self.s2_bands.items():
            if arr.shape != shape:
                raise DimensionError(
                    f"{self.scene_id}: band {band!r} shape {arr.shape} != {shape}"
                )
        if self.cloud_mask.shape != shape:
            raise DimensionError(
                f"{self.scene_id}: cloud mask shape {self.cloud_mask.shape} != {shape}"
            )
        if not np.all((self.cloud_mask == 0) | (self.cloud_mask == 1)):
            raise FormatError(f"{self.scene_id}: cloud mask must be binary")


@dataclass
class RadarChip:
    """One normalized 128x128 two-channel radar tile (VV then VH)."""

    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (CHIP_SIZE, CHIP_SIZE, 2):
            raise DimensionError(
                f"radar chip must be ({CHIP_SIZE}, {CHIP_SIZE}, 2), got {self.values.shape}"
            )
        if not (np.all(self.values >= 0) and np.all(self.values <= 1)):
            raise ValueError("radar chip values must lie in [0, 1]")


@dataclass
class ChipRecord:
    chip_id: str
    parent_scene_id: str
    grid_row: int
    grid_col: int
    cloud_fraction: float
    split: str | None = None  # assigned by filter_clouds / assign_splits

    def to_dict(self) -> dict:
        return {
            "chip_id": self.chip_id,
            "parent_scene_id": self.parent_scene_id,
            "grid_row": self.grid_row,
            "grid_col": self.grid_col,
            "cloud_fraction": self.cloud_fraction,
            "split": self.split,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChipRecord":
        return cls(
            chip_id=d["chip_id"],
            parent_scene_id=d["parent_scene_id"],
            grid_row=d["grid_row"],
            grid_col=d["grid_col"],
            cloud_fraction=d["cloud_fraction"],
            split=d["split"],
        )


@dataclass
class DatasetManifest:
    records: list[ChipRecord]
    split_seed: int
    cloud_threshold: float
    normalization_mode: str = PER_CHIP_MINMAX
    global_stats: dict[str, tuple[float, float]] | None = None

    def records_for(self, split: str) -> list[ChipRecord]:
        return [r for r in self.records if r.split == split]

    def counts(self) -> dict[str, int]:
        out = {"total": len(self.records)}
        for split in SPLITS:
            out[split] = sum(1 for r in self.records if r.split == split)
        return out


@dataclass
class Batch:
    inputs: np.ndarray  # (B, 128, 128, 2)
    targets: np.ndarray  # (B, 128, 128, 1)
    chip_ids: list[str]

    def __post_init__(self):
        b = self.inputs.shape[0]
        if self.targets.shape[0] != b or len(self.chip_ids) != b:
            raise DimensionError("inputs, targets and chip_ids disagree on batch size")


def chip_id_for(scene_id: str, row: int, col: int) -> str:
    return f"{scene_id}_r{row}c{col}"


def radar_chip_path(chip_dir: Path, chip_id: str) -> Path:
    return Path(chip_dir) / f"{chip_id}.radar.cbch"


def target_chip_path(chip_dir: Path, chip_id: str) -> Path:
    return Path(chip_dir) / f"{chip_id}.ndwi.cbch"


def chip_scene(scene: Scene) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Cut a 512x512 scene into 16 tiles in row-major grid order.

    Returns (radar_raw (128,128,2), optical_raw (128,128,2) green/nir,
    cloud_fraction) per tile. Concatenating the tiles back on the grid
    reproduces the scene pixel-exactly.
    """
    if scene.s1_bands.shape[:2] != (SCENE_SIZE, SCENE_SIZE):
        raise DimensionError(
            f"{scene.scene_id}: chipping expects {SCENE_SIZE}x{SCENE_SIZE} scenes, "
            f"got {scene.s1_bands.shape[:2]}"
        )
    optical = np.stack([scene.s2_bands["green"], scene.s2_bands["nir"]], axis=2)
    tiles = []
    for row in range(CHIP_GRID):
        for col in range(CHIP_GRID):
            ys = slice(row * CHIP_SIZE, (row + 1) * CHIP_SIZE)
            xs = slice(col * CHIP_SIZE, (col + 1) * CHIP_SIZE)
            cloud_fraction = float(np.mean(scene.cloud_mask[ys, xs]))
            tiles.append((scene.s1_bands[ys, xs], optical[ys, xs], cloud_fraction))
    return tiles


def assemble_grid(tiles: list[np.ndarray]) -> np.ndarray:
    """Inverse of chip_scene's tiling for one band stack (row-major order)."""
    if len(tiles) != CHIP_GRID * CHIP_GRID:
        raise DimensionError(f"expected {CHIP_GRID * CHIP_GRID} tiles, got {len(tiles)}")
    rows = [
        np.concatenate(tiles[r * CHIP_GRID : (r + 1) * CHIP_GRID], axis=1)
        for r in range(CHIP_GRID)
    ]
    return np.concatenate(rows, axis=0)


def normalize_chip(raw: np.ndarray, mode: str = PER_CHIP_MINMAX,
                   lo: float | None = None, hi: float | None = None) -> np.ndarray:
    """Map one single-channel tile onto [0, 1].

    per_chip_minmax uses the tile's own min/max (a constant tile maps to
    all 0.5); global_minmax uses the dataset-wide channel range recorded
    in the manifest, which must be passed as lo/hi.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise NonFiniteError("chip contains non-finite values")
    if mode == PER_CHIP_MINMAX:
        lo, hi = float(raw.min()), float(raw.max())
        if hi == lo:
            return np.full(raw.shape, 0.5, dtype=np.float32)
        return ((raw - lo) / (hi - lo)).astype(np.float32)
    if mode == GLOBAL_MINMAX:
        if lo is None or hi is None:
            raise ConfigError("global_minmax needs the dataset-wide lo/hi")
        if hi == lo:
            return np.full(raw.shape, 0.5, dtype=np.float32)
        return np.clip((raw - lo) / (hi - lo), 0.0, 1.0).astype(np.float32)
    raise ConfigError(f"unknown normalization mode {mode!r}")


def filter_clouds(records: list[ChipRecord], threshold: float) -> list[ChipRecord]:
    """Mark records with cloud_fraction above the threshold as excluded.

    With threshold 0 any chip containing a cloud pixel is dropped.
    """
    for r in records:
        if r.cloud_fraction > threshold:
            r.split = EXCLUDED
        elif r.split == EXCLUDED:
            r.split = None
    return records


def assign_splits(records: list[ChipRecord], seed: int, train_fraction: float = 0.8,
                  unit: str = "scene") -> list[ChipRecord]:
    """Deterministically split non-excluded records into train and test.

    The shuffle permutes sorted keys with one seeded generator, so the
    assignment depends only on (record contents, seed), not input order.
    Chip unit: train count = floor(train_fraction * n). Scene unit: all
    chips of a scene share a split; the scene-boundary cut closest to the
    target record count wins (ties prefer fewer train scenes).
    """
    retained = [r for r in records if r.split != EXCLUDED]
    if not retained:
        raise EmptyDatasetError("no records left after cloud filtering")
    rng = np.random.default_rng(seed)

    if unit == "chip":
        ids = sorted(r.chip_id for r in retained)
        perm = rng.permutation(len(ids))
        n_train = int(np.floor(train_fraction * len(ids)))
        train_ids = {ids[i] for i in perm[:n_train]}
        for r in retained:
            r.split = TRAIN if r.chip_id in train_ids else TEST
    elif unit == "scene":
        scene_ids = sorted({r.parent_scene_id for r in retained})
        perm = rng.permutation(len(scene_ids))
        ordered = [scene_ids[i] for i in perm]
        sizes = {sid: 0 for sid in scene_ids}
        for r in retained:
            sizes[r.parent_scene_id] += 1
        target = train_fraction * len(retained)
        best_cut, best_gap, cum = 0, abs(target), 0
        for k, sid in enumerate(ordered, start=1):
            cum += sizes[sid]
            gap = abs(cum - target)
            if gap < best_gap:
                best_cut, best_gap = k, gap
        train_scenes = set(ordered[:best_cut])
        for r in retained:
            r.split = TRAIN if r.parent_scene_id in train_scenes else TEST
    else:
        raise ConfigError(f"unknown split unit {unit!r}")
    return records


def carve_validation(chip_ids: list[str], fraction: float,
                     seed: int) -> tuple[list[str], list[str]]:
    """Deterministically set aside a validation subset of the train chips."""
    ids = sorted(chip_ids)
    if fraction <= 0 or len(ids) < 2:
        return ids, []
    rng = np.random.default_rng(np.random.SeedSequence([seed, 761]))
    perm = rng.permutation(len(ids))
    n_val = int(round(fraction * len(ids)))
    n_val = max(1, min(n_val, len(ids) - 1))
    val = {ids[i] for i in perm[:n_val]}
    return [i for i in ids if i not in val], sorted(val)


def _records_checksum(records: list[ChipRecord]) -> str:
    canonical = json.dumps(
        [r.to_dict() for r in records], sort_keys=True, separators=(",", ":")
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_manifest(manifest: DatasetManifest, path: str | Path) -> str:
    """Write the manifest as JSON; returns the record-list checksum."""
    for r in manifest.records:
        if r.split not in SPLITS:
            raise ConfigError(f"{r.chip_id}: unassigned split cannot be persisted")
    checksum = _records_checksum(manifest.records)
    doc = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "split_seed": manifest.split_seed,
        "cloud_threshold": manifest.cloud_threshold,
        "normalization_mode": manifest.normalization_mode,
        "global_stats": manifest.global_stats,
        "records": [r.to_dict() for r in manifest.records],
        "records_checksum": checksum,
    }
    Path(path).write_text(json.dumps(doc, indent=1))
    return checksum


def load_manifest(path: str | Path) -> DatasetManifest:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"manifest not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported manifest version")
    records = [ChipRecord.from_dict(d) for d in doc["records"]]
    if _records_checksum(records) != doc["records_checksum"]:
        raise FormatError(f"{path}: record checksum mismatch")
    stats = doc.get("global_stats")
    if stats is not None:
        stats = {k: (float(v[0]), float(v[1])) for k, v in stats.items()}
    return DatasetManifest(
        records=records,
        split_seed=doc["split_seed"],
        cloud_threshold=doc["cloud_threshold"],
        normalization_mode=doc["normalization_mode"],
        global_stats=stats,
    )


def list_scene_ids(scene_root: str | Path) -> list[str]:
    root = Path(scene_root)
    if not root.is_dir():
        raise EmptyDatasetError(f"scene directory not found: {root}")
    ids = sorted(p.name for p in root.iterdir() if (p / BAND_FILES["vv"]).exists())
    return ids


def load_scene(scene_root: str | Path, scene_id: str) -> Scene:
    scene_dir = Path(scene_root) / scene_id
    bands = {}
    for band, filename in BAND_FILES.items():
        path = scene_dir / filename
        if not path.exists():
            raise MissingChipError(f"{scene_id}: missing band file {filename}")
        bands[band] = read_chip(path)[:, :, 0]
    event_id = scene_id
    meta_path = scene_dir / "meta.json"
    if meta_path.exists():
        event_id = json.loads(meta_path.read_text()).get("event_id", scene_id)
    return Scene(
        scene_id=scene_id,
        event_id=event_id,
        s1_bands=np.stack([bands["vv"], bands["vh"]], axis=2),
        s2_bands={"green": bands["green"], "nir": bands["nir"]},
        cloud_mask=bands["clouds"].astype(np.uint8),
    )


def _radar_global_stats(scene_root: Path, scene_ids: list[str]) -> dict:
    """Dataset-wide per-channel radar min/max (clouds do not affect radar)."""
    stats = {ch: [np.inf, -np.inf] for ch in RADAR_CHANNELS}
    for sid in scene_ids:
        scene = load_scene(scene_root, sid)
        for c, ch in enumerate(RADAR_CHANNELS):
            band = scene.s1_bands[:, :, c]
            if not np.all(np.isfinite(band)):
                raise NonFiniteError(f"{sid}: non-finite radar values in {ch}")
            stats[ch][0] = min(stats[ch][0], float(band.min()))
            stats[ch][1] = max(stats[ch][1], float(band.max()))
    return {ch: (lo, hi) for ch, (lo, hi) in stats.items()}


def preprocess_scenes(scene_root: str | Path, chip_dir: str | Path, *,
                      cloud_threshold: float = 0.0,
                      normalization_mode: str = PER_CHIP_MINMAX,
                      split_seed: int = 0,
                      train_fraction: float = 0.8,
                      split_unit: str = "scene") -> DatasetManifest:
    """Run the full ingestion pass: chip, normalize, filter, split, persist.

    Radar chips are materialized for every grid cell (radar is unaffected
    by clouds, so excluded chips stay usable for prediction); target index
    chips are materialized only for retained records.
    """
    if normalization_mode not in NORMALIZATION_MODES:
        raise ConfigError(f"unknown normalization mode {normalization_mode!r}")
    scene_root = Path(scene_root)
    chip_dir = Path(chip_dir)
    chip_dir.mkdir(parents=True, exist_ok=True)
    scene_ids = list_scene_ids(scene_root)
    if not scene_ids:
        raise EmptyDatasetError(f"no scenes found under {scene_root}")

    global_stats = None
    if normalization_mode == GLOBAL_MINMAX:
        global_stats = _radar_global_stats(scene_root, scene_ids)

    records: list[ChipRecord] = []
    for sid in scene_ids:
        scene = load_scene(scene_root, sid)
        for i, (radar_raw, optical_raw, cloud_fraction) in enumerate(chip_scene(scene)):
            row, col = divmod(i, CHIP_GRID)
            cid = chip_id_for(sid, row, col)
            records.append(ChipRecord(cid, sid, row, col, cloud_fraction))

            channels = []
            for c, ch in enumerate(RADAR_CHANNELS):
                if global_stats is None:
                    channels.append(normalize_chip(radar_raw[:, :, c]))
                else:
                    lo, hi = global_stats[ch]
                    channels.append(
                        normalize_chip(radar_raw[:, :, c], GLOBAL_MINMAX, lo, hi)
                    )
            write_chip(radar_chip_path(chip_dir, cid), np.stack(channels, axis=2))

            if cloud_fraction <= cloud_threshold:
                ndwi = rescale_to_unit(
                    compute_ndwi(optical_raw[:, :, 0], optical_raw[:, :, 1])
                )
                write_chip(target_chip_path(chip_dir, cid), ndwi.values.astype(np.float32))

    filter_clouds(records, cloud_threshold)
    assign_splits(records, split_seed, train_fraction, split_unit)
    return DatasetManifest(
        records=records,
        split_seed=split_seed,
        cloud_threshold=cloud_threshold,
        normalization_mode=normalization_mode,
        global_stats=global_stats,
    )


def load_chip_pair(chip_dir: str | Path, chip_id: str) -> tuple[np.ndarray, np.ndarray]:
    """Read one (radar, target) pair, raising MissingChipError by chip id."""
    rp = radar_chip_path(Path(chip_dir), chip_id)
    tp = target_chip_path(Path(chip_dir), chip_id)
    if not rp.exists():
        raise MissingChipError(f"no radar chip file for {chip_id}")
    if not tp.exists():
        raise MissingChipError(f"no target chip file for {chip_id}")
    return read_chip(rp), read_chip(tp)


def iterate_id_batches(chip_ids: list[str], chip_dir: str | Path, batch_size: int,
                       shuffle_seed: int | None = None):
    """Batches over an explicit chip id list; the final batch may be short."""
    ids = list(chip_ids)
    if shuffle_seed is None:
        order = np.arange(len(ids))
    else:
        order = np.random.default_rng(shuffle_seed).permutation(len(ids))
    for start in range(0, len(ids), batch_size):
        picked = [ids[i] for i in order[start : start + batch_size]]
        inputs, targets = [], []
        for cid in picked:
            radar, target = load_chip_pair(chip_dir, cid)
            inputs.append(radar)
            targets.append(target)
        yield Batch(np.stack(inputs), np.stack(targets), picked)


def iterate_batches(manifest: DatasetManifest, split: str, batch_size: int,
                    shuffle_seed: int | None, chip_dir: str | Path):
    """One epoch over a split: every chip exactly once, deterministic order."""
    ids = [r.chip_id for r in manifest.records if r.split == split]
    yield from iterate_id_batches(ids, chip_dir, batch_size, shuffle_seed)


def epoch_seed(base_seed: int, epoch: int) -> int:
    """Stable per-epoch shuffle seed derived from one base seed."""
    return int(np.random.SeedSequence([base_seed, epoch]).generate_state(1)[0])


def manifest_stream(chip_ids: list[str], chip_dir: str | Path, batch_size: int,
                    base_seed: int | None):
    """Epoch-indexed stream over manifest chips, reshuffled per epoch."""

    def stream(epoch: int):
        seed = None if base_seed is None else epoch_seed(base_seed, epoch)
        yield from iterate_id_batches(chip_ids, chip_dir, batch_size, seed)

    return stream
