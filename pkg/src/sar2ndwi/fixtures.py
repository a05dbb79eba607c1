"""Synthetic scene and chip generators used by tests and example scripts.

The generator draws a smooth "water occupancy" field from random disks,
then derives physically flavored bands from it: water raises the green
reflectance and depresses near-infrared (so the water index is high over
water), and smooth water surfaces return little radar backscatter (so VV
and VH drop over water). Cloud masks are unions of random disks with a
requested coverage. Everything is deterministic given the seed.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .chipio import write_chip
from .dataset import BAND_FILES, CHIP_SIZE, SCENE_SIZE, Scene


def water_geometry(size: int, rng: np.random.Generator, n_blobs: int = 6,
                   smooth: float = 8.0) -> np.ndarray:
    """Smooth water occupancy field in [0, 1] from a union of random disks."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    blobs = np.zeros((size, size), dtype=np.float64)
    for _ in range(n_blobs):
        cy, cx = rng.uniform(0, size, size=2)
        r = rng.uniform(size / 16, size / 5)
        blobs = np.maximum(blobs, ((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r) * 1.0)
    field = gaussian_filter(blobs, sigma=smooth)
    hi = field.max()
    return field / hi if hi > 0 else field


def cloud_geometry(size: int, rng: np.random.Generator, coverage: float) -> np.ndarray:
    """Binary cloud mask whose mean coverage is at least `coverage`."""
    mask = np.zeros((size, size), dtype=bool)
    if coverage <= 0:
        return mask.astype(np.uint8)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(256):
        if mask.mean() >= coverage:
            break
        cy, cx = rng.uniform(0, size, size=2)
        r = rng.uniform(size / 12, size / 4)
        mask |= (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    return mask.astype(np.uint8)


def generate_scene(scene_id: str, seed: int, *, size: int = SCENE_SIZE,
                   cloud_cover: float = 0.15) -> Scene:
    """One synthetic acquisition with coupled radar/optical/cloud content."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, abs(hash(scene_id)) % (2**32)]))
    w = water_geometry(size, rng)

    def noise(scale):
        return scale * rng.standard_normal((size, size))

    green = np.clip(0.08 + 0.10 * w + noise(0.005), 0.001, 1.0)
    nir = np.clip(0.30 - 0.25 * w + noise(0.005), 0.001, 1.0)
    vv = np.clip(0.55 - 0.35 * w + noise(0.02), 0.0, 1.0)
    vh = np.clip(0.45 - 0.30 * w + noise(0.02), 0.0, 1.0)
    clouds = cloud_geometry(size, rng, cloud_cover)
    return Scene(
        scene_id=scene_id,
        event_id=f"event-{scene_id.rsplit('-', 1)[0]}",
        s1_bands=np.stack([vv, vh], axis=2).astype(np.float32),
        s2_bands={"green": green.astype(np.float32), "nir": nir.astype(np.float32)},
        cloud_mask=clouds,
    )


def write_scene(scene: Scene, scene_dir: str | Path) -> Path:
    """Materialize one scene directory in the ingestion layout."""
    scene_dir = Path(scene_dir)
    scene_dir.mkdir(parents=True, exist_ok=True)
    bands = {
        "vv": scene.s1_bands[:, :, 0],
        "vh": scene.s1_bands[:, :, 1],
        "green": scene.s2_bands["green"],
        "nir": scene.s2_bands["nir"],
        "clouds": scene.cloud_mask.astype(np.float32),
    }
    for band, filename in BAND_FILES.items():
        write_chip(scene_dir / filename, bands[band])
    (scene_dir / "meta.json").write_text(json.dumps({"event_id": scene.event_id}))
    return scene_dir


def generate_scene_dir(root: str | Path, n_scenes: int, seed: int = 0, *,
                       cloud_covers: list[float] | None = None) -> list[str]:
    """Write `n_scenes` synthetic scenes under `root`; returns scene ids."""
    root = Path(root)
    ids = []
    for i in range(n_scenes):
        sid = f"scene-{i:03d}"
        cover = cloud_covers[i % len(cloud_covers)] if cloud_covers else 0.15
        write_scene(generate_scene(sid, seed + i, cloud_cover=cover), root / sid)
        ids.append(sid)
    return ids


def generate_chip_pairs(n: int, seed: int = 0,
                        size: int = CHIP_SIZE) -> tuple[np.ndarray, np.ndarray]:
    """Paired (radar, target) chips with a smooth learnable relationship.

    The target is an affine image of the water field, kept strictly inside
    (0, 1); the radar channels are noisy negatives of the same field, so a
    small network can overfit the mapping.
    """
    rng = np.random.default_rng(seed)
    inputs = np.empty((n, size, size, 2), dtype=np.float32)
    targets = np.empty((n, size, size, 1), dtype=np.float32)
    for i in range(n):
        w = water_geometry(size, rng, n_blobs=3, smooth=max(2.0, size / 16))
        vv = np.clip(0.8 - 0.6 * w + 0.01 * rng.standard_normal((size, size)), 0.0, 1.0)
        vh = np.clip(0.7 - 0.5 * w + 0.01 * rng.standard_normal((size, size)), 0.0, 1.0)
        inputs[i, :, :, 0] = vv
        inputs[i, :, :, 1] = vh
        targets[i, :, :, 0] = 0.25 + 0.5 * w
    return inputs, targets
