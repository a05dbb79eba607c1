"""Water index computation from green and near-infrared rasters.

The index is (green - nir) / (green + nir), defined pixelwise. Raw values
live in [-1, 1] ("signed" scale); the model regresses against the affine
rescale (v + 1) / 2 in [0, 1] ("unit" scale).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NegativeRadianceError, ScaleError

SIGNED = "signed"
UNIT = "unit"


@dataclass
class NdwiMap:
    """A water-index raster together with the scale it is expressed on."""

    values: np.ndarray
    scale: str = SIGNED

    def __post_init__(self):
        if self.scale not in (SIGNED, UNIT):
            raise ScaleError(f"unknown scale {self.scale!r}")


def compute_ndwi(green: np.ndarray, nir: np.ndarray) -> NdwiMap:
    """Pixelwise (green - nir) / (green + nir) on non-negative inputs.

    Pixels where both bands are zero get index 0 (neutral) rather than a
    divide-by-zero.
    """
    green = np.asarray(green, dtype=np.float64)
    nir = np.asarray(nir, dtype=np.float64)
    if green.shape != nir.shape:
        raise DimensionError(
            f"band shapes differ: green {green.shape} vs nir {nir.shape}"
        )
    # `not >= 0` also catches NaN, which would otherwise slip through a < 0 test
    if not np.all(green >= 0) or not np.all(nir >= 0):
        raise NegativeRadianceError("band values must be non-negative")
    den = green + nir
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(den == 0, 0.0, (green - nir) / den)
    return NdwiMap(values, SIGNED)


def rescale_to_unit(m: NdwiMap) -> NdwiMap:
    """Map a signed-scale index from [-1, 1] onto [0, 1] via (v + 1) / 2."""
    if m.scale != SIGNED:
        raise ScaleError("map is already on the unit scale")
    return NdwiMap((m.values + 1.0) / 2.0, UNIT)


def rescale_to_signed(m: NdwiMap) -> NdwiMap:
    """Inverse of :func:`rescale_to_unit`: v -> 2v - 1."""
    if m.scale != UNIT:
        raise ScaleError("map is not on the unit scale")
    return NdwiMap(2.0 * m.values - 1.0, SIGNED)
