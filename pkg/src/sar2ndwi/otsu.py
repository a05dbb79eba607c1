"""Histogram thresholding that maximizes between-class variance.

Candidate threshold t splits bins into {0..t} and {t+1..L-1}; the chosen
t* maximizes

    (mu_T * w(t) - mu(t))^2 / (w(t) * (1 - w(t)))

with w(t) the cumulative probability mass, mu(t) the cumulative mean and
mu_T the total mean, all over bin indices. Candidates with w(t) in {0, 1}
are undefined and skipped. The argmax is evaluated in exact integer
arithmetic so tie-breaking (lowest t wins) is bit-reproducible and immune
to float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BinCountError, DegenerateHistogramError
from .indices import NdwiMap, UNIT


@dataclass
class Histogram:
    """Counts over `bin_count` uniform bins covering [lo, hi].

    Bin i covers [lo + i*(hi-lo)/L, lo + (i+1)*(hi-lo)/L); the last bin
    is closed on the right.
    """

    bin_count: int
    counts: np.ndarray
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.bin_count < 2:
            raise BinCountError(f"need at least 2 bins, got {self.bin_count}")
        if self.counts.shape != (self.bin_count,):
            raise BinCountError(
                f"counts shape {self.counts.shape} != ({self.bin_count},)"
            )
        if np.any(self.counts < 0):
            raise ValueError("bin counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def bin_upper_edge(self, i: int) -> float:
        return self.lo + (i + 1) * (self.hi - self.lo) / self.bin_count


@dataclass
class OtsuResult:
    """Chosen bin index, its upper edge as threshold, and the full curve."""

    t_star: int
    threshold_value: float
    variance_curve: np.ndarray = field(repr=False)


@dataclass
class WaterMask:
    """Binary raster: 1 = water (value above threshold), 0 = non-water."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.uint8)
        if not np.all((self.values == 0) | (self.values == 1)):
            raise ValueError("mask values must be 0 or 1")


def build_histogram(m: NdwiMap, bins: int = 256) -> Histogram:
    """Histogram a unit-scale index map onto `bins` uniform bins over [0, 1]."""
    if bins < 2:
        raise BinCountError(f"need at least 2 bins, got {bins}")
    if m.scale != UNIT:
        raise ValueError("histograms are built over unit-scale maps")
    values = np.asarray(m.values, dtype=np.float64).ravel()
    idx = np.floor(values * bins).astype(np.int64)
    np.clip(idx, 0, bins - 1, out=idx)  # value 1.0 belongs to the last bin
    counts = np.bincount(idx, minlength=bins)
    return Histogram(bins, counts, 0.0, 1.0)


def otsu_threshold(h: Histogram) -> OtsuResult:
    """Between-class-variance maximizer over all valid candidate bins.

    Single pass with running cumulative count W0 and index-weighted sum S0.
    For integer counts the comparison

        (S_T*W0 - N*S0)^2 / (W0*(N - W0))

    is done by exact cross-multiplication of Python integers, so equal
    candidates compare equal and the lowest index wins.
    """
    counts = [int(c) for c in h.counts]
    if sum(1 for c in counts if c > 0) < 2:
        raise DegenerateHistogramError("fewer than two populated bins")
    n_total = sum(counts)
    s_total = sum(i * c for i, c in enumerate(counts))

    curve = np.full(h.bin_count, np.nan)
    best_t = -1
    best_num = 0  # (S_T*W0 - N*S0)^2 at the incumbent
    best_den = 1  # W0*(N-W0) at the incumbent
    w0 = 0
    s0 = 0
    for t, c in enumerate(counts):
        w0 += c
        s0 += t * c
        if w0 == 0 or w0 == n_total:
            continue
        num = (s_total * w0 - n_total * s0) ** 2
        den = w0 * (n_total - w0)
        curve[t] = num / (den * n_total * n_total)
        if best_t < 0 or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return OtsuResult(best_t, h.bin_upper_edge(best_t), curve)


def binarize(m: NdwiMap, threshold_value: float) -> WaterMask:
    """Mask = 1 where the unit-scale value is strictly above the threshold."""
    if m.scale != UNIT:
        raise ValueError("binarization applies to unit-scale maps")
    return WaterMask((np.asarray(m.values) > threshold_value).astype(np.uint8))
