"""Marginal-fidelity primitives: grid histograms on a shared [0,1] grid
(categorical columns get one unit-spaced bin per category) and the four
per-column comparison metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import jensenshannon

NUMERICAL_BIN_SIZES = (25, 50, 100)


class MetricError(ValueError):
    """Metric contract violation."""


@dataclass(frozen=True)
class GridHistogram:
    """Normalized mass over a strictly increasing grid of positions."""

    positions: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        if len(self.positions) != len(self.mass) or len(self.mass) == 0:
            raise MetricError("positions/mass length mismatch")
        if np.any(np.diff(self.positions) <= 0):
            raise MetricError("grid positions must be strictly increasing")
        if np.any(self.mass < 0) or abs(self.mass.sum() - 1.0) > 1e-9:
            raise MetricError("histogram mass must be a distribution")


def numerical_histogram(values: np.ndarray, bins: int, lo: float, hi: float) -> GridHistogram:
    """Mass over a uniform grid of `bins` points spanning [0,1].

    Values are min-max scaled by (lo, hi), the pooled real-data bounds,
    clipped into [0,1], and assigned to the nearest grid point, so
    out-of-range synthetic values land in the end bins.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise MetricError("cannot build a histogram from an empty column")
    if bins < 2:
        raise MetricError("need at least 2 bins")
    if hi > lo:
        scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    else:
        scaled = np.zeros_like(values)
    idx = np.rint(scaled * (bins - 1)).astype(np.int64)
    mass = np.bincount(idx, minlength=bins).astype(np.float64) / values.size
    return GridHistogram(np.linspace(0.0, 1.0, bins), mass)


def categorical_histogram(codes: np.ndarray, cardinality: int) -> GridHistogram:
    """One unit-spaced bin per category."""
    codes = np.asarray(codes, dtype=np.int64).ravel()
    if codes.size == 0:
        raise MetricError("cannot build a histogram from an empty column")
    if cardinality < 1 or codes.min() < 0 or codes.max() >= cardinality:
        raise MetricError("category codes out of range")
    mass = np.bincount(codes, minlength=cardinality).astype(np.float64) / codes.size
    if cardinality == 1:
        positions = np.array([0.0])
    else:
        positions = np.arange(cardinality, dtype=np.float64)
    return GridHistogram(positions, mass)


def _check_same_grid(p: GridHistogram, q: GridHistogram) -> None:
    if not np.array_equal(p.positions, q.positions):
        raise MetricError("histograms live on different grids")


def histogram_intersection(p: GridHistogram, q: GridHistogram) -> float:
    """Sum of bin-wise minima; 1 for identical marginals."""
    _check_same_grid(p, q)
    return float(np.minimum(p.mass, q.mass).sum())


def jensen_shannon_distance(p: GridHistogram, q: GridHistogram) -> float:
    """Square root of the base-2 Jensen-Shannon divergence."""
    _check_same_grid(p, q)
    return float(jensenshannon(p.mass, q.mass, base=2))


def wasserstein_1d(p: GridHistogram, q: GridHistogram) -> float:
    """W1 between the grid distributions: cumulative-mass gaps times the
    spacing of adjacent grid positions."""
    _check_same_grid(p, q)
    if len(p.mass) == 1:
        return 0.0
    cum_gap = np.abs(np.cumsum(p.mass - q.mass)[:-1])
    return float(np.sum(cum_gap * np.diff(p.positions)))


def column_correlation_info(p: GridHistogram, q: GridHistogram) -> tuple[float, bool]:
    """Pearson correlation of the two mass vectors clamped to [0,1].

    A zero-variance mass vector makes Pearson undefined; those pairs fall
    back to histogram intersection and are flagged.
    """
    _check_same_grid(p, q)
    if p.mass.std() == 0.0 or q.mass.std() == 0.0:
        return histogram_intersection(p, q), True
    r = float(np.corrcoef(p.mass, q.mass)[0, 1])
    return min(max(r, 0.0), 1.0), False


def column_correlation(p: GridHistogram, q: GridHistogram) -> float:
    return column_correlation_info(p, q)[0]
