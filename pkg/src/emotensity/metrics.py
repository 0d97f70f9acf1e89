"""Pearson and Spearman correlation used for reliability and system evaluation.

Both metrics operate on paired series of equal length >= 2. Undefined cases
(constant input for Pearson, all-tied input for Spearman) raise MetricError
instead of propagating NaN, so evaluation bugs fail loudly.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from emotensity.errors import MetricError

__all__ = ["pearson", "spearman", "average_ranks"]


def _as_pair(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise MetricError("series must be one-dimensional")
    if xa.shape[0] != ya.shape[0]:
        raise MetricError(f"series lengths differ: {xa.shape[0]} vs {ya.shape[0]}")
    if xa.shape[0] < 2:
        raise MetricError("need at least 2 paired observations")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise MetricError("series contain non-finite values")
    return xa, ya


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson product-moment correlation of two paired series."""
    xa, ya = _as_pair(x, y)
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise MetricError("Pearson correlation is undefined for a constant series")
    r = float(np.dot(dx, dy)) / np.sqrt(sxx * syy)
    # guard against rounding drift just outside [-1, 1]
    return float(min(1.0, max(-1.0, r)))


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values receive the mean of the ranks they span."""
    va = np.asarray(values, dtype=np.float64)
    order = np.argsort(va, kind="stable")
    ranks = np.empty(va.shape[0], dtype=np.float64)
    i = 0
    while i < va.shape[0]:
        j = i
        while j + 1 < va.shape[0] and va[order[j + 1]] == va[order[i]]:
            j += 1
        # positions i..j share the value; mean of 1-based ranks i+1..j+1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson correlation of average ranks."""
    xa, ya = _as_pair(x, y)
    rx = average_ranks(xa)
    ry = average_ranks(ya)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise MetricError("Spearman correlation is undefined for an all-tied series")
    return pearson(rx, ry)
