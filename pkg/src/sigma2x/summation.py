"""Compensated reductions with a fixed summation order."""

from __future__ import annotations

import math

import numpy as np


def fsum(values) -> float:
    """Correctly rounded sum (Shewchuk), independent of input order."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def neumaier_rows(mat: np.ndarray) -> np.ndarray:
    """Neumaier-compensated sum of each row, accumulating left to right."""
    mat = np.asarray(mat, dtype=float)
    s = np.zeros(mat.shape[0])
    c = np.zeros(mat.shape[0])
    for j in range(mat.shape[1]):
        x = mat[:, j]
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c += np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + c


def grouped_sum(group: np.ndarray, key: np.ndarray, values: np.ndarray, n_groups: int) -> np.ndarray:
    """Per-group compensated sum, ordered by ``key`` within each group.

    The order is a function of the data only, so the result does not depend
    on how the values were produced (batching, worker count).
    """
    group = np.asarray(group)
    if group.size == 0:
        return np.zeros(n_groups)
    order = np.lexsort((key, group))
    g = group[order]
    v = np.asarray(values, dtype=float)[order]
    counts = np.bincount(g, minlength=n_groups)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    col = np.arange(g.size) - starts[g]
    mat = np.zeros((n_groups, int(counts.max())))
    mat[g, col] = v
    return neumaier_rows(mat)
