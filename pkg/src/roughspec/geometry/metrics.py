"""Set distances between finite point clouds."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree


def _cloud(points) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, 2)


def directed_sup(a, b) -> float:
    """sup over x in a of dist(x, b)."""
    a, b = _cloud(a), _cloud(b)
    if len(a) == 0:
        return 0.0
    if len(b) == 0:
        return math.inf
    d, _ = cKDTree(b).query(a)
    return float(np.max(d))


def hausdorff(a, b) -> float:
    """Two-sided Hausdorff distance; infinite against an empty cloud, zero for two empty ones."""
    a, b = _cloud(a), _cloud(b)
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return math.inf
    return max(directed_sup(a, b), directed_sup(b, a))


def attouch_wets(a, b, k_max: int = 10, grid: int = 200) -> float:
    """Truncated Attouch-Wets distance plus the tail bound ``2**-k_max``.

    For each k the supremum of |dist(x, a) - dist(x, b)| over |x| < k is
    estimated on a ``grid`` x ``grid`` lattice of the ball together with the
    cloud points in it.  The returned value is an estimate, not a bound.
    """
    a, b = _cloud(a), _cloud(b)
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if len(a) == 0 or len(b) == 0:
        return math.inf if len(a) + len(b) else 0.0
    ta, tb = cKDTree(a), cKDTree(b)
    both = np.concatenate([a, b])
    total = 0.0
    for k in range(1, k_max + 1):
        s = (np.arange(grid) + 0.5) / grid * 2 * k - k
        gx, gy = np.meshgrid(s, s, indexing="ij")
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        pts = np.concatenate([pts, both])
        pts = pts[np.hypot(pts[:, 0], pts[:, 1]) < k]
        if len(pts) == 0:
            continue
        da, _ = ta.query(pts)
        db, _ = tb.query(pts)
        total += 2.0**-k * min(1.0, float(np.max(np.abs(da - db))))
    return total + 2.0**-k_max
