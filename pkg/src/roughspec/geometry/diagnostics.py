"""Sampled comparison between a domain and its pixelations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metrics import hausdorff
from .oracles import DomainOracle
from .pixels import (
    EmptyPixelationError,
    boundary_points,
    collar_mask,
    estimate_Q,
    inside_pixels,
    pixelate,
)


@dataclass
class GeometryReport:
    n: int
    l_n: float
    dH_domain: float
    dH_boundary: float
    Q_estimate: float
    collar_areas: dict = field(default_factory=dict)


def sample_grid(radius: float, spacing: float) -> np.ndarray:
    k = int(np.ceil(radius / spacing))
    s = np.arange(-k, k + 1) * spacing
    gx, gy = np.meshgrid(s, s, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()])


def sample_boundary(oracle: DomainOracle, spacing: float, n_bisect: int = 40) -> np.ndarray:
    """Points of the boundary found by bisection along grid lines.

    Each member grid point is a seed; along the four axis directions the
    nearest non-member grid neighbour (if the step crosses the boundary) gives
    a bracket that is bisected ``n_bisect`` times.
    """
    r = oracle.bounding_radius + 2 * spacing
    k = int(np.ceil(r / spacing))
    s = np.arange(-k, k + 1) * spacing
    gx, gy = np.meshgrid(s, s, indexing="ij")
    inside = oracle.membership(gx, gy)
    found = []
    for axis, step in ((0, 1), (0, -1), (1, 1), (1, -1)):
        nb = np.roll(inside, -step, axis=axis)
        # rolled-in wrap values are at the outer ring which lies outside the domain
        cross = inside & ~nb
        ix, iy = np.nonzero(cross)
        if len(ix) == 0:
            continue
        lo = np.column_stack([gx[ix, iy], gy[ix, iy]])
        d = np.zeros(2)
        d[axis] = step * spacing
        hi = lo + d
        for _ in range(n_bisect):
            mid = 0.5 * (lo + hi)
            ok = oracle.membership(mid[:, 0], mid[:, 1])
            lo = np.where(ok[:, None], mid, lo)
            hi = np.where(ok[:, None], hi, mid)
        found.append(0.5 * (lo + hi))
    if not found:
        return np.zeros((0, 2))
    return np.concatenate(found)


def mosco_diagnostic(
    oracle: DomainOracle,
    n_list,
    boundary_samples: int = 8,
    spacing: float | None = None,
    collar_radii=None,
) -> list[GeometryReport]:
    """l(n) = d_H(O, O_n) + d_H(dO, dO_n) for each resolution, on sampled sets.

    O is sampled by the member points of a grid of pitch ``spacing`` (default:
    a quarter of the finest pixel), dO by :func:`sample_boundary`, O_n by the
    same grid restricted to the closed pixels and dO_n by exposed-edge samples.
    """
    n_list = list(n_list)
    if not n_list:
        raise ValueError("n_list must not be empty")
    if spacing is None:
        spacing = 1.0 / (4 * max(n_list))
    grid = sample_grid(oracle.bounding_radius + spacing, spacing)
    dom = grid[oracle.membership(grid[:, 0], grid[:, 1])]
    bdry = sample_boundary(oracle, spacing)
    reports = []
    for n in n_list:
        pd = pixelate(oracle, n)
        if pd.empty:
            raise EmptyPixelationError(f"pixelation at n={n} is empty")
        lo = pd.sites.min(axis=0) / n - 1.0 / n
        hi = pd.sites.max(axis=0) / n + 1.0 / n
        box = grid[np.all((grid >= lo) & (grid <= hi), axis=1)]
        pix = box[inside_pixels(pd, box)]
        if len(pix) == 0:
            pix = pd.centers
        bn = boundary_points(pd, boundary_samples)
        d_dom = hausdorff(dom, pix)
        d_bd = hausdorff(bdry, bn)
        radii = collar_radii if collar_radii is not None else (1.0 / n, 2.0 / n)
        areas = {float(r): collar_mask(pd, r, 8 * n)[3] for r in radii}
        reports.append(GeometryReport(n, d_dom + d_bd, d_dom, d_bd, estimate_Q(pd), areas))
    return reports
