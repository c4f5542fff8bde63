"""Membership oracles for planar domains.

A domain is only ever seen through a vectorised predicate ``contains(x, y)``
plus a radius outside of which it is known to be empty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

Predicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DomainOracle:
    """Point-membership predicate of an open set together with a bounding radius.

    ``contains`` is vectorised: it takes coordinate arrays of equal shape and
    returns a boolean array of that shape.  Calling the oracle on a single
    point returns a plain ``bool``.
    """

    contains: Predicate = field(repr=False)
    bounding_radius: float
    label: str = "domain"

    def __call__(self, point) -> bool:
        x, y = point
        return bool(self.membership(np.asarray([x], float), np.asarray([y], float))[0])

    def membership(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        inside = np.asarray(self.contains(x, y), dtype=bool)
        # the bounding radius is part of the contract, enforce it here
        return inside & (np.hypot(x, y) <= self.bounding_radius)


def oracle_julia(c: complex, max_iter: int = 1000, escape_radius: float = 2.0) -> DomainOracle:
    """Filled Julia set of z -> z**2 + c by escape-time truncation.

    A point is reported inside iff every iterate f^k(z), 0 <= k <= max_iter,
    satisfies |f^k(z)| <= escape_radius.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if escape_radius < 2:
        raise ValueError("escape_radius must be >= 2")
    c = complex(c)
    r2 = escape_radius * escape_radius

    def contains(x, y):
        z = (x + 1j * y).ravel()
        alive = np.ones(z.shape, dtype=bool)
        idx = np.arange(z.size)
        zz = z.copy()
        for _ in range(max_iter + 1):
            mag = zz.real * zz.real + zz.imag * zz.imag
            esc = mag > r2
            if esc.any():
                alive[idx[esc]] = False
                keep = ~esc
                idx = idx[keep]
                zz = zz[keep]
            if idx.size == 0:
                break
            zz = zz * zz + c
        return alive.reshape(x.shape)

    return DomainOracle(contains, float(escape_radius), f"julia(c={c.real:+.12g}{c.imag:+.12g}j)")


def oracle_square(a: float, b: float) -> DomainOracle:
    """The open square (a, b) x (a, b)."""
    if not a < b:
        raise ValueError("need a < b")

    def contains(x, y):
        return (x > a) & (x < b) & (y > a) & (y < b)

    return DomainOracle(contains, math.sqrt(2.0) * max(abs(a), abs(b)), f"square({a:g},{b:g})")


def oracle_disc(radius: float, center: tuple[float, float] = (0.0, 0.0)) -> DomainOracle:
    """Open disc of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    cx, cy = center

    def contains(x, y):
        return (x - cx) ** 2 + (y - cy) ** 2 < radius * radius

    return DomainOracle(contains, radius + math.hypot(cx, cy), f"disc({radius:g})")


def oracle_annulus(eps: float) -> DomainOracle:
    """B_1(0) minus the closed disc of radius eps."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")

    def contains(x, y):
        r2 = x * x + y * y
        return (r2 > eps * eps) & (r2 < 1.0)

    return DomainOracle(contains, 1.0, f"annulus({eps:g})")


def koch_polygon(level: int) -> np.ndarray:
    """Vertices (k, 2) of the level-``level`` Koch snowflake, counter-clockwise.

    The level-0 polygon is the equilateral triangle of side 1 centred at the
    origin; each refinement replaces the middle third of every edge by an
    outward equilateral bump.
    """
    if level < 0:
        raise ValueError("level must be nonnegative")
    R = 1.0 / math.sqrt(3.0)
    pts = R * np.exp(1j * (np.pi / 2 + 2 * np.pi * np.arange(3) / 3))
    rot = np.exp(-1j * np.pi / 3)  # outward for a counter-clockwise polygon
    for _ in range(level):
        a = pts
        b = np.roll(pts, -1)
        d = (b - a) / 3.0
        s1 = a + d
        s2 = a + 2 * d
        tip = s1 + d * rot
        pts = np.stack([a, s1, tip, s2], axis=1).ravel()
    return np.column_stack([pts.real, pts.imag])


def points_in_polygon(x: np.ndarray, y: np.ndarray, poly: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Even-odd crossing test, vectorised over points (boundary points are unspecified)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    shape = x.shape
    px, py = x.ravel(), y.ravel()
    out = np.zeros(px.shape, dtype=bool)
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for s in range(0, px.size, chunk):
        qx = px[s:s + chunk, None]
        qy = py[s:s + chunk, None]
        straddle = (y0 > qy) != (y1 > qy)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (qy - y0) * (x1 - x0) / (y1 - y0)
        hits = straddle & (qx < xc)
        out[s:s + chunk] = (np.count_nonzero(hits, axis=1) % 2) == 1
    return out.reshape(shape)


def oracle_koch(level: int) -> DomainOracle:
    if not 0 <= level <= 10:
        raise ValueError("level must lie in 0..10")
    poly = koch_polygon(level)
    chunk = max(16, 2_000_000 // len(poly))

    def contains(x, y):
        return points_in_polygon(x, y, poly, chunk=chunk)

    radius = float(np.max(np.hypot(poly[:, 0], poly[:, 1])))
    return DomainOracle(contains, radius * (1 + 1e-12), f"koch({level})")


def boundary_distance(
    oracle: DomainOracle,
    x,
    y,
    reach: float,
    n_dirs: int = 32,
    n_march: int = 16,
    n_bisect: int = 40,
) -> np.ndarray:
    """Estimate dist(p, complement) for member points p, capped at ``reach``.

    Along each of ``n_dirs`` rays the first non-member among ``n_march``
    equally spaced samples up to ``reach`` is located and the crossing is then
    refined by ``n_bisect`` bisection steps.  The minimum over rays is an upper
    estimate of the distance to the boundary; ``reach`` is returned when no
    exit was found.
    """
    x = np.atleast_1d(np.asarray(x, float))
    y = np.atleast_1d(np.asarray(y, float))
    best = np.full(x.shape, float(reach))
    angles = 2 * np.pi * np.arange(n_dirs) / n_dirs
    ts = reach * np.arange(1, n_march + 1) / n_march
    for th in angles:
        dx, dy = math.cos(th), math.sin(th)
        lo = np.zeros(x.shape)
        hi = np.full(x.shape, np.inf)
        for t in ts:
            open_ = ~np.isfinite(hi)
            if not open_.any():
                break
            out = ~oracle.membership(x[open_] + t * dx, y[open_] + t * dy)
            sel = np.flatnonzero(open_)
            hi[sel[out]] = t
            lo[sel[~out]] = t
        found = np.isfinite(hi)
        if not found.any():
            continue
        a, b = lo[found], hi[found]
        fx, fy = x[found], y[found]
        for _ in range(n_bisect):
            mid = 0.5 * (a + b)
            inside = oracle.membership(fx + mid * dx, fy + mid * dy)
            a = np.where(inside, mid, a)
            b = np.where(inside, b, mid)
        best[found] = np.minimum(best[found], b)
    return best


def oracle_strips(base: DomainOracle, anchors: Sequence[Sequence[float]], eps: float) -> DomainOracle:
    """Thin subdomain of ``base`` that agrees with it on every anchor.

    Points of ``base`` are kept when they lie in the eps-collar of the base
    boundary or within horizontal distance 2**-k * eps / 2 of the k-th anchor
    (k counted from 1).  The collar test uses :func:`boundary_distance`.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    anchors = np.asarray(anchors, dtype=float).reshape(-1, 2)
    if len(anchors) == 0:
        raise ValueError("need at least one anchor")
    if not base.membership(anchors[:, 0], anchors[:, 1]).all():
        raise ValueError("every anchor must lie inside the base domain")
    half = eps * 0.5 ** np.arange(1, len(anchors) + 1) / 2
    # one strip per distinct abscissa, keeping the widest
    ax: dict[float, float] = {}
    for a, w in zip(anchors[:, 0], half):
        ax[float(a)] = max(ax.get(float(a), 0.0), float(w))
    centres = np.array(sorted(ax))
    widths = np.array([ax[c] for c in centres])

    def contains(x, y):
        inb = base.membership(x, y)
        res = np.zeros(x.shape, dtype=bool)
        if not inb.any():
            return res
        px, py = x[inb], y[inb]
        strip = np.zeros(px.shape, dtype=bool)
        for c, w in zip(centres, widths):
            strip |= np.abs(px - c) < w
        rest = ~strip
        if rest.any():
            d = boundary_distance(base, px[rest], py[rest], reach=eps)
            strip[np.flatnonzero(rest)[d < eps]] = True
        res[inb] = strip
        return res

    return DomainOracle(contains, base.bounding_radius, f"strips({base.label},eps={eps:g})")
