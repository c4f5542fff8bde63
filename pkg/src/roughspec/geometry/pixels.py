"""Pixelated domains: lattice sampling of an oracle and the geometry of the result."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import ConvexHull, QhullError

from .oracles import DomainOracle


class EmptyPixelationError(ValueError):
    """Raised when an operation needs at least one occupied pixel."""


@dataclass(frozen=True, eq=False)
class PixelDomain:
    """Occupied lattice sites ``j`` (grid points ``j / n``) at pitch ``1 / n``.

    The realised open set is the interior of the union of the closed squares
    ``j/n + [-1/(2n), 1/(2n)]^2``.  ``sites`` is an ``(N, 2)`` integer array in
    lexicographic order.
    """

    n: int
    sites: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sites, dtype=np.int64).reshape(-1, 2)
        if len(s):
            s = np.unique(s, axis=0)  # sorted lexicographically
        object.__setattr__(self, "sites", s)

    def __len__(self) -> int:
        return len(self.sites)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PixelDomain)
            and self.n == other.n
            and np.array_equal(self.sites, other.sites)
        )

    @property
    def empty(self) -> bool:
        return len(self.sites) == 0

    @property
    def area(self) -> float:
        return len(self.sites) / self.n**2

    @property
    def centers(self) -> np.ndarray:
        return self.sites / self.n

    def occupancy(self) -> tuple[np.ndarray, np.ndarray]:
        """Boolean image ``img[ix, iy]`` of the sites and its lattice offset."""
        lo = self.sites.min(axis=0)
        hi = self.sites.max(axis=0)
        img = np.zeros(tuple(hi - lo + 1), dtype=bool)
        img[tuple((self.sites - lo).T)] = True
        return img, lo


def _require(pd: PixelDomain) -> None:
    if pd.empty:
        raise EmptyPixelationError("pixelation is empty")


def lattice_points(n: int, radius: float) -> np.ndarray:
    """All ``j`` in Z^2 with ``|j / n| <= radius``, lexicographically sorted."""
    k = int(math.floor(radius * n + 1e-9))
    r = np.arange(-k, k + 1)
    jx, jy = np.meshgrid(r, r, indexing="ij")
    j = np.column_stack([jx.ravel(), jy.ravel()])
    keep = np.hypot(j[:, 0] / n, j[:, 1] / n) <= radius
    return j[keep]


def pixelate(oracle: DomainOracle, n: int, truncate: bool = False) -> PixelDomain:
    """Sites ``j`` with ``oracle(j / n)`` true.

    With ``truncate`` only lattice points with ``|j / n| <= n`` are queried,
    which is the information a resolution-``n`` algorithm may use.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    radius = oracle.bounding_radius
    if truncate:
        radius = min(radius, float(n))
    j = lattice_points(n, radius)
    inside = oracle.membership(j[:, 0] / n, j[:, 1] / n)
    return PixelDomain(n, j[inside])


def components(pd: PixelDomain) -> list[PixelDomain]:
    """Split into 4-connected components, ordered by their smallest site."""
    if pd.empty:
        return []
    img, lo = pd.occupancy()
    labels, count = ndimage.label(img)  # default structure is 4-connectivity
    lab = labels[tuple((pd.sites - lo).T)]
    parts = [PixelDomain(pd.n, pd.sites[lab == k]) for k in range(1, count + 1)]
    parts.sort(key=lambda p: tuple(p.sites[0]))
    return parts


def exposed_edges(pd: PixelDomain) -> np.ndarray:
    """Exposed pixel edges as integer corner pairs, shape ``(E, 2, 2)``.

    Corner index ``(i, k)`` is the point ``((i - 1/2) / n, (k - 1/2) / n)``, so
    pixel ``j`` has corners ``j``, ``j + (1, 0)``, ``j + (1, 1)``, ``j + (0, 1)``.
    """
    _require(pd)
    img, lo = pd.occupancy()
    pad = np.pad(img, 1)
    # vertical edges sit between horizontally adjacent cells
    vx, vy = np.nonzero(pad[:-1, :] != pad[1:, :])
    # horizontal edges sit between vertically adjacent cells
    hx, hy = np.nonzero(pad[:, :-1] != pad[:, 1:])
    off = lo - 1
    v0 = np.column_stack([vx + 1, vy]) + off
    h0 = np.column_stack([hx, hy + 1]) + off
    vert = np.stack([v0, v0 + [0, 1]], axis=1)
    horiz = np.stack([h0, h0 + [1, 0]], axis=1)
    edges = np.concatenate([vert, horiz])
    order = np.lexsort((edges[:, 1, 1], edges[:, 1, 0], edges[:, 0, 1], edges[:, 0, 0]))
    return edges[order]


def corners_to_points(corners: np.ndarray, n: int) -> np.ndarray:
    return (np.asarray(corners, float) - 0.5) / n


def edge_segments(pd: PixelDomain) -> np.ndarray:
    """Exposed edges as real segments ``(E, 2, 2)``."""
    return corners_to_points(exposed_edges(pd), pd.n)


def boundary_points(pd: PixelDomain, samples_per_edge: int) -> np.ndarray:
    """Endpoints of every exposed edge plus ``samples_per_edge`` evenly spaced interior points."""
    if samples_per_edge < 1:
        raise ValueError("samples_per_edge must be >= 1")
    edges = exposed_edges(pd).astype(float)
    t = np.arange(samples_per_edge + 2) / (samples_per_edge + 1)
    pts = edges[:, None, 0, :] + t[None, :, None] * (edges[:, None, 1, :] - edges[:, None, 0, :])
    # dedupe in scaled integer coordinates so shared endpoints collapse exactly
    key = np.round(pts.reshape(-1, 2) * (samples_per_edge + 1)).astype(np.int64)
    key = np.unique(key, axis=0)
    return (key / (samples_per_edge + 1) - 0.5) / pd.n


def segment_distance(points: np.ndarray, segments: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Exact Euclidean distance from each point to the union of segments."""
    points = np.asarray(points, float).reshape(-1, 2)
    a = segments[:, 0, :]
    d = segments[:, 1, :] - a
    dd = np.einsum("ij,ij->i", d, d)
    out = np.empty(len(points))
    step = max(1, chunk * 256 // max(1, len(segments)))
    for s in range(0, len(points), step):
        p = points[s:s + step, None, :]
        t = np.clip(np.einsum("pij,ij->pi", p - a, d) / dd, 0.0, 1.0)
        q = a + t[..., None] * d
        out[s:s + step] = np.sqrt(np.min(np.sum((p - q) ** 2, axis=-1), axis=1))
    return out


def inside_pixels(pd: PixelDomain, points: np.ndarray) -> np.ndarray:
    """Membership in the closed union of the pixels (boundary counts as inside)."""
    points = np.asarray(points, float).reshape(-1, 2)
    res = np.zeros(len(points), dtype=bool)
    if pd.empty:
        return res
    img, lo = pd.occupancy()
    scaled = points * pd.n
    base = np.floor(scaled + 0.5).astype(np.int64)
    # a point on a pixel edge may belong to a neighbour, so test the 3x3 block
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            cand = base + [dx, dy] - lo
            ok = np.all((cand >= 0) & (cand < img.shape), axis=1)
            ok &= np.all(np.abs(scaled - (cand + lo)) <= 0.5 + 1e-12, axis=1)
            idx = np.flatnonzero(ok)
            res[idx] |= img[cand[idx, 0], cand[idx, 1]]
    return res


def collar_mask(pd: PixelDomain, r: float, resolution: int):
    """Raster of the ``r``-collar of the realised set.

    Returns ``(mask, origin, cell, area)``: ``mask[ix, iy]`` marks raster cells
    whose centre lies in the realised set at distance ``< r`` from its
    boundary, ``origin`` is the lower-left raster corner and ``cell`` the cell
    side.  Distances are exact point-to-segment distances to exposed edges.
    """
    _require(pd)
    if r <= 0:
        raise ValueError("r must be positive")
    if resolution < pd.n:
        raise ValueError("resolution must be >= n")
    sub = int(math.ceil(resolution / pd.n))
    cell = 1.0 / (pd.n * sub)
    img, lo = pd.occupancy()
    occ = np.kron(img, np.ones((sub, sub), dtype=bool))
    origin = (lo - 0.5) / pd.n
    ix, iy = np.nonzero(occ)
    centres = origin + (np.column_stack([ix, iy]) + 0.5) * cell
    dist = segment_distance(centres, edge_segments(pd))
    mask = np.zeros(occ.shape, dtype=bool)
    mask[ix, iy] = dist < r
    area = np.count_nonzero(mask) * cell * cell
    return mask, origin, cell, area


def estimate_Q(pd: PixelDomain) -> float:
    """Smallest diameter among connected components of the exposed-edge graph."""
    edges = exposed_edges(pd)
    verts, inv = np.unique(edges.reshape(-1, 2), axis=0, return_inverse=True)
    inv = inv.reshape(-1, 2)
    nv = len(verts)
    g = coo_matrix((np.ones(len(inv)), (inv[:, 0], inv[:, 1])), shape=(nv, nv))
    ncomp, lab = connected_components(g, directed=False)
    best = math.inf
    for c in range(ncomp):
        # diameters in integer corner units, scaled once
        best = min(best, _diameter(verts[lab == c]))
    return best / pd.n


def _diameter(pts: np.ndarray) -> float:
    if len(pts) > 8:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:  # collinear
            pass
    diff = pts[:, None, :] - pts[None, :, :]
    return math.sqrt(float(np.max(np.sum(diff * diff, axis=-1))))


# ---------------------------------------------------------------------- I/O


def write_pbm(pd: PixelDomain, prefix) -> tuple[Path, Path]:
    """Write ``prefix.pbm`` (plain P1, top row = largest y) and ``prefix.json``."""
    _require(pd)
    prefix = Path(prefix)
    img, lo = pd.occupancy()
    width, height = img.shape
    rows = np.flipud(img.T).astype(int)
    lines = ["P1", f"{width} {height}"]
    lines += [" ".join(map(str, row)) for row in rows]
    pbm = prefix.with_suffix(".pbm")
    meta = prefix.with_suffix(".json")
    pbm.write_text("\n".join(lines) + "\n")
    header = {"n": pd.n, "origin_index": [int(lo[0]), int(lo[1])], "width": int(width), "height": int(height)}
    meta.write_text(json.dumps(header, indent=2) + "\n")
    return pbm, meta


def read_pbm(prefix) -> PixelDomain:
    prefix = Path(prefix)
    header = json.loads(prefix.with_suffix(".json").read_text())
    tokens = []
    for line in prefix.with_suffix(".pbm").read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if tokens[0] != "P1":
        raise ValueError("not a plain PBM file")
    width, height = int(tokens[1]), int(tokens[2])
    if (width, height) != (header["width"], header["height"]):
        raise ValueError("PBM size disagrees with JSON header")
    bits = "".join(tokens[3:])
    rows = np.array([int(b) for b in bits], dtype=bool).reshape(height, width)
    img = np.flipud(rows).T
    ix, iy = np.nonzero(img)
    sites = np.column_stack([ix, iy]) + header["origin_index"]
    return PixelDomain(int(header["n"]), sites)


def write_points_csv(points: np.ndarray, path) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fh.write("x,y\n")
        for x, y in np.asarray(points, float).reshape(-1, 2).tolist():
            fh.write(f"{x!r},{y!r}\n")
    return path


def read_points_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data.reshape(-1, 2)
