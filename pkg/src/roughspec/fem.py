"""Uniform nested triangulations of pixelated domains and the P1 Dirichlet pencil."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .geometry.pixels import EmptyPixelationError, PixelDomain

# Element matrices of the right isosceles triangle, right-angle vertex first,
# stored as integers: stiffness in units of 1/2, mass in units of h^2/24.
K_INT = np.array([[2, -1, -1], [-1, 1, 0], [-1, 0, 1]], dtype=np.int64)
M_INT = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]], dtype=np.int64)


def element_stiffness() -> np.ndarray:
    return K_INT / 2.0


def element_mass(h: float) -> np.ndarray:
    return M_INT * (h * h / 24.0)


class MeshTooCoarseError(ValueError):
    """The triangulation has no interior vertex."""


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangulation T^m of a pixel domain with mesh size h = 1/(n 2^m).

    ``lattice`` holds integer vertex coordinates ``I`` with
    ``x = I * h - 1/(2n)``; ``triangles`` list vertex indices with the
    right-angle vertex first and counter-clockwise orientation.
    ``interior_index[v]`` is the degree of freedom of vertex ``v`` or -1 on
    the boundary.
    """

    pd: PixelDomain
    m: int
    lattice: np.ndarray
    triangles: np.ndarray
    interior_index: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / (self.pd.n * 2**self.m)

    @property
    def vertices(self) -> np.ndarray:
        return self.lattice * self.h - 0.5 / self.pd.n

    @property
    def dof(self) -> int:
        return int(np.count_nonzero(self.interior_index >= 0))

    @property
    def interior_vertices(self) -> np.ndarray:
        """Vertex numbers of the degrees of freedom, in dof order."""
        return np.flatnonzero(self.interior_index >= 0)


def triangulate(pd: PixelDomain, m: int) -> Mesh:
    """Split each pixel into 2^m x 2^m squares, each cut along its lower-left/upper-right diagonal."""
    if pd.empty:
        raise EmptyPixelationError("cannot triangulate an empty pixelation")
    if m < 0:
        raise ValueError("m must be nonnegative")
    s = 2**m
    off = np.stack(np.meshgrid(np.arange(s), np.arange(s), indexing="ij"), axis=-1).reshape(-1, 2)
    cells = (pd.sites[:, None, :] * s + off[None, :, :]).reshape(-1, 2)
    ll = cells
    lr = cells + [1, 0]
    ur = cells + [1, 1]
    ul = cells + [0, 1]
    corners = np.stack([lr, ur, ll, ul, ll, ur], axis=1).reshape(-1, 2)
    lattice, inv = np.unique(corners, axis=0, return_inverse=True)
    triangles = inv.reshape(-1, 3)

    img, lo = pd.occupancy()

    def occupied(cx, cy):
        px = np.floor_divide(cx, s) - lo[0]
        py = np.floor_divide(cy, s) - lo[1]
        ok = (px >= 0) & (px < img.shape[0]) & (py >= 0) & (py < img.shape[1])
        res = np.zeros(cx.shape, dtype=bool)
        res[ok] = img[px[ok], py[ok]]
        return res

    I, J = lattice[:, 0], lattice[:, 1]
    interior = occupied(I - 1, J - 1) & occupied(I, J - 1) & occupied(I - 1, J) & occupied(I, J)
    index = np.full(len(lattice), -1, dtype=np.int64)
    index[interior] = np.arange(np.count_nonzero(interior))
    return Mesh(pd, m, lattice, triangles, index)


@dataclass(frozen=True, eq=False)
class Pencil:
    """Stiffness ``A`` and mass ``B`` over the interior degrees of freedom."""

    A: sp.csr_matrix
    B: sp.csr_matrix

    @property
    def dof(self) -> int:
        return self.A.shape[0]


def _assemble_int(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    idx = mesh.interior_index[mesh.triangles]
    rows = np.repeat(idx, 3, axis=1).ravel()
    cols = np.tile(idx, (1, 3)).ravel()
    vals = np.broadcast_to(local.ravel(), (len(idx), 9)).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.dof
    mat = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble(mesh: Mesh) -> Pencil:
    """P1 stiffness/mass pencil with Dirichlet rows and columns removed.

    Entries are accumulated as exact integers and scaled once, so the result
    does not depend on the order of the triangle list.
    """
    if mesh.dof == 0:
        raise MeshTooCoarseError("mesh too coarse for Dirichlet problem")
    h = mesh.h
    A = _assemble_int(mesh, K_INT).astype(float) / 2.0
    B = _assemble_int(mesh, M_INT).astype(float) * (h * h / 24.0)
    return Pencil(A.tocsr(), B.tocsr())


def nodal_values(mesh: Mesh, coefficients) -> np.ndarray:
    """Extend dof coefficients to all vertices, zero on the boundary."""
    c = np.asarray(coefficients, dtype=float).ravel()
    if len(c) != mesh.dof:
        raise ValueError(f"expected {mesh.dof} coefficients, got {len(c)}")
    vals = np.zeros(len(mesh.lattice))
    inner = mesh.interior_index >= 0
    vals[inner] = c[mesh.interior_index[inner]]
    return vals


def prolong(coarse: Mesh, fine: Mesh, coefficients) -> np.ndarray:
    """Interpolate a coarse P1 function onto the once-refined nested mesh."""
    if fine.pd != coarse.pd or fine.m != coarse.m + 1:
        raise ValueError("fine mesh must refine the coarse mesh once")
    vals = nodal_values(coarse, coefficients)
    lookup = {tuple(v): i for i, v in enumerate(coarse.lattice.tolist())}
    F = fine.lattice
    out = np.zeros(fine.dof)
    dofs = fine.interior_vertices
    for k, v in zip(range(fine.dof), dofs):
        I, J = F[v]
        if I % 2 == 0 and J % 2 == 0:
            out[k] = vals[lookup[(I // 2, J // 2)]]
        elif I % 2 == 0 or J % 2 == 0:
            a = lookup[((I - (I % 2)) // 2, (J - (J % 2)) // 2)]
            b = lookup[((I + (I % 2)) // 2, (J + (J % 2)) // 2)]
            out[k] = 0.5 * (vals[a] + vals[b])
        else:
            # odd/odd midpoints lie on the lower-left/upper-right diagonal
            a = lookup[((I - 1) // 2, (J - 1) // 2)]
            b = lookup[((I + 1) // 2, (J + 1) // 2)]
            out[k] = 0.5 * (vals[a] + vals[b])
    return out


# ---------------------------------------------------------------------- I/O


def write_vtk(mesh: Mesh, path, values=None, name: str = "u", header: str = "roughspec mesh") -> Path:
    """Legacy ASCII VTK unstructured grid with optional point scalars."""
    path = Path(path)
    pts = mesh.vertices
    tris = mesh.triangles
    lines = ["# vtk DataFile Version 3.0", header, "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(pts)} double")
    lines += [f"{x!r} {y!r} 0.0" for x, y in pts.tolist()]
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris]
    lines.append(f"CELL_TYPES {len(tris)}")
    lines += ["5"] * len(tris)
    if values is not None:
        lines.append(f"POINT_DATA {len(pts)}")
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [repr(float(v)) for v in values]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_matrix_market(pencil: Pencil, prefix) -> tuple[Path, Path]:
    prefix = Path(prefix)
    pa = prefix.parent / (prefix.name + "_A.mtx")
    pb = prefix.parent / (prefix.name + "_B.mtx")
    scipy.io.mmwrite(pa, pencil.A, symmetry="symmetric")
    scipy.io.mmwrite(pb, pencil.B, symmetry="symmetric")
    return pa, pb


def export_eigenfunction(mesh: Mesh, coefficients, prefix, B=None, tol: float = 1e-8) -> tuple[Path, Path]:
    """Write ``prefix.csv`` (x, y, value) and ``prefix.vtk`` for a dof vector.

    When the mass matrix ``B`` is given the header records whether the
    vector is B-normalised, i.e. v^T B v = 1 within ``tol``.
    """
    prefix = Path(prefix)
    vals = nodal_values(mesh, coefficients)
    normalized = None
    if B is not None:
        c = np.asarray(coefficients, dtype=float).ravel()
        normalized = bool(abs(float(c @ (B @ c)) - 1.0) <= tol)
    flag = "unknown" if normalized is None else str(normalized).lower()
    csv = prefix.with_suffix(".csv")
    with csv.open("w") as fh:
        fh.write(f"# b_normalized={flag} n={mesh.pd.n} m={mesh.m} h={mesh.h!r}\n")
        fh.write("x,y,value\n")
        for (x, y), v in zip(mesh.vertices.tolist(), vals.tolist()):
            fh.write(f"{x!r},{y!r},{v!r}\n")
    vtk = write_vtk(mesh, prefix.with_suffix(".vtk"), vals, header=f"eigenfunction b_normalized={flag}")
    return csv, vtk


def read_eigenfunction_csv(path) -> tuple[dict, np.ndarray]:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().lstrip("#").split()
    meta = dict(item.split("=", 1) for item in first)
    data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    return meta, data
