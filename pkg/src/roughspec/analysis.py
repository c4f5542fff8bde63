"""Experiment drivers: refinement study, collar Poincare check, annulus norms and the fooling construction."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy import integrate

from .eigensolve import DescentStalledError, lu_preconditioner, rayleigh_descent
from .enclosure import gamma_n
from .fem import K_INT, Mesh, assemble, export_eigenfunction, prolong, triangulate
from .geometry.diagnostics import GeometryReport, mosco_diagnostic
from .geometry.oracles import DomainOracle, oracle_strips
from .geometry.pixels import (
    PixelDomain,
    edge_segments,
    estimate_Q,
    lattice_points,
    pixelate,
    segment_distance,
)

log = logging.getLogger(__name__)


# ------------------------------------------------------------------ tables


def write_table(path, header, rows) -> Path:
    """CSV with a header row; floats written with repr so they read back exactly."""
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_table(path) -> tuple[list[str], list[list]]:
    with Path(path).open(encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]

    def parse(s):
        if s == "":
            return None
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            return s

    return header, [[parse(s) for s in r] for r in body]


# ------------------------------------------------------------- convergence


@dataclass
class ConvergenceRow:
    n: int
    m: int
    h: float
    lam: float
    diff: float | None = None
    rate: float | None = None
    iterations: int = 0
    status: str = "ok"


CONVERGENCE_HEADER = ["n", "m", "h", "lambda_1", "diff", "rate", "iterations", "status"]


@dataclass
class ConvergenceTable:
    rows: list[ConvergenceRow]
    fitted_rate: dict = field(default_factory=dict)

    def write(self, path) -> Path:
        return write_table(path, CONVERGENCE_HEADER, [
            [r.n, r.m, r.h, r.lam, r.diff, r.rate, r.iterations, r.status] for r in self.rows
        ])

    @classmethod
    def read(cls, path) -> "ConvergenceTable":
        _, body = read_table(path)
        rows = [ConvergenceRow(int(b[0]), int(b[1]), float(b[2]), float(b[3]) if b[3] is not None else math.nan,
                               b[4], b[5], int(b[6]), str(b[7])) for b in body]
        tab = cls(rows)
        tab.fitted_rate = {n: fit_rate(tab.differences(n)) for n in sorted({r.n for r in rows})}
        return tab

    def differences(self, n: int) -> list[float]:
        return [r.diff for r in self.rows if r.n == n and r.diff is not None]


def fit_rate(diffs) -> float:
    """Minus the least-squares slope of log2(diff) against the refinement index."""
    d = np.asarray([x for x in diffs if x is not None], float)
    if len(d) < 2 or np.any(d <= 0):
        return math.nan
    slope = np.polyfit(np.arange(len(d)), np.log2(d), 1)[0]
    return float(-slope)


def convergence_study(
    oracle: DomainOracle,
    n_list,
    m_max: int,
    grad_tol: float = 1e-10,
    precondition: bool = False,
    warm_start: bool = True,
    max_iter: int = 200_000,
) -> ConvergenceTable:
    """lambda_1^m on nested refinements m = 0..m_max of each pixelation.

    Each level is solved by Rayleigh-quotient descent; with ``warm_start`` the
    previous level's eigenvector, interpolated onto the finer mesh, is the
    start vector.  A stalled solve is recorded in its row and the remaining
    levels of that n are skipped.
    """
    if m_max < 1:
        raise ValueError("need at least two refinement levels")
    rows = []
    fitted = {}
    for n in n_list:
        pd = pixelate(oracle, n)
        prev_mesh, prev_vec, prev_lam = None, None, None
        for m in range(m_max + 1):
            mesh = triangulate(pd, m)
            if mesh.dof == 0:
                rows.append(ConvergenceRow(n, m, mesh.h, math.nan, status="no interior dof"))
                prev_mesh = None
                continue
            pen = assemble(mesh)
            x0 = prolong(prev_mesh, mesh, prev_vec)[:, None] if warm_start and prev_mesh is not None else None
            pre = lu_preconditioner(pen.A) if precondition else None
            try:
                res = rayleigh_descent(pen.A, pen.B, 1, grad_tol=grad_tol, x0=x0, preconditioner=pre, max_iter=max_iter)
            except DescentStalledError as exc:
                rows.append(ConvergenceRow(n, m, mesh.h, math.nan, status=f"stalled: {exc}"))
                log.warning("n=%d m=%d: %s", n, m, exc)
                break
            lam = float(res.values[0])
            diff = abs(lam - prev_lam) if prev_lam is not None else None
            rows.append(ConvergenceRow(n, m, mesh.h, lam, diff, None, int(res.iterations[0])))
            prev_mesh, prev_vec, prev_lam = mesh, res.vectors[:, 0], lam
        mine = [r for r in rows if r.n == n]
        for a, b in zip(mine, mine[1:]):
            if a.diff and b.diff:
                b.rate = math.log2(a.diff / b.diff)
        fitted[n] = fit_rate([r.diff for r in mine])
    return ConvergenceTable(rows, fitted)


# ------------------------------------------------------------ Mosco table

MOSCO_HEADER = ["n", "l_n", "dH_domain", "dH_boundary", "Q_estimate"]


def mosco_table(oracle: DomainOracle, n_list, **kw) -> list[GeometryReport]:
    return mosco_diagnostic(oracle, n_list, **kw)


def write_mosco(reports, path) -> Path:
    radii = sorted({r for rep in reports for r in rep.collar_areas})
    header = MOSCO_HEADER + [f"collar_area_{i}" for i in range(len(radii))]
    rows = []
    for rep in reports:
        rows.append([rep.n, rep.l_n, rep.dH_domain, rep.dH_boundary, rep.Q_estimate]
                    + [rep.collar_areas.get(r) for r in radii])
    return write_table(path, header, rows)


# --------------------------------------------------------- Poincare check


def _subtriangles(k: int = 4):
    """Barycentric vertices of the k*k congruent sub-triangles of a triangle."""
    tris = []
    for i in range(k):
        for j in range(k - i):
            tris.append([(i, j), (i + 1, j), (i, j + 1)])
            if i + j < k - 1:
                tris.append([(i + 1, j), (i, j + 1), (i + 1, j + 1)])
    out = []
    for t in tris:
        # (a, b) are the weights of local vertices 1 and 2; vertex 0 gets the rest
        bary = np.array([[1 - (a + b) / k, a / k, b / k] for a, b in t])
        out.append(bary)
    return np.array(out)  # (k*k, 3 corners, 3 weights)


def _sub_mass(sub: np.ndarray) -> np.ndarray:
    """Exact P1 mass matrices of each sub-triangle, in units of the element area."""
    mats = []
    for bary in sub:
        mids = 0.5 * (bary[[0, 1, 2]] + bary[[1, 2, 0]])
        m = sum(np.outer(q, q) for q in mids) / 3.0
        mats.append(m / len(sub))
    return np.array(mats)


def _assemble_local(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    idx = mesh.interior_index[mesh.triangles]
    rows = np.repeat(idx, 3, axis=1).ravel()
    cols = np.tile(idx, (1, 3)).ravel()
    vals = local.reshape(len(idx), 9).ravel()
    keep = (rows >= 0) & (cols >= 0)
    n = mesh.dof
    return sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(n, n)).tocsr()


@dataclass
class PoincareReport:
    r: float
    n: int
    m: int
    Q_estimate: float
    hypothesis_ok: bool
    trials: int
    evaluated: int
    skipped: int
    max_ratio: float
    bound: float = 5.0
    slack: float = 0.5
    passed: bool = False
    warnings: list = field(default_factory=list)
    quadrature: str = "16 sub-triangles per element, collar membership by sub-triangle centroid"

    def to_dict(self) -> dict:
        return asdict(self)


def collar_matrices(mesh: Mesh, r: float, R: float):
    """Collar-restricted mass (distance < r) and stiffness (distance < R) matrices.

    Each element is cut into 16 sub-triangles; a sub-triangle belongs to a
    collar when its centroid does.  Mass is integrated exactly on the chosen
    sub-triangles, stiffness is weighted by the fraction of sub-triangles.
    """
    sub = _subtriangles(4)
    sub_mass = _sub_mass(sub)
    cent = sub.mean(axis=1)  # (16, 3) barycentric centroids
    verts = mesh.vertices[mesh.triangles]  # (T, 3, 2)
    pts = np.einsum("sk,tkd->tsd", cent, verts).reshape(-1, 2)
    dist = segment_distance(pts, edge_segments(mesh.pd)).reshape(len(verts), len(sub))
    area = 0.5 * mesh.h**2
    in_r = dist < r
    in_R = dist < R
    Mloc = np.einsum("ts,sij->tij", in_r.astype(float), sub_mass) * area
    Kloc = in_R.mean(axis=1)[:, None, None] * (K_INT / 2.0)[None, :, :]
    return _assemble_local(mesh, Mloc), _assemble_local(mesh, Kloc)


def _sample_fields(mesh: Mesh, trials: int, r: float, seed: int):
    """Seeded mix of white noise, smooth Fourier fields and boundary ramps."""
    rng = np.random.default_rng(seed)
    xy = mesh.vertices[mesh.interior_vertices]
    dist = segment_distance(xy, edge_segments(mesh.pd))
    for t in range(trials):
        kind = t % 3
        if kind == 0:
            u = rng.standard_normal(len(xy))
        elif kind == 1:
            u = np.zeros(len(xy))
            for _ in range(6):
                k = rng.normal(0.0, 8.0, 2)
                u += rng.standard_normal() * np.sin(xy @ k + rng.uniform(0, 2 * np.pi))
        else:
            s = rng.uniform(0.5, 4.0) * r
            k = rng.normal(0.0, 3.0, 2)
            u = np.minimum(dist, s) / s * (1.5 + np.sin(xy @ k + rng.uniform(0, 2 * np.pi)))
        yield u


def poincare_check(pd: PixelDomain, r: float, m: int = 1, trials: int = 100, seed: int = 0) -> PoincareReport:
    """Sampled check of ||u||_{collar r} <= 5 r ||grad u||_{collar 2 sqrt(2) r} on discrete H^1_0 functions."""
    if r <= 0:
        raise ValueError("r must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    Q = estimate_Q(pd)
    ok = 4 * math.sqrt(2) * r < Q
    warnings = []
    if not ok:
        msg = f"hypothesis 4*sqrt(2)*r = {4 * math.sqrt(2) * r:.4g} < Q = {Q:.4g} fails; ratio bound not guaranteed"
        log.warning(msg)
        warnings.append(msg)
    mesh = triangulate(pd, m)
    if mesh.dof == 0:
        raise ValueError("mesh has no interior degree of freedom")
    Mr, KR = collar_matrices(mesh, r, 2 * math.sqrt(2) * r)
    best, used, skipped = 0.0, 0, 0
    for u in _sample_fields(mesh, trials, r, seed):
        num2 = float(u @ (Mr @ u))
        den2 = float(u @ (KR @ u))
        if den2 <= 1e-300:
            skipped += 1  # 0/0: nothing of u reaches the collars
            continue
        best = max(best, math.sqrt(max(num2, 0.0)) / (r * math.sqrt(den2)))
        used += 1
    if used == 0:
        warnings.append("degenerate: every sample vanished on the collars")
    rep = PoincareReport(r, pd.n, m, Q, ok, trials, used, skipped, best, warnings=warnings)
    rep.passed = bool(used > 0 and best <= rep.bound + rep.slack)
    return rep


# ------------------------------------------------------------ annulus norms


def annulus_closed_form(eps: float) -> tuple[float, float]:
    """||f||^2 and ||grad f||^2 over eps < |x| < 1 for f = (log eps - log r) / log eps."""
    L = math.log(eps)
    f2 = 2 * math.pi * (0.5 + 1 / (2 * L) + (1 - eps**2) / (4 * L * L))
    g2 = -2 * math.pi / L
    return f2, g2


def annulus_quadrature(eps: float) -> tuple[float, float]:
    L = math.log(eps)
    f = lambda r, th: ((L - math.log(r)) / L) ** 2 * r
    g = lambda r, th: (1.0 / (r * L)) ** 2 * r
    opts = dict(epsabs=0.0, epsrel=1e-12)
    f2 = integrate.dblquad(f, 0.0, 2 * math.pi, eps, 1.0, **opts)[0]
    g2 = integrate.dblquad(g, 0.0, 2 * math.pi, eps, 1.0, **opts)[0]
    return f2, g2


ANNULUS_HEADER = ["eps", "f2_closed", "f2_quad", "grad2_closed", "grad2_quad", "ratio", "log_eps_abs"]


def annulus_table(eps_list) -> list[list[float]]:
    rows = []
    for eps in eps_list:
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        f2c, g2c = annulus_closed_form(eps)
        f2q, g2q = annulus_quadrature(eps)
        rows.append([float(eps), f2c, f2q, g2c, g2q, f2c / g2c, abs(math.log(eps))])
    return rows


# --------------------------------------------------------- fooling domains


@dataclass
class FoolReport:
    n_fixed: int
    n_hi: int
    queries: int
    anchors: int
    agreement: bool
    same_pixelation: bool
    base_lambda1: float
    eps: list
    lambda1: list
    increasing: bool
    fooled: bool

    def to_dict(self) -> dict:
        return asdict(self)


def lambda1_upper(pd: PixelDomain, m: int = 0, grad_tol: float = 1e-8) -> float:
    """Ritz value of the ground state on T^m of the pixel domain."""
    pen = assemble(triangulate(pd, m))
    res = rayleigh_descent(pen.A, pen.B, 1, grad_tol=grad_tol, preconditioner=lu_preconditioner(pen.A))
    return float(res.values[0])


def fool_demo(base: DomainOracle, n_fixed: int, eps_list, n_hi: int = 128, m: int = 0, factor: float = 2.0) -> FoolReport:
    """Thin domains inside ``base`` that answer every resolution-n_fixed query identically.

    The query set is the lattice (Z/n_fixed)^2 within |x| <= n_fixed; the
    true answers become the anchors of :func:`oracle_strips`.  The ground
    state energy of each thin domain is bounded from above on its pixelation
    at resolution ``n_hi``.
    """
    if n_fixed < 1:
        raise ValueError("n_fixed must be >= 1")
    eps_list = [float(e) for e in eps_list]
    if not eps_list or min(eps_list) <= 0:
        raise ValueError("eps values must be positive")
    j = lattice_points(n_fixed, float(n_fixed))
    pts = j / n_fixed
    answers = base.membership(pts[:, 0], pts[:, 1])
    anchors = pts[answers]
    agree, same = True, True
    base_pd = pixelate(base, n_fixed, truncate=True)
    lams = []
    for e in eps_list:
        thin = oracle_strips(base, anchors, e)
        agree &= bool(np.array_equal(thin.membership(pts[:, 0], pts[:, 1]), answers))
        same &= pixelate(thin, n_fixed, truncate=True) == base_pd
        lams.append(lambda1_upper(pixelate(thin, n_hi), m))
    base_lam = lambda1_upper(pixelate(base, n_hi), m)
    order = np.argsort(eps_list)[::-1]
    seq = [lams[i] for i in order]
    increasing = all(b > a for a, b in zip(seq, seq[1:]))
    fooled = bool(agree and same and max(lams) > factor * base_lam)
    return FoolReport(n_fixed, n_hi, len(pts), len(anchors), agree, bool(same), base_lam, eps_list, lams, increasing, fooled)


def same_gamma(base: DomainOracle, thin: DomainOracle, n: int) -> bool:
    """Whether the resolution-n algorithm returns byte-identical output on both oracles."""
    return gamma_n(base, n).to_json() == gamma_n(thin, n).to_json()


# ---------------------------------------------------------- eigenfunctions


def eigenfunctions(pd: PixelDomain, m: int, k_list, prefix, grad_tol: float = 1e-10, precondition: bool = True):
    """Lowest eigenpairs by deflated descent, exported as CSV and VTK per requested index."""
    k_list = sorted({int(k) for k in k_list})
    if not k_list or k_list[0] < 1:
        raise ValueError("eigenvalue indices start at 1")
    mesh = triangulate(pd, m)
    pen = assemble(mesh)
    if k_list[-1] > pen.dof:
        raise ValueError(f"requested k={k_list[-1]} exceeds dof={pen.dof}")
    pre = lu_preconditioner(pen.A) if precondition else None
    res = rayleigh_descent(pen.A, pen.B, k_list[-1], grad_tol=grad_tol, preconditioner=pre)
    prefix = Path(prefix)
    files = []
    for k in k_list:
        out = prefix.parent / f"{prefix.name}_k{k}"
        v = res.vectors[:, k - 1]
        v = v if v.sum() >= 0 else -v  # fix the arbitrary sign
        files.extend(export_eigenfunction(mesh, v, out, B=pen.B))
    return res, mesh, files
