"""Generalised symmetric eigensolvers for the pencil (A, B).

The dense path reduces to C = L^-1 A L^-T with B = L L^T, diagonalises C by
cyclic Jacobi rotations and certifies the result a posteriori.  The sparse
path minimises the Rayleigh quotient by gradient descent with deflation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class BoundNotAchievedError(RuntimeError):
    pass


class DescentStalledError(RuntimeError):
    pass


@dataclass
class EigenApprox:
    """Approximate eigenpairs of a pencil, sorted ascending.

    ``vectors`` holds pencil eigenvectors as columns (B-orthonormal up to
    rounding).  ``residual_bounds`` is empty when no certificate exists.
    """

    values: np.ndarray
    vectors: np.ndarray
    residual_bounds: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sweeps: int = 0
    method: str = "jacobi"
    certified: bool = False
    iterations: list = field(default_factory=list)


# ---------------------------------------------------------------- Jacobi


@numba.njit(cache=True)
def _sweep(C, V):
    """One cyclic-by-rows sweep of Jacobi rotations on symmetric C (in place).

    Returns the number of rotations applied.
    """
    n = C.shape[0]
    count = 0
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = C[p, q]
            if apq == 0.0:
                continue
            app = C[p, p]
            aqq = C[q, q]
            theta = (aqq - app) / (2.0 * apq)
            t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
            if theta < 0.0:
                t = -t
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            for k in range(n):
                if k == p or k == q:
                    continue
                ckp = C[p, k]
                ckq = C[q, k]
                C[p, k] = c * ckp - s * ckq
                C[q, k] = s * ckp + c * ckq
                C[k, p] = C[p, k]
                C[k, q] = C[q, k]
            C[p, p] = app - t * apq
            C[q, q] = aqq + t * apq
            C[p, q] = 0.0
            C[q, p] = 0.0
            for k in range(n):
                vkp = V[k, p]
                vkq = V[k, q]
                V[k, p] = c * vkp - s * vkq
                V[k, q] = s * vkp + c * vkq
            count += 1
    return count


def off_norm(C: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part."""
    return float(np.sqrt(max(0.0, np.sum(C * C) - np.sum(np.diag(C) ** 2))))


def cholesky_reduce(A, B) -> tuple[np.ndarray, np.ndarray]:
    """Return (C, L) with B = L L^T and C = L^-1 A L^-T (symmetrised)."""
    A = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
    B = B.toarray() if sp.issparse(B) else np.asarray(B, dtype=float)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError("A and B must be square and of equal size")
    try:
        L = np.linalg.cholesky(B)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("B not positive definite") from exc
    Y = sla.solve_triangular(L, A, lower=True)
    C = sla.solve_triangular(L, Y.T, lower=True)
    return 0.5 * (C + C.T), L


@dataclass
class JacobiState:
    C: np.ndarray  # the reduced matrix being diagonalised (unchanged)
    L: np.ndarray
    work: np.ndarray  # rotated copy of C
    X: np.ndarray  # accumulated rotations
    sweeps: int = 0
    off_history: list = field(default_factory=list)

    def sweep(self) -> float:
        _sweep(self.work, self.X)
        self.sweeps += 1
        off = off_norm(self.work)
        self.off_history.append(off)
        return off

    def current(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted diagonal and matching rotation columns."""
        d = np.diag(self.work).copy()
        order = np.argsort(d, kind="stable")
        return d[order], self.X[:, order]


def jacobi_start(A, B, prerotate: bool = False) -> JacobiState:
    C, L = cholesky_reduce(A, B)
    if prerotate:
        _, X = np.linalg.eigh(C)
        work = X.T @ C @ X
        work = 0.5 * (work + work.T)
    else:
        X = np.eye(len(C))
        work = C.copy()
    return JacobiState(C, L, np.ascontiguousarray(work), np.ascontiguousarray(X))


def jacobi_pencil(A, B, sweep_budget: int = 50, tol: float = 1e-14, prerotate: bool = False):
    """Cyclic Jacobi on the Cholesky-reduced pencil.

    Sweeps until the off-diagonal Frobenius norm drops below ``tol * ||C||_F``
    or ``sweep_budget`` sweeps were done.  Returns ``(D, P, state)`` where
    ``D`` holds the sorted eigenvalue estimates and ``P = L^-T X`` the
    approximate pencil eigenvectors (P^T B P ~ I).
    """
    if sweep_budget < 1:
        raise ValueError("sweep_budget must be >= 1")
    state = jacobi_start(A, B, prerotate)
    target = tol * np.linalg.norm(state.C)
    for _ in range(sweep_budget):
        if state.sweep() <= target:
            break
    D, X = state.current()
    P = sla.solve_triangular(state.L.T, X, lower=False)
    return D, P, state


def oishi_bound(C, D, X) -> np.ndarray:
    """Bounds |d_k| ||X^T X - I||_F + ||X diag(d) X^T - C||_F for each k.

    ``X`` holds approximate eigenvectors of the symmetric matrix ``C`` as
    columns and ``D`` the matching (sorted) approximate eigenvalues.
    """
    C = np.asarray(C, dtype=float)
    D = np.asarray(D, dtype=float).ravel()
    X = np.asarray(X, dtype=float)
    ortho = np.linalg.norm(X.T @ X - np.eye(X.shape[1]))
    resid = np.linalg.norm((X * D) @ X.T - C)
    return np.abs(D) * ortho + resid


def pencil_oishi_bound(A, B, D, P) -> np.ndarray:
    """The same bound for pencil eigenvectors ``P`` (P^T B P ~ I).

    With B = L L^T the columns of X = L^T P approximate eigenvectors of
    C = L^-1 A L^-T, where the bound is evaluated.
    """
    C, L = cholesky_reduce(A, B)
    return oishi_bound(C, D, L.T @ np.asarray(P, dtype=float))


def gamma_mat(
    A,
    B,
    eps: float,
    max_sweeps: int = 200,
    method: str = "auto",
    jacobi_cap: int = 400,
    count: int | None = None,
    patience: int = 3,
) -> EigenApprox:
    """Pencil eigenvalues with certified error bounds at most ``eps``.

    The tolerance applies to the lowest ``count`` eigenvalues (all of them by
    default).  Sweeps are added one at a time and the first iterate whose
    bounds satisfy the tolerance is returned; the search gives up once
    ``patience`` consecutive sweeps fail to halve the worst bound, since the
    bound has then reached its rounding floor.  ``method="lapack"`` (chosen
    automatically above ``jacobi_cap`` unknowns) uses a LAPACK
    eigendecomposition, already at that floor, and is certified the same way.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if method not in ("auto", "jacobi", "lapack"):
        raise ValueError(f"unknown method {method!r}")
    state = jacobi_start(A, B, prerotate=False)
    n = len(state.C)
    count = n if count is None else count
    if not 1 <= count <= n:
        raise ValueError(f"need 1 <= count <= {n}")
    if method == "lapack" or (method == "auto" and n > jacobi_cap):
        w, X = np.linalg.eigh(state.C)
        bounds = oishi_bound(state.C, w, X)
        worst = float(np.max(bounds[:count]))
        if worst <= eps:
            P = sla.solve_triangular(state.L.T, X, lower=False)
            return EigenApprox(w, P, bounds, 0, "lapack", True)
        raise BoundNotAchievedError(f"bound not achieved by the LAPACK decomposition ({worst:.3e} > {eps:.3e})")
    best, stale = math.inf, 0
    for _ in range(max_sweeps):
        state.sweep()
        D, X = state.current()
        bounds = oishi_bound(state.C, D, X)
        worst = float(np.max(bounds[:count]))
        if worst <= eps:
            P = sla.solve_triangular(state.L.T, X, lower=False)
            return EigenApprox(D, P, bounds, state.sweeps, "jacobi", True)
        if worst < 0.5 * best:
            best, stale = worst, 0
        else:
            best, stale = min(best, worst), stale + 1
            if stale >= patience:
                break
    raise BoundNotAchievedError(
        f"bound not achieved after {state.sweeps} sweeps (best {best:.3e} > {eps:.3e})"
    )


# ------------------------------------------------------- gradient descent


def lu_preconditioner(A) -> Callable[[np.ndarray], np.ndarray]:
    """Apply A^-1 through a sparse LU factorisation."""
    lu = spla.splu(sp.csc_matrix(A))
    return lu.solve


def _start_vector(n: int, index: int, seed: int | None) -> np.ndarray:
    if seed is not None:
        return np.random.default_rng([seed, index]).standard_normal(n)
    if index == 0:
        return np.ones(n)
    # a fixed pseudo-random start avoids symmetric subspaces invisible to all-ones
    return np.random.default_rng([0x5EED, index]).standard_normal(n)


def rayleigh_descent(
    A,
    B,
    k: int = 1,
    grad_tol: float = 1e-10,
    max_iter: int = 200_000,
    x0=None,
    preconditioner: Callable[[np.ndarray], np.ndarray] | None = None,
    seed: int | None = None,
    history: list | None = None,
) -> EigenApprox:
    """Lowest ``k`` eigenpairs by steepest descent on the Rayleigh quotient.

    Each step minimises R(v) = v^T A v / v^T B v exactly over the line through
    v along the (optionally preconditioned) gradient direction, keeping v
    B-orthogonal to the pairs already found.  Iteration stops once
    ||A v - R(v) B v||_2 / (v^T B v) < grad_tol.  Vectors are returned with
    v^T B v = 1.  ``x0`` optionally supplies start vectors (columns).  When
    ``history`` is a list, the Rayleigh quotients of every iterate are
    appended to it, one list per eigenpair.
    """
    A = sp.csr_matrix(A) if sp.issparse(A) else np.atleast_2d(np.asarray(A, float))
    B = sp.csr_matrix(B) if sp.issparse(B) else np.atleast_2d(np.asarray(B, float))
    n = A.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= dof={n}")
    if x0 is not None:
        x0 = np.asarray(x0, float).reshape(n, -1)
    V = np.zeros((n, 0))
    BV = np.zeros((n, 0))
    values, iters = [], []
    for i in range(k):
        v = x0[:, i].copy() if x0 is not None and i < x0.shape[1] else _start_vector(n, i, seed)
        trace = None if history is None else []
        v, R, it = _descend(A, B, v, V, BV, grad_tol, max_iter, preconditioner, trace)
        if history is not None:
            history.append(trace)
        V = np.column_stack([V, v])
        BV = np.column_stack([BV, B @ v])
        values.append(R)
        iters.append(it)
    values = np.array(values)
    order = np.argsort(values, kind="stable")
    return EigenApprox(values[order], V[:, order], np.zeros(0), 0, "rayleigh_descent", False, [iters[j] for j in order])


def _project(x, V, BV):
    if V.shape[1]:
        x = x - V @ (BV.T @ x)
    return x


def _descend(A, B, v, V, BV, grad_tol, max_iter, precond, trace=None):
    v = _project(v, V, BV)
    Bv = B @ v
    nrm = float(v @ Bv)
    if not nrm > 0:
        raise DescentStalledError("start vector vanishes after deflation")
    v = v / np.sqrt(nrm)
    Bv = Bv / np.sqrt(nrm)
    Av = A @ v
    R = float(v @ Av)
    for it in range(max_iter + 1):
        if trace is not None:
            trace.append(R)
        r = Av - R * Bv
        if np.linalg.norm(r) < grad_tol:
            return v, R, it
        if it == max_iter:
            break
        g = precond(r) if precond is not None else r
        g = _project(g, V, BV)
        # B-orthogonalise the direction against v (twice for stability)
        for _ in range(2):
            g = g - float(Bv @ g) * v
        gn = float(g @ (B @ g))
        if not gn > 0:
            log.warning("descent direction vanished at residual %.3e", np.linalg.norm(r))
            return v, R, it
        g = g / np.sqrt(gn)
        Ag = A @ g
        a11, a12, a22 = R, float(v @ Ag), float(g @ Ag)
        # lowest eigenvector (alpha, beta) of the projected 2x2 problem (the
        # B-Gram matrix is the identity).  beta comes from a12 directly: comparing Rayleigh
        # quotients would lose the step to rounding long before the residual
        # reaches the tolerance.
        half = 0.5 * (a22 - a11)
        root = np.hypot(half, a12)
        if a12 == 0.0 or not np.isfinite(root):
            log.warning("descent stopped at residual %.3e above tolerance", np.linalg.norm(r))
            return v, R, it
        if half > 0:
            alpha, beta = 1.0, -a12 / (root + half)
        else:
            alpha, beta = a12, half - root
        v = _project(alpha * v + beta * g, V, BV)
        # fresh products: recurrences drift and would fake the stopping test
        Bv = B @ v
        nrm = float(v @ Bv)
        v, Bv = v / np.sqrt(nrm), Bv / np.sqrt(nrm)
        Av = A @ v
        R = float(v @ Av)
    raise DescentStalledError(f"descent stalled after {max_iter} iterations")
