"""Sparse finite-difference solver for ``L u - lam u = f`` on the truncated box."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import EllipticOperator
from .grid import BoxGrid, GridFunction, gradient, hessian, lp_norm

__all__ = [
    "SparseSystem",
    "SolveResult",
    "NonConvergenceError",
    "assemble",
    "solve",
    "solve_problem",
    "apriori_ratio",
    "stencil_matrices",
]

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    """Iterative solve stopped before reaching the requested residual."""

    def __init__(self, message, residual, iterations):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def _d1_1d(n: int, h: float, periodic: bool) -> sp.csr_matrix:
    D = sp.lil_matrix((n, n))
    for i in range(n):
        if periodic:
            D[i, (i + 1) % n] += 1 / (2 * h)
            D[i, (i - 1) % n] -= 1 / (2 * h)
        elif i == 0:
            D[0, 0:3] = np.array([-3, 4, -1]) / (2 * h)
        elif i == n - 1:
            D[i, n - 3:n] = np.array([1, -4, 3]) / (2 * h)
        else:
            D[i, i + 1] = 1 / (2 * h)
            D[i, i - 1] = -1 / (2 * h)
    return D.tocsr()


def _d2_1d(n: int, h: float, periodic: bool) -> sp.csr_matrix:
    D = sp.lil_matrix((n, n))
    for i in range(n):
        if periodic:
            D[i, (i + 1) % n] += 1 / h**2
            D[i, (i - 1) % n] += 1 / h**2
            D[i, i] += -2 / h**2
        elif i == 0:
            D[0, 0:4] = np.array([2, -5, 4, -1]) / h**2
        elif i == n - 1:
            D[i, n - 4:n] = np.array([-1, 4, -5, 2]) / h**2
        else:
            D[i, i - 1:i + 2] = np.array([1, -2, 1]) / h**2
    return D.tocsr()


def _embed(D: sp.spmatrix, axis: int, sizes) -> sp.csr_matrix:
    out = sp.identity(1, format="csr")
    for i, n in enumerate(sizes):
        out = sp.kron(out, D if i == axis else sp.identity(n, format="csr"), format="csr")
    return out


def stencil_matrices(grid: BoxGrid):
    """Sparse first and second difference matrices acting on C-ordered flat data."""
    d1 = [_embed(_d1_1d(n, h, per), i, grid.sizes)
          for i, (n, h, per) in enumerate(zip(grid.sizes, grid.spacing, grid.periodic))]
    d2 = [_embed(_d2_1d(n, h, per), i, grid.sizes)
          for i, (n, h, per) in enumerate(zip(grid.sizes, grid.spacing, grid.periodic))]
    return d1, d2


def _boundary_mask(grid: BoxGrid) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    for i, per in enumerate(grid.periodic):
        if not per:
            idx = [slice(None)] * grid.dim
            idx[i] = [0, grid.sizes[i] - 1]
            mask[tuple(idx)] = True
    return mask.ravel()


@dataclass
class SparseSystem:
    """Assembled ``L - lam`` with homogeneous Dirichlet rows on non-periodic faces.

    ``stencil`` is the raw operator (identical to :func:`apply` on every
    row); ``matrix`` replaces the Dirichlet rows by identity rows.
    """

    grid: BoxGrid
    lam: float
    stencil: sp.csr_matrix
    matrix: sp.csr_matrix
    boundary: np.ndarray
    rhs: Optional[np.ndarray] = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def with_rhs(self, f: GridFunction) -> "SparseSystem":
        if f.grid != self.grid:
            raise ValueError("right-hand side lives on a different grid")
        rhs = np.array(f.values, dtype=complex).ravel()
        rhs[self.boundary] = 0.0
        return SparseSystem(self.grid, self.lam, self.stencil, self.matrix, self.boundary, rhs)


def assemble(op: EllipticOperator, grid: BoxGrid, lam: float = 0.0,
             f: GridFunction | None = None) -> SparseSystem:
    if grid.dim != op.dim:
        raise ValueError(f"operator is {op.dim}-d but the grid is {grid.dim}-d")
    x = grid.coords()
    d = grid.dim
    A = op.a_at(x).reshape(d, d, -1)
    d1, d2 = stencil_matrices(grid)
    N = int(np.prod(grid.shape))
    L = sp.csr_matrix((N, N), dtype=complex)
    for j in range(d):
        L = L + sp.diags(A[j, j]) @ d2[j]
        for k in range(j + 1, d):
            L = L + sp.diags(A[j, k] + A[k, j]) @ (d1[j] @ d1[k])
    if op.b is not None:
        B = op.b_at(x).reshape(d, -1)
        for j in range(d):
            L = L + sp.diags(B[j]) @ d1[j]
    diag = -lam * np.ones(N)
    if op.c is not None:
        diag = diag + op.c_at(x).ravel()
    L = (L + sp.diags(diag)).tocsr()
    L.sum_duplicates()
    L.eliminate_zeros()
    boundary = _boundary_mask(grid)
    keep = sp.diags((~boundary).astype(float))
    M = (keep @ L + sp.diags(boundary.astype(float))).tocsr()
    M.eliminate_zeros()
    system = SparseSystem(grid, lam, L, M, boundary)
    return system.with_rhs(f) if f is not None else system


@dataclass
class SolveResult:
    u: GridFunction
    residual: float
    iterations: int


def solve(system: SparseSystem, tol: float = 1e-10, maxiter: int | None = None,
          restart: int = 60) -> SolveResult:
    """Restarted GMRES with a Jacobi (diagonal) preconditioner.

    Restarts until the true relative residual ``|A u - f| / |f|`` reaches
    ``tol``; raises :class:`NonConvergenceError` after ``maxiter`` inner
    iterations (default ``10 * dimension``).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if system.rhs is None:
        raise ValueError("system has no right-hand side")
    A, rhs = system.matrix, system.rhs
    n = system.dimension
    maxiter = 10 * n if maxiter is None else maxiter
    norm_f = np.linalg.norm(rhs)
    if norm_f == 0.0:
        return SolveResult(GridFunction(system.grid, np.zeros(system.grid.shape, complex)), 0.0, 0)
    dinv = 1.0 / A.diagonal()
    M = spla.LinearOperator(A.shape, matvec=lambda v: dinv * v, dtype=complex)
    x = np.zeros(n, dtype=complex)
    count = [0]

    def cb(_):
        count[0] += 1

    best = np.inf
    while True:
        x, _info = spla.gmres(A, rhs, x0=x, rtol=0.1 * tol, atol=0.0, restart=restart,
                              maxiter=max(1, (maxiter - count[0]) // restart + 1), M=M,
                              callback=cb, callback_type="pr_norm")
        res = float(np.linalg.norm(A @ x - rhs) / norm_f)
        if res <= tol:
            break
        if count[0] >= maxiter or res >= best:
            raise NonConvergenceError(f"GMRES stalled at relative residual {res:.3e}", res, count[0])
        best = res
    log.debug("gmres: %d iterations, residual %.3e", count[0], res)
    return SolveResult(GridFunction(system.grid, x.reshape(system.grid.shape)), res, count[0])


def solve_problem(op: EllipticOperator, f: GridFunction, lam: float, tol: float = 1e-10,
                  maxiter: int | None = None) -> SolveResult:
    """Assemble and solve ``L u - lam u = f`` with zero values on the x^1 ends."""
    return solve(assemble(op, f.grid, lam, f), tol=tol, maxiter=maxiter)


def apriori_ratio(u: GridFunction, f: GridFunction, lam: float, p: float = 2.0, region=None) -> float:
    """``(lam |u|_p + sqrt(lam) |u_x|_p + |u_xx|_p) / |f|_p`` with grid derivatives."""
    nf = lp_norm(f, p, region)
    if nf == 0.0:
        raise ValueError("|f|_p vanishes; the ratio is undefined")
    num = (lam * lp_norm(u, p, region) + np.sqrt(lam) * lp_norm(gradient(u), p, region)
           + lp_norm(hessian(u), p, region))
    return float(num / nf)
