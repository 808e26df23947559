"""Fourier-in-x' / ODE-in-x^1 solver for coefficients that depend on x^1 only.

After a Fourier transform in x' the equation ``L u - lam u = f`` (with
``b = c = 0``) becomes, for every frequency ``xi``,

    a(x1) u'' + 2i b(x1, xi) u' - c(x1, xi) u = f~,

with ``a = a^{11}``, ``b = sum_j a^{1j} xi_j`` and
``c = sum_{j,k} a^{jk} xi_j xi_k + lam`` (j, k >= 2).  Dividing by ``a`` gives
the normalized form solved here on a truncated x^1 interval with zero values
at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg as sla
from scipy.integrate import cumulative_trapezoid

from .coefficients import EllipticOperator, apply
from .grid import BoxGrid, GridFunction, _d1, _d2, forward_modes, frequencies, inverse_modes, lp_norm

__all__ = [
    "ModeProblem",
    "ModeSolution",
    "CoercivityReport",
    "SingularSystemError",
    "x1_profile",
    "mode_symbols",
    "assemble_mode",
    "check_coercivity",
    "solve_mode",
    "energy_check",
    "integrating_factor",
    "solve_whole_space_x1",
    "WholeSpaceModes",
]

Symbols = Literal["exact", "discrete"]


class SingularSystemError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class ModeProblem:
    """Per-frequency ODE data on the x^1 nodes.

    ``xi`` is the effective frequency entering the coercivity bounds: the
    true frequency for exact symbols, the modified wavenumber
    ``2 sin(xi h / 2) / h`` of the x' stencil for discrete ones.
    """

    x1: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    rhs: np.ndarray
    xi: np.ndarray
    lam: float

    @property
    def h(self) -> float:
        return float(self.x1[1] - self.x1[0])

    @property
    def bhat(self) -> np.ndarray:
        return self.b / self.a

    @property
    def chat(self) -> np.ndarray:
        return self.c / self.a

    @property
    def g(self) -> np.ndarray:
        return self.rhs / self.a

    @property
    def xi2(self) -> float:
        return float(np.sum(np.asarray(self.xi) ** 2))


@dataclass
class ModeSolution:
    u_tilde: np.ndarray
    residual: float
    energy_constants: tuple[float, float] | None = None


def x1_profile(op: EllipticOperator, grid: BoxGrid, samples: int = 5, tol: float = 1e-12) -> np.ndarray:
    """``a`` along the x^1 nodes, shape ``(n1, d, d)``, after checking that
    it does not vary in x' on a few sampled x' positions."""
    if op.has_lower_order:
        raise ValueError("the spectral path needs b = c = 0")
    x1 = grid.axis(0)
    rng = np.random.default_rng(1234)
    ref = None
    for s in range(samples):
        xp = np.array([rng.uniform(*grid.extents[i]) for i in range(1, grid.dim)]) if s else \
            np.array([grid.axis(i)[0] for i in range(1, grid.dim)])
        pts = np.vstack([x1[None, :], np.repeat(xp[:, None], x1.size, axis=1)])
        A = np.moveaxis(op.a_at(pts), -1, 0)
        if ref is None:
            ref = A
        elif np.abs(A - ref).max() > tol * max(1.0, np.abs(ref).max()):
            raise ValueError("coefficients depend on x'; the spectral path needs x^1-only a")
    return np.array(ref)


def mode_symbols(xi, spacing=None, symbols: Symbols = "exact"):
    """Return ``(s, sigma)``: symbols of the x' first and second differences.

    ``s_j`` multiplies ``i`` for a first derivative, ``sigma_j^2`` is minus
    the second-derivative symbol.  For exact symbols both equal ``xi``.
    """
    xi = np.asarray(xi, dtype=float)
    if symbols == "exact":
        return xi, xi
    if symbols != "discrete":
        raise ValueError(f"unknown symbols {symbols!r}")
    h = np.asarray(spacing, dtype=float).reshape((-1,) + (1,) * (xi.ndim - 1))
    return np.sin(xi * h) / h, 2 * np.sin(xi * h / 2) / h


def _abc(A: np.ndarray, s: np.ndarray, sigma: np.ndarray, lam: float):
    """Batched fields; ``A`` is ``(n1, d, d)``, ``s``/``sigma`` are ``(d-1, m)``."""
    Ap = A[:, 1:, 1:]
    a = A[:, 0, 0][None, :]
    b = np.einsum("xj,jm->mx", A[:, 0, 1:], s)
    off = np.einsum("xjk,jm,km->mx", Ap, s, s) - np.einsum("xjj,jm->mx", Ap, s * s)
    c = off + np.einsum("xjj,jm->mx", Ap, sigma * sigma) + lam
    return np.broadcast_to(a, b.shape), b, c


def assemble_mode(op: EllipticOperator, grid: BoxGrid, xi, lam: float, f_slice,
                  symbols: Symbols = "exact") -> ModeProblem:
    """Populate the mode ODE for one frequency ``xi`` (length ``d - 1``)."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    A = x1_profile(op, grid)
    xi = np.asarray(xi, dtype=float).reshape(grid.dim - 1)
    s, sigma = mode_symbols(xi[:, None], grid.spacing[1:], symbols)
    a, b, c = _abc(A, s, sigma, lam)
    rhs = np.asarray(f_slice, dtype=complex)
    if rhs.shape != (grid.sizes[0],):
        raise ValueError("f_slice must be sampled on the x^1 nodes")
    return ModeProblem(grid.axis(0), a[0].copy(), b[0].copy(), c[0].copy(), rhs, sigma[:, 0].copy(), float(lam))


@dataclass
class CoercivityReport:
    a_margin: float
    b_margin: float
    c_margin: float
    det_margin: float
    passed: bool


def check_coercivity(mp: ModeProblem, delta: float, rtol: float = 1e-12) -> CoercivityReport:
    """Worst slack of the four bounds

    ``delta <= a <= 1/delta``, ``|b| <= |xi|/delta``,
    ``delta |xi|^2 + lam <= c <= (|xi|^2 + lam)/delta`` and
    ``a c - b^2 >= delta^2 (|xi|^2 + lam)`` over all x^1 nodes.  Margins are
    scaled by the size of the compared terms.
    """
    x2, lam = mp.xi2, mp.lam
    a, b, c = mp.a, mp.b, mp.c
    am = min(np.min(a - delta), np.min(1 / delta - a)) / (1 / delta)
    bs = np.sqrt(x2) / delta
    bm = np.min(bs - np.abs(b)) / max(bs, 1.0)
    cs = (x2 + lam) / delta
    cm = min(np.min(c - delta * x2 - lam), np.min(cs - c)) / max(cs, 1.0)
    ds = a * c
    dm = np.min((a * c - b * b - delta**2 * (x2 + lam)) / np.maximum(ds, 1.0))
    passed = min(am, bm, cm, dm) >= -rtol
    return CoercivityReport(float(am), float(bm), float(cm), float(dm), bool(passed))


def _tridiag(lower, diag, upper, rhs):
    """Batched Thomas elimination along the last axis, with a banded
    partial-pivoting LU fallback for rows that hit a tiny pivot."""
    m, n = diag.shape
    cp = np.zeros((m, n), dtype=complex)
    dp = np.zeros((m, n), dtype=complex)
    bad = np.zeros(m, dtype=bool)
    scale = np.abs(diag) + np.abs(lower) + np.abs(upper)
    piv = diag[:, 0]
    bad |= np.abs(piv) <= 1e-13 * scale[:, 0]
    piv = np.where(bad, 1.0, piv)
    cp[:, 0] = upper[:, 0] / piv
    dp[:, 0] = rhs[:, 0] / piv
    for i in range(1, n):
        piv = diag[:, i] - lower[:, i] * cp[:, i - 1]
        tiny = np.abs(piv) <= 1e-13 * scale[:, i]
        bad |= tiny
        piv = np.where(tiny, 1.0, piv)
        cp[:, i] = upper[:, i] / piv
        dp[:, i] = (rhs[:, i] - lower[:, i] * dp[:, i - 1]) / piv
    x = np.zeros((m, n), dtype=complex)
    x[:, -1] = dp[:, -1]
    for i in range(n - 2, -1, -1):
        x[:, i] = dp[:, i] - cp[:, i] * x[:, i + 1]
    for r in np.nonzero(bad)[0]:
        ab = np.zeros((3, n), dtype=complex)
        ab[0, 1:] = upper[r, :-1]
        ab[1] = diag[r]
        ab[2, :-1] = lower[r, 1:]
        try:
            x[r] = sla.solve_banded((1, 1), ab, rhs[r])
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularSystemError(
                "mode system is singular (|xi| = lam = 0 has no decaying solution)") from exc
        if not np.all(np.isfinite(x[r])):
            raise SingularSystemError("mode system is singular")
    return x


def _solve_batch(bhat, chat, g, h):
    """Solve ``u'' + 2i bhat u' - chat u = g`` for every row; zero end values."""
    lower = 1 / h**2 - 1j * bhat[:, 1:-1] / h
    diag = -2 / h**2 - chat[:, 1:-1] + 0j
    upper = 1 / h**2 + 1j * bhat[:, 1:-1] / h
    inner = _tridiag(lower, diag, upper, g[:, 1:-1].astype(complex))
    u = np.zeros(g.shape, dtype=complex)
    u[:, 1:-1] = inner
    return u


def _residual(u, bhat, chat, g, h) -> np.ndarray:
    r = (u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]) / h**2 \
        + 2j * bhat[:, 1:-1] * (u[:, 2:] - u[:, :-2]) / (2 * h) - chat[:, 1:-1] * u[:, 1:-1] - g[:, 1:-1]
    return np.abs(r).max(axis=1)


def solve_mode(mp: ModeProblem) -> ModeSolution:
    """Central differences in x^1, zero values at both truncation ends,
    tridiagonal elimination.  The recorded residual is the sup norm of the
    discrete normalized equation over interior nodes."""
    bhat, chat, g = mp.bhat[None], mp.chat[None], mp.g[None]
    u = _solve_batch(bhat, chat, g, mp.h)
    res = float(_residual(u, bhat, chat, g, mp.h)[0])
    return ModeSolution(u[0], res)


def _x1_grid(mp: ModeProblem) -> BoxGrid:
    return BoxGrid(((float(mp.x1[0]), float(mp.x1[-1])),), (mp.x1.size,), (False,))


def energy_check(sol: ModeSolution, mp: ModeProblem, tol: float = 1e-6) -> tuple[float, float]:
    """Empirical constants of the two energy bounds for one mode:

    ``N1 = [(|xi|^2+lam) int|u'|^2 + (|xi|^4+lam|xi|^2+lam^2) int|u|^2] / int|f~|^2``
    and ``N2 = int|u''|^2 / int|f~|^2``.
    """
    scale = max(1.0, float(np.abs(mp.g).max()))
    if sol.residual > tol * scale:
        raise ValueError(f"mode residual {sol.residual:.3e} too large for an energy check")
    grid = _x1_grid(mp)
    ff = lp_norm(GridFunction(grid, mp.rhs), 2) ** 2
    uu = lp_norm(GridFunction(grid, sol.u_tilde), 2) ** 2
    if ff == 0.0:
        if uu == 0.0:
            sol.energy_constants = (0.0, 0.0)
            return sol.energy_constants
        raise ValueError("zero forcing with a nonzero solution")
    h = mp.h
    du = lp_norm(GridFunction(grid, _d1(sol.u_tilde, 0, h, False)), 2) ** 2
    ddu = lp_norm(GridFunction(grid, _d2(sol.u_tilde, 0, h, False)), 2) ** 2
    x2, lam = mp.xi2, mp.lam
    n1 = ((x2 + lam) * du + (x2**2 + lam * x2 + lam**2) * uu) / ff
    n2 = ddu / ff
    sol.energy_constants = (float(n1), float(n2))
    return sol.energy_constants


def integrating_factor(mp: ModeProblem, sol: ModeSolution):
    """``phi`` with ``phi(0) = 0`` and ``phi' = bhat`` (cumulative trapezoid),
    and ``rho = u~ exp(i phi)``.  Returns ``(phi, rho)``; raises if ``|rho|``
    and ``|u~|`` differ by more than rounding."""
    x = mp.x1
    Phi = cumulative_trapezoid(mp.bhat, x, initial=0.0)
    phi = Phi - np.interp(0.0, x, Phi)
    rho = sol.u_tilde * np.exp(1j * phi)
    if not np.allclose(np.abs(rho), np.abs(sol.u_tilde), rtol=1e-12, atol=1e-300):
        raise ArithmeticError("integrating factor is not unimodular")
    return phi, rho


@dataclass
class WholeSpaceModes:
    u: GridFunction
    residual: float
    mode_residuals: np.ndarray
    xi: np.ndarray
    energy: np.ndarray | None = None


def solve_whole_space_x1(op: EllipticOperator, f: GridFunction, lam: float,
                         symbols: Symbols = "discrete", energy: bool = False) -> WholeSpaceModes:
    """Solve ``L u - lam u = f`` for x^1-only ``a`` mode by mode.

    ``symbols="discrete"`` uses the x' symbols of the finite-difference
    stencils, which makes the result coincide with the sparse solver on the
    same grid; ``"exact"`` uses ``xi`` itself (spectral accuracy in x').
    """
    grid = f.grid
    if not lam > 0:
        raise ValueError("whole-space solves need lam > 0")
    if grid.periodic[0] or not all(grid.periodic[1:]):
        raise ValueError("expected a non-periodic x^1 axis and periodic x' axes")
    A = x1_profile(op, grid)
    xp_axes = tuple(range(1, grid.dim))
    fh = forward_modes(f, xp_axes).values
    n1 = grid.sizes[0]
    rhs = np.moveaxis(fh, 0, -1).reshape(-1, n1)
    freq = np.meshgrid(*[frequencies(grid, i) for i in xp_axes], indexing="ij")
    xi = np.stack([q.ravel() for q in freq])
    s, sigma = mode_symbols(xi, grid.spacing[1:], symbols)
    a, b, c = _abc(A, s, sigma, lam)
    bhat, chat, g = b / a, c / a, rhs / a
    h = grid.spacing[0]
    ut = _solve_batch(bhat, chat, g, h)
    mres = _residual(ut, bhat, chat, g, h)
    u_hat = np.moveaxis(ut.reshape(fh.shape[1:] + (n1,)), -1, 0)
    u = inverse_modes(GridFunction(grid, u_hat), xp_axes)
    r = apply(op, u, lam).values - f.values
    nf = lp_norm(f, 2)
    res = float(np.linalg.norm(r[1:-1]) / max(np.linalg.norm(f.values[1:-1]), 1e-300)) if nf else 0.0
    out = WholeSpaceModes(u, res, mres, sigma)
    if energy:
        consts = []
        for m in range(ut.shape[0]):
            mp = ModeProblem(grid.axis(0), a[m], b[m], c[m], rhs[m], sigma[:, m], float(lam))
            consts.append(energy_check(ModeSolution(ut[m], float(mres[m])), mp))
        out.energy = np.array(consts)
    return out
