"""Boundary-value problems on ``x^1 > 0`` solved through whole-space extensions.

The half box is ``[0, L] x (periodic x')`` with ``m`` nodes along x^1; its
whole-space companion is ``[-L, L]`` with ``2m - 1`` nodes so that the wall
``x^1 = 0`` is a node row and reflection maps nodes to nodes.

* Dirichlet: coefficients extended by :func:`extend_odd_even`, ``f`` oddly.
* Neumann: same coefficients, ``f`` evenly.
* Oblique ``l^j u_{x^j} = g``: shear reflection ``phi``, a trace lift ``v``
  with ``v = 0``, ``v_{x^1} = g`` on the wall, and ``u = w + 2 v``.
* Robin ``l^j u_{x^j} + sigma u = g``: ``u = h v`` turns it into an oblique
  problem for ``v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .coefficients import EllipticOperator, apply, extend_odd_even, oblique_transform
from .diagnostics import boundary_grid, slobodeckij_seminorm
from .grid import BoxGrid, GridFunction, frequencies, gradient, hessian, lp_norm
from .wholespace import solve_problem

__all__ = [
    "Dirichlet",
    "Neumann",
    "Oblique",
    "Robin",
    "HalfSpaceProblem",
    "HalfSpaceSolution",
    "TraceLift",
    "half_box",
    "full_box",
    "extend_data",
    "restrict",
    "shift_xprime",
    "smooth_step",
    "cutoff",
    "solve_dirichlet",
    "solve_neumann",
    "lift_trace",
    "solve_oblique",
    "RobinReduction",
    "robin_reduce",
    "solve_robin",
    "solve",
    "wall_derivative",
    "oblique_estimate_ratio",
]


# ---------------------------------------------------------------------------
# boundary conditions


@dataclass(frozen=True)
class Dirichlet:
    pass


@dataclass(frozen=True)
class Neumann:
    pass


def _as_boundary(g, grid_b: BoxGrid) -> GridFunction:
    if isinstance(g, GridFunction):
        if g.grid != grid_b:
            raise ValueError("boundary data lives on a different grid")
        return g
    if callable(g):
        return grid_b.sample(g)
    vals = np.asarray(g, dtype=complex)
    if vals.ndim == 0:
        vals = np.full(grid_b.shape, complex(vals))
    return GridFunction(grid_b, vals)


@dataclass(frozen=True)
class Oblique:
    """``l^j u_{x^j} = g`` with ``l^1 > 0``; ``g`` is a function on the x' grid."""

    ell: tuple
    g: Optional[GridFunction] = None

    def __post_init__(self):
        ell = tuple(float(v) for v in self.ell)
        if not ell[0] > 0:
            raise ValueError("the x^1 component of ell must be positive")
        object.__setattr__(self, "ell", ell)


@dataclass(frozen=True)
class Robin:
    """``l^j u_{x^j} + sigma u = g`` with ``l^1 > 0``."""

    ell: tuple
    sigma: float
    g: Optional[GridFunction] = None

    def __post_init__(self):
        ell = tuple(float(v) for v in self.ell)
        if not ell[0] > 0:
            raise ValueError("the x^1 component of ell must be positive")
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "sigma", float(self.sigma))


BoundaryCondition = Union[Dirichlet, Neumann, Oblique, Robin]


@dataclass
class HalfSpaceProblem:
    """``L u - lam u = f`` on the half box with boundary condition ``bc``."""

    op: EllipticOperator
    f: GridFunction
    bc: BoundaryCondition
    lam: float

    def __post_init__(self):
        grid = self.f.grid
        if grid.periodic[0] or grid.extents[0][0] != 0.0:
            raise ValueError("the half box must be non-periodic in x^1 and start at x^1 = 0")
        if grid.dim != self.op.dim:
            raise ValueError("operator and grid dimensions differ")
        if isinstance(self.bc, (Oblique, Robin)):
            if len(self.bc.ell) != grid.dim:
                raise ValueError("ell must have one entry per dimension")
            gb = boundary_grid(grid)
            g = self.bc.g if self.bc.g is not None else gb.zeros()
            self.bc = replace(self.bc, g=_as_boundary(g, gb))

    @property
    def grid(self) -> BoxGrid:
        return self.f.grid


@dataclass
class HalfSpaceSolution:
    """Solution on the half box plus the whole-space field and diagnostics."""

    u: GridFunction
    whole: GridFunction
    residual: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# grids and data movement


def half_box(length: float, xprime_extents, m: int, xprime_sizes) -> BoxGrid:
    """``[0, length]`` with ``m`` nodes along x^1, periodic x'."""
    return BoxGrid.whole_space((0.0, length), xprime_extents, (m,) + tuple(xprime_sizes))


def full_box(half: BoxGrid) -> BoxGrid:
    """Whole-space companion ``[-L, L]`` with the wall as its middle node row."""
    L = half.extents[0][1]
    return BoxGrid(((-L, L),) + half.extents[1:], (2 * half.sizes[0] - 1,) + half.sizes[1:],
                   half.periodic)


def extend_data(f: GridFunction, parity: str) -> GridFunction:
    """Odd or even reflection of half-box data to the full box.

    The odd extension is 0 on the wall row; the even one copies it.
    """
    if parity not in ("odd", "even"):
        raise ValueError("parity must be 'odd' or 'even'")
    v = np.asarray(f.values)
    m = v.shape[0]
    out = np.empty((2 * m - 1,) + v.shape[1:], dtype=complex)
    out[m - 1:] = v
    out[:m - 1] = (-1 if parity == "odd" else 1) * v[:0:-1]
    if parity == "odd":
        out[m - 1] = 0.0
    return GridFunction(full_box(f.grid), out)


def restrict(w: GridFunction, half: BoxGrid) -> GridFunction:
    """Rows with ``x^1 >= 0`` of a full-box field."""
    m = half.sizes[0]
    return GridFunction(half, np.asarray(w.values)[m - 1:].copy())


def shift_xprime(values: np.ndarray, grid_b: BoxGrid, shifts: np.ndarray) -> np.ndarray:
    """Row-wise periodic translation ``row_i(x') -> row_i(x' + shifts[i])``.

    ``values`` has shape ``(m, *grid_b.shape)`` and ``shifts`` ``(m, d-1)``.
    Done spectrally; the Nyquist mode of an even-sized axis is moved with
    ``cos`` so that real rows stay real.
    """
    values = np.asarray(values, dtype=complex)
    shifts = np.asarray(shifts, dtype=float).reshape(values.shape[0], grid_b.dim)
    axes = tuple(range(1, grid_b.dim + 1))
    F = np.fft.fftn(values, axes=axes)
    for j in range(grid_b.dim):
        xi = frequencies(grid_b, j)
        phase = np.exp(1j * np.multiply.outer(shifts[:, j], xi))
        n = grid_b.sizes[j]
        if n % 2 == 0:
            phase[:, n // 2] = np.cos(shifts[:, j] * xi[n // 2])
        shape = [values.shape[0]] + [1] * grid_b.dim
        shape[j + 1] = n
        F = F * phase.reshape(shape)
    return np.fft.ifftn(F, axes=axes)


def wall_derivative(u: GridFunction) -> np.ndarray:
    """Second-order one-sided ``u_{x^1}`` on the wall row of a half-box field."""
    v = np.asarray(u.values)
    h = u.grid.spacing[0]
    return (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)


# ---------------------------------------------------------------------------
# smooth cutoffs


def _psi(s):
    s = np.asarray(s, dtype=float)
    pos = s > 0
    sp = np.where(pos, s, 1.0)
    e = np.where(pos, np.exp(-1.0 / sp), 0.0)
    return e, np.where(pos, e / sp**2, 0.0), np.where(pos, e * (1 / sp**4 - 2 / sp**3), 0.0)


def smooth_step(s):
    """C-infinity step rising from 0 (``s <= 0``) to 1 (``s >= 1``), with its
    first two derivatives."""
    P, P1, P2 = _psi(s)
    R, R1, R2 = _psi(1.0 - np.asarray(s, dtype=float))
    Q, Q1, Q2 = P + R, P1 - R1, P2 + R2
    val = P / Q
    d1 = (P1 * Q - P * Q1) / Q**2
    d2 = (P2 * Q - P * Q2) / Q**2 - 2 * Q1 * (P1 * Q - P * Q1) / Q**3
    return val, d1, d2


def cutoff(t):
    """Even smooth cutoff equal to 1 for ``|t| <= 1/2`` and 0 for ``|t| >= 1``,
    with its first two derivatives."""
    t = np.asarray(t, dtype=float)
    sgn = np.where(t < 0, -1.0, 1.0)
    s, s1, s2 = smooth_step(2 * np.abs(t) - 1)
    return 1 - s, -2 * s1 * sgn, -4 * s2


# ---------------------------------------------------------------------------
# Dirichlet and Neumann


def _symmetry_defect(w: GridFunction, parity: str) -> float:
    v = np.asarray(w.values)
    flip = v[::-1]
    wrong = 0.5 * (v + flip) if parity == "odd" else 0.5 * (v - flip)
    total = np.linalg.norm(v)
    return float(np.linalg.norm(wrong) / total) if total > 0 else 0.0


def _reflected(p: HalfSpaceProblem, parity: str, tol: float, maxiter) -> HalfSpaceSolution:
    op_hat = extend_odd_even(p.op)
    f_hat = extend_data(p.f, parity)
    res = solve_problem(op_hat, f_hat, p.lam, tol=tol, maxiter=maxiter)
    u = restrict(res.u, p.grid)
    diag = {"symmetry_defect": _symmetry_defect(res.u, parity)}
    if parity == "odd":
        diag["trace"] = float(np.max(np.abs(u.values[0])))
    else:
        diag["wall_derivative"] = float(np.max(np.abs(wall_derivative(u))))
    return HalfSpaceSolution(u, res.u, res.residual, res.iterations, diag)


def solve_dirichlet(p: HalfSpaceProblem, tol: float = 1e-10, maxiter=None) -> HalfSpaceSolution:
    """Zero trace: odd extension of ``f``.

    ``diagnostics`` holds ``trace`` (max of ``|u(0, .)|``) and
    ``symmetry_defect`` (relative norm of the even part of the whole-space
    solution).
    """
    if not isinstance(p.bc, Dirichlet):
        raise ValueError("problem does not carry a Dirichlet condition")
    return _reflected(p, "odd", tol, maxiter)


def solve_neumann(p: HalfSpaceProblem, tol: float = 1e-10, maxiter=None) -> HalfSpaceSolution:
    """Zero normal derivative: even extension of ``f``.

    ``diagnostics`` holds ``wall_derivative`` (one-sided, max norm) and
    ``symmetry_defect`` (relative norm of the odd part).
    """
    if not isinstance(p.bc, Neumann):
        raise ValueError("problem does not carry a Neumann condition")
    return _reflected(p, "even", tol, maxiter)


# ---------------------------------------------------------------------------
# trace lifting


@dataclass
class TraceLift:
    """``v = x^1 eta(sqrt(lam_bar) x^1) (S_{x^1} g)(x')`` on the half box.

    ``wall_slope`` is the exact ``v_{x^1}(0, .)`` from the closed form (equal
    to ``g``); :func:`wall_derivative` gives the one-sided grid version,
    accurate to ``O(h^2)``.  ``lhs`` is
    ``lam |v|_p + sqrt(lam) |v_x|_p + |v_xx|_p`` with grid derivatives.
    """

    v: GridFunction
    g: GridFunction
    lambda_bar: float
    wall_slope: np.ndarray
    lhs: float


def _gaussian_smoothing(g: GridFunction, t: np.ndarray) -> np.ndarray:
    """Rows ``S_{t_i} g`` with Fourier multiplier ``exp(-t^2 |xi|^2 / 2)``."""
    gb = g.grid
    xi2 = np.zeros(gb.shape)
    for j in range(gb.dim):
        shape = [1] * gb.dim
        shape[j] = gb.sizes[j]
        xi2 = xi2 + frequencies(gb, j).reshape(shape) ** 2
    G = np.fft.fftn(np.asarray(g.values))
    damp = np.exp(-0.5 * np.multiply.outer(t**2, xi2))
    return np.fft.ifftn(damp * G[None], axes=tuple(range(1, gb.dim + 1)))


def lift_trace(g, lam: float, p: float = 2.0, *, grid: BoxGrid) -> TraceLift:
    """Explicit lift of wall data ``g`` on the half box ``grid``."""
    if lam < 0:
        raise ValueError("lam must be non-negative")
    gb = boundary_grid(grid)
    g = _as_boundary(g, gb)
    lam_bar = max(lam, 1.0)
    x1 = grid.axis(0)
    eta = cutoff(np.sqrt(lam_bar) * x1)[0]
    rows = _gaussian_smoothing(g, x1)
    lead = (slice(None),) + (None,) * gb.dim
    v = GridFunction(grid, (x1 * eta)[lead] * rows)
    lhs = (lam * lp_norm(v, p) + np.sqrt(lam) * lp_norm(gradient(v), p) + lp_norm(hessian(v), p))
    slope = cutoff(0.0)[0] * np.asarray(g.values)
    return TraceLift(v, g, lam_bar, slope, float(lhs))


# ---------------------------------------------------------------------------
# oblique derivative


def _normalized(bc):
    ell = np.asarray(bc.ell, dtype=float)
    scale = ell[0]
    if not scale > 0:
        raise ValueError("the x^1 component of ell must be positive")
    return ell / scale, bc.g.with_values(np.asarray(bc.g.values) / scale), scale


def _mirror(values_half: np.ndarray, half: BoxGrid, ell: np.ndarray) -> np.ndarray:
    """Rows ``x^1 = -x_i`` (``i = m-1, ..., 1``) of ``F(phi(x))`` from the
    half-box rows of ``F``: ``phi(-x_i, x') = (x_i, x' + 2 l' x_i)``."""
    x1 = half.axis(0)
    shifts = 2.0 * np.multiply.outer(x1, ell[1:])
    shifted = shift_xprime(values_half, boundary_grid(half), shifts)
    return shifted[:0:-1]


def boundary_residual(u: GridFunction, ell, g: GridFunction, p: float = 2.0) -> float:
    """``|l^j u_{x^j}(0, .) - g|_p`` over the wall, one-sided in x^1."""
    ell = np.asarray(ell, dtype=float)
    r = ell[0] * wall_derivative(u)
    if u.grid.dim > 1:
        gb = boundary_grid(u.grid)
        wall = GridFunction(gb, np.asarray(u.values)[0])
        grads = gradient(wall).values
        r = r + np.einsum("j,j...->...", ell[1:], grads)
    return lp_norm(g.with_values(r - np.asarray(g.values)), p)


def solve_oblique(p: HalfSpaceProblem, tol: float = 1e-10, maxiter=None,
                  p_exp: float = 2.0) -> HalfSpaceSolution:
    """Oblique derivative problem through the shear reflection.

    ``diagnostics`` holds ``mirror_defect`` (max of ``|w - u o phi|`` on
    ``x^1 < 0``), ``boundary_residual`` (``L_p`` norm of
    ``l . grad u - g`` on the wall) and the trace-lift left side.
    """
    if not isinstance(p.bc, Oblique):
        raise ValueError("problem does not carry an oblique condition")
    ell, g, _ = _normalized(p.bc)
    half = p.grid
    m = half.sizes[0]
    op_hat = oblique_transform(p.op, ell)
    lift = lift_trace(g, p.lam, p_exp, grid=half)
    Lv = apply(p.op, lift.v, p.lam)
    f_plus = np.asarray(p.f.values) - 2.0 * np.asarray(Lv.values)
    f_full = np.empty((2 * m - 1,) + half.shape[1:], dtype=complex)
    f_full[m - 1:] = f_plus
    f_full[:m - 1] = _mirror(np.asarray(p.f.values), half, ell)
    full = full_box(half)
    res = solve_problem(op_hat, GridFunction(full, f_full), p.lam, tol=tol, maxiter=maxiter)
    w = np.asarray(res.u.values)
    u_plus = GridFunction(half, w[m - 1:] + 2.0 * np.asarray(lift.v.values))
    mirror = _mirror(np.asarray(u_plus.values), half, ell)
    diag = {
        "mirror_defect": float(np.max(np.abs(w[:m - 1] - mirror))),
        "boundary_residual": boundary_residual(u_plus, ell, g, p_exp),
        "lift_lhs": lift.lhs,
    }
    return HalfSpaceSolution(u_plus, res.u, res.residual, res.iterations, diag)


# ---------------------------------------------------------------------------
# Robin


def _robin_h(sigma: float):
    """``h = exp(-sigma q)`` with ``q = x chi(x)``; returns ``h, h'/h, h''/h``."""

    def fn(x1):
        chi, chi1, chi2 = cutoff(x1)
        q1 = chi + x1 * chi1
        q2 = 2 * chi1 + x1 * chi2
        h = np.exp(-sigma * x1 * chi)
        return h, -sigma * q1, sigma**2 * q1**2 - sigma * q2

    return fn


@dataclass
class RobinReduction:
    """Oblique problem for ``v = u / h`` and the map back to ``u``."""

    problem: HalfSpaceProblem
    h: Callable[[np.ndarray], tuple]
    K_bar: float

    def recover(self, v: GridFunction) -> GridFunction:
        hv = self.h(v.grid.axis(0))[0]
        return v.with_values(hv[(slice(None),) + (None,) * (v.grid.dim - 1)] * np.asarray(v.values))


def robin_reduce(p: HalfSpaceProblem) -> RobinReduction:
    """``L_bar v = h^{-1} L(h v)`` with ``h(x^1) = exp(-sigma x^1 chi(x^1))``.

    ``a_bar = a``, ``b_bar^j = b^j + 2 a^{j1} h'/h``,
    ``c_bar = c + (a^{11} h'' + b^1 h')/h``; the right side becomes ``f/h``
    and the wall data stays ``g`` because ``h(0) = 1``.
    """
    if not isinstance(p.bc, Robin):
        raise ValueError("problem does not carry a Robin condition")
    ell, g, scale = _normalized(p.bc)
    sigma = p.bc.sigma / scale
    op = p.op
    hfun = _robin_h(sigma)

    def b_bar(x):
        _, r1, _ = hfun(x[0])
        A = op.a_at(x)
        out = 2.0 * A[:, 0] * r1
        return out + op.b_at(x) if op.b is not None else out

    def c_bar(x):
        _, r1, r2 = hfun(x[0])
        out = op.a_at(x)[0, 0] * r2
        if op.b is not None:
            out = out + op.b_at(x)[0] * r1
        return out + op.c_at(x) if op.c is not None else out

    s = np.linspace(0.0, 1.0, 4001)
    _, r1, r2 = hfun(s)
    s1, s2 = float(np.abs(r1).max()), float(np.abs(r2).max())
    K_bar = op.K + (2 * s1 + s2) / op.delta + op.K * s1
    if sigma == 0.0:
        new_op = op
    else:
        new_op = EllipticOperator(op.dim, op.a, b_bar, c_bar, op.delta, K_bar, f"{op.label}|robin")
    grid = p.grid
    hx = hfun(grid.axis(0))[0]
    f_bar = p.f.with_values(np.asarray(p.f.values) / hx[(slice(None),) + (None,) * (grid.dim - 1)])
    reduced = HalfSpaceProblem(new_op, f_bar, Oblique(tuple(ell), g), p.lam)
    return RobinReduction(reduced, hfun, K_bar if sigma != 0.0 else op.K)


def solve_robin(p: HalfSpaceProblem, tol: float = 1e-10, maxiter=None,
                p_exp: float = 2.0) -> HalfSpaceSolution:
    red = robin_reduce(p)
    sol = solve_oblique(red.problem, tol=tol, maxiter=maxiter, p_exp=p_exp)
    u = red.recover(sol.u)
    ell, g, scale = _normalized(p.bc)
    r = ell[0] * wall_derivative(u)
    if u.grid.dim > 1:
        wall = GridFunction(boundary_grid(u.grid), np.asarray(u.values)[0])
        r = r + np.einsum("j,j...->...", ell[1:], gradient(wall).values)
    r = r + p.bc.sigma / scale * np.asarray(u.values)[0]
    diag = dict(sol.diagnostics)
    diag["boundary_residual"] = lp_norm(g.with_values(r - np.asarray(g.values)), p_exp)
    return HalfSpaceSolution(u, sol.whole, sol.residual, sol.iterations, diag)


def solve(p: HalfSpaceProblem, tol: float = 1e-10, maxiter=None, p_exp: float = 2.0) -> HalfSpaceSolution:
    """Dispatch on the boundary condition."""
    if isinstance(p.bc, Dirichlet):
        return solve_dirichlet(p, tol, maxiter)
    if isinstance(p.bc, Neumann):
        return solve_neumann(p, tol, maxiter)
    if isinstance(p.bc, Oblique):
        return solve_oblique(p, tol, maxiter, p_exp)
    return solve_robin(p, tol, maxiter, p_exp)


# ---------------------------------------------------------------------------
# estimate ratio


def oblique_estimate_ratio(u: GridFunction, f: GridFunction, g, lam: float, p: float = 2.0) -> float:
    """``(lam |u|_p + sqrt(lam) |u_x|_p + |u_xx|_p)`` over
    ``|f|_p + (lam v 1)^{s/2} |g|_p + [g]_s`` with ``s = 1 - 1/p``."""
    gb = boundary_grid(u.grid)
    g = _as_boundary(g, gb)
    s = 1.0 - 1.0 / p
    gnorm = lp_norm(g, p)
    semi = slobodeckij_seminorm(g, s, p) if gnorm > 0 else 0.0
    den = lp_norm(f, p) + max(lam, 1.0) ** (s / 2) * gnorm + semi
    if not den > 0:
        raise ValueError("denominator vanishes")
    num = lam * lp_norm(u, p) + np.sqrt(lam) * lp_norm(gradient(u), p) + lp_norm(hessian(u), p)
    return float(num / den)
