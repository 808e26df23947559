"""Maximal and sharp functions, the Slobodeckij seminorm, and empirical
checks of the pointwise sharp-function inequality and the local L_p bound.

Suprema over ``r > 0`` are replaced by maxima over a geometric radius
ladder, so every reported value is a lower bound of the true supremum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .coefficients import EllipticOperator, apply
from .grid import BoxGrid, GridFunction, hessian, lp_norm
from .vmo import box_centers, vmo_modulus

__all__ = [
    "SupEstimate",
    "radius_ladder",
    "ball_average",
    "maximal_fn",
    "sharp_fn",
    "slobodeckij_seminorm",
    "SharpCheckConfig",
    "SharpCheckResult",
    "sharp_inequality_check",
    "LpCheck",
    "lp_estimate_check",
    "boundary_grid",
]


class SupEstimate(NamedTuple):
    value: float
    radius: float
    clipped: bool


def radius_ladder(grid: BoxGrid, ratio: float = 1.5, r_min: float | None = None,
                  r_max: float | None = None) -> np.ndarray:
    """Geometric radii from ``2 h`` to half the smallest box width."""
    r_min = 2 * max(grid.spacing) if r_min is None else r_min
    r_max = 0.5 * min(hi - lo for lo, hi in grid.extents) if r_max is None else r_max
    n = int(np.floor(np.log(r_max / r_min) / np.log(ratio))) + 1
    return r_min * ratio ** np.arange(max(n, 1))


class _Ball:
    """Index window, node weights and clipping flag for one ball."""

    __slots__ = ("slices", "weights", "clipped")

    def __init__(self, grid: BoxGrid, x, r: float):
        slices, dist2 = [], 0.0
        clipped = False
        for i in range(grid.dim):
            ax = grid.axis(i)
            lo, hi = grid.extents[i]
            clipped |= (x[i] - r < lo) or (x[i] + r > hi)
            idx = np.nonzero(np.abs(ax - x[i]) < r)[0]
            if idx.size == 0:
                idx = np.array([int(np.argmin(np.abs(ax - x[i])))])
            slices.append(slice(int(idx[0]), int(idx[-1]) + 1))
            shape = [1] * grid.dim
            shape[i] = idx[-1] + 1 - idx[0]
            dist2 = dist2 + ((ax[slices[-1]] - x[i]) ** 2).reshape(shape)
        inside = dist2 < r * r
        if not inside.any():
            inside = dist2 <= dist2.min()
        w = np.ones(inside.shape)
        for i in range(grid.dim):
            shape = [1] * grid.dim
            shape[i] = inside.shape[i]
            w = w * grid.axis_weights(i)[slices[i]].reshape(shape)
        self.slices = tuple(slices)
        self.weights = np.where(inside, w, 0.0)
        self.clipped = bool(clipped)

    def mean(self, values: np.ndarray) -> complex:
        v = values[self.slices]
        return np.sum(self.weights * v) / np.sum(self.weights)


def _field(g) -> np.ndarray:
    return g.magnitude() if isinstance(g, GridFunction) and g.rank != "scalar" else np.asarray(
        g.values if isinstance(g, GridFunction) else g)


def ball_average(g: GridFunction, x, r: float) -> tuple[float, bool]:
    """Cell-volume weighted average of ``|g|`` over the nodes inside ``B_r(x)``."""
    ball = _Ball(g.grid, np.asarray(x, dtype=float), r)
    return float(np.real(ball.mean(np.abs(_field(g))))), ball.clipped


def maximal_fn(g: GridFunction, x, radii: Sequence[float]) -> SupEstimate:
    """Hardy-Littlewood maximal function of ``g`` at ``x`` over ``radii``."""
    if len(radii) == 0:
        raise ValueError("radii must be nonempty")
    x = np.asarray(x, dtype=float)
    vals = np.abs(_field(g))
    best, arg, clipped = -np.inf, 0.0, False
    for r in radii:
        ball = _Ball(g.grid, x, r)
        m = float(np.real(ball.mean(vals)))
        clipped |= ball.clipped
        if m > best:
            best, arg = m, float(r)
    return SupEstimate(best, arg, clipped)


def sharp_fn(g: GridFunction, x, radii: Sequence[float]) -> SupEstimate:
    """Fefferman-Stein sharp function: max over ``radii`` of the mean of
    ``|g - (g)_B|`` on the ball ``B``."""
    if len(radii) == 0:
        raise ValueError("radii must be nonempty")
    x = np.asarray(x, dtype=float)
    vals = _field(g)
    best, arg, clipped = -np.inf, 0.0, False
    for r in radii:
        ball = _Ball(g.grid, x, r)
        v = vals[ball.slices]
        avg = np.sum(ball.weights * v) / np.sum(ball.weights)
        m = float(np.sum(ball.weights * np.abs(v - avg)) / np.sum(ball.weights))
        clipped |= ball.clipped
        if m > best:
            best, arg = m, float(r)
    return SupEstimate(best, arg, clipped)


def boundary_grid(grid: BoxGrid) -> BoxGrid:
    """The x' grid of the plane ``x^1 = const``."""
    return BoxGrid(grid.extents[1:], grid.sizes[1:], grid.periodic[1:])


def slobodeckij_seminorm(g: GridFunction, s: float | None = None, p: float = 2.0,
                         chunk: int = 2048) -> float:
    """Discrete ``[g]_s = (sum_{|x-y| >= h} |g(x)-g(y)|^p / |x-y|^{n+sp} w_x w_y)^{1/p}``
    over node pairs of the boundary grid (``n`` its dimension, ``h`` its
    largest spacing, periodic distance on periodic axes)."""
    s = 1.0 - 1.0 / p if s is None else s
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    grid = g.grid
    n = grid.dim
    pts = grid.coords().reshape(n, -1)
    w = np.ones(grid.shape)
    for i in range(n):
        shape = [1] * n
        shape[i] = grid.sizes[i]
        w = w * grid.axis_weights(i).reshape(shape)
    w = w.ravel()
    vals = np.asarray(g.values).ravel()
    h = max(grid.spacing)
    periods = np.array([hi - lo for lo, hi in grid.extents])
    per = np.array(grid.periodic)
    expo = n + s * p
    total = 0.0
    for start in range(0, vals.size, chunk):
        sl = slice(start, start + chunk)
        delta = np.abs(pts[:, sl, None] - pts[:, None, :])
        wrap = np.minimum(delta, periods[:, None, None] - delta)
        delta = np.where(per[:, None, None], wrap, delta)
        dist = np.sqrt(np.sum(delta * delta, axis=0))
        keep = dist >= h * (1 - 1e-9)
        num = np.abs(vals[sl, None] - vals[None, :]) ** p
        term = np.where(keep, num / np.where(keep, dist, 1.0) ** expo, 0.0)
        total += float(np.sum(term * w[sl, None] * w[None, :]))
    return total ** (1.0 / p)


# ---------------------------------------------------------------------------
# sharp-function inequality


@dataclass
class SharpCheckConfig:
    """Exponents of the sharp-function inequality.

    ``alpha = 1/(nu (d+2))`` and ``beta = 1/(2 mu)`` with ``1/mu + 1/nu = 1``.
    """

    R: float
    mu: float
    d: int
    sample_points: np.ndarray
    radii: np.ndarray
    modulus: Optional[float] = None
    nu: float = field(init=False)
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self):
        if not self.mu > 1:
            raise ValueError("mu must exceed 1")
        self.nu = self.mu / (self.mu - 1)
        self.alpha = 1.0 / (self.nu * (self.d + 2))
        self.beta = 1.0 / (2 * self.mu)
        self.sample_points = np.asarray(self.sample_points, dtype=float)
        self.radii = np.asarray(self.radii, dtype=float)

    @staticmethod
    def mu_for(p: float) -> float:
        """``mu = 2`` when ``p > 4``; just below ``p/2`` on ``(2, 4]`` so that
        ``p > 2 mu``.  No ``mu > 1`` satisfies ``p > 2 mu`` when ``p <= 2``;
        the pointwise inequality does not involve ``p``, so ``mu = 2`` is used."""
        if p > 4 or p <= 2:
            return 2.0
        return max(0.5 * p * (1 - 1e-3), 1.0 + 1e-9)

    @classmethod
    def sampled(cls, grid: BoxGrid, R: float, p: float = 4.0, n_points: int = 100, seed: int = 0,
                within: float | None = None, modulus: float | None = None) -> "SharpCheckConfig":
        """Random sample points (inside a centered ball of radius ``within``
        when given) and the default radius ladder."""
        rng = np.random.default_rng(seed)
        lo = np.array([e[0] for e in grid.extents])
        hi = np.array([e[1] for e in grid.extents])
        pts = []
        while len(pts) < n_points:
            x = rng.uniform(lo, hi)
            if within is None or np.linalg.norm(x - 0.5 * (lo + hi)) < within:
                pts.append(x)
        return cls(R, cls.mu_for(p), grid.dim, np.array(pts).T, radius_ladder(grid), modulus)


@dataclass
class SharpCheckResult:
    N: float
    N_per_point: np.ndarray
    lhs: np.ndarray
    first_term: np.ndarray
    second_term: np.ndarray
    modulus: float


def _modulus_for(op: EllipticOperator, grid: BoxGrid, R: float) -> float:
    centers = box_centers(grid.extents, [5] * grid.dim)
    radii = R * 0.5 ** np.arange(3)
    return vmo_modulus(op, R, centers, radii, samples=256).value


def sharp_inequality_check(u: GridFunction, op: EllipticOperator, cfg: SharpCheckConfig) -> SharpCheckResult:
    """Smallest ``N`` making

        (u_{xx'})^# <= N a#^alpha [M |u_xx|^{2 mu}]^beta
                       + N [M |L0 u|^2]^{1/(d+2)} [M |u_xx|^2]^{d/(2d+4)}

    hold at each sample point; ``L0`` is the principal part of ``op``.  The
    left side is the largest sharp function over the derivatives
    ``u_{x^j x^k}`` with ``k >= 2``.
    """
    grid = u.grid
    d = grid.dim
    modulus = _modulus_for(op, grid, cfg.R) if cfg.modulus is None else float(cfg.modulus)
    H = hessian(u)
    hmag = H.magnitude()
    L0u = apply(op.principal(), u).values
    f_2mu = hmag ** (2 * cfg.mu)
    f_2 = hmag**2
    l_2 = np.abs(L0u) ** 2
    comps = [H.values[j, k] for j in range(d) for k in range(1, d) if j <= k]
    npts = cfg.sample_points.shape[1]
    lhs, t1, t2 = np.zeros(npts), np.zeros(npts), np.zeros(npts)
    for n in range(npts):
        x = cfg.sample_points[:, n]
        balls = [_Ball(grid, x, r) for r in cfg.radii]
        best = 0.0
        for comp in comps:
            for ball in balls:
                v = comp[ball.slices]
                wsum = np.sum(ball.weights)
                avg = np.sum(ball.weights * v) / wsum
                best = max(best, float(np.sum(ball.weights * np.abs(v - avg)) / wsum))
        m_2mu = max(float(ball.mean(f_2mu).real) for ball in balls)
        m_2 = max(float(ball.mean(f_2).real) for ball in balls)
        m_l = max(float(ball.mean(l_2).real) for ball in balls)
        lhs[n] = best
        t1[n] = (modulus**cfg.alpha if modulus > 0 else 0.0) * m_2mu**cfg.beta
        t2[n] = m_l ** (1.0 / (d + 2)) * m_2 ** (d / (2 * d + 4))
    rhs = t1 + t2
    with np.errstate(divide="ignore", invalid="ignore"):
        Np = np.where(lhs == 0, 0.0, np.where(rhs > 0, lhs / np.where(rhs > 0, rhs, 1.0), np.inf))
    return SharpCheckResult(float(Np.max()), Np, lhs, t1, t2, modulus)


@dataclass
class LpCheck:
    ratio: float
    skipped: bool = False
    anomaly: bool = False


def lp_estimate_check(op: EllipticOperator, u: GridFunction, p: float) -> LpCheck:
    """``|u_xx|_p / |L0 u|_p`` for a compactly supported test field.

    ``L0 u`` counts as zero once it is at rounding level relative to ``u_xx``.
    """
    nu = lp_norm(hessian(u), p)
    nl = lp_norm(apply(op.principal(), u), p)
    if nu == 0.0 and nl == 0.0:
        return LpCheck(float("nan"), skipped=True)
    if nl <= 1e-12 * nu:
        return LpCheck(float("inf"), anomaly=True)
    return LpCheck(float(nu / nl))
