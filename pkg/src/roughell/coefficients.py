"""Coefficient fields of ``L u = a^{jk} u_{jk} + b^j u_j + c u``.

Coefficients are closures over node coordinates: ``a(x)`` receives an array
of shape ``(d, ...)`` and returns ``(d, d, ...)``; ``b`` returns
``(d, ...)`` and ``c`` returns ``(...)``.  Constant parts are broadcast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import yaml

from .grid import GridFunction, _first_derivatives, _second_derivatives

__all__ = [
    "EllipticOperator",
    "ValidationReport",
    "CoefficientFamily",
    "constant_operator",
    "x1_table_operator",
    "validate",
    "apply",
    "extend_odd_even",
    "phi_map",
    "phi_jacobian",
    "pullback",
    "oblique_transform",
    "load_family",
]

Field = Callable[[np.ndarray], np.ndarray]


def _broadcast(values, lead: tuple[int, ...], x: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    tail = values.shape[len(lead):]
    if not tail:
        tail = (1,) * (x.ndim - 1)
    return np.broadcast_to(values.reshape(lead + tail), lead + x.shape[1:])


@dataclass(frozen=True)
class EllipticOperator:
    """Coefficient triple with declared ellipticity ``delta`` and bound ``K``."""

    dim: int
    a: Field
    b: Optional[Field] = None
    c: Optional[Field] = None
    delta: float = 1.0
    K: float = 0.0
    label: str = ""

    def __post_init__(self):
        if not 0 < self.delta <= 1:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.K < 0:
            raise ValueError("K must be non-negative")

    @property
    def has_lower_order(self) -> bool:
        return self.b is not None or self.c is not None

    def a_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return _broadcast(self.a(x), (self.dim, self.dim), x)

    def b_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.b is None:
            return np.zeros((self.dim,) + x.shape[1:])
        return _broadcast(self.b(x), (self.dim,), x)

    def c_at(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.c is None:
            return np.zeros(x.shape[1:])
        return _broadcast(self.c(x), (), x)

    def principal(self) -> "EllipticOperator":
        """The same operator with ``b = c = 0``."""
        return EllipticOperator(self.dim, self.a, None, None, self.delta, self.K, self.label)


def constant_operator(A, b=None, c=None, delta: float | None = None, K: float | None = None,
                      label: str = "constant") -> EllipticOperator:
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    eig = np.linalg.eigvalsh(A)
    if delta is None:
        delta = float(min(eig.min(), 1.0 / eig.max(), 1.0))
    bvec = None if b is None else np.asarray(b, dtype=float)
    cval = None if c is None else float(c)
    if K is None:
        K = max(0.0, 0.0 if bvec is None else float(np.abs(bvec).max()), 0.0 if cval is None else abs(cval))
    return EllipticOperator(
        d,
        lambda x: A,
        None if bvec is None else (lambda x: bvec),
        None if cval is None else (lambda x: cval),
        delta,
        K,
        label,
    )


@dataclass(frozen=True, eq=False)
class _X1Table:
    """Piecewise-constant matrix table in x^1 with left-closed pieces."""

    breaks: np.ndarray
    mats: np.ndarray

    def __call__(self, x: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.breaks, x[0], side="right")
        return np.moveaxis(self.mats[idx], (-2, -1), (0, 1))


def x1_table_operator(breaks, mats, delta: float, label: str = "x1-table") -> EllipticOperator:
    """Operator whose ``a`` is piecewise constant in x^1 (``len(mats) == len(breaks) + 1``)."""
    mats = np.asarray(mats, dtype=float)
    return EllipticOperator(mats.shape[-1], _X1Table(np.asarray(breaks, dtype=float), mats),
                            delta=delta, label=label)


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    min_quotient: float
    max_quotient: float
    min_eigenvalue: float
    max_eigenvalue: float
    symmetry_defect: float
    b_sup: float
    c_sup: float
    delta: float
    K: float
    passed: bool


def validate(op: EllipticOperator, points, directions, rtol: float = 1e-12) -> ValidationReport:
    """Check Assumption-style bounds on sample points and directions.

    ``points`` has shape ``(d, M)``; ``directions`` has shape ``(d, Q)``.
    Sampled Rayleigh quotients are reported alongside the exact pointwise
    eigenvalue range; the verdict uses the eigenvalues, which bound every
    direction.
    """
    points = np.asarray(points, dtype=float).reshape(op.dim, -1)
    directions = np.asarray(directions, dtype=float).reshape(op.dim, -1)
    if points.shape[1] == 0 or directions.shape[1] == 0:
        raise ValueError("sample sets must be nonempty")
    A = np.moveaxis(op.a_at(points), -1, 0)  # (M, d, d)
    sym = float(np.abs(A - np.swapaxes(A, 1, 2)).max())
    As = 0.5 * (A + np.swapaxes(A, 1, 2))
    th = directions / np.linalg.norm(directions, axis=0)
    q = np.einsum("jq,mjk,kq->mq", th, As, th)
    eig = np.linalg.eigvalsh(As)
    b_sup = float(np.abs(op.b_at(points)).max(initial=0.0))
    c_sup = float(np.abs(op.c_at(points)).max(initial=0.0))
    lo = min(float(q.min()), float(eig.min()))
    hi = max(float(q.max()), float(eig.max()))
    passed = (
        sym <= rtol * max(1.0, float(np.abs(A).max()))
        and lo >= op.delta * (1 - rtol)
        and hi <= (1 + rtol) / op.delta
        and b_sup <= op.K * (1 + rtol)
        and c_sup <= op.K * (1 + rtol)
    )
    return ValidationReport(float(q.min()), float(q.max()), float(eig.min()), float(eig.max()),
                            sym, b_sup, c_sup, op.delta, op.K, bool(passed))


# ---------------------------------------------------------------------------
# operator application


def apply(op: EllipticOperator, u: GridFunction, lam: float = 0.0) -> GridFunction:
    """``a^{jk} u_{jk} + b^j u_j + c u - lam u`` with the grid stencils."""
    if u.rank != "scalar":
        raise ValueError("apply expects a scalar grid function")
    if u.grid.dim != op.dim:
        raise ValueError(f"operator is {op.dim}-d but the grid is {u.grid.dim}-d")
    x = u.grid.coords()
    first = _first_derivatives(u.values, u.grid)
    second = _second_derivatives(u.values, u.grid, first)
    A = op.a_at(x)
    out = np.einsum("jk...,jk...->...", A, second)
    if op.b is not None:
        out = out + np.einsum("j...,j...->...", op.b_at(x), np.stack(first))
    if op.c is not None:
        out = out + op.c_at(x) * u.values
    if lam:
        out = out - lam * u.values
    return u.with_values(out)


# ---------------------------------------------------------------------------
# reflections across x^1 = 0


def _reflect(x: np.ndarray) -> np.ndarray:
    y = np.array(x, dtype=float, copy=True)
    y[0] = np.abs(y[0])
    return y


def extend_odd_even(op: EllipticOperator) -> EllipticOperator:
    """Extend coefficients given on ``x^1 >= 0`` to the whole space.

    ``a^{11}``, ``a^{jk}`` (j, k >= 2), ``b^j`` (j >= 2) and ``c`` are
    extended evenly; ``a^{1j} = a^{j1}`` (j >= 2) and ``b^1`` oddly.  Odd
    parts take the value 0 on the plane ``x^1 = 0`` itself, which keeps the
    discrete operator exactly commuting with the reflection.
    """
    d = op.dim

    def a_hat(x):
        s = np.sign(x[0])
        A = np.array(op.a_at(_reflect(x)), copy=True)
        A[0, 1:] *= s
        A[1:, 0] *= s
        return A

    b_hat = None
    if op.b is not None:
        def b_hat(x):
            B = np.array(op.b_at(_reflect(x)), copy=True)
            B[0] *= np.sign(x[0])
            return B

    c_hat = None if op.c is None else (lambda x: op.c_at(_reflect(x)))
    return EllipticOperator(d, a_hat, b_hat, c_hat, op.delta, op.K, f"{op.label}|odd-even")


def phi_map(ell, x) -> np.ndarray:
    """Shear reflection ``(x^1, x') -> (-x^1, x' - 2 ell' x^1)``; requires ``ell^1 = 1``."""
    ell = np.asarray(ell, dtype=float)
    if ell[0] != 1.0:
        raise ValueError("phi_map expects a vector normalized to ell^1 = 1")
    x = np.asarray(x, dtype=float)
    lead = (slice(None),) + (None,) * (x.ndim - 1)
    y = x - 2.0 * ell[lead] * x[0]
    y[0] = -x[0]
    return y


def phi_jacobian(ell) -> np.ndarray:
    """Constant Jacobian ``J[j, r] = d phi^j / d x^r``; satisfies ``J @ J = I``."""
    ell = np.asarray(ell, dtype=float)
    J = np.eye(ell.size)
    J[:, 0] = -2.0 * ell
    J[0, 0] = -1.0
    return J


def pullback(op: EllipticOperator, ell) -> EllipticOperator:
    """Change of variables through ``phi`` on the whole space:
    ``a_bar = J a(phi(x)) J^T``, ``b_bar = J b(phi(x))``, ``c_bar = c(phi(x))``."""
    J = phi_jacobian(ell)
    smax = float(np.linalg.norm(J, 2))
    delta = op.delta / smax**2

    def a_bar(x):
        return np.einsum("jr,rl...,kl->jk...", J, op.a_at(phi_map(ell, x)), J)

    b_bar = None
    if op.b is not None:
        def b_bar(x):
            return np.einsum("jr,r...->j...", J, op.b_at(phi_map(ell, x)))

    c_bar = None if op.c is None else (lambda x: op.c_at(phi_map(ell, x)))
    K = op.K * float(np.abs(J).sum(axis=1).max())
    return EllipticOperator(op.dim, a_bar, b_bar, c_bar, delta, K, f"{op.label}|phi")


def oblique_transform(op: EllipticOperator, ell) -> EllipticOperator:
    """Original coefficients on ``x^1 >= 0``, the ``phi`` pullback on ``x^1 < 0``.

    The declared ellipticity becomes ``delta / |J|_2^2``: ``J`` is an
    involution, so its smallest singular value is ``1/|J|_2``.
    """
    bar = pullback(op, ell)

    def pick(x, upper, lower, lead):
        mask = (x[0] >= 0)[(None,) * lead]
        return np.where(mask, upper, lower)

    def a_hat(x):
        return pick(x, op.a_at(x), bar.a_at(x), 2)

    b_hat = None
    if op.b is not None:
        def b_hat(x):
            return pick(x, op.b_at(x), bar.b_at(x), 1)

    c_hat = None
    if op.c is not None:
        def c_hat(x):
            return pick(x, op.c_at(x), bar.c_at(x), 0)

    return EllipticOperator(op.dim, a_hat, b_hat, c_hat, bar.delta, max(op.K, bar.K),
                            f"{op.label}|oblique")


# ---------------------------------------------------------------------------
# random families


def _clamped_spd(rng: np.random.Generator, d: int, lo: float, hi: float) -> np.ndarray:
    mid, spread = 0.5 * (lo + hi), 0.35 * (hi - lo)
    M = rng.normal(size=(d, d))
    S = mid * np.eye(d) + spread * 0.5 * (M + M.T)
    w, V = np.linalg.eigh(S)
    w = np.clip(w, lo, hi)
    out = (V * w) @ V.T
    return 0.5 * (out + out.T)


_KINDS = ("constant", "measurable_x1", "vmo_oscillatory", "checkerboard_x1")


@dataclass(frozen=True)
class CoefficientFamily:
    """Seeded random coefficient families.

    ``measurable_x1`` and ``checkerboard_x1`` are piecewise constant in x^1 on
    ``pieces`` cells of ``x1_range``; breakpoints sit at
    ``lo + (i + 1/pi) * H`` so they never coincide with nodes of grids that
    refine a lattice of step ``H``.  ``vmo_oscillatory`` adds
    ``epsilon * B(x'/R0)`` with a smooth, ``2*pi*R0``-periodic ``B`` of
    spectral norm at most one to a measurable ``A(x^1)``.
    """

    kind: str
    dim: int = 2
    seed: int = 0
    delta: float = 0.2
    epsilon: float = 0.0
    R0: float = 1.0
    K: float = 0.0
    pieces: int = 8
    x1_range: tuple[float, float] = (-4.0, 4.0)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        if self.dim < 2:
            raise ValueError("dim must be at least 2")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.epsilon < 0 or self.R0 <= 0 or self.K < 0 or self.pieces < 1:
            raise ValueError("epsilon >= 0, R0 > 0, K >= 0 and pieces >= 1 are required")
        if self.kind == "vmo_oscillatory" and 2 * self.epsilon >= 1 / self.delta - self.delta:
            raise ValueError("epsilon too large to keep the draw inside [delta, 1/delta]")

    @property
    def breaks(self) -> np.ndarray:
        lo, hi = self.x1_range
        H = (hi - lo) / self.pieces
        return lo + (np.arange(1, self.pieces) + 1 / np.pi) * H

    def draw(self) -> EllipticOperator:
        rng = np.random.default_rng(self.seed)
        d, delta = self.dim, self.delta
        label = f"{self.kind}[seed={self.seed}]"
        if self.kind == "constant":
            return constant_operator(_clamped_spd(rng, d, delta, 1 / delta), delta=delta, K=self.K,
                                     label=label)
        if self.kind == "measurable_x1":
            mats = [_clamped_spd(rng, d, delta, 1 / delta) for _ in range(self.pieces)]
            return x1_table_operator(self.breaks, mats, delta, label)
        if self.kind == "checkerboard_x1":
            pair = [_clamped_spd(rng, d, delta, 1 / delta) for _ in range(2)]
            return x1_table_operator(self.breaks, [pair[i % 2] for i in range(self.pieces)], delta, label)
        # vmo_oscillatory
        eps = self.epsilon
        table = _X1Table(self.breaks,
                         np.array([_clamped_spd(rng, d, delta + eps, 1 / delta - eps)
                                   for _ in range(self.pieces)]))
        modes = []
        for _ in range(2):
            E = rng.normal(size=(d, d))
            E = 0.5 * (E + E.T)
            E /= np.linalg.norm(E, 2)
            w = rng.integers(-2, 3, size=d - 1)
            if not w.any():
                w[0] = 1
            modes.append((E, w.astype(float), rng.uniform(0, 2 * np.pi)))
        R0 = self.R0

        def a(x):
            out = np.array(table(x), copy=True)
            for E, w, theta in modes:
                phase = np.tensordot(w, x[1:], axes=1) / R0 + theta
                out += 0.5 * eps * E[(...,) + (None,) * phase.ndim] * np.sin(phase)
            return out

        return EllipticOperator(d, a, None, None, delta, self.K, label)

    @classmethod
    def from_config(cls, cfg: dict) -> "CoefficientFamily":
        allowed = {"kind", "dim", "seed", "delta", "epsilon", "R0", "K", "pieces", "x1_range"}
        unknown = set(cfg) - allowed
        if unknown:
            raise ValueError(f"unknown coefficient keys: {sorted(unknown)}")
        if "kind" not in cfg:
            raise ValueError("coefficient config needs 'kind'")
        kw = dict(cfg)
        if "x1_range" in kw:
            kw["x1_range"] = tuple(float(v) for v in kw["x1_range"])
        return cls(**kw)

    def with_seed(self, seed: int) -> "CoefficientFamily":
        return CoefficientFamily(self.kind, self.dim, seed, self.delta, self.epsilon, self.R0,
                                 self.K, self.pieces, self.x1_range)


def load_family(path) -> CoefficientFamily:
    """Load a family from a YAML key-value file (keys as in :class:`CoefficientFamily`)."""
    with open(path) as fh:
        cfg = yaml.safe_load(fh)
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: expected a mapping")
    return CoefficientFamily.from_config(cfg.get("coefficients", cfg))
