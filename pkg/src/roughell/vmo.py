"""Mean oscillation of coefficients in the x' variables.

For a cylinder ``Q_r(x) = (x1 - r, x1 + r) x B'_r(x')`` the oscillation is

    osc(a, Q_r(x)) = r^{-1} |B'_r|^{-2} int int int |a(t, y') - a(t, z')| dy' dz' dt,

which equals ``2 * E|a(t, y') - a(t, z')|`` for ``t`` uniform on the x^1
interval and ``y', z'`` uniform on the ball.  The matrix modulus is the
Frobenius norm.  Expectations are estimated with scrambled Sobol points;
the standard error comes from independent scramblings.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .coefficients import EllipticOperator

__all__ = [
    "Cylinder",
    "OscEstimate",
    "VMOReport",
    "Omega",
    "osc_xprime",
    "vmo_modulus",
    "vmo_report",
    "fit_omega",
    "box_centers",
]


@dataclass(frozen=True)
class Cylinder:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


@dataclass
class OscEstimate:
    value: float
    stderr: float
    samples: int


def _matrix_field(a) -> tuple[Callable[[np.ndarray], np.ndarray], int | None]:
    if isinstance(a, EllipticOperator):
        return a.a_at, a.dim
    return a, None


class _UnitSamples:
    """Scrambled Sobol points mapped to ``(t, y', z')`` in the unit cylinder,
    one block per independent scrambling.  Reused for every cylinder so that
    different centers/radii share the same sample (common random numbers)."""

    def __init__(self, dim: int, samples: int, seed: int, replicates: int):
        if samples < 64:
            raise ValueError("at least 64 samples are needed")
        per = 2 ** int(math.floor(math.log2(samples / replicates)))
        self.blocks = []
        k = dim - 1
        for rep in range(replicates):
            eng = qmc.Sobol(1 + 2 * k, scramble=True, seed=np.random.default_rng([seed, rep]))
            need = per
            pts = np.empty((0, 1 + 2 * k))
            while pts.shape[0] < per:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    raw = eng.random(need)
                t = 2 * raw[:, :1] - 1
                y = 2 * raw[:, 1:1 + k] - 1
                z = 2 * raw[:, 1 + k:] - 1
                if k > 1:
                    ok = (np.sum(y * y, 1) < 1) & (np.sum(z * z, 1) < 1)
                    t, y, z = t[ok], y[ok], z[ok]
                pts = np.vstack([pts, np.hstack([t, y, z])])
                need = per
            self.blocks.append(pts[:per])
        self.k = k

    @property
    def total(self) -> int:
        return sum(b.shape[0] for b in self.blocks)


def _osc_from_samples(afield, unit: _UnitSamples, center, radius) -> OscEstimate:
    c = np.asarray(center, dtype=float)
    k = unit.k
    means = []
    for pts in unit.blocks:
        t = c[0] + radius * pts[:, 0]
        y = c[1:, None] + radius * pts[:, 1:1 + k].T
        z = c[1:, None] + radius * pts[:, 1 + k:].T
        Py = np.vstack([t[None], y])
        Pz = np.vstack([t[None], z])
        diff = np.asarray(afield(Py)) - np.asarray(afield(Pz))
        frob = np.sqrt(np.sum(np.abs(diff) ** 2, axis=(0, 1)))
        means.append(2.0 * frob.mean())
    means = np.array(means)
    se = float(means.std(ddof=1) / np.sqrt(means.size)) if means.size > 1 else float("nan")
    return OscEstimate(float(means.mean()), se, unit.total)


def osc_xprime(a, Q: Cylinder, samples: int = 1024, seed: int = 0, replicates: int = 8) -> OscEstimate:
    """Quasi-Monte Carlo estimate of the x'-oscillation of ``a`` on ``Q``."""
    afield, _ = _matrix_field(a)
    unit = _UnitSamples(len(Q.center), samples, seed, replicates)
    return _osc_from_samples(afield, unit, Q.center, Q.radius)


def box_centers(extents, counts) -> np.ndarray:
    """Tensor grid of cylinder centers, shape ``(d, prod(counts))``."""
    axes = [np.linspace(lo, hi, n) if n > 1 else np.array([0.5 * (lo + hi)])
            for (lo, hi), n in zip(extents, counts)]
    return np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")])


def _osc_table(a, centers, radii, samples, seed, replicates):
    afield, _ = _matrix_field(a)
    centers = np.asarray(centers, dtype=float)
    unit = _UnitSamples(centers.shape[0], samples, seed, replicates)
    val = np.zeros((len(radii), centers.shape[1]))
    se = np.zeros_like(val)
    for i, r in enumerate(radii):
        for j in range(centers.shape[1]):
            est = _osc_from_samples(afield, unit, centers[:, j], r)
            val[i, j], se[i, j] = est.value, est.stderr
    return val, se


@dataclass
class VMOEstimate:
    """Sampled lower bound of ``sup_x sup_{r <= R} osc``."""

    value: float
    stderr: float
    center: np.ndarray
    radius: float


def vmo_modulus(a, R: float, centers, radii, samples: int = 1024, seed: int = 0,
                replicates: int = 8) -> VMOEstimate:
    """Max of the oscillation over the sampled centers and radii ``<= R``.

    This is a lower bound for the true supremum over all of R^d.
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(radii > R * (1 + 1e-12)) or radii.size == 0:
        raise ValueError("radii must be nonempty and not exceed R")
    val, se = _osc_table(a, centers, radii, samples, seed, replicates)
    i, j = np.unravel_index(np.argmax(val), val.shape)
    centers = np.asarray(centers, dtype=float)
    return VMOEstimate(float(val[i, j]), float(se[i, j]), centers[:, j].copy(), float(radii[i]))


@dataclass
class Omega:
    """Monotone majorant of a modulus table.

    Between sampled radii the value of the next larger radius is used, past
    the largest radius the last value; on ``[0, r_min]`` the envelope is
    linear from ``omega(0)`` (extrapolated from the two smallest radii and
    clipped to ``[0, env(r_min)]``).
    """

    radii: np.ndarray
    values: np.ndarray
    at_zero: float

    def __call__(self, R):
        R = np.asarray(R, dtype=float)
        idx = np.searchsorted(self.radii, R, side="left")
        out = self.values[np.minimum(idx, self.radii.size - 1)]
        r0, v0 = self.radii[0], self.values[0]
        small = R <= r0
        out = np.where(small, self.at_zero + (v0 - self.at_zero) * np.clip(R / r0, 0, 1), out)
        return out if out.ndim else float(out)


def fit_omega(table) -> Omega:
    """Least monotone non-decreasing majorant of ``{(R, modulus)}``."""
    pairs = sorted((float(r), float(m)) for r, m in (table.items() if isinstance(table, dict) else table))
    if not pairs:
        raise ValueError("empty modulus table")
    radii = np.array([p[0] for p in pairs])
    env = np.maximum.accumulate(np.array([p[1] for p in pairs]))
    if radii.size >= 2 and radii[1] > radii[0]:
        slope = (env[1] - env[0]) / (radii[1] - radii[0])
        zero = float(np.clip(env[0] - slope * radii[0], 0.0, env[0]))
    else:
        zero = float(env[0])
    return Omega(radii, env, zero)


@dataclass
class VMOReport:
    radii: np.ndarray
    modulus: np.ndarray
    stderr: np.ndarray
    omega_fit: np.ndarray
    omega: Omega = field(repr=False)

    def rows(self):
        for r, m, s, w in zip(self.radii, self.modulus, self.stderr, self.omega_fit):
            yield float(r), float(m), float(s), float(w)


def vmo_report(a, radii, centers, samples: int = 1024, seed: int = 0, replicates: int = 8) -> VMOReport:
    """Modulus at each radius (decreasing order), monotone by construction:
    the entry for ``R`` is the max over every sampled radius ``<= R``."""
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    val, se = _osc_table(a, centers, radii, samples, seed, replicates)
    best = val.max(axis=1)
    arg = val.argmax(axis=1)
    best_se = se[np.arange(radii.size), arg]
    modulus = np.zeros(radii.size)
    stderr = np.zeros(radii.size)
    for i in range(radii.size):
        k = i + int(np.argmax(best[i:]))
        modulus[i], stderr[i] = best[k], best_se[k]
    omega = fit_omega(list(zip(radii, modulus)))
    return VMOReport(radii, modulus, stderr, np.asarray(omega(radii)), omega)
