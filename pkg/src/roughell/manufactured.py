"""Closed-form test fields with exact first and second derivatives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .coefficients import EllipticOperator
from .grid import BoxGrid, GridFunction

__all__ = ["Manufactured", "gaussian", "odd_gaussian", "bump", "MANUFACTURED", "forcing"]


@dataclass(frozen=True)
class Manufactured:
    """``value(x)``, ``grad(x)`` and ``hess(x)`` for ``x`` of shape ``(d, ...)``."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]

    def sample(self, grid: BoxGrid) -> GridFunction:
        return grid.sample(self.value)


def gaussian(center=None, width: float = 1.0) -> Manufactured:
    """``exp(-|x - center|^2 / width^2)``."""
    s = 1.0 / width**2

    def _shift(x):
        c = np.zeros(x.shape[0]) if center is None else np.asarray(center, dtype=float)
        return x - c.reshape((-1,) + (1,) * (x.ndim - 1))

    def value(x):
        y = _shift(x)
        return np.exp(-s * np.sum(y * y, axis=0))

    def grad(x):
        y = _shift(x)
        return -2 * s * y * value(x)

    def hess(x):
        y = _shift(x)
        d = x.shape[0]
        eye = np.eye(d).reshape((d, d) + (1,) * (x.ndim - 1))
        return (4 * s * s * y[:, None] * y[None, :] - 2 * s * eye) * value(x)

    return Manufactured(f"gaussian(w={width})", value, grad, hess)


def odd_gaussian(width: float = 1.0) -> Manufactured:
    """``x^1 exp(-|x|^2 / width^2)``: odd in x^1, vanishes on ``x^1 = 0``."""
    g = gaussian(width=width)

    def value(x):
        return x[0] * g.value(x)

    def grad(x):
        out = x[0] * g.grad(x)
        out[0] += g.value(x)
        return out

    def hess(x):
        out = x[0] * g.hess(x)
        gg = g.grad(x)
        out[0] += gg
        out[:, 0] += gg
        return out

    return Manufactured(f"odd_gaussian(w={width})", value, grad, hess)


def bump(radius: float = 1.0, center=None) -> Manufactured:
    """Smooth compactly supported ``exp(-1/(1 - |x-c|^2/R^2))`` inside the ball."""
    R2 = radius**2

    def _shift(x):
        c = np.zeros(x.shape[0]) if center is None else np.asarray(center, dtype=float)
        return x - c.reshape((-1,) + (1,) * (x.ndim - 1))

    def _q(x):
        y = _shift(x)
        return y, 1.0 - np.sum(y * y, axis=0) / R2

    def value(x):
        _, q = _q(x)
        inside = q > 0
        return np.where(inside, np.exp(-1.0 / np.where(inside, q, 1.0)), 0.0)

    def grad(x):
        y, q = _q(x)
        inside = q > 0
        qs = np.where(inside, q, 1.0)
        return value(x) * (-2 * y / R2) / qs**2

    def hess(x):
        y, q = _q(x)
        d = x.shape[0]
        inside = q > 0
        qs = np.where(inside, q, 1.0)
        qj = -2 * y / R2
        eye = np.eye(d).reshape((d, d) + (1,) * (x.ndim - 1))
        inner = qj[:, None] * qj[None, :] / qs**4 + (-2 * eye / R2) / qs**2 \
            - 2 * qj[:, None] * qj[None, :] / qs**3
        return value(x) * inner

    return Manufactured(f"bump(R={radius})", value, grad, hess)


MANUFACTURED = {
    "gaussian": gaussian,
    "odd_gaussian": odd_gaussian,
    "bump": bump,
}


def forcing(op: EllipticOperator, u: Manufactured, lam: float) -> Callable[[np.ndarray], np.ndarray]:
    """Exact ``L u - lam u`` as a function of the coordinates."""

    def f(x):
        out = np.einsum("jk...,jk...->...", op.a_at(x), u.hess(x))
        if op.b is not None:
            out = out + np.einsum("j...,j...->...", op.b_at(x), u.grad(x))
        if op.c is not None:
            out = out + op.c_at(x) * u.value(x)
        return out - lam * u.value(x)

    return f
