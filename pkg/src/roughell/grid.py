"""Box grids, sampled fields and the finite-difference / Fourier primitives.

Axis 0 plays the role of x^1.  A whole-space problem truncates R^d to a
box that is non-periodic in x^1 (homogeneous Dirichlet values at both
ends) and periodic in every x' axis, so that the Fourier reduction in x'
is exact on the grid.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

__all__ = [
    "BoxGrid",
    "GridFunction",
    "diff",
    "gradient",
    "hessian",
    "lp_norm",
    "forward_modes",
    "inverse_modes",
    "frequencies",
    "save_grid_function",
    "load_grid_function",
    "write_csv",
]

_RANKS = ("scalar", "vector", "matrix")
_MAGIC = b"RGHGRID1"


@dataclass(frozen=True)
class BoxGrid:
    """Tensor-product grid on ``prod_i [lo_i, hi_i]``.

    Periodic axes hold ``n`` nodes ``lo + i*h`` with ``h = (hi - lo)/n``;
    non-periodic axes hold ``n`` nodes including both end points, with
    ``h = (hi - lo)/(n - 1)``.
    """

    extents: tuple[tuple[float, float], ...]
    sizes: tuple[int, ...]
    periodic: tuple[bool, ...]

    def __post_init__(self):
        extents = tuple((float(lo), float(hi)) for lo, hi in self.extents)
        sizes = tuple(int(n) for n in self.sizes)
        periodic = tuple(bool(p) for p in self.periodic)
        if not (len(extents) == len(sizes) == len(periodic)) or not sizes:
            raise ValueError("extents, sizes and periodic must have the same nonzero length")
        for lo, hi in extents:
            if not lo < hi:
                raise ValueError(f"empty axis extent [{lo}, {hi}]")
        if min(sizes) < 4:
            raise ValueError("every axis needs at least 4 nodes")
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "periodic", periodic)

    @classmethod
    def whole_space(cls, x1_extent, xprime_extents, sizes) -> "BoxGrid":
        """Non-periodic x^1 axis followed by periodic x' axes."""
        extents = (tuple(x1_extent),) + tuple(tuple(e) for e in xprime_extents)
        return cls(extents, tuple(sizes), (False,) + (True,) * len(xprime_extents))

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n if per else n - 1)
            for (lo, hi), n, per in zip(self.extents, self.sizes, self.periodic)
        )

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.extents]))

    def axis(self, i: int) -> np.ndarray:
        lo, _ = self.extents[i]
        return lo + self.spacing[i] * np.arange(self.sizes[i])

    @cached_property
    def _coords(self) -> np.ndarray:
        c = np.stack(np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij"))
        c.setflags(write=False)
        return c

    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(d, n_1, ..., n_d)`` (read-only)."""
        return self._coords

    def axis_weights(self, i: int) -> np.ndarray:
        """Quadrature weights along one axis: rectangle rule if periodic,
        trapezoid otherwise (so that the weights sum to the axis length)."""
        w = np.full(self.sizes[i], self.spacing[i])
        if not self.periodic[i]:
            w[0] *= 0.5
            w[-1] *= 0.5
        return w

    def refine(self, factor: int = 2) -> "BoxGrid":
        """Nested refinement: every old node stays a node."""
        sizes = tuple(
            n * factor if per else (n - 1) * factor + 1 for n, per in zip(self.sizes, self.periodic)
        )
        return BoxGrid(self.extents, sizes, self.periodic)

    def index_of(self, axis: int, value: float) -> int:
        """Index of the node closest to ``value`` along ``axis``."""
        return int(np.argmin(np.abs(self.axis(axis) - value)))

    def zeros(self, rank: str = "scalar") -> "GridFunction":
        lead = {"scalar": (), "vector": (self.dim,), "matrix": (self.dim, self.dim)}[rank]
        return GridFunction(self, np.zeros(lead + self.shape, dtype=complex), rank)

    def sample(self, fn, rank: str = "scalar") -> "GridFunction":
        """Evaluate ``fn(coords)`` on the nodes; ``coords`` has shape ``(d, *shape)``."""
        return GridFunction(self, np.asarray(fn(self.coords()), dtype=complex), rank)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Sampled field on a :class:`BoxGrid`.

    Values are stored as complex arrays with component axes first:
    ``shape`` for scalars, ``(d, *shape)`` for vectors and ``(d, d, *shape)``
    for matrices.  The value array is read-only after construction.
    """

    grid: BoxGrid
    values: np.ndarray
    rank: str = "scalar"
    symmetric: bool = field(default=False)

    def __post_init__(self):
        if self.rank not in _RANKS:
            raise ValueError(f"unknown rank {self.rank!r}")
        lead = {"scalar": (), "vector": (self.grid.dim,), "matrix": (self.grid.dim, self.grid.dim)}
        values = np.array(self.values, dtype=complex)
        expected = lead[self.rank] + self.grid.shape
        if values.shape != expected:
            raise ValueError(f"value shape {values.shape} does not match {expected}")
        if self.symmetric:
            if self.rank != "matrix":
                raise ValueError("only matrix-rank functions can be flagged symmetric")
            if not np.allclose(values, np.swapaxes(values, 0, 1), rtol=0, atol=1e-12 * (1 + np.abs(values).max())):
                raise ValueError("matrix data flagged symmetric is not symmetric")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def magnitude(self) -> np.ndarray:
        """Pointwise modulus (Euclidean for vectors, Frobenius for matrices)."""
        v = np.abs(self.values)
        if self.rank == "scalar":
            return v
        axes = (0,) if self.rank == "vector" else (0, 1)
        return np.sqrt(np.sum(v**2, axis=axes))

    def real_part(self, tol: float = 1e-10) -> np.ndarray:
        """Real part, after asserting the imaginary residue is below ``tol``
        relative to the field's magnitude."""
        scale = max(1.0, float(np.abs(self.values).max(initial=0.0)))
        residue = float(np.abs(self.values.imag).max(initial=0.0))
        if residue > tol * scale:
            raise ValueError(f"imaginary residue {residue:.3e} exceeds {tol:.1e}")
        return self.values.real.copy()

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values, self.rank)

    def _check_compatible(self, other: "GridFunction"):
        if other.grid != self.grid or other.rank != self.rank:
            raise ValueError("grid functions live on different grids or have different ranks")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


# ---------------------------------------------------------------------------
# finite differences (array level; reused by the operator and the assembler)


def _d1(v: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(v, -1, axis) - np.roll(v, 1, axis)) / (2 * h)
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * h)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def _d2(v: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(v, -1, axis) - 2 * v + np.roll(v, 1, axis)) / h**2
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def diff(u: GridFunction, axis: int, order: int = 1) -> GridFunction:
    """Central difference of a scalar field along ``axis``.

    Periodic axes wrap around; non-periodic axes use second-order one-sided
    stencils at the two end nodes.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if u.rank != "scalar":
        raise ValueError("diff expects a scalar grid function")
    if not 0 <= axis < u.grid.dim:
        raise ValueError(f"axis {axis} out of range for a {u.grid.dim}-d grid")
    op = _d1 if order == 1 else _d2
    return u.with_values(op(u.values, axis, u.grid.spacing[axis], u.grid.periodic[axis]))


def _first_derivatives(u: np.ndarray, grid: BoxGrid) -> list[np.ndarray]:
    return [_d1(u, j, grid.spacing[j], grid.periodic[j]) for j in range(grid.dim)]


def _second_derivatives(u: np.ndarray, grid: BoxGrid, first=None) -> np.ndarray:
    d = grid.dim
    first = _first_derivatives(u, grid) if first is None else first
    out = np.empty((d, d) + u.shape, dtype=complex)
    for j in range(d):
        out[j, j] = _d2(u, j, grid.spacing[j], grid.periodic[j])
        for k in range(j + 1, d):
            out[j, k] = _d1(first[k], j, grid.spacing[j], grid.periodic[j])
            out[k, j] = out[j, k]
    return out


def gradient(u: GridFunction) -> GridFunction:
    return GridFunction(u.grid, np.stack(_first_derivatives(u.values, u.grid)), "vector")


def hessian(u: GridFunction) -> GridFunction:
    """All second derivatives; mixed entries compose two first differences."""
    return GridFunction(u.grid, _second_derivatives(u.values, u.grid), "matrix", symmetric=True)


# ---------------------------------------------------------------------------
# norms


def _region_weights(grid: BoxGrid, region) -> tuple[tuple[slice, ...], np.ndarray]:
    slices, weights = [], []
    for i in range(grid.dim):
        bounds = None if region is None else region[i]
        if bounds is None:
            slices.append(slice(None))
            weights.append(grid.axis_weights(i))
            continue
        lo, hi = bounds
        tol = 1e-9 * grid.spacing[i]
        x = grid.axis(i)
        idx = np.nonzero((x >= lo - tol) & (x <= hi + tol))[0]
        if idx.size == 0:
            raise ValueError(f"region selects no nodes along axis {i}")
        w = np.full(idx.size, grid.spacing[i])
        if not grid.periodic[i] and idx.size > 1:
            w[0] *= 0.5
            w[-1] *= 0.5
        slices.append(slice(int(idx[0]), int(idx[-1]) + 1))
        weights.append(w)
    full = weights[0]
    for w in weights[1:]:
        full = np.multiply.outer(full, w)
    return tuple(slices), full


def lp_norm(u: GridFunction, p: float = 2.0, region=None) -> float:
    """Discrete L_p norm ``(sum |u|^p w)^(1/p)``.

    ``region`` is an optional per-axis list of ``(lo, hi)`` bounds (``None``
    for a whole axis).  Non-periodic axes use trapezoid weights on the
    selected range, periodic axes the rectangle rule.  ``p = inf`` gives the
    max norm over the region.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    slices, w = _region_weights(u.grid, region)
    mag = u.magnitude()[slices]
    if np.isinf(p):
        return float(mag.max())
    scale = float(mag.max())
    if scale == 0.0:
        return 0.0
    return scale * float(np.sum((mag / scale) ** p * w)) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Fourier modes along periodic axes


def frequencies(grid: BoxGrid, axis: int) -> np.ndarray:
    """Angular frequencies ``2*pi*k/(hi - lo)`` in FFT order."""
    lo, hi = grid.extents[axis]
    n = grid.sizes[axis]
    return 2 * np.pi * np.fft.fftfreq(n, d=1.0 / n) / (hi - lo)


def _check_periodic(grid: BoxGrid, axes: Sequence[int]) -> tuple[int, ...]:
    axes = tuple(sorted(set(int(a) for a in axes)))
    for a in axes:
        if not grid.periodic[a]:
            raise ValueError(f"axis {a} is not periodic")
    return axes


def _field_axes(u: GridFunction, axes):
    lead = {"scalar": 0, "vector": 1, "matrix": 2}[u.rank]
    return tuple(a + lead for a in axes)


def forward_modes(u: GridFunction, axes: Sequence[int]) -> GridFunction:
    """Unitary DFT along the given periodic axes (FFT frequency order).

    With the unitary scaling the discrete Parseval identity
    ``sum |u|^2 = sum |u_hat|^2`` holds along the transformed axes.
    """
    axes = _check_periodic(u.grid, axes)
    return u.with_values(np.fft.fftn(u.values, axes=_field_axes(u, axes), norm="ortho"))


def inverse_modes(u: GridFunction, axes: Sequence[int]) -> GridFunction:
    axes = _check_periodic(u.grid, axes)
    return u.with_values(np.fft.ifftn(u.values, axes=_field_axes(u, axes), norm="ortho"))


# ---------------------------------------------------------------------------
# serialization


def save_grid_function(path, u: GridFunction) -> None:
    """Flat binary container.

    Layout (little endian): magic ``RGHGRID1``; ``u32`` dim, ``u32`` rank
    code; per axis ``i64`` size, ``f64`` lo, ``f64`` hi, ``u8`` periodic;
    then the values as complex64 (re, im) float32 pairs in C order.
    """
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", g.dim, _RANKS.index(u.rank)))
        for (lo, hi), n, per in zip(g.extents, g.sizes, g.periodic):
            fh.write(struct.pack("<qddB", n, lo, hi, int(per)))
        fh.write(np.ascontiguousarray(u.values, dtype="<c8").tobytes())


def load_grid_function(path) -> GridFunction:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not a grid-function container")
        dim, rank_code = struct.unpack("<II", fh.read(8))
        extents, sizes, periodic = [], [], []
        rec = struct.calcsize("<qddB")
        for _ in range(dim):
            n, lo, hi, per = struct.unpack("<qddB", fh.read(rec))
            extents.append((lo, hi))
            sizes.append(n)
            periodic.append(bool(per))
        payload = fh.read()
    grid = BoxGrid(tuple(extents), tuple(sizes), tuple(periodic))
    rank = _RANKS[rank_code]
    lead = {"scalar": (), "vector": (dim,), "matrix": (dim, dim)}[rank]
    values = np.frombuffer(payload, dtype="<c8").reshape(lead + grid.shape)
    return GridFunction(grid, values.astype(complex), rank)


def write_csv(path, u: GridFunction) -> None:
    """CSV dump for d <= 2: coordinates followed by (re, im) per component."""
    g = u.grid
    if g.dim > 2:
        raise ValueError("CSV export is only defined for d <= 2")
    comps = u.values.reshape((-1,) + g.shape)
    names = [f"x{i + 1}" for i in range(g.dim)]
    if comps.shape[0] == 1:
        names += ["re", "im"]
    else:
        names += [f"{part}_{c}" for c in range(comps.shape[0]) for part in ("re", "im")]
    x = g.coords().reshape(g.dim, -1)
    flat = comps.reshape(comps.shape[0], -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for n in range(x.shape[1]):
            row = [repr(float(v)) for v in x[:, n]]
            for c in range(flat.shape[0]):
                row += [repr(float(flat[c, n].real)), repr(float(flat[c, n].imag))]
            w.writerow(row)
