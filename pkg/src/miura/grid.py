"""Uniform grids, node samples and the elementary operations on them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Uniform grid with ``n`` intervals on ``[a, b]``."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or not self.a < self.b:
            raise ValueError(f"grid needs finite a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 intervals, got n={self.n}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def x(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n + 1)

    def index_of(self, x: float, tol: float = 1e-9) -> int:
        """Index of the node at ``x``; raises if ``x`` is not a node within ``tol * h``."""
        k = int(round((x - self.a) / self.h))
        if k < 0 or k > self.n or abs(self.a + k * self.h - x) > tol * self.h:
            raise ValueError(f"x={x} is not a node of {self}")
        return k

    def nearest_index(self, x: float) -> int:
        return int(np.clip(round((x - self.a) / self.h), 0, self.n))

    def contains(self, x: float) -> bool:
        return self.a <= x <= self.b

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFn":
        return GridFn(self, func(self.x))

    def zeros(self) -> "GridFn":
        return GridFn(self, np.zeros(self.n + 1))


@dataclass(frozen=True, eq=False)
class GridFn:
    """Node samples of a function on ``grid`` (``n + 1`` finite values)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n + 1,):
            raise ValueError(f"expected {self.grid.n + 1} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function has non-finite samples")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def __len__(self):
        return len(self.values)

    def __add__(self, other):
        return GridFn(self.grid, self.values + _vals(other, self.grid))

    def __sub__(self, other):
        return GridFn(self.grid, self.values - _vals(other, self.grid))

    def __mul__(self, other):
        return GridFn(self.grid, self.values * _vals(other, self.grid))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFn(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def _vals(other, grid: Grid):
    if isinstance(other, GridFn):
        if other.grid != grid:
            raise ValueError("grid functions live on different grids")
        return other.values
    return other


def trapezoid_weights(grid: Grid) -> np.ndarray:
    w = np.full(grid.n + 1, grid.h)
    w[0] = w[-1] = grid.h / 2
    return w


def quadrature(fn: GridFn) -> float:
    """Trapezoid rule over the whole grid."""
    return float(np.dot(trapezoid_weights(fn.grid), fn.values))


def cumulative_quadrature(fn: GridFn) -> GridFn:
    """Running trapezoid integral from the left endpoint (zero at node 0)."""
    v = fn.values
    out = np.concatenate(([0.0], np.cumsum(0.5 * fn.grid.h * (v[1:] + v[:-1]))))
    return GridFn(fn.grid, out)


def derivative(fn: GridFn) -> GridFn:
    """Centred differences inside; one-sided four-point stencils at the two ends.

    The ends use the third-order stencil because the three-point one carries
    an error of a third of ``h^2 |f'''|``, twice the interior one.
    """
    v, h = fn.values, fn.grid.h
    d = np.empty_like(v)
    d[1:-1] = (v[2:] - v[:-2]) / (2 * h)
    if len(v) >= 4:
        d[0] = (-11 * v[0] + 18 * v[1] - 9 * v[2] + 2 * v[3]) / (6 * h)
        d[-1] = (11 * v[-1] - 18 * v[-2] + 9 * v[-3] - 2 * v[-4]) / (6 * h)
    else:
        d[0] = (v[1] - v[0]) / h
        d[-1] = (v[-1] - v[-2]) / h
    return GridFn(fn.grid, d)


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def periodic_samples(fn: GridFn) -> np.ndarray:
    """Samples with the duplicated right endpoint dropped."""
    if not is_power_of_two(fn.grid.n):
        raise ValueError(f"spectral path needs a power-of-two interval count, got {fn.grid.n}")
    return fn.values[:-1]


def spectral_transform(fn: GridFn) -> np.ndarray:
    """Unnormalised DFT of the periodic samples (an impulse maps to all ones)."""
    return np.fft.fft(periodic_samples(fn))


def inverse_spectral_transform(coeffs: np.ndarray, grid: Grid) -> GridFn:
    """Inverse of :func:`spectral_transform`; the real part is returned with the endpoint restored."""
    coeffs = np.asarray(coeffs)
    if len(coeffs) != grid.n or not is_power_of_two(grid.n):
        raise ValueError(f"need {grid.n} coefficients with a power-of-two count")
    v = np.fft.ifft(coeffs).real
    return GridFn(grid, np.append(v, v[0]))


def wavenumbers(grid: Grid) -> np.ndarray:
    """Angular wavenumbers matching :func:`spectral_transform` for period ``b - a``."""
    return 2 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
