"""Rough potentials ``q = f' + g + sum_i w_i delta(x - x_i)`` and functionals of them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .grid import (
    Grid,
    GridFn,
    cumulative_quadrature,
    derivative,
    quadrature,
    spectral_transform,
    trapezoid_weights,
    wavenumbers,
)


@dataclass(frozen=True)
class Atom:
    x: float
    w: float


@dataclass(frozen=True, eq=False)
class Potential:
    """A distribution ``f' + g`` plus point masses, all on one grid.

    ``label`` is an optional closed-form tag such as ``{"kind": "delta", "lambda": 1.0}``.
    """

    grid: Grid
    f: GridFn
    g: GridFn
    atoms: tuple = ()
    label: Optional[dict] = None

    def __post_init__(self):
        if self.f.grid != self.grid or self.g.grid != self.grid:
            raise ValueError("f and g must share the potential's grid")
        atoms = tuple(a if isinstance(a, Atom) else Atom(float(a[0]), float(a[1])) for a in self.atoms)
        prev = -np.inf
        for i, atom in enumerate(atoms):
            if not (self.grid.a < atom.x < self.grid.b):
                raise ValueError(f"atom {i} at x={atom.x} is not strictly inside the grid")
            self.grid.index_of(atom.x)
            if atom.x <= prev:
                raise ValueError("atom locations must be strictly increasing")
            if not np.isfinite(atom.w) or atom.w == 0:
                raise ValueError(f"atom {i} has weight {atom.w}; must be finite and nonzero")
            prev = atom.x
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_parts(cls, grid, f=None, g=None, atoms=(), label=None) -> "Potential":
        def as_fn(v):
            if v is None:
                return grid.zeros()
            return v if isinstance(v, GridFn) else GridFn(grid, v)

        return cls(grid, as_fn(f), as_fn(g), tuple(atoms), label)

    def atom_indices(self) -> list[int]:
        return [self.grid.index_of(a.x) for a in self.atoms]

    def atom_weights_on_nodes(self) -> np.ndarray:
        w = np.zeros(self.grid.n + 1)
        for k, atom in zip(self.atom_indices(), self.atoms):
            w[k] += atom.w
        return w

    def __add__(self, other: "Potential") -> "Potential":
        if other.grid != self.grid:
            raise ValueError("potentials live on different grids")
        merged: dict[float, float] = {}
        for atom in self.atoms + other.atoms:
            merged[atom.x] = merged.get(atom.x, 0.0) + atom.w
        atoms = [Atom(x, w) for x, w in sorted(merged.items()) if w != 0]
        return Potential(self.grid, self.f + other.f, self.g + other.g, tuple(atoms))

    def __mul__(self, c: float) -> "Potential":
        if c == 0:
            return Potential.from_parts(self.grid)
        return Potential(self.grid, self.f * c, self.g * c, tuple(Atom(a.x, a.w * c) for a in self.atoms))

    __rmul__ = __mul__

    def support_radius(self, tol: float = 1e-14) -> float:
        """Smallest ``R`` with every non-negligible sample and atom inside ``[-R, R]``."""
        scale = max(self.f.sup(), self.g.sup(), 1.0)
        mask = (np.abs(self.f.values) > tol * scale) | (np.abs(self.g.values) > tol * scale)
        xs = list(np.abs(self.grid.x[mask])) + [abs(a.x) for a in self.atoms]
        return float(max(xs)) if xs else 0.0

    def edge_value(self, side: str) -> float:
        """Pointwise value of ``f' + g`` at an endpoint, used to model the tail beyond the grid."""
        df = derivative(self.f).values
        k = -1 if side == "right" else 0
        return float(df[k] + self.g.values[k])


def coarsen(q: Potential, factor: int = 2) -> Optional[Potential]:
    """Every ``factor``-th node of ``q``, on the residue class that carries all the atoms.

    Nodes past the last full coarse cell are dropped, so the coarse grid may
    be slightly shorter. Returns ``None`` when the atoms sit in different
    residue classes or fewer than four coarse cells remain.
    """
    grid = q.grid
    residues = {k % factor for k in q.atom_indices()}
    if len(residues) > 1:
        return None
    start = residues.pop() if residues else 0
    idx = np.arange(start, grid.n + 1, factor)
    if len(idx) < 5:
        return None
    coarse = Grid(float(grid.x[idx[0]]), float(grid.x[idx[-1]]), len(idx) - 1)
    return Potential(coarse, GridFn(coarse, q.f.values[idx]), GridFn(coarse, q.g.values[idx]), q.atoms, q.label)


# ---------------------------------------------------------------------------
# named families


def _cell_average_indicator(x: np.ndarray, h: float, lo: float, hi: float) -> np.ndarray:
    """Fraction of ``[x - h/2, x + h/2]`` covered by ``[lo, hi]``."""
    left = np.maximum(x - h / 2, lo)
    right = np.minimum(x + h / 2, hi)
    return np.clip(right - left, 0.0, None) / h


def make_square_well(a_half: float, b_param: float, grid: Grid) -> Potential:
    """``b^2`` on ``(-a, a)``, zero outside; nodes on the edges carry the cell-averaged value."""
    if a_half <= 0 or b_param < 0:
        raise ValueError("square well needs a_half > 0 and b_param >= 0")
    if not (grid.a < -a_half and a_half < grid.b):
        raise ValueError(f"well [-{a_half}, {a_half}] does not fit inside {grid}")
    g = b_param**2 * _cell_average_indicator(grid.x, grid.h, -a_half, a_half)
    label = {"kind": "square_well", "a": float(a_half), "b": float(b_param)}
    return Potential.from_parts(grid, g=g, label=label)


def make_delta(lam: float, location: float, grid: Grid) -> Potential:
    if lam <= 0:
        raise ValueError("delta weight must be positive")
    grid.index_of(location)
    return Potential.from_parts(grid, atoms=[Atom(float(location), float(lam))],
                                label={"kind": "delta", "lambda": float(lam), "x": float(location)})


def make_constant(c: float, grid: Grid) -> Potential:
    return Potential.from_parts(grid, g=np.full(grid.n + 1, float(c)), label={"kind": "constant", "c": float(c)})


# quintic with p(-1)=1, p'(-1)=p''(-1)=0, p(1)=1, p'(1)=1, p''(1)=0; min on [-1, 1] is about 0.605
_BLEND = np.polynomial.Polynomial([11 / 16, -7 / 16, 3 / 8, 5 / 8, -1 / 16, -3 / 16])


def w_profile(x: np.ndarray) -> np.ndarray:
    """Positive profile equal to 1 left of -1 and to ``x`` right of 1."""
    x = np.asarray(x, dtype=float)
    return np.where(x < -1, 1.0, np.where(x > 1, x, _BLEND(np.clip(x, -1, 1))))


def w_profile_potential(x: np.ndarray) -> np.ndarray:
    """``y''/y`` for :func:`w_profile`; vanishes outside ``[-1, 1]``."""
    x = np.asarray(x, dtype=float)
    inside = np.abs(x) <= 1
    xc = np.clip(x, -1, 1)
    return np.where(inside, _BLEND.deriv(2)(xc) / _BLEND(xc), 0.0)


def make_w_eps(eps: float, grid: Grid) -> Potential:
    """The rescaled potential ``eps^2 w(eps x)`` supported on ``[-1/eps, 1/eps]``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if not (grid.a < -1 / eps and 1 / eps < grid.b):
        raise ValueError(f"support [-{1 / eps}, {1 / eps}] does not fit inside {grid}")
    return Potential.from_parts(grid, g=eps**2 * w_profile_potential(eps * grid.x))


def well_center(q: Potential, eps: float) -> float:
    return 2 * q.support_radius() + 2 / eps


def make_well_perturbation(q: Potential, eps: float) -> Potential:
    """Add a well of depth ``eps`` and width ``1/eps`` centred at ``2a + 2/eps``.

    ``a`` is the support radius of ``q``. The grid must also hold the test
    function of :func:`well_test_function`, which reaches ``2a + 3/eps``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    c = well_center(q, eps)
    if c + 1 / eps > q.grid.b:
        raise ValueError(f"grid ends at {q.grid.b}; the well and its test function need {c + 1 / eps}")
    grid = q.grid
    g = -eps * _cell_average_indicator(grid.x, grid.h, c - 1 / (2 * eps), c + 1 / (2 * eps))
    return q + Potential.from_parts(grid, g=g)


def smoothstep(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cubic ramp ``3t^2 - 2t^3`` clipped to [0, 1], with its derivative."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t), 6 * t * (1 - t)


def plateau(x: np.ndarray, inner: float, outer: float, center: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Even bump equal to 1 on ``|x - c| <= inner`` and 0 beyond ``outer``; returns (value, derivative)."""
    s = np.abs(x - center)
    width = outer - inner
    val, d = smoothstep((outer - s) / width)
    return val, -np.sign(x - center) * d / width


def well_test_function(q: Potential, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Test function flat over the well and ramped with slope at most ``3 eps`` (values, derivative)."""
    return plateau(q.grid.x, 1 / (2 * eps), 1 / eps, well_center(q, eps))


def quadratic_form(q: Potential, phi: np.ndarray, dphi: np.ndarray) -> float:
    """``(L_q phi, phi) = int phi'^2 - (f, 2 phi phi') + (g, phi^2) + sum w phi(x_i)^2``."""
    wts = trapezoid_weights(q.grid)
    val = np.dot(wts, dphi**2 - 2 * q.f.values * phi * dphi + q.g.values * phi**2)
    return float(val + np.dot(q.atom_weights_on_nodes(), phi**2))


# ---------------------------------------------------------------------------
# antiderivative


@dataclass(frozen=True, eq=False)
class Antiderivative:
    """``Q = f + int_a^x g + sum_i w_i H(x - x_i)``, stored as left and right limits at nodes."""

    grid: Grid
    Q: GridFn
    jumps: np.ndarray
    f: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    @property
    def Q_right(self) -> np.ndarray:
        return self.Q.values + self.jumps

    def __call__(self, x: float, side: str = "left") -> float:
        """Evaluate ``Q`` between nodes: linear ``f``, exact integral of linear ``g``."""
        grid = self.grid
        s = (x - grid.a) / grid.h
        k = int(np.floor(s))
        if side == "left" and s == k and k > 0:
            k -= 1
        k = int(np.clip(k, 0, grid.n - 1))
        t = x - (grid.a + k * grid.h)
        h = grid.h
        f0, f1 = self.f[k], self.f[k + 1]
        g0, g1 = self.g[k], self.g[k + 1]
        base = self.Q_right[k] - f0
        val = base + f0 + (f1 - f0) * t / h + g0 * t + (g1 - g0) * t * t / (2 * h)
        if t >= h and side == "right":
            val += self.jumps[k + 1]
        return float(val)


def antiderivative(q: Potential) -> Antiderivative:
    steps = np.cumsum(q.atom_weights_on_nodes())
    jumps = q.atom_weights_on_nodes()
    G = cumulative_quadrature(q.g).values
    Q_left = q.f.values + G + steps - jumps
    return Antiderivative(q.grid, GridFn(q.grid, Q_left), jumps, q.f.values, q.g.values)


# ---------------------------------------------------------------------------
# special integral and the Cesaro criterion


@dataclass(frozen=True)
class SpecialIntegral:
    value: float
    exists: bool
    cutoffs: tuple
    values: tuple


def pairing(q: Potential, phi: np.ndarray, dphi: np.ndarray) -> float:
    """``(q, phi) = -(f, phi') + (g, phi) + sum w phi(x_i)``."""
    wts = trapezoid_weights(q.grid)
    return float(np.dot(wts, -q.f.values * dphi + q.g.values * phi) + np.dot(q.atom_weights_on_nodes(), phi))


def special_integral(q: Potential, cutoffs: Optional[Sequence[int]] = None, rtol: float = 1e-6) -> SpecialIntegral:
    """Pair ``q`` with plateau cutoffs (1 on ``[-n, n]``, 0 off ``[-n-1, n+1]``).

    ``exists`` reports whether the two largest cutoffs agree to ``rtol``
    relative to ``max(1, |value|)``.
    """
    if cutoffs is None:
        n_max = int(np.floor(min(-q.grid.a, q.grid.b) - 1))
        if n_max < 2:
            raise ValueError("grid too short for two cutoffs")
        cutoffs = range(max(1, n_max // 2), n_max + 1)
    cutoffs = tuple(int(n) for n in cutoffs)
    x = q.grid.x
    vals = tuple(pairing(q, *plateau(x, n, n + 1)) for n in cutoffs)
    value = vals[-1]
    exists = len(vals) >= 2 and abs(vals[-1] - vals[-2]) <= rtol * max(1.0, abs(value))
    return SpecialIntegral(value, bool(exists), cutoffs, vals)


@dataclass(frozen=True)
class CesaroReport:
    sup: float
    T_values: tuple
    means: tuple
    bounded: bool


def cesaro_diagnostic(Q: Antiderivative, T_values: Iterable[float], threshold: float = 10.0) -> CesaroReport:
    """Largest ``|T^{-1} int_0^T Q|`` over ``+-T`` with ``Q(0) = 0``; ``bounded`` compares it with ``threshold``."""
    grid = Q.grid
    T_values = tuple(float(T) for T in T_values)
    if any(T <= 1 for T in T_values):
        raise ValueError("Cesaro means need T > 1")
    if grid.a > 0 or grid.b < 0:
        raise ValueError("grid must contain the origin")
    x = grid.x
    # Q is only fixed up to a constant; pin Q(0) = 0 so the means measure growth away from the origin
    cum = cumulative_quadrature(Q.Q - float(np.interp(0.0, x, Q.Q.values))).values

    def integral_to(t):
        if not grid.contains(t):
            raise ValueError(f"T={t} outside the grid")
        return np.interp(t, x, cum) - np.interp(0.0, x, cum)

    means = []
    for T in T_values:
        for t in (T, -T):
            means.append(integral_to(t) / t)
    sup = float(np.max(np.abs(means))) if means else 0.0
    return CesaroReport(sup, T_values, tuple(means), sup <= threshold)


# ---------------------------------------------------------------------------
# Fourier splitting


def fourier_split(q: GridFn, cutoff_width: int) -> tuple[GridFn, GridFn]:
    """Split periodic samples as ``q = f' + g`` with ``g`` holding modes ``|j| <= cutoff_width``.

    The Nyquist mode has no usable derivative and is kept in ``g``.
    """
    if cutoff_width < 0:
        raise ValueError("cutoff width must be nonnegative")
    grid = q.grid
    qh = spectral_transform(q)
    n = grid.n
    j = np.fft.fftfreq(n, d=1.0 / n)
    low = np.abs(j) <= cutoff_width
    low[n // 2] = True
    xi = wavenumbers(grid)
    gh = np.where(low, qh, 0)
    fh = np.zeros_like(qh)
    fh[~low] = qh[~low] / (1j * xi[~low])
    f = np.fft.ifft(fh).real
    g = np.fft.ifft(gh).real
    return GridFn(grid, np.append(f, f[0])), GridFn(grid, np.append(g, g[0]))


def spectral_derivative(fn: GridFn, order: int = 1) -> GridFn:
    """Periodic spectral derivative; the Nyquist mode is dropped for odd orders."""
    grid = fn.grid
    xi = wavenumbers(grid)
    mult = (1j * xi) ** order
    if order % 2:
        mult[grid.n // 2] = 0
    d = np.fft.ifft(mult * spectral_transform(fn)).real
    return GridFn(grid, np.append(d, d[0]))


def l2_norm_sq(fn: GridFn) -> float:
    return quadrature(fn * fn)
