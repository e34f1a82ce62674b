"""Solutions, oscillation counts and spectral quantities of ``L_q = -d^2/dx^2 + q``.

Everything runs on the first-order system for ``(y, u)`` with ``u = y' - Q y``
and ``Q' = q``; its coefficients stay bounded even when ``q`` carries atoms.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .grid import Grid, GridFn, trapezoid_weights
from .potential import Antiderivative, Potential, antiderivative, quadratic_form

SUBSTEPS = 4
ZERO_ATOL = 1e-13

CERTIFIED = "certified_nonneg_up_to_truncation"
NEGATIVE = "negative_witness"
UNDETERMINED = "undetermined"


class NumericalError(RuntimeError):
    """A numerical procedure could not produce a trustworthy answer."""


class AmbiguousZero(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


@dataclass(frozen=True, eq=False)
class QuasiSolution:
    """Node values of ``(y, u)`` on nodes ``lo..hi``; true values are ``stored * exp(log_scale)``."""

    grid: Grid
    lo: int
    hi: int
    y_scaled: np.ndarray
    u_scaled: np.ndarray
    log_scale: np.ndarray
    lam: float
    crossings: np.ndarray
    ambiguous: bool = False
    info: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x[self.lo:self.hi + 1]

    @property
    def y(self) -> np.ndarray:
        return self.y_scaled * np.exp(self.log_scale)

    @property
    def u(self) -> np.ndarray:
        return self.u_scaled * np.exp(self.log_scale)

    def log_abs_y(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.y_scaled)) + self.log_scale

    def at(self, x: float) -> tuple[float, float]:
        k = self.grid.index_of(x) - self.lo
        if not 0 <= k <= self.hi - self.lo:
            raise ValueError(f"x={x} outside the solution's range")
        s = np.exp(self.log_scale[k])
        return float(self.y_scaled[k] * s), float(self.u_scaled[k] * s)

    def y_fn(self) -> GridFn:
        if self.lo != 0 or self.hi != self.grid.n:
            raise ValueError("solution does not cover the whole grid")
        return GridFn(self.grid, self.y)

    def u_fn(self) -> GridFn:
        if self.lo != 0 or self.hi != self.grid.n:
            raise ValueError("solution does not cover the whole grid")
        return GridFn(self.grid, self.u)

    def scaled_by(self, log_factor: float, sign: float = 1.0) -> "QuasiSolution":
        return QuasiSolution(self.grid, self.lo, self.hi, sign * self.y_scaled, sign * self.u_scaled,
                             self.log_scale + log_factor, self.lam, self.crossings, self.ambiguous, dict(self.info))


def _cell_bases(q: Potential, Q: Antiderivative) -> np.ndarray:
    return Q.Q_right - q.f.values


def integrate(q: Potential, lam: float, x0: float, y0: float, u0: float, x1: float,
              substeps: int = SUBSTEPS, Q: Optional[Antiderivative] = None) -> QuasiSolution:
    """RK4 shot of ``L_q y = lam y`` from node ``x0`` to node ``x1`` (either direction)."""
    if y0 == 0 and u0 == 0:
        raise ValueError("initial data (0, 0) gives the zero solution")
    grid = q.grid
    i0, i1 = grid.index_of(x0), grid.index_of(x1)
    if i0 == i1:
        raise ValueError("x0 and x1 coincide")
    Q = antiderivative(q) if Q is None else Q
    ys, us, ls, rel, amb = _kernels.shoot(q.f.values, q.g.values, _cell_bases(q, Q), grid.h, i0, i1,
                                          float(lam), float(y0), float(u0), int(substeps), ZERO_ATOL)
    lo, hi = min(i0, i1), max(i0, i1)
    return QuasiSolution(grid, lo, hi, ys, us, ls, float(lam), grid.x[i0] + rel, bool(amb))


def wronskian(s1: QuasiSolution, s2: QuasiSolution) -> np.ndarray:
    """``y1 u2 - y2 u1`` on the common node range (equals ``y1 y2' - y2 y1'``)."""
    lo, hi = max(s1.lo, s2.lo), min(s1.hi, s2.hi)
    a = slice(lo - s1.lo, hi - s1.lo + 1)
    b = slice(lo - s2.lo, hi - s2.lo + 1)
    core = s1.y_scaled[a] * s2.u_scaled[b] - s2.y_scaled[b] * s1.u_scaled[a]
    return core * np.exp(s1.log_scale[a] + s2.log_scale[b])


def wronskian_scale(s1: QuasiSolution, s2: QuasiSolution) -> np.ndarray:
    """``|y1 u2| + |y2 u1|``, the size of the terms cancelling in :func:`wronskian`."""
    lo, hi = max(s1.lo, s2.lo), min(s1.hi, s2.hi)
    a = slice(lo - s1.lo, hi - s1.lo + 1)
    b = slice(lo - s2.lo, hi - s2.lo + 1)
    core = np.abs(s1.y_scaled[a] * s2.u_scaled[b]) + np.abs(s2.y_scaled[b] * s1.u_scaled[a])
    return core * np.exp(s1.log_scale[a] + s2.log_scale[b])


def count_zeros(sol: QuasiSolution, interval: Optional[tuple[float, float]] = None) -> int:
    """Sign changes of ``y`` strictly inside ``interval`` (default: the solution's range)."""
    if sol.ambiguous:
        raise AmbiguousZero("y and u both vanished numerically; the shot is near-degenerate")
    lo, hi = (sol.x[0], sol.x[-1]) if interval is None else interval
    z = sol.crossings
    return int(np.count_nonzero((z > lo) & (z < hi)))


def trichotomy_probe(sol: QuasiSolution, x0: float, atol: float = 1e-10) -> str:
    """Local behaviour of ``y`` at a zero ``x0``, read off the sign of ``u(x0)``."""
    y, u = sol.at(x0)
    scale = float(np.max(np.abs(np.concatenate([sol.y, sol.u]))))
    if scale == 0 or (abs(y) <= atol * scale and abs(u) <= atol * scale):
        return "identically_zero"
    if abs(y) > atol * scale:
        raise ValueError(f"y({x0}) = {y} is not a zero")
    if abs(u) <= atol * scale:
        return UNDETERMINED
    return "sign_change_up" if u > 0 else "sign_change_down"


# ---------------------------------------------------------------------------
# Dirichlet eigenvalues


def _has_zero(q, Q, lam, a, b, substeps):
    sol = integrate(q, lam, a, 0.0, 1.0, b, substeps, Q)
    if sol.ambiguous:
        raise AmbiguousZero(f"degenerate shot at lambda={lam}")
    return sol.crossings.size > 0 or sol.y_scaled[-1] <= 0


def _hat_rayleigh(q: Potential, a: float, b: float) -> float:
    x = q.grid.x
    mid, half = (a + b) / 2, (b - a) / 2
    phi = np.clip(1 - np.abs(x - mid) / half, 0, None)
    dphi = np.where(np.abs(x - mid) < half, -np.sign(x - mid) / half, 0.0)
    return quadratic_form(q, phi, dphi) / float(np.dot(trapezoid_weights(q.grid), phi**2))


def dirichlet_lambda0(q: Potential, interval: tuple[float, float], tol: float = 1e-10,
                      substeps: int = SUBSTEPS, Q: Optional[Antiderivative] = None) -> float:
    """Lowest Dirichlet eigenvalue on ``interval``: the first ``lam`` whose shot from the left end gains a zero."""
    a, b = interval
    if not a < b:
        raise ValueError("interval must have a < b")
    Q = antiderivative(q) if Q is None else Q
    h = q.grid.h
    w = np.abs(q.atom_weights_on_nodes())
    lo = min(0.0, float(q.g.values.min())) - (float(w.max()) / h if w.size else 0.0)
    hi = _hat_rayleigh(q, a, b)
    hi += 1e-6 * max(1.0, abs(hi))
    scan = []
    for _ in range(80):
        flag = _has_zero(q, Q, lo, a, b, substeps)
        scan.append((lo, flag))
        if not flag:
            break
        lo = 2 * lo - 1
    else:
        raise BracketError(f"no zero-free shot found below the spectrum; scan={scan[-5:]}")
    for _ in range(80):
        flag = _has_zero(q, Q, hi, a, b, substeps)
        scan.append((hi, flag))
        if flag:
            break
        hi = 2 * hi + 1
    else:
        raise BracketError(f"no oscillating shot found; scan={scan[-5:]}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _has_zero(q, Q, mid, a, b, substeps):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SpectralReport:
    L_values: tuple
    lambda0_of_L: tuple
    lambda0_estimate: float
    extrapolated: float
    nonneg: str
    witness: Optional[dict]
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "L_values": list(self.L_values),
            "lambda0_of_L": list(self.lambda0_of_L),
            "lambda0_estimate": self.lambda0_estimate,
            "extrapolated": self.extrapolated,
            "nonneg": self.nonneg,
            "witness": self.witness,
            "tolerance": self.tolerance,
        }


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MIURA_THREADS", os.cpu_count() or 1)))
    except ValueError:
        return 1


def lambda0_line(q: Potential, L_values: Sequence[float], tol: float = 1e-8,
                 substeps: int = SUBSTEPS, workers: Optional[int] = None) -> SpectralReport:
    """Dirichlet ground energies on ``(-L, L)`` for each ``L``; they decrease towards the line bottom.

    ``extrapolated`` fits ``lam_inf + C / L^2`` through the last two values,
    the leading behaviour when the line bottom is approached from above by a
    box ground state.
    """
    L_values = tuple(float(L) for L in L_values)
    if any(L2 <= L1 for L1, L2 in zip(L_values, L_values[1:])):
        raise ValueError("L_values must increase")
    Q = antiderivative(q)
    workers = workers or _threads()
    run = lambda L: dirichlet_lambda0(q, (-L, L), substeps=substeps, Q=Q)  # noqa: E731
    if workers > 1 and len(L_values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            lams = tuple(pool.map(run, L_values))
    else:
        lams = tuple(run(L) for L in L_values)
    est = lams[-1]
    if len(lams) >= 2:
        (L1, l1), (L2, l2) = (L_values[-2], lams[-2]), (L_values[-1], lams[-1])
        extrap = (L2**2 * l2 - L1**2 * l1) / (L2**2 - L1**2)
    else:
        extrap = est
    witness = None
    if min(lams) < -tol:
        i = int(np.argmin(lams))
        witness = {"interval": [-L_values[i], L_values[i]], "lambda0": lams[i]}
        verdict = NEGATIVE
    else:
        verdict = CERTIFIED
    return SpectralReport(L_values, lams, est, float(extrap), verdict, witness, tol)


@dataclass(frozen=True)
class NonnegVerdict:
    verdict: str
    interval: tuple
    witness: Optional[dict] = None

    def as_dict(self):
        return {"verdict": self.verdict, "interval": list(self.interval), "witness": self.witness}


def is_nonnegative(q: Potential, interval: Optional[tuple[float, float]] = None,
                   substeps: int = SUBSTEPS, witness_eigenvalue: bool = True) -> NonnegVerdict:
    """Disconjugacy test: the zero-energy shot vanishing at the left end stays positive.

    The verdict only speaks for the tested interval (the whole grid by default).
    """
    a, b = (q.grid.a, q.grid.b) if interval is None else interval
    Q = antiderivative(q)
    sol = integrate(q, 0.0, a, 0.0, 1.0, b, substeps, Q)
    if sol.ambiguous:
        return NonnegVerdict(UNDETERMINED, (a, b), {"reason": "ambiguous zero in the zero-energy shot"})
    if sol.crossings.size == 0 and sol.y_scaled[-1] > 0:
        return NonnegVerdict(CERTIFIED, (a, b))
    first = float(sol.crossings[0]) if sol.crossings.size else float(b)
    witness = {"interval": [a, b], "first_zero": first, "zeros": int(sol.crossings.size)}
    if witness_eigenvalue:
        witness["lambda0"] = dirichlet_lambda0(q, (a, b), substeps=substeps, Q=Q)
    return NonnegVerdict(NEGATIVE, (a, b), witness)


# ---------------------------------------------------------------------------
# positive solutions


def _origin_index(grid: Grid) -> int:
    if grid.a <= 0 <= grid.b:
        return grid.nearest_index(0.0)
    return grid.n // 2


def _normalize(sol: QuasiSolution, k: int) -> QuasiSolution:
    """Scale so that ``y = 1`` at node ``k``."""
    j = k - sol.lo
    yk = sol.y_scaled[j]
    if yk == 0:
        raise ConvergenceError("solution vanishes at the normalisation node")
    return sol.scaled_by(-(np.log(abs(yk)) + sol.log_scale[j]), float(np.sign(yk)))


def shot(q: Potential, c: float, Q: Optional[Antiderivative] = None, substeps: int = SUBSTEPS) -> QuasiSolution:
    """Solution of ``L_q y = 0`` with ``y(c) = 0`` normalised to ``y(0) = 1``, on the side of ``c`` facing 0."""
    grid = q.grid
    end = grid.a if c > 0 else grid.b
    sol = integrate(q, 0.0, c, 0.0, 1.0, end, substeps, Q)
    return _normalize(sol, _origin_index(grid))


def tail_rate(q: Potential, side: str, tol: float = 1e-10) -> float:
    """Decay rate ``sqrt(q_edge)`` of the principal solution when ``q`` is continued by its edge value."""
    c = q.edge_value(side)
    if c < -tol:
        raise NumericalError(f"potential is negative ({c}) at the {side} edge; the tail oscillates")
    return float(np.sqrt(max(c, 0.0)))


def closed_tail_solution(q: Potential, side: str, Q: Optional[Antiderivative] = None,
                         substeps: int = SUBSTEPS) -> QuasiSolution:
    """Principal solution at ``+inf`` (side ``plus``) or ``-inf`` (``minus``) under the edge continuation."""
    grid = q.grid
    Q = antiderivative(q) if Q is None else Q
    if side == "plus":
        k = tail_rate(q, "right")
        x0, x1, slope, Qe = grid.b, grid.a, -k, Q.Q.values[-1]
    elif side == "minus":
        k = tail_rate(q, "left")
        x0, x1, slope, Qe = grid.a, grid.b, k, Q.Q_right[0]
    else:
        raise ValueError("side must be 'plus' or 'minus'")
    sol = integrate(q, 0.0, x0, 1.0, slope - Qe, x1, substeps, Q)
    return _normalize(sol, _origin_index(grid))


def default_c_schedule(grid: Grid, side: str) -> list[float]:
    ends = grid.b if side == "plus" else grid.a
    raw = [ends / 8, ends / 4, ends / 2, ends]
    return [grid.x[grid.nearest_index(c)] for c in raw if grid.nearest_index(c) != _origin_index(grid)]


def positive_solution(q: Potential, side: str = "plus", c_schedule: Optional[Sequence[float]] = None,
                      window: Optional[tuple[float, float]] = None, check: bool = True,
                      substeps: int = SUBSTEPS, slack: float = 1e-12) -> QuasiSolution:
    """Principal positive solution at ``+inf`` or ``-inf``, normalised to 1 at the origin.

    The limit of the shots ``y_c`` (``y(c) = 0``) is taken in closed form by
    matching the decaying tail of the edge-continued potential at the grid end.
    The finite shots of ``c_schedule`` audit that limit: their distance to it
    on ``window`` must shrink monotonically, and each must stay below it for
    ``x`` beyond the origin (towards ``c``) as monotonicity in ``c`` demands.
    """
    if check:
        verdict = is_nonnegative(q, substeps=substeps, witness_eigenvalue=False)
        if verdict.verdict != CERTIFIED:
            raise NumericalError(f"L_q is not certified nonnegative on the grid: {verdict.as_dict()}")
    grid = q.grid
    Q = antiderivative(q)
    limit = closed_tail_solution(q, side, Q, substeps)
    if np.any(limit.y_scaled <= 0):
        raise ConvergenceError("closed-tail solution is not positive; truncation too short")
    schedule = list(default_c_schedule(grid, side) if c_schedule is None else c_schedule)
    if any((c <= 0) if side == "plus" else (c >= 0) for c in schedule):
        raise ValueError("c_schedule must lie on the chosen side of the origin")
    schedule = sorted(schedule, key=abs)
    if window is None:
        half = min(abs(schedule[0]), -grid.a if side == "plus" else grid.b) / 2 if schedule else 1.0
        window = (-half, half)
    mask = (limit.x >= window[0]) & (limit.x <= window[1])
    ref = limit.y[mask]
    gaps, iterates = [], []
    sgn = 1.0 if side == "plus" else -1.0
    for c in schedule:
        s = shot(q, c, Q, substeps)
        ys = s.y[_window_mask(s, window)]
        if np.any(ys <= 0):
            raise ConvergenceError(f"shot with c={c} is not positive on the window")
        if ys.shape != ref.shape:
            raise ValueError("window must lie inside every shot's range")
        gaps.append(float(np.max(np.abs(ys - ref)) / np.max(np.abs(ref))))
        beyond = sgn * limit.x[mask] > 0
        if np.any(ys[beyond] > ref[beyond] * (1 + slack) + slack):
            raise ConvergenceError(f"shot with c={c} overshoots the limit on the side of c")
        iterates.append(c)
    for g1, g2 in zip(gaps, gaps[1:]):
        if g2 > g1 + slack:
            raise ConvergenceError(f"shots do not approach the closed-tail limit: gaps={gaps}")
    limit.info.update({"side": side, "c_schedule": iterates, "gaps": gaps, "window": list(window),
                       "tail_rate": tail_rate(q, "right" if side == "plus" else "left")})
    return limit


def _window_mask(sol: QuasiSolution, window) -> np.ndarray:
    return (sol.x >= window[0]) & (sol.x <= window[1])


# ---------------------------------------------------------------------------
# Green's function


@dataclass(frozen=True, eq=False)
class GreenKernel:
    grid: Grid
    G: np.ndarray
    y_plus: QuasiSolution
    y_minus: QuasiSolution
    wronskian: float
    wronskian_spread: float

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.G @ (trapezoid_weights(self.grid) * f)

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.G - self.G.T)) / np.max(np.abs(self.G)))


def greens_function(q: Potential, check: bool = True, tol: float = 1e-8,
                    substeps: int = SUBSTEPS) -> GreenKernel:
    """``G(x, y) = y_-(min) y_+(max) / W`` built from the principal solutions at both ends."""
    grid = q.grid
    if check:
        L = min(-grid.a, grid.b)
        lam = dirichlet_lambda0(q, (grid.x[grid.nearest_index(-L)], grid.x[grid.nearest_index(L)]),
                                substeps=substeps)
        if lam <= tol:
            raise NumericalError(f"lowest eigenvalue {lam} on the grid is not positive; no Green's function")
    yp = positive_solution(q, "plus", check=False, substeps=substeps)
    ym = positive_solution(q, "minus", check=False, substeps=substeps)
    W = wronskian(yp, ym)
    w0 = float(W[_origin_index(grid)])
    scale = float(np.exp(yp.log_abs_y()[_origin_index(grid)] + ym.log_abs_y()[_origin_index(grid)]))
    if abs(w0) < 1e-10 * max(scale, 1.0):
        raise NumericalError(f"Wronskian {w0} vanishes; positive solutions nearly dependent")
    lp, lm = yp.log_abs_y(), ym.log_abs_y()
    i = np.arange(grid.n + 1)
    lo_idx = np.minimum.outer(i, i)
    hi_idx = np.maximum.outer(i, i)
    G = np.exp(lm[lo_idx] + lp[hi_idx] - np.log(w0))
    spread = float(np.max(np.abs(W - w0)) / abs(w0))
    return GreenKernel(grid, G, yp, ym, w0, spread)
