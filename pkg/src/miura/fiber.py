"""The map ``r -> r' + r^2`` on grid data and the preimage set of a potential.

Naming: ``y_plus`` is the principal positive solution at ``+inf`` (the one
that grows slowest there) and ``r_plus`` its log-derivative; ``y_minus`` and
``r_minus`` are the same at ``-inf``. Every positive solution with
``y(0) = 1`` is ``theta * y_plus + (1 - theta) * y_minus``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grid import GridFn, cumulative_quadrature, quadrature
from .potential import Antiderivative, Atom, Potential, antiderivative, coarsen, special_integral
from .schrodinger import (
    CERTIFIED,
    NumericalError,
    QuasiSolution,
    SpectralReport,
    _origin_index,
    is_nonnegative,
    lambda0_line,
    positive_solution,
    tail_rate,
    wronskian,
)

E1, E2 = "E1", "E2"
E_DOT, E_GT = "E_dot", "E_gt"
FINITE, INFINITE, UNDETERMINED = "finite", "infinite", "undetermined"


def forward_miura(r: GridFn, jumps: Sequence[tuple[float, float]] = (), label: Optional[dict] = None) -> Potential:
    """``B(r) = r' + r^2`` presented as ``f = r`` (jumps removed), ``g = r^2`` and one atom per jump.

    ``r`` holds left limits at jump nodes; a jump ``J`` at ``x`` means
    ``r(x+) = r(x-) + J``.
    """
    grid = r.grid
    f = r.values.copy()
    right = r.values.copy()
    atoms = []
    for x, J in sorted(jumps):
        k = grid.index_of(x)
        f[k + 1:] -= J
        right[k] += J
        atoms.append(Atom(float(x), float(J)))
    g = 0.5 * (r.values**2 + right**2)
    atoms = [a for a in atoms if a.w != 0]
    return Potential.from_parts(grid, f=f, g=g, atoms=atoms, label=label or {"kind": "image_of"})


def log_derivative(y: QuasiSolution, Q: Antiderivative) -> GridFn:
    """``r = y'/y = (u + Q y) / y`` using left limits of ``Q``; no numerical differencing."""
    if y.lo != 0 or y.hi != y.grid.n:
        raise ValueError("need a solution on the whole grid")
    if np.any(y.y_scaled <= 0):
        raise NumericalError("log-derivative needs a strictly positive solution")
    return GridFn(y.grid, y.u_scaled / y.y_scaled + Q.Q.values)


def jumps_of(q: Potential) -> list[tuple[float, float]]:
    return [(a.x, a.w) for a in q.atoms]


# ---------------------------------------------------------------------------
# tail model beyond the grid


def tail_integral(s: np.ndarray, y_edge: float, rate: float, k: float) -> np.ndarray:
    """``int_0^s y^-2`` for the tail solution with ``y(0) = y_edge``, ``y'/y(0) = rate`` and ``y'' = k^2 y``.

    ``rate`` is measured pointing away from the grid.
    """
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if k == 0:
            den = 1 + rate * s
            out = s / (y_edge**2 * den)
        else:
            th = np.tanh(k * s)
            one_minus = 2.0 / (np.exp(2 * k * s) + 1.0)
            den = one_minus + ((rate + k) / k) * th
            out = th / (k * y_edge**2 * den)
    return np.where(den > 0, out, np.inf)


def classify_tail(y_edge: float, rate: float, k: float, horizon: float, doublings: int = 20,
                  rate_tol: float = 1e-8, min_ratio: float = 1.9) -> tuple[str, float, dict]:
    """Decide whether ``int y^-2`` over the tail is finite from doubling increments.

    Increments ``dF_j`` over ``[horizon 2^(j-1), horizon 2^j]`` are inspected
    over the last three doublings: decay by at least ``min_ratio`` each time
    means finite, non-decreasing means infinite, anything else undetermined.
    Growth rates within ``rate_tol`` of the principal one are treated as principal.
    """
    growth = rate + k
    if abs(growth) <= rate_tol:
        rate = -k
        growth = 0.0
    elif growth < 0:
        return UNDETERMINED, np.nan, {"reason": "tail solution changes sign", "growth": growth}
    s = horizon * 2.0 ** np.arange(doublings + 1)
    T = tail_integral(np.concatenate(([0.0], s)), y_edge, rate, k)
    dF = np.diff(T)
    last = dF[-4:]
    info = {"growth": growth, "increments": [float(v) for v in last]}
    if not np.all(np.isfinite(last)):
        return INFINITE, np.inf, info
    ratios = np.array([a / b if b > 0 else np.inf for a, b in zip(last[:-1], last[1:])])
    info["ratios"] = [float(v) for v in ratios]
    if np.all(ratios >= min_ratio):
        total = 1.0 / (y_edge**2 * growth) if growth > 0 else np.inf
        return FINITE, float(total), info
    if np.all(last[1:] >= last[:-1]):
        return INFINITE, np.inf, info
    return UNDETERMINED, np.nan, info


def tail_norm_sq(rate: float, k: float) -> float:
    """``int r^2`` over a tail where ``r = y'/y`` starts at ``rate`` (pointing away from the grid)."""
    if k > 0:
        return np.inf
    return max(rate, 0.0)


# ---------------------------------------------------------------------------
# fiber


@dataclass(frozen=True, eq=False)
class FiberReport:
    q: Potential
    y1: QuasiSolution
    F: GridFn
    m_plus: float
    m_plus_flag: str
    m_minus: float
    m_minus_flag: str
    fiber_class: str
    y_plus: QuasiSolution
    y_minus: QuasiSolution
    r_plus: GridFn
    r_minus: GridFn
    lambda0_class: str
    spectral: Optional[SpectralReport]
    lambda0_extrapolated: float
    consistent: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def num(v):
            return None if not np.isfinite(v) else float(v)

        return {
            "fiber_class": self.fiber_class,
            "lambda0_class": self.lambda0_class,
            "m_plus": {"value": num(self.m_plus), "flag": self.m_plus_flag},
            "m_minus": {"value": num(self.m_minus), "flag": self.m_minus_flag},
            "lambda0_extrapolated": self.lambda0_extrapolated,
            "consistent": self.consistent,
            "spectral": self.spectral.as_dict() if self.spectral else None,
            "grid": {"a": self.q.grid.a, "b": self.q.grid.b, "n": self.q.grid.n},
            "details": self.details,
        }


def _class_from_flags(m_plus_flag: str, m_minus_flag: str) -> str:
    if FINITE in (m_plus_flag, m_minus_flag):
        return E2
    if m_plus_flag == INFINITE and m_minus_flag == INFINITE:
        return E1
    return UNDETERMINED


def _extrapolate(L: Sequence[float], lam: Sequence[float]) -> float:
    """Line bottom from box ground energies.

    Fits ``lam_inf + C / (L + d)^2`` exactly through the last three points,
    the shape of a box ground state over an effectively shifted box. Falls back
    to ``lam_inf + c2/L^2 + c3/L^3`` (or two points) when no shift fits.
    """
    L = np.asarray(L[-3:], dtype=float)
    lam = np.asarray(lam[-3:], dtype=float)
    if len(L) == 3:
        d = _fit_shift(L, lam)
        if d is not None:
            C = (lam[0] - lam[2]) / ((L[0] + d) ** -2 - (L[2] + d) ** -2)
            return float(lam[2] - C / (L[2] + d) ** 2)
    cols = [np.ones_like(L), L**-2, L**-3][: len(L)]
    coef = np.linalg.solve(np.column_stack(cols), lam)
    return float(coef[0])


def _fit_shift(L: np.ndarray, lam: np.ndarray) -> Optional[float]:
    def mismatch(d):
        C = (lam[0] - lam[2]) / ((L[0] + d) ** -2 - (L[2] + d) ** -2)
        return lam[1] - (lam[2] - C / (L[2] + d) ** 2 + C / (L[1] + d) ** 2)

    ds = np.concatenate((-L[0] + L[0] * np.logspace(-3, 0, 60)[:-1], L[0] * np.logspace(-3, 2, 120)))
    ds = np.unique(np.concatenate((ds, [0.0])))
    vals = np.array([mismatch(d) for d in ds])
    roots = []
    for i in range(len(ds) - 1):
        if vals[i] == 0:
            roots.append(ds[i])
        elif vals[i] * vals[i + 1] < 0:
            lo, hi, flo = ds[i], ds[i + 1], vals[i]
            for _ in range(100):
                mid = 0.5 * (lo + hi)
                fm = mismatch(mid)
                if fm * flo > 0:
                    lo, flo = mid, fm
                else:
                    hi = mid
            roots.append(0.5 * (lo + hi))
    if not roots:
        return None
    return float(min(roots, key=abs))


def default_L_values(q: Potential) -> list[float]:
    grid = q.grid
    L = min(-grid.a, grid.b)
    out = []
    for frac in (0.5, 0.75, 1.0):
        k = grid.nearest_index(frac * L)
        x = float(grid.x[k])
        if x > 0 and grid.contains(-x) and abs(grid.x[grid.nearest_index(-x)] + x) < 1e-9 * grid.h:
            out.append(x)
    return sorted(set(out))


MIN_RATIO, MAX_RATIO = 1.5, 10.0
PRINCIPAL_FACTOR, FINITE_FACTOR = 3.0, 30.0
# errors in y_+ and y_- are amplified by roughly max(y)/min(y) of each
DATA_FACTOR = 3.0


def _normalised_wronskian(y_plus: QuasiSolution, y_minus: QuasiSolution, x: float) -> float:
    """``W / (y_+ y_-)`` at node ``x``, i.e. ``r_-(x) - r_+(x)``; independent of normalisation."""
    k = y_plus.grid.index_of(x)
    W = wronskian(y_plus, y_minus)[k] / np.exp(y_plus.log_abs_y()[k] + y_minus.log_abs_y()[k])
    return float(W)


def _wronskian_levels(q: Potential, y_plus: QuasiSolution, y_minus: QuasiSolution) -> tuple[list[float], float]:
    """Normalised ``W(y_+, y_-)`` at steps ``h``, ``2h``, ``4h``, all taken at one common node."""
    coarse = []
    for factor in (2, 4):
        qc = coarsen(q, factor)
        if qc is None or not (qc.grid.a < 0 < qc.grid.b):
            break
        try:
            coarse.append((qc, positive_solution(qc, "plus", check=False), positive_solution(qc, "minus", check=False)))
        except (NumericalError, ValueError):
            break
    ref = coarse[-1][0].grid if coarse else q.grid
    x = float(ref.x[ref.nearest_index(0.0)])
    levels = [_normalised_wronskian(y_plus, y_minus, x)]
    levels += [_normalised_wronskian(yp, ym, x) for _, yp, ym in coarse]
    return levels, x


def _principal_both_ways(levels: list[float], rate_tol: float, log_range: float,
                         h: float) -> tuple[Optional[bool], dict]:
    """Decide ``W = 0`` from a refinement sequence, or return ``None`` when it cannot be decided.

    ``W`` depends linearly on the discretisation error, so on resolved data
    successive differences shrink by a steady factor ``rho`` (4 for smooth
    data, 2 at discontinuities) and ``d1 / (rho - 1)`` bounds what is left.

    Refinement only sees the solver error. The node data of ``q`` is itself
    an ``O(h^2)`` approximation, and a change ``dq`` moves ``W`` by the
    integral of ``dq y_+ y_-``; ``exp(log_range) h^2`` stands in for that
    part. It is an order of magnitude, not a bound, so a finite verdict
    only has to clear a few multiples of it.
    """
    w = levels[0]
    data_err = float(np.exp(min(log_range, 700.0))) * h * h
    info = {"levels": levels, "log_range": log_range, "data_error": data_err}
    if abs(w) <= rate_tol:
        return True, info
    if len(levels) < 3:
        info["reason"] = "no refinement sequence"
        return None, info
    d1, d2 = abs(levels[1] - levels[0]), abs(levels[2] - levels[1])
    info["error"] = d1 + d2
    sensitive = abs(w) < DATA_FACTOR * data_err
    # a W that stays put across three resolutions, far from zero, needs no rate to trust it
    if abs(w) >= FINITE_FACTOR * (d1 + d2) and not sensitive:
        return False, info
    ratio = d2 / d1 if d1 > 0 else np.inf
    info["ratio"] = ratio
    if not MIN_RATIO <= ratio <= MAX_RATIO:
        info["reason"] = "refinement not in the asymptotic regime"
        return None, info
    err = d1 / (ratio - 1)
    info["error"] = err
    if abs(w) <= PRINCIPAL_FACTOR * err:
        return True, info
    if abs(w) >= FINITE_FACTOR * err and not sensitive:
        return False, info
    info["reason"] = "W too sensitive to perturbations of q" if sensitive else "Wronskian comparable to its error bar"
    return None, info


def fiber(q: Potential, L_values: Optional[Sequence[float]] = None, class_tol: float = 1e-3,
          rate_tol: float = 1e-8, doublings: int = 20, spectral: bool = True,
          c_schedule: Optional[Sequence[float]] = None) -> FiberReport:
    """Preimage set of ``q``: the two extremal preimages, ``m_+-`` and both classifications.

    ``c_schedule`` lists shot distances ``|c|`` used on both sides to audit the
    principal solutions; the default spreads them over the grid.
    """
    verdict = is_nonnegative(q, witness_eigenvalue=False)
    if verdict.verdict != CERTIFIED:
        raise NumericalError(f"q is not certified nonnegative; the preimage is empty: {verdict.as_dict()}")
    grid = q.grid
    Q = antiderivative(q)
    if c_schedule is None:
        sched = {"plus": None, "minus": None}
    else:
        sched = {side: [float(grid.x[grid.nearest_index(sgn * abs(float(c)))]) for c in c_schedule]
                 for side, sgn in (("plus", 1.0), ("minus", -1.0))}
    y_plus = positive_solution(q, "plus", sched["plus"], check=False)
    y_minus = positive_solution(q, "minus", sched["minus"], check=False)
    r_plus = log_derivative(y_plus, Q)
    r_minus = log_derivative(y_minus, Q)

    y1 = y_plus
    k0 = _origin_index(grid)
    with np.errstate(over="ignore"):
        inv_sq = np.exp(-2 * y1.log_abs_y())
    cum = cumulative_quadrature(GridFn(grid, np.minimum(inv_sq, 1e300))).values
    F = GridFn(grid, cum - cum[k0])

    horizon = max(-grid.a, grid.b)
    ly = y1.log_abs_y()
    # y1 is principal at +inf by construction; it is principal at -inf too iff W(y_+, y_-) = 0
    levels, x_w = _wronskian_levels(q, y_plus, y_minus)
    # a change dq of the potential moves W by the integral of dq y_+ y_-, so the spread of
    # y_+ y_- is how much discretisation error can be amplified in W
    log_range = float(np.ptp(y_plus.log_abs_y() + y_minus.log_abs_y()))
    both, w_info = _principal_both_ways(levels, rate_tol, log_range, grid.h)
    w_info["x"] = x_w
    right = classify_tail(float(np.exp(ly[-1])), float(r_plus.values[-1]), tail_rate(q, "right"),
                          horizon, doublings, rate_tol)
    if both is None:
        left = (UNDETERMINED, np.nan, {"reason": w_info.get("reason")})
    else:
        left = classify_tail(float(np.exp(ly[0])), -float(r_plus.values[0]), tail_rate(q, "left"),
                             horizon, doublings, np.inf if both else 0.0)
    m_plus = F.values[-1] + right[1] if right[0] == FINITE else (np.inf if right[0] == INFINITE else np.nan)
    m_minus = -F.values[0] + left[1] if left[0] == FINITE else (np.inf if left[0] == INFINITE else np.nan)
    fclass = _class_from_flags(right[0], left[0])

    report = None
    extrap = np.nan
    lclass = UNDETERMINED
    if spectral:
        Ls = list(L_values) if L_values is not None else default_L_values(q)
        report = lambda0_line(q, Ls)
        extrap = _extrapolate(report.L_values, report.lambda0_of_L) if len(Ls) > 1 else report.lambda0_estimate
        if abs(extrap) <= class_tol:
            lclass = E_DOT
        elif extrap > class_tol:
            lclass = E_GT
    consistent = not (lclass == E_GT and fclass == E1)
    details = {"tail_right": right[2], "tail_left": left[2], "positive_solution": dict(y_plus.info),
               "rate_tol": rate_tol, "class_tol": class_tol,
               "wronskian": w_info}
    return FiberReport(q, y1, F, float(m_plus), right[0], float(m_minus), left[0], fclass, y_plus, y_minus,
                       r_plus, r_minus, lclass, report, float(extrap), consistent, details)


def fiber_member(report: FiberReport, theta: float) -> GridFn:
    """Log-derivative of ``theta * y_plus + (1 - theta) * y_minus``."""
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    if theta == 1:
        return report.r_plus
    if theta == 0:
        return report.r_minus
    if report.fiber_class == E1:
        raise ValueError("the preimage is a single point; only theta in {0, 1} is meaningful")
    lp = np.log(theta) + report.y_plus.log_abs_y()
    lm = np.log1p(-theta) + report.y_minus.log_abs_y()
    wp = np.exp(lp - np.logaddexp(lp, lm))
    return GridFn(report.q.grid, wp * report.r_plus.values + (1 - wp) * report.r_minus.values)


@dataclass(frozen=True)
class NormTable:
    thetas: tuple
    truncated: tuple
    corrected: tuple
    special_integral: float

    def as_rows(self) -> list[dict]:
        return [{"theta": t, "norm_sq_grid": a, "norm_sq_corrected": b, "special_integral": self.special_integral}
                for t, a, b in zip(self.thetas, self.truncated, self.corrected)]


def fiber_norm_identity(report: FiberReport, thetas: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0)) -> NormTable:
    """``||r_theta||^2`` over the grid, and with the analytic tails beyond it added."""
    q = report.q
    kr, kl = tail_rate(q, "right"), tail_rate(q, "left")
    trunc, corr = [], []
    for th in thetas:
        if report.fiber_class == E1 and 0 < th < 1:
            r = report.r_plus
        else:
            r = fiber_member(report, th)
        n2 = quadrature(forward_miura(r, jumps_of(q)).g)
        trunc.append(n2)
        corr.append(n2 + tail_norm_sq(float(r.values[-1]), kr) + tail_norm_sq(-float(r.values[0]), kl))
    return NormTable(tuple(float(t) for t in thetas), tuple(trunc), tuple(corr), special_integral(q).value)
