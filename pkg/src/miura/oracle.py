"""Closed-form references and a finite-difference eigen/Green solver.

The numerical core never imports this module. Tests, the acceptance checks
and the reference-error fields of CLI reports use it to compare the engine
with something built differently.

Naming follows the engine: ``y_plus`` is the positive solution that is
principal at ``+inf`` (bounded there for compact wells), ``y_minus`` the one
principal at ``-inf``, and ``y_minus(x) = y_plus(-x)`` for the symmetric kinds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .potential import Potential, antiderivative


def square_well_solution(a: float, b: float, x):
    """Positive solution of ``-y'' + b^2 1_{(-a,a)} y = 0`` equal to ``1/cosh(ab)`` left of the well."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    x = np.asarray(x, dtype=float)
    c = np.cosh(a * b)
    left = np.full_like(x, 1.0 / c)
    mid = np.cosh(b * (np.clip(x, -a, a) + a)) / c
    right = (np.cosh(2 * a * b) + b * (x - a) * np.sinh(2 * a * b)) / c
    out = np.where(x < -a, left, np.where(x > a, right, mid))
    return out if out.ndim else float(out)


def square_well_log_derivative(a: float, b: float, x):
    x = np.asarray(x, dtype=float)
    mid = b * np.tanh(b * (np.clip(x, -a, a) + a))
    right = b * np.sinh(2 * a * b) / (np.cosh(2 * a * b) + b * (x - a) * np.sinh(2 * a * b))
    out = np.where(x < -a, 0.0, np.where(x > a, right, mid))
    return out if out.ndim else float(out)


def delta_fiber(lam: float, theta: float, x):
    """Log-derivative of ``theta*y_plus + (1-theta)*y_minus`` for ``q = lam*delta``.

    Both ``y_plus = 1 - lam*x*H(-x)`` and ``y_minus = 1 + lam*x*H(x)`` equal 1
    at the origin, so the mixture is ``1 + (1-theta) lam x`` for ``x > 0`` and
    ``1 - theta lam x`` for ``x < 0``.
    """
    if lam <= 0 or not 0 <= theta <= 1:
        raise ValueError("need lam > 0 and theta in [0, 1]")
    x = np.asarray(x, dtype=float)
    right = (1 - theta) * lam / (1 + (1 - theta) * lam * np.maximum(x, 0))
    left = -theta * lam / (1 - theta * lam * np.minimum(x, 0))
    out = np.where(x > 0, right, np.where(x < 0, left, np.nan))
    return out if out.ndim else float(out)


def delta_fiber_convex(lam: float, theta: float, x):
    """Convex combination of the two endpoint log-derivatives; only a preimage at theta in {0, 1}."""
    x = np.asarray(x, dtype=float)
    return (1 - theta) * delta_fiber(lam, 0.0, x) + theta * delta_fiber(lam, 1.0, x)


def delta_fiber_norm_sq(lam: float, theta: float) -> float:
    # each half-line tail a/(1 + a s) contributes a
    return (1 - theta) * lam + theta * lam


@dataclass(frozen=True)
class ClosedForm:
    kind: str
    params: dict
    y_plus: Callable
    y_minus: Callable
    r_theta: Callable
    G: Optional[Callable] = None


def closed_form(kind: str, **params) -> ClosedForm:
    if kind == "square_well":
        a, b = params["a"], params["b"]
        yp = lambda x: square_well_solution(a, b, -np.asarray(x, dtype=float))
        ym = lambda x: square_well_solution(a, b, x)
        yp0, ym0 = yp(0.0), ym(0.0)

        def r_theta(x, theta):
            x = np.asarray(x, dtype=float)
            wp, wm = theta * yp(x) / yp0, (1 - theta) * ym(x) / ym0
            dp = -square_well_log_derivative(a, b, -x)
            dm = square_well_log_derivative(a, b, x)
            return (wp * dp + wm * dm) / (wp + wm)

        return ClosedForm(kind, dict(params), yp, ym, r_theta)
    if kind == "delta":
        lam = params["lambda"]
        yp = lambda x: 1 - lam * np.minimum(np.asarray(x, dtype=float), 0)
        ym = lambda x: 1 + lam * np.maximum(np.asarray(x, dtype=float), 0)
        return ClosedForm(kind, dict(params), yp, ym, lambda x, theta: delta_fiber(lam, theta, x))
    if kind == "constant":
        c = params["c"]
        if c <= 0:
            raise ValueError("constant kind needs c > 0; use 'free' for c = 0")
        k = np.sqrt(c)
        yp = lambda x: np.exp(-k * np.asarray(x, dtype=float))
        ym = lambda x: np.exp(k * np.asarray(x, dtype=float))

        def r_theta(x, theta):
            x = np.asarray(x, dtype=float)
            wp, wm = theta * yp(x), (1 - theta) * ym(x)
            return k * (wm - wp) / (wm + wp)

        G = lambda x, y: np.exp(-k * np.abs(np.subtract.outer(x, y))) / (2 * k)
        return ClosedForm(kind, dict(params), yp, ym, r_theta, G)
    if kind == "free":
        one = lambda x: np.ones_like(np.asarray(x, dtype=float))
        return ClosedForm(kind, {}, one, one, lambda x, theta: np.zeros_like(np.asarray(x, dtype=float)))
    raise ValueError(f"unknown closed-form kind {kind!r}")


# ---------------------------------------------------------------------------
# finite differences


def _thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = len(diag)
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0] if n > 1 else 0.0
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i - 1] * c[i - 1]
        if m == 0:
            raise ZeroDivisionError("singular tridiagonal system")
        c[i] = upper[i] / m if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


class FDOracle:
    """Dirichlet FD discretisation ``-D2 + diag(q_i)`` on the interior nodes of an interval.

    ``q_i`` is the cell average ``(Q(x_i + h/2) - Q(x_i - h/2)) / h``; an atom
    of weight ``w`` therefore appears as ``w/h`` on the node nearest to it.
    """

    def __init__(self, q: Potential, interval: tuple[float, float], n: int):
        if n < 100:
            raise ValueError("the FD oracle needs n >= 100")
        lo, hi = map(float, interval)
        if not (q.grid.a <= lo < hi <= q.grid.b):
            raise ValueError("interval must lie inside the potential's grid")
        self.interval, self.n = (lo, hi), n
        self.h = (hi - lo) / n
        self.x = lo + self.h * np.arange(1, n)
        Q = antiderivative(q)
        left = np.maximum(self.x - self.h / 2, q.grid.a)
        right = np.minimum(self.x + self.h / 2, q.grid.b)
        qi = np.array([Q(r, "left") - Q(l, "right") for l, r in zip(left, right)]) / (right - left)
        self.q = qi
        self.diag = 2 / self.h**2 + qi
        self.off = -1 / self.h**2

    def count_below(self, lam: float) -> int:
        """Number of eigenvalues below ``lam`` (negative LDL^T pivots)."""
        e2 = self.off**2
        count = 0
        p = np.inf
        for d in self.diag:
            if p == 0:
                p = 1e-300
            p = d - lam - e2 / p
            if p < 0:
                count += 1
        return count

    def lowest_eigenvalue(self, tol: float = 1e-12) -> float:
        lo = float(np.min(self.diag)) - 2 * abs(self.off)
        hi = float(np.max(self.diag)) + 2 * abs(self.off)
        if self.count_below(lo) != 0:
            raise RuntimeError("Gershgorin bracket failed")
        while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
            mid = 0.5 * (lo + hi)
            if self.count_below(mid) >= 1:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def apply(self, u: np.ndarray) -> np.ndarray:
        """``(-D2 + q) u`` on interior nodes; ``u`` includes both interval endpoints."""
        u = np.asarray(u, dtype=float)
        if len(u) != self.n + 1:
            raise ValueError(f"expected {self.n + 1} samples including endpoints")
        return self.diag * u[1:-1] + self.off * (u[:-2] + u[2:])

    def solve(self, rhs: np.ndarray, shift: float = 0.0) -> np.ndarray:
        m = len(self.diag)
        off = np.full(m - 1, self.off)
        return _thomas(off, self.diag - shift, off, np.asarray(rhs, dtype=float))

    def ground_state(self, lam0: Optional[float] = None, iterations: int = 3) -> np.ndarray:
        """Inverse iteration next to ``lam0``; positive, unit discrete L2 norm."""
        lam0 = self.lowest_eigenvalue() if lam0 is None else lam0
        shift = lam0 - 1e-9 * max(1.0, abs(lam0))
        v = np.ones(len(self.diag))
        for _ in range(iterations):
            v = self.solve(v, shift)
            v /= np.sqrt(np.sum(v * v) * self.h)
        return v if v[np.argmax(np.abs(v))] > 0 else -v

    def green_column(self, y: float) -> np.ndarray:
        """Discrete ``G(., y)``: solve with a unit delta of mass 1 at the node nearest ``y``."""
        j = int(np.argmin(np.abs(self.x - y)))
        rhs = np.zeros(len(self.diag))
        rhs[j] = 1 / self.h
        return self.solve(rhs)


def fd_matrix_oracle(q: Potential, interval: tuple[float, float], n: int) -> FDOracle:
    return FDOracle(q, interval, n)
