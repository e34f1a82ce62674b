"""mKdV on a periodic box and the push-forward ``u = v_x + v^2`` to KdV.

Sign conventions: ``mKdV(v) = v_t - 6 v^2 v_x + v_xxx`` and
``KdV(u) = u_t - 6 u u_x + u_xxx``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .grid import Grid, GridFn, is_power_of_two
from .potential import Potential, special_integral

BLOWUP = 1e6
EDGE_TOL = 1e-12
# narrow enough to be nonlinear, wide enough that dispersive radiation
# stays below EDGE_TOL at the edge of a 64*pi box up to t = 1
DEFAULT_WIDTH = 5.0


def periodic_grid(period: float, modes: int) -> Grid:
    if not is_power_of_two(modes):
        raise ValueError(f"modes must be a power of two, got {modes}")
    return Grid(-period / 2, period / 2, modes)


def _wavenumbers(period: float, modes: int) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(modes, d=period / modes)


def _dealias_mask(modes: int) -> np.ndarray:
    j = np.abs(np.fft.fftfreq(modes, d=1.0 / modes))
    return j <= modes / 3


def _ddx(v: np.ndarray, k: np.ndarray, order: int = 1) -> np.ndarray:
    mult = (1j * k) ** order
    if order % 2:
        mult = mult.copy()
        mult[len(k) // 2] = 0
    return np.fft.ifft(mult * np.fft.fft(v, axis=-1), axis=-1).real


class MkdvStepper:
    """Integrating-factor RK4 for ``v_t = -v_xxx + 2 (v^3)_x``; the linear part is exact in Fourier space."""

    def __init__(self, period: float, modes: int, dt: float):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.period, self.modes, self.dt = float(period), int(modes), float(dt)
        self.k = _wavenumbers(period, modes)
        self.mask = _dealias_mask(modes)
        lin = 1j * self.k**3
        self.E = np.exp(lin * dt / 2)
        self.E2 = self.E**2

    def nonlinear(self, vh: np.ndarray) -> np.ndarray:
        v = np.fft.ifft(vh * self.mask).real
        return 2j * self.k * self.mask * np.fft.fft(v**3)

    def step_hat(self, vh: np.ndarray) -> np.ndarray:
        dt, E, E2, N = self.dt, self.E, self.E2, self.nonlinear
        k1 = N(vh)
        k2 = N(E * (vh + 0.5 * dt * k1))
        k3 = N(E * vh + 0.5 * dt * k2)
        k4 = N(E2 * vh + dt * E * k3)
        return E2 * vh + dt / 6 * (E2 * k1 + 2 * E * (k2 + k3) + k4)


def _check(v: np.ndarray, t: float):
    peak = float(np.max(np.abs(v)))
    if not np.isfinite(peak) or peak > BLOWUP:
        raise FloatingPointError(f"mKdV field blew up at t={t}: sup|v| = {peak}")


def mkdv_step(v: GridFn, dt: float) -> GridFn:
    """One integrating-factor RK4 step of mKdV for periodic samples on ``v.grid``."""
    grid = v.grid
    stepper = MkdvStepper(grid.b - grid.a, grid.n, dt)
    out = np.fft.ifft(stepper.step_hat(np.fft.fft(v.values[:-1]))).real
    _check(out, dt)
    return GridFn(grid, np.append(out, out[0]))


def default_dt(period: float, modes: int) -> float:
    kmax = np.pi * modes / period
    return 0.4 / kmax


def push_forward(v: np.ndarray, period: float) -> np.ndarray:
    """``u = v_x + v^2`` with a spectral derivative (last axis periodic)."""
    k = _wavenumbers(period, v.shape[-1])
    return _ddx(v, k) + v**2


@dataclass(frozen=True, eq=False)
class EvolutionTrace:
    period: float
    modes: int
    dt: float
    times: np.ndarray
    v_frames: np.ndarray
    u_frames: np.ndarray
    norm_sq_v: np.ndarray
    special_integral_u: np.ndarray
    mass_v: np.ndarray
    edge_max: float
    info: dict = field(default_factory=dict)

    @property
    def grid(self) -> Grid:
        return periodic_grid(self.period, self.modes)

    @property
    def x(self) -> np.ndarray:
        return self.grid.x[:-1]

    def v_frame(self, i: int) -> GridFn:
        v = self.v_frames[i]
        return GridFn(self.grid, np.append(v, v[0]))

    def u_frame(self, i: int) -> GridFn:
        u = self.u_frames[i]
        return GridFn(self.grid, np.append(u, u[0]))

    def frame_potential(self, i: int) -> Potential:
        """``u(t_i)`` as ``f' + g`` with ``f = v``, ``g = v^2``."""
        v = self.v_frame(i)
        return Potential.from_parts(self.grid, f=v, g=v * v, label={"kind": "image_of"})

    def with_u(self, u_frames: np.ndarray) -> "EvolutionTrace":
        return EvolutionTrace(self.period, self.modes, self.dt, self.times, self.v_frames, u_frames, self.norm_sq_v,
                              self.special_integral_u, self.mass_v, self.edge_max, dict(self.info))

    def invariant_rows(self) -> list[dict]:
        """One row per frame; ``l2_v`` is the norm itself, so ``special_integral_u`` should equal its square."""
        return [{"time": float(t), "l2_v": float(np.sqrt(a)), "special_integral_u": float(b), "mass_v": float(c)}
                for t, a, b, c in zip(self.times, self.norm_sq_v, self.special_integral_u, self.mass_v)]


def _special_integral_of_u(u: np.ndarray, grid: Grid) -> float:
    q = Potential.from_parts(grid, g=np.append(u, u[0]))
    n_max = int(np.floor(min(-grid.a, grid.b) - 1))
    return special_integral(q, cutoffs=(n_max - 1, n_max)).value


def _edge_max(v: np.ndarray, x: np.ndarray, period: float, frac: float = 0.05) -> float:
    edge = np.abs(x) >= (0.5 - frac) * period
    return float(np.max(np.abs(v[edge]))) if np.any(edge) else 0.0


def evolve(v0: Union[GridFn, Callable[[np.ndarray], np.ndarray]], T: float, dt: Optional[float] = None,
           frame_stride: int = 1, period: Optional[float] = None, modes: Optional[int] = None) -> EvolutionTrace:
    """Run mKdV to time ``T`` and store ``v``, ``u = v_x + v^2`` and the invariants every ``frame_stride`` steps.

    ``v0`` is either periodic samples or a callable evaluated on the box
    ``[-period/2, period/2)`` with ``modes`` points.
    """
    if isinstance(v0, GridFn):
        grid = v0.grid
        period, modes = grid.b - grid.a, grid.n
        if not is_power_of_two(modes):
            raise ValueError("modes must be a power of two")
        v = v0.values[:-1].copy()
    else:
        if period is None or modes is None:
            raise ValueError("a callable initial condition needs period and modes")
        grid = periodic_grid(period, modes)
        v = np.asarray(v0(grid.x[:-1]), dtype=float)
    dt_target = default_dt(period, modes) if dt is None else dt
    nsteps = max(1, int(np.ceil(T / dt_target / frame_stride))) * frame_stride
    step = T / nsteps
    stepper = MkdvStepper(period, modes, step)
    x = grid.x[:-1]
    dx = period / modes

    frames, times = [v.copy()], [0.0]
    vh = np.fft.fft(v)
    for n in range(1, nsteps + 1):
        vh = stepper.step_hat(vh)
        if n % frame_stride == 0:
            v = np.fft.ifft(vh).real
            _check(v, n * step)
            frames.append(v)
            times.append(n * step)
    V = np.array(frames)
    U = push_forward(V, period)
    norm_sq = np.sum(V**2, axis=1) * dx
    mass = np.sum(V, axis=1) * dx
    si = np.array([_special_integral_of_u(u, grid) for u in U])
    edge = max(_edge_max(f, x, period) for f in V)
    info = {"edge_ok": edge < EDGE_TOL, "steps": nsteps}
    return EvolutionTrace(period, modes, step, np.array(times), V, U, norm_sq, si, mass, edge, info)


# ---------------------------------------------------------------------------
# verification functionals


def _bump(s: np.ndarray) -> tuple[np.ndarray, ...]:
    """``exp(-1/(1-s^2))`` on ``|s| < 1`` and its first three derivatives."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    sc = np.where(inside, s, 0.0)
    d = 1 - sc**2
    b = np.where(inside, np.exp(-1 / d), 0.0)
    p1 = -2 * sc / d**2
    p2 = -(2 + 6 * sc**2) / d**3
    p3 = -24 * sc * (1 + sc**2) / d**4
    return b, p1 * b, (p2 + p1**2) * b, (p3 + 3 * p1 * p2 + p1**3) * b


@dataclass(frozen=True)
class BumpTestFunction:
    """``phi(t, x) = bump((t - t0)/tau) * bump((x - x0)/sigma)`` with exact derivatives."""

    t0: float
    tau: float
    x0: float
    sigma: float

    def evaluate(self, t: np.ndarray, x: np.ndarray) -> dict:
        bt = _bump((t - self.t0) / self.tau)
        bx = _bump((x - self.x0) / self.sigma)
        T0, T1 = bt[0][:, None], bt[1][:, None] / self.tau
        X0, X1, X3 = bx[0][None, :], bx[1][None, :] / self.sigma, bx[3][None, :] / self.sigma**3
        return {"phi": T0 * X0, "phi_t": T1 * X0, "phi_x": T0 * X1, "phi_xxx": T0 * X3}

    def support(self):
        return (self.t0 - self.tau, self.t0 + self.tau), (self.x0 - self.sigma, self.x0 + self.sigma)


def default_basket(T: float, center: float = 0.0, scale: float = 8.0) -> list[BumpTestFunction]:
    """Five bumps inside ``(0, T)`` with spatial radii near ``scale`` around ``center``.

    Radii well above the grid step keep the trapezoid rule accurate on the
    third derivative, whose transform decays only like ``exp(-sqrt(k))``.
    """
    layout = [(0.5, 0.45, 0.0, 1.0), (0.5, 0.4, -0.375, 0.8), (0.5, 0.35, 0.375, 1.25),
              (0.5, 0.45, -0.75, 1.125), (0.5, 0.3, 0.5, 0.875)]
    return [BumpTestFunction(tc * T, tw * T, center + xc * scale, sw * scale) for tc, tw, xc, sw in layout]


def _trapezoid_time(values: np.ndarray, times: np.ndarray) -> float:
    return float(np.trapezoid(values, times)) if hasattr(np, "trapezoid") else float(np.trapz(values, times))


@dataclass(frozen=True)
class WeakResidual:
    raw: float
    scale: float

    @property
    def relative(self) -> float:
        return self.raw / self.scale if self.scale > 0 else abs(self.raw)


def weak_kdv_residual(trace: EvolutionTrace, test_functions: Sequence[BumpTestFunction]) -> list[WeakResidual]:
    """``int int (-u phi_t - u phi_xxx + 3 u^2 phi_x) dx dt`` per test function, with its magnitude scale."""
    x, t, U = trace.x, trace.times, trace.u_frames
    dx = trace.period / trace.modes
    out = []
    for tf in test_functions:
        (ta, tb), (xa, xb) = tf.support()
        if ta < t[0] or tb > t[-1] or xa < x[0] or xb > x[-1] + dx:
            raise ValueError(f"test function support {tf.support()} leaves the space-time window")
        d = tf.evaluate(t, x)
        integrand = -U * d["phi_t"] - U * d["phi_xxx"] + 3 * U**2 * d["phi_x"]
        size = np.abs(U * d["phi_t"]) + np.abs(U * d["phi_xxx"]) + 3 * U**2 * np.abs(d["phi_x"])
        raw = _trapezoid_time(integrand.sum(axis=1) * dx, t)
        scale = _trapezoid_time(size.sum(axis=1) * dx, t)
        out.append(WeakResidual(raw, scale))
    return out


def miura_identity_residual(v: np.ndarray, v_t: np.ndarray, period: float) -> tuple[float, float]:
    """Sup of ``KdV(B(v)) - mKdV(v)_x - 2 v mKdV(v)`` and the size of the two sides.

    ``v`` and ``v_t`` are arrays whose last axis holds periodic samples.
    """
    v = np.asarray(v, dtype=float)
    v_t = np.asarray(v_t, dtype=float)
    k = _wavenumbers(period, v.shape[-1])
    vx, vxxx = _ddx(v, k, 1), _ddx(v, k, 3)
    u = vx + v**2
    u_t = _ddx(v_t, k, 1) + 2 * v * v_t
    ux, uxxx = _ddx(u, k, 1), _ddx(u, k, 3)
    kdv = u_t - 6 * u * ux + uxxx
    m = v_t - 6 * v**2 * vx + vxxx
    rhs = _ddx(m, k, 1) + 2 * v * m
    scale = max(float(np.max(np.abs(kdv))), float(np.max(np.abs(rhs))))
    return float(np.max(np.abs(kdv - rhs))), scale


@dataclass(frozen=True)
class ConvergenceReport:
    resolutions: tuple
    differences: tuple
    orders: tuple
    monotone: bool
    exact: bool


def convergence_probe(v0: Callable[[np.ndarray], np.ndarray], T: float, resolutions: Sequence, period: float,
                      modes: Optional[int] = None, dt: Optional[float] = None, kind: str = "time") -> ConvergenceReport:
    """Successive-refinement differences of ``v(T)`` and the observed orders between them.

    ``kind="time"`` takes ``resolutions`` as step sizes at fixed ``modes``;
    ``kind="space"`` takes them as mode counts at fixed ``dt``.
    """
    if len(resolutions) < 3:
        raise ValueError("need at least three resolutions")
    finals = []
    for res in resolutions:
        if kind == "time":
            tr = evolve(v0, T, dt=res, period=period, modes=modes, frame_stride=1)
        elif kind == "space":
            tr = evolve(v0, T, dt=dt, period=period, modes=int(res), frame_stride=1)
        else:
            raise ValueError("kind must be 'time' or 'space'")
        finals.append(tr.v_frames[-1])
    n_common = min(len(f) for f in finals)
    coarse = [_restrict(f, n_common) for f in finals]
    diffs = tuple(float(np.max(np.abs(a - b))) for a, b in zip(coarse, coarse[1:]))
    exact = all(d == 0 for d in diffs)
    orders = []
    for (r1, r2, r3), (d1, d2) in zip(zip(resolutions, resolutions[1:], resolutions[2:]), zip(diffs, diffs[1:])):
        ratio = (r1 / r2) if kind == "time" else (r2 / r1)
        orders.append(float(np.log(d1 / d2) / np.log(ratio)) if d1 > 0 and d2 > 0 else np.inf)
    monotone = all(b <= a for a, b in zip(diffs, diffs[1:]))
    return ConvergenceReport(tuple(resolutions), diffs, tuple(orders), monotone, exact)


def _restrict(v: np.ndarray, n: int) -> np.ndarray:
    """Values at every ``len(v)/n``-th point (same box, coarser sampling)."""
    return v[:: len(v) // n]


def gaussian(amplitude: float, width: float = DEFAULT_WIDTH, center: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    return lambda x: amplitude * np.exp(-((x - center) / width) ** 2)
