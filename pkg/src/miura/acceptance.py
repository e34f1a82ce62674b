"""The twelve end-to-end acceptance checks, shared by the test suite and ``miura selftest``.

Each check returns a :class:`Result`; nothing here raises on a failed
comparison, so a red check still reports what it measured.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import evolution as ev
from .fiber import E1, E2, E_DOT, UNDETERMINED, fiber, fiber_norm_identity, forward_miura
from .fixtures import random_compact_r, random_image
from .grid import Grid, quadrature
from .oracle import closed_form, delta_fiber, fd_matrix_oracle, square_well_solution
from .potential import (
    Potential,
    make_constant,
    make_delta,
    make_square_well,
    make_w_eps,
    make_well_perturbation,
    quadratic_form,
    special_integral,
    well_test_function,
)
from .schrodinger import (
    CERTIFIED,
    NEGATIVE,
    SUBSTEPS,
    dirichlet_lambda0,
    greens_function,
    integrate,
    is_nonnegative,
    lambda0_line,
    wronskian,
    wronskian_scale,
)

SEED = 20240611


@dataclass
class Result:
    number: int
    title: str
    passed: bool
    summary: str
    seconds: float = 0.0
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] C{self.number:02d} {self.title}: {self.summary} ({self.seconds:.2f} s)"


def _timed(fn: Callable[[], Result]) -> Callable[[], Result]:
    def run() -> Result:
        t0 = time.perf_counter()
        res = fn()
        res.seconds = time.perf_counter() - t0
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


def _warm_up():
    g = Grid(-1.0, 1.0, 8)
    integrate(Potential.from_parts(g), 0.0, -1.0, 0.0, 1.0, 1.0)


@_timed
def square_well_reproduction() -> Result:
    _warm_up()
    grid = Grid(-5.0, 5.0, 10000)
    q = make_square_well(1.0, 1.0, grid)
    t0 = time.perf_counter()
    y0 = square_well_solution(1.0, 1.0, -5.0)
    sol = integrate(q, 0.0, -5.0, y0, 0.0, 5.0)
    runtime = time.perf_counter() - t0
    exact = square_well_solution(1.0, 1.0, grid.x)
    err = float(np.max(np.abs(sol.y - exact) / np.abs(exact)))
    ok = err < 1e-6 and runtime < 1.0
    return Result(1, "square-well reproduction", ok, f"sup rel err {err:.2e} < 1e-6, integrate {runtime:.3f} s < 1 s",
                  metrics={"error": err, "runtime": runtime})


@_timed
def delta_fiber_check() -> Result:
    grid = Grid(-20.0, 20.0, 4000)
    q = make_delta(1.0, 0.0, grid)
    rep = fiber(q, spectral=False)
    x = grid.x
    off = x != 0.0
    e_minus = float(np.max(np.abs(rep.r_minus.values - delta_fiber(1.0, 0.0, x))[off]))
    e_plus = float(np.max(np.abs(rep.r_plus.values - delta_fiber(1.0, 1.0, x))[off]))
    table = fiber_norm_identity(rep)
    norm_err = float(np.max(np.abs(np.array(table.corrected) - 1.0)))
    ok = rep.fiber_class == E2 and max(e_minus, e_plus) < 1e-3 and norm_err < 1e-3
    return Result(2, "delta fiber", ok,
                  f"class {rep.fiber_class}, endpoint err {max(e_minus, e_plus):.2e} < 1e-3, "
                  f"|norm^2 - lambda| {norm_err:.2e} < 1e-3",
                  metrics={"class": rep.fiber_class, "endpoint_error": max(e_minus, e_plus), "norm_error": norm_err})


@_timed
def dirichlet_eigenvalues() -> Result:
    g0 = Grid(0.0, np.pi, 2000)
    e0 = abs(dirichlet_lambda0(Potential.from_parts(g0), (0.0, np.pi)) - 1)
    c = 2.5
    ec = abs(dirichlet_lambda0(make_constant(c, g0), (0.0, np.pi)) - 1 - c)
    gs = Grid(-5.0, 5.0, 2000)
    qs = make_square_well(1.0, 1.0, gs)
    engine = dirichlet_lambda0(qs, (-5.0, 5.0))
    fd = fd_matrix_oracle(qs, (-5.0, 5.0), 4000).lowest_eigenvalue()
    es = abs(engine - fd)
    ok = e0 < 1e-8 and ec < 1e-8 and es < 1e-5
    return Result(3, "Dirichlet eigenvalues", ok,
                  f"|l0-1| {e0:.1e}, |l0-1-c| {ec:.1e} < 1e-8; square well vs FD {es:.1e} < 1e-5",
                  metrics={"zero": e0, "shift": ec, "square_well_vs_fd": es})


@_timed
def line_bottom() -> Result:
    grid = Grid(-100.0, 100.0, 4000)
    rng = np.random.default_rng(SEED)
    images = {
        "square_well": make_square_well(1.0, 1.0, grid),
        "delta": make_delta(1.0, 0.0, grid),
        "random_bumps": forward_miura(random_compact_r(rng, grid)),
    }
    worst = 0.0
    values = {}
    for name, q in images.items():
        rep = lambda0_line(q, [50.0, 100.0])
        values[name] = rep.lambda0_estimate
        worst = max(worst, abs(rep.lambda0_estimate))
    c = 0.7
    est_c = lambda0_line(make_constant(c, grid), [50.0, 100.0]).lambda0_estimate
    ok = worst < 1e-3 and abs(est_c - c) < 1e-3
    return Result(4, "line bottom", ok,
                  f"max image l0(L=100) {worst:.2e} < 1e-3; constant |l0 - c| {abs(est_c - c):.2e} < 1e-3",
                  metrics={"images": values, "constant": est_c})


@_timed
def bound_state_detection() -> Result:
    eps = 0.01
    b = 2.0 + 3 / eps + 8.0
    grid = Grid(-8.0, b, int(round((b + 8.0) / 0.02)))
    rng = np.random.default_rng(SEED + 5)
    bases = {"square_well": make_square_well(1.0, 1.0, grid), "random_bumps": forward_miura(random_compact_r(rng, grid))}
    verdicts, forms, worst = {}, {}, 0.0
    for name, q in bases.items():
        t0 = time.perf_counter()
        qe = make_well_perturbation(q, eps)
        v = is_nonnegative(qe)
        worst = max(worst, time.perf_counter() - t0)
        verdicts[name] = v.verdict
        forms[name] = quadratic_form(qe, *well_test_function(q, eps))
    ok = all(v == NEGATIVE for v in verdicts.values()) and worst < 5.0 \
        and all(f <= 18 * eps - 1 for f in forms.values())
    return Result(5, "bound-state detection", ok,
                  f"verdicts {sorted(set(verdicts.values()))}, max form {max(forms.values()):.3f} <= 18eps-1, "
                  f"worst runtime {worst:.2f} s < 5 s",
                  metrics={"verdicts": verdicts, "forms": forms, "runtime": worst})


@_timed
def dichotomy_suite() -> Result:
    grid = Grid(-20.0, 20.0, 4000)
    classes = {"zero": fiber(Potential.from_parts(grid), spectral=False).fiber_class,
               "delta": fiber(make_delta(1.0, 0.0, grid), spectral=False).fiber_class}
    rng = np.random.default_rng(SEED + 6)
    random_classes = [fiber(forward_miura(random_compact_r(rng, grid)), spectral=False).fiber_class for _ in range(5)]
    w_results = {}
    for eps in (0.2, 0.1):
        gw = Grid(-8 / eps, 8 / eps, int(round(800 / eps)))
        rep = fiber(make_w_eps(eps, gw))
        w_results[eps] = (rep.fiber_class, rep.lambda0_class, rep.lambda0_extrapolated)
    ok = (classes["zero"] == E1 and classes["delta"] == E2 and all(c == E1 for c in random_classes)
          and all(r[0] == E2 and r[1] == E_DOT for r in w_results.values()))
    w_txt = ", ".join(f"eps={e}: {r[0]}/{r[1]}" for e, r in w_results.items())
    return Result(6, "dichotomy suite", ok,
                  f"zero {classes['zero']}, delta {classes['delta']}, random {random_classes.count(E1)}/5 E1, {w_txt}",
                  metrics={"fixed": classes, "random": random_classes,
                           "w_eps": {str(k): list(v) for k, v in w_results.items()}})


@_timed
def image_positivity() -> Result:
    grid = Grid(-20.0, 20.0, 4000)
    rng = np.random.default_rng(SEED + 7)
    verdicts = []
    for i in range(20):
        q, _, _ = random_image(rng, grid, compact=bool(i % 2))
        verdicts.append(is_nonnegative(q).verdict)
    n_ok = verdicts.count(CERTIFIED)
    return Result(7, "positivity of the image", n_ok == 20, f"{n_ok}/20 certified", metrics={"verdicts": verdicts})


@_timed
def greens_function_check() -> Result:
    grid = Grid(-10.0, 10.0, 400)
    q = make_constant(1.0, grid)
    K = greens_function(q)
    x = grid.x
    exact = closed_form("constant", c=1.0).G(x, x)
    err = float(np.max(np.abs(K.G - exact)))
    sym = K.symmetry_defect()
    f = np.exp(-x**2) * (1 + 0.5 * np.sin(2 * x))
    u = K.apply(f)
    Lu = fd_matrix_oracle(q, (grid.a, grid.b), grid.n).apply(u)
    inner = slice(1, -1)
    rel = float(np.max(np.abs(Lu - f[inner])) / np.max(np.abs(f)))
    ok = err < 1e-5 and sym < 1e-10 and rel < 1e-3
    return Result(8, "Green's function", ok,
                  f"sup|G - exact| {err:.1e} < 1e-5, symmetry {sym:.1e} < 1e-10, FD round trip {rel:.1e} < 1e-3",
                  metrics={"kernel_error": err, "symmetry": sym, "round_trip": rel})


COND_LIMIT = 1e6


def _wronskian_spread(a, b, ref=None, forward: bool = False) -> tuple[float, float]:
    """Relative drift of W where it is representable, and the drift over the roundoff floor elsewhere.

    Where the cancelling terms exceed ``COND_LIMIT |W|`` double precision cannot
    hold W to 1e-8 whatever the integrator does; there each RK step may add
    about one ulp of those terms, and the drift must stay below that floor.
    For a single forward shot (``forward``) the terms' running maximum is used,
    since rounding made early is carried along.
    """
    W, T = wronskian(a, b), wronskian_scale(a, b)
    if forward:
        T = np.maximum.accumulate(T)
        steps = np.arange(len(W)) * SUBSTEPS + 1
    else:
        T = np.full_like(T, T.max())
        steps = np.full(len(W), len(W) * SUBSTEPS)
    ref = W[len(W) // 2] if ref is None else ref
    dev = np.abs(W - ref)
    good = T <= COND_LIMIT * abs(ref)
    spread = float(np.max(dev[good]) / abs(ref)) if good.any() else np.inf
    bad = ~good
    floor = float(np.max(dev[bad] / (np.finfo(float).eps * T[bad] * steps[bad]))) if bad.any() else 0.0
    return spread, floor


@_timed
def wronskian_constancy() -> Result:
    g20 = Grid(-20.0, 20.0, 4000)
    rng = np.random.default_rng(SEED + 9)
    cases = {
        "square_well": make_square_well(1.0, 1.0, g20),
        "delta": make_delta(1.0, 0.0, g20),
        "w_eps": make_w_eps(0.1, Grid(-40.0, 40.0, 4000)),
        "constant": make_constant(1.0, Grid(-10.0, 10.0, 400)),
    }
    spreads, floors = {}, {}
    for name, q in cases.items():
        if name == "constant":
            K = greens_function(q)
            spreads[name] = K.wronskian_spread
            continue
        rep = fiber(q, spectral=False)
        if rep.fiber_class in (E1, UNDETERMINED):
            continue  # W vanishes; its relative drift is meaningless
        spreads[name], floors[name] = _wronskian_spread(rep.y_plus, rep.y_minus)
    # Cauchy pairs (W starts at exactly -1), including an image with a jump in r
    pairs = {"random_cauchy_pair": random_image(rng, g20)[0],
             "random_jump_cauchy_pair": random_image(np.random.default_rng(SEED + 10), g20, compact=False)[0]}
    for name, q in pairs.items():
        s1 = integrate(q, 0.0, g20.a, 0.0, 1.0, g20.b)
        s2 = integrate(q, 0.0, g20.a, 1.0, 0.0, g20.b)
        spreads[name], floors[name] = _wronskian_spread(s1, s2, ref=-1.0, forward=True)
    worst = max(spreads.values())
    worst_floor = max(floors.values())
    ok = worst < 1e-8 and worst_floor <= 1.0
    return Result(9, "Wronskian constancy", ok,
                  f"worst relative spread {worst:.1e} < 1e-8 over {len(spreads)} pairs; "
                  f"ill-conditioned nodes at {worst_floor:.2f} of the roundoff floor",
                  metrics={"spread": spreads, "roundoff_multiple": floors})


@_timed
def miura_identity() -> Result:
    period, modes = 64 * np.pi, 1024
    grid = ev.periodic_grid(period, modes)
    x = grid.x[:-1]
    t = np.linspace(0.0, 1.0, 11)[:, None]
    A, x0, sigma, omega = 0.8, 1.5, 2.0, 3.0
    env = A * np.exp(-((x - x0) / sigma) ** 2)
    v = env * np.cos(omega * t)
    v_t = -omega * env * np.sin(omega * t)
    res, scale = ev.miura_identity_residual(v, v_t, period)
    rel = res / scale
    return Result(10, "Miura identity", rel < 1e-8, f"relative residual {rel:.1e} < 1e-8",
                  metrics={"residual": res, "scale": scale})


@_timed
def evolution_pipeline() -> Result:
    period, modes, T = 64 * np.pi, 2048, 1.0
    v0 = ev.gaussian(0.5)
    tr = ev.evolve(v0, T, period=period, modes=modes)
    drift = float(np.max(np.abs(tr.norm_sq_v / tr.norm_sq_v[0] - 1)))
    gap = float(np.max(np.abs(tr.special_integral_u - tr.norm_sq_v) / tr.norm_sq_v))
    basket = ev.default_basket(T)
    res = max(abs(r.relative) for r in ev.weak_kdv_residual(tr, basket))
    fine = ev.evolve(v0, T, dt=tr.dt / 2, period=period, modes=2 * modes)
    res_fine = max(abs(r.relative) for r in ev.weak_kdv_residual(fine, basket))
    gain = res / res_fine if res_fine > 0 else np.inf
    frames = np.linspace(0, len(tr.times) - 1, 5).round().astype(int)
    pos = [is_nonnegative(tr.frame_potential(int(i))).verdict for i in frames]
    ok = (drift < 1e-6 and gap < 1e-6 and res < 1e-3 and gain >= 4 and all(p == CERTIFIED for p in pos)
          and tr.info["edge_ok"])
    return Result(11, "evolution pipeline", ok,
                  f"drift {drift:.1e}, |[u]-|v|^2| {gap:.1e} < 1e-6, weak residual {res:.1e} < 1e-3, "
                  f"refinement gain {gain:.0f}x >= 4, {pos.count(CERTIFIED)}/5 frames certified, "
                  f"edge {tr.edge_max:.1e}",
                  metrics={"drift": drift, "gap": gap, "residual": res, "residual_fine": res_fine, "gain": gain,
                           "edge": tr.edge_max})


@_timed
def special_integral_properties() -> Result:
    grid = Grid(-20.0, 20.0, 4000)
    rng = np.random.default_rng(SEED + 12)
    lin = 0.0
    for _ in range(5):
        q1, _, _ = random_image(rng, grid, compact=False)
        q2, _, _ = random_image(rng, grid, compact=True)
        a, b = rng.uniform(-2, 2, size=2)
        lhs = special_integral(q1 * a + q2 * b).value
        rhs = a * special_integral(q1).value + b * special_integral(q2).value
        lin = max(lin, abs(lhs - rhs) / max(1.0, abs(rhs)))
    x = grid.x
    fprime = special_integral(Potential.from_parts(grid, f=2.0 * np.exp(-((x - 0.7) / 1.3) ** 2))).value
    norm_gap = 0.0
    for _ in range(5):
        q, r, jumps = random_image(rng, grid, compact=bool(rng.integers(2)))
        r2 = quadrature(forward_miura(r, jumps).g)
        norm_gap = max(norm_gap, abs(special_integral(q).value - r2))
    ok = lin < 1e-10 and abs(fprime) < 1e-6 and norm_gap < 1e-3
    return Result(12, "special integral", ok,
                  f"linearity {lin:.1e}, |[f']| {abs(fprime):.1e} < 1e-6, |[B(r)] - |r|^2| {norm_gap:.1e} < 1e-3",
                  metrics={"linearity": lin, "f_prime": fprime, "norm_gap": norm_gap})


CRITERIA = (
    square_well_reproduction,
    delta_fiber_check,
    dirichlet_eigenvalues,
    line_bottom,
    bound_state_detection,
    dichotomy_suite,
    image_positivity,
    greens_function_check,
    wronskian_constancy,
    miura_identity,
    evolution_pipeline,
    special_integral_properties,
)


def run_all(echo: Callable[[str], None] = print) -> list[Result]:
    out = []
    for check in CRITERIA:
        res = check()
        echo(res.line())
        out.append(res)
    return out
