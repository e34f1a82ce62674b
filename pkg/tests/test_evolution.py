import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from miura.evolution import (
    BumpTestFunction,
    _bump,
    convergence_probe,
    default_basket,
    evolve,
    gaussian,
    miura_identity_residual,
    mkdv_step,
    periodic_grid,
    push_forward,
    weak_kdv_residual,
)
from miura.grid import GridFn
from miura.schrodinger import is_nonnegative, CERTIFIED

PERIOD = 64 * np.pi


@pytest.fixture(scope="module")
def trace():
    return evolve(gaussian(0.5), 1.0, period=PERIOD, modes=2048)


def test_bump_derivatives_match_symbolic():
    s = sp.symbols("s")
    b = sp.exp(-1 / (1 - s**2))
    derivs = [sp.lambdify(s, sp.diff(b, s, k)) for k in range(4)]
    pts = np.linspace(-0.95, 0.95, 41)
    ours = _bump(pts)
    for k in range(4):
        ref = np.array([derivs[k](p) for p in pts], dtype=float)
        assert np.max(np.abs(ours[k] - ref)) < 1e-10 * max(1.0, np.max(np.abs(ref)))
    outside = _bump(np.array([-1.0, 1.0, 1.5]))
    assert all(np.all(d == 0) for d in outside)


def test_zero_data_stays_zero():
    tr = evolve(lambda x: np.zeros_like(x), 0.5, period=PERIOD, modes=256)
    assert np.all(tr.v_frames == 0) and np.all(tr.u_frames == 0)
    rep = convergence_probe(lambda x: np.zeros_like(x), 0.1, [0.02, 0.01, 0.005], PERIOD, modes=256)
    assert rep.exact


def test_linear_regime_is_exact_airy_flow():
    amp, T = 1e-8, 0.7
    grid = periodic_grid(PERIOD, 1024)
    x = grid.x[:-1]
    v0 = amp * np.exp(-((x / 3.0) ** 2))
    tr = evolve(GridFn(grid, np.append(v0, v0[0])), T, dt=0.05)
    k = 2 * np.pi * np.fft.fftfreq(1024, d=PERIOD / 1024)
    exact = np.fft.ifft(np.exp(1j * k**3 * T) * np.fft.fft(v0)).real
    # the cubic term is amp^3 here, far below the tolerance
    assert np.max(np.abs(tr.v_frames[-1] - exact)) < 1e-9 * amp


def test_time_order_is_four():
    rep = convergence_probe(gaussian(0.5), 1.0, [0.01, 0.005, 0.0025, 0.00125], PERIOD, modes=512)
    assert rep.monotone
    assert all(3.5 < p < 4.5 for p in rep.orders)


def test_space_error_at_machine_floor():
    rep = convergence_probe(gaussian(0.5), 0.5, [2048, 4096, 8192], PERIOD, dt=0.01, kind="space")
    assert max(rep.differences) < 1e-12


def test_invariants(trace):
    assert np.max(np.abs(trace.mass_v - trace.mass_v[0])) < 1e-10
    assert np.max(np.abs(trace.norm_sq_v - trace.norm_sq_v[0])) < 1e-10 * trace.norm_sq_v[0]
    assert np.max(np.abs(trace.special_integral_u - trace.norm_sq_v)) < 1e-6
    assert trace.info["edge_ok"]
    rows = trace.invariant_rows()
    assert rows[0]["time"] == 0.0 and abs(rows[-1]["time"] - 1.0) < 1e-12
    assert abs(rows[0]["l2_v"] ** 2 - rows[0]["special_integral_u"]) < 1e-6


def test_initial_image_is_push_forward(trace):
    v0 = gaussian(0.5)(trace.x)
    assert np.array_equal(trace.v_frames[0], v0)
    assert np.max(np.abs(trace.u_frames[0] - push_forward(v0, PERIOD))) == 0
    x = trace.x
    exact = 0.5 * np.exp(-((x / 5) ** 2)) * (-2 * x / 25) + 0.25 * np.exp(-2 * (x / 5) ** 2)
    assert np.max(np.abs(trace.u_frames[0] - exact)) < 1e-12


def test_frames_of_the_image_are_nonnegative(trace):
    for i in range(0, len(trace.times), max(1, len(trace.times) // 4)):
        assert is_nonnegative(trace.frame_potential(i), witness_eigenvalue=False).verdict == CERTIFIED


def test_weak_residual_detects_a_corrupted_trace(trace):
    basket = default_basket(1.0)
    good = max(r.relative for r in weak_kdv_residual(trace, basket))
    bad = max(r.relative for r in weak_kdv_residual(trace.with_u(1.1 * trace.u_frames), basket))
    assert good < 1e-3
    assert bad >= 10 * good


def test_test_function_must_fit_the_window(trace):
    with pytest.raises(ValueError):
        weak_kdv_residual(trace, [BumpTestFunction(0.5, 0.6, 0.0, 1.0)])
    with pytest.raises(ValueError):
        weak_kdv_residual(trace, [BumpTestFunction(0.5, 0.2, 0.0, PERIOD)])


@given(st.integers(1, 6), st.floats(-2, 2), st.floats(-2, 2))
def test_miura_identity_manufactured(m, a, c):
    period = 2 * np.pi
    x = np.linspace(0, period, 128, endpoint=False)
    v = a * np.sin(m * x) + 0.5 * np.cos(x) + c
    v_t = np.cos(2 * x) - a * np.sin(3 * x)
    res, scale = miura_identity_residual(v, v_t, period)
    assert res <= 1e-10 * max(1.0, scale)


def test_miura_identity_for_constants():
    res, scale = miura_identity_residual(np.full(64, 0.7), np.zeros(64), 2 * np.pi)
    assert res < 1e-13 and scale < 1e-13


def test_single_step_matches_evolve():
    grid = periodic_grid(PERIOD, 256)
    v0 = grid.sample(gaussian(0.5))
    one = mkdv_step(v0, 0.01)
    tr = evolve(v0, 0.01, dt=0.01)
    assert np.max(np.abs(one.values[:-1] - tr.v_frames[-1])) < 1e-15


def test_bad_inputs():
    with pytest.raises(ValueError):
        periodic_grid(PERIOD, 1000)
    with pytest.raises(ValueError):
        evolve(gaussian(0.5), 1.0)
    with pytest.raises(ValueError):
        convergence_probe(gaussian(0.5), 1.0, [0.1, 0.05], PERIOD, modes=256)
