import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from miura.grid import (
    Grid,
    GridFn,
    cumulative_quadrature,
    derivative,
    inverse_spectral_transform,
    quadrature,
    spectral_transform,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_quadrature_examples():
    assert quadrature(Grid(0, 1, 10).sample(np.ones_like)) == pytest.approx(1.0, abs=1e-15)
    assert quadrature(Grid(0, 2, 4).sample(lambda x: x)) == pytest.approx(2.0, abs=1e-15)
    assert quadrature(Grid(0, 1, 1000).sample(lambda x: x**2)) == pytest.approx(1 / 3, abs=1e-6)


def test_derivative_examples():
    g = Grid(0, 2 * np.pi, 1000)
    assert derivative(g.sample(lambda x: 0 * x + 3)).sup() == 0
    np.testing.assert_allclose(derivative(g.sample(lambda x: x)).values, 1.0, atol=1e-12)
    assert (derivative(g.sample(np.sin)) - g.sample(np.cos)).sup() < 1e-5


def test_spectral_examples():
    g = Grid(0, 1, 16)
    impulse = np.zeros(17)
    impulse[0] = impulse[-1] = 1.0
    np.testing.assert_allclose(spectral_transform(GridFn(g, impulse)), np.ones(16))
    k = 3
    mode = spectral_transform(g.sample(lambda x: np.cos(2 * np.pi * k * x)))
    big = np.flatnonzero(np.abs(mode) > 1e-9)
    assert set(big) == {k, 16 - k}


def test_spectral_requires_power_of_two():
    with pytest.raises(ValueError):
        spectral_transform(Grid(0, 1, 12).zeros())


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        Grid(1.0, 0.0, 10)
    with pytest.raises(ValueError):
        GridFn(Grid(0, 1, 4), np.array([0, 1, np.nan, 0, 0.0]))
    with pytest.raises(ValueError):
        Grid(0, 1, 4).index_of(0.1)


@given(arrays(float, 33, elements=finite), arrays(float, 33, elements=finite), finite, finite)
def test_quadrature_linear(a, b, s, t):
    g = Grid(-1, 3, 32)
    lhs = quadrature(GridFn(g, s * a + t * b))
    rhs = s * quadrature(GridFn(g, a)) + t * quadrature(GridFn(g, b))
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + abs(s) + abs(t)) * 1e3)


@given(arrays(float, 21, elements=st.floats(0, 1e3)))
def test_quadrature_monotone(a):
    assert quadrature(GridFn(Grid(0, 1, 20), a)) >= 0


@given(st.floats(0.2, 3.0), st.floats(-2, 2))
def test_discrete_fundamental_theorem(w, c):
    g = Grid(-4, 4, 2000)
    fn = g.sample(lambda x: np.exp(-((x - c) / w) ** 2) + 0.1 * x)
    lhs = quadrature(derivative(fn))
    scale = 1 + 1 / w**3
    assert abs(lhs - (fn.values[-1] - fn.values[0])) < 10 * g.h**2 * scale


@given(arrays(float, 64, elements=finite))
def test_spectral_round_trip(v):
    g = Grid(0, 2, 64)
    fn = GridFn(g, np.append(v, v[0]))
    back = inverse_spectral_transform(spectral_transform(fn), g)
    assert np.max(np.abs(back.values - fn.values)) <= 1e-12 * max(1.0, fn.sup())


def test_cumulative_quadrature_ends_at_total():
    fn = Grid(0, 1, 50).sample(np.exp)
    assert cumulative_quadrature(fn).values[-1] == pytest.approx(quadrature(fn), rel=1e-15)
