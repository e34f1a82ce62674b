import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from miura.fiber import forward_miura
from miura.fixtures import random_compact_r, random_image
from miura.grid import Grid, GridFn, derivative, quadrature
from miura.potential import (
    Atom,
    Potential,
    antiderivative,
    cesaro_diagnostic,
    coarsen,
    fourier_split,
    make_constant,
    make_delta,
    make_square_well,
    make_w_eps,
    make_well_perturbation,
    quadratic_form,
    special_integral,
    well_test_function,
)

G20 = Grid(-20.0, 20.0, 4000)


class TestFamilies:
    def test_square_well_mass(self):
        assert quadrature(make_square_well(1.0, 1.0, G20).g) == pytest.approx(2.0, abs=1e-12)
        b = np.sqrt(1 / (2 * 0.5))
        assert quadrature(make_square_well(0.5, b, G20).g) == pytest.approx(1.0, abs=G20.h**2)
        assert make_square_well(1.0, 0.0, G20).g.sup() == 0

    def test_delta(self):
        q = make_delta(1.0, 0.0, G20)
        assert q.atoms == (Atom(0.0, 1.0),)
        Q = antiderivative(make_delta(2.0, 0.0, G20))
        k = G20.index_of(0.0)
        assert Q.Q_right[k] - Q.Q.values[k] == 2.0
        assert special_integral(q).value == pytest.approx(1.0, abs=1e-14)

    def test_delta_off_node(self):
        with pytest.raises(ValueError):
            make_delta(1.0, 0.003, G20)

    def test_w_eps_scaling(self):
        def norm(eps):
            g = Grid(-2 / eps, 2 / eps, int(400 / eps))
            return np.sqrt(quadrature(make_w_eps(eps, g).g * make_w_eps(eps, g).g))

        assert norm(0.1) / norm(0.2) == pytest.approx(2 ** -1.5, rel=0.01)

    def test_well_perturbation(self):
        eps = 0.01
        grid = Grid(-8.0, 2 + 3 / eps + 8, int((3 / eps + 18) / 0.02))
        zero = Potential.from_parts(grid)
        q = make_well_perturbation(zero, eps)
        assert quadrature(q.g) == pytest.approx(-1.0, abs=grid.h)
        assert quadrature(q.g * q.g) == pytest.approx(eps, rel=1e-3)
        phi, dphi = well_test_function(zero, eps)
        assert quadratic_form(q, phi, dphi) <= 18 * eps - 1

    def test_well_perturbation_needs_room(self):
        with pytest.raises(ValueError):
            make_well_perturbation(Potential.from_parts(G20), 0.01)


class TestAntiderivative:
    def test_heaviside(self):
        Q = antiderivative(make_delta(1.0, 0.0, G20))
        x = G20.x
        np.testing.assert_array_equal(Q.Q.values, np.where(x > 0, 1.0, 0.0))

    def test_constant_slope(self):
        Q = antiderivative(make_constant(3.0, G20))
        np.testing.assert_allclose(np.diff(Q.Q.values), 3.0 * G20.h, rtol=1e-12)

    def test_square_well_rise(self):
        Q = antiderivative(make_square_well(1.0, 1.0, G20))
        assert Q.Q.values[-1] - Q.Q.values[0] == pytest.approx(2.0, abs=1e-12)

    @given(st.integers(0, 10_000))
    def test_differentiation_recovers_q(self, seed):
        rng = np.random.default_rng(seed)
        grid = Grid(-10.0, 10.0, 2000)
        x = grid.x
        f = rng.uniform(-1, 1) * np.exp(-((x - rng.uniform(-3, 3)) / 1.5) ** 2)
        g = rng.uniform(-1, 1) * np.exp(-(x / 2) ** 2)
        q = Potential.from_parts(grid, f=f, g=g, atoms=[Atom(float(x[1000]), 0.7)])
        Q = antiderivative(q)
        dQ = derivative(Q.Q).values
        exact = derivative(GridFn(grid, f)).values + g
        away = np.abs(x - x[1000]) > 2 * grid.h
        assert np.max(np.abs(dQ - exact)[away]) < 50 * grid.h**2


class TestSpecialIntegral:
    def test_square_well(self):
        b = np.sqrt(1 / (2 * 0.5))
        assert special_integral(make_square_well(0.5, b, G20)).value == pytest.approx(1.0, abs=G20.h**2)

    def test_derivative_of_gaussian(self):
        f = np.exp(-(G20.x / 1.3) ** 2)
        res = special_integral(Potential.from_parts(G20, f=f))
        assert abs(res.value) < 1e-6 and res.exists

    @given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
    def test_linear(self, seed, a, b):
        rng = np.random.default_rng(seed)
        q1 = random_image(rng, G20, compact=False)[0]
        q2 = random_image(rng, G20)[0]
        lhs = special_integral(q1 * a + q2 * b).value
        rhs = a * special_integral(q1).value + b * special_integral(q2).value
        assert lhs == pytest.approx(rhs, abs=1e-10 * (1 + abs(rhs)))

    @given(st.integers(0, 10_000))
    def test_image_has_norm_square(self, seed):
        r = random_compact_r(np.random.default_rng(seed), G20)
        val = special_integral(forward_miura(r)).value
        assert val >= -1e-10
        assert val == pytest.approx(quadrature(r * r), abs=1e-3)


class TestCesaro:
    def test_heaviside(self):
        rep = cesaro_diagnostic(antiderivative(make_delta(1.0, 0.0, G20)), [2, 5, 10, 19])
        assert rep.sup <= 1 + 1e-12 and rep.bounded

    def test_linear_growth(self):
        rep = cesaro_diagnostic(antiderivative(make_constant(2.0, G20)), [2, 5, 10, 19])
        assert rep.sup == pytest.approx(19.0, rel=1e-3)
        assert not rep.bounded

    def test_zero(self):
        assert cesaro_diagnostic(antiderivative(Potential.from_parts(G20)), [2, 10]).sup == 0


class TestFourierSplit:
    grid = Grid(-np.pi, np.pi, 256)

    def test_high_mode(self):
        q = self.grid.sample(lambda x: np.cos(40 * x))
        f, g = fourier_split(q, 10)
        assert g.sup() < 1e-12
        np.testing.assert_allclose(f.values, np.sin(40 * self.grid.x) / 40, atol=1e-13)

    def test_low_mode(self):
        q = self.grid.sample(lambda x: np.cos(3 * x))
        f, g = fourier_split(q, 10)
        assert f.sup() < 1e-13
        np.testing.assert_allclose(g.values, q.values, atol=1e-13)

    @given(st.floats(0.2, 1.0), st.integers(0, 60))
    def test_reconstruction(self, width, cut):
        from miura.potential import spectral_derivative

        q = self.grid.sample(lambda x: np.exp(-(x / width) ** 2))
        f, g = fourier_split(q, cut)
        rec = spectral_derivative(f) + g
        assert (rec - q).sup() < 1e-10 * q.sup()


def test_coarsen_keeps_atoms_on_nodes():
    q = make_delta(1.0, 0.0, Grid(-2.01, 2.0, 401))
    c = coarsen(q, 2)
    assert c is not None and c.atoms == q.atoms
    c.grid.index_of(0.0)
    mixed = Potential.from_parts(G20, atoms=[Atom(float(G20.x[10]), 1.0), Atom(float(G20.x[11]), 1.0)])
    assert coarsen(mixed, 2) is None


def test_atoms_validated():
    with pytest.raises(ValueError):
        Potential.from_parts(G20, atoms=[Atom(0.0, 0.0)])
    with pytest.raises(ValueError):
        Potential.from_parts(G20, atoms=[Atom(1.0, 1.0), Atom(0.0, 1.0)])
