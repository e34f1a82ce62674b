import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from miura.fiber import forward_miura
from miura.fixtures import random_compact_r, random_image
from miura.grid import Grid
from miura.oracle import closed_form, fd_matrix_oracle, square_well_solution
from miura.potential import (
    Potential,
    make_constant,
    make_delta,
    make_square_well,
    make_well_perturbation,
)
from miura.schrodinger import (
    CERTIFIED,
    SUBSTEPS,
    NEGATIVE,
    count_zeros,
    dirichlet_lambda0,
    greens_function,
    integrate,
    is_nonnegative,
    lambda0_line,
    positive_solution,
    shot,
    trichotomy_probe,
    wronskian,
    wronskian_scale,
)

G20 = Grid(-20.0, 20.0, 4000)
PI_GRID = Grid(0.0, np.pi, 4000)


def free(grid):
    return Potential.from_parts(grid)


class TestIntegrate:
    def test_constant_solution(self):
        s = integrate(free(G20), 0.0, 0.0, 1.0, 0.0, 20.0)
        np.testing.assert_array_equal(s.y, 1.0)
        np.testing.assert_array_equal(s.u, 0.0)

    def test_sine(self):
        s = integrate(free(PI_GRID), 1.0, 0.0, 0.0, 1.0, np.pi)
        assert np.max(np.abs(s.y - np.sin(s.x))) < 1e-8

    def test_square_well_formula(self):
        grid = Grid(-5.0, 5.0, 10_000)
        q = make_square_well(1.0, 1.0, grid)
        y0 = square_well_solution(1.0, 1.0, -5.0)
        s = integrate(q, 0.0, -5.0, y0, 0.0, 5.0)
        exact = square_well_solution(1.0, 1.0, s.x)
        assert np.max(np.abs(s.y / exact - 1)) < 1e-6

    def test_backwards(self):
        s = integrate(free(PI_GRID), 1.0, np.pi, 0.0, -1.0, 0.0)
        assert np.max(np.abs(s.y - np.sin(s.x))) < 1e-8

    def test_zero_data_rejected(self):
        with pytest.raises(ValueError):
            integrate(free(G20), 0.0, 0.0, 0.0, 0.0, 1.0)

    def test_delta_jump_in_derivative(self):
        q = make_delta(2.0, 0.0, G20)
        s = integrate(q, 0.0, -20.0, 1.0, 0.0, 20.0)
        r = s.x > 0
        np.testing.assert_allclose(s.y[r], 1 + 2 * s.x[r], rtol=1e-12)


@given(st.integers(0, 10_000), st.floats(0.5, 2.0))
def test_wronskian_constant(seed, lam):
    grid = Grid(-10.0, 10.0, 2000)
    q = random_image(np.random.default_rng(seed), grid, compact=bool(seed % 2))[0]
    s1 = integrate(q, lam, -10.0, 0.0, 1.0, 10.0)
    s2 = integrate(q, lam, -10.0, 1.0, 0.0, 10.0)
    W = wronskian(s1, s2)
    # rounding made while the terms were large is carried along, so the floor uses their running maximum
    T = np.maximum.accumulate(wronskian_scale(s1, s2))
    steps = np.arange(len(W)) * SUBSTEPS + 1
    dev = np.abs(W + 1)
    good = T <= 1e6
    assert np.max(dev[good]) < 1e-8
    assert np.all(dev[~good] <= np.finfo(float).eps * T[~good] * steps[~good])


class TestZeros:
    def test_sine_zeros(self):
        grid = Grid(0.0, 3.5 * np.pi, 3500)
        s = integrate(free(grid), 1.0, 0.0, 0.0, 1.0, 3.5 * np.pi)
        assert count_zeros(s, (0.0, 3.5 * np.pi)) == 3

    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_dirichlet_shot(self, k):
        b = k * np.pi + 0.5
        grid = Grid(0.0, b, 4000)
        assert count_zeros(integrate(free(grid), 1.0, 0.0, 0.0, 1.0, b)) == k

    def test_positive_solution_has_none(self):
        y = positive_solution(make_square_well(1.0, 1.0, G20), "plus")
        assert count_zeros(y) == 0

    @given(st.floats(1.0, 12.0), st.floats(0.1, 9.0))
    def test_oscillation_duality(self, b, lam):
        m = b * np.sqrt(lam) / np.pi
        if abs(m - round(m)) < 1e-3:
            return
        grid = Grid(0.0, b, 2000)
        s = integrate(free(grid), lam, 0.0, 0.0, 1.0, b)
        assert count_zeros(s, (0.0, b)) == int(np.floor(m))


class TestTrichotomy:
    def test_sine_up(self):
        s = integrate(free(PI_GRID), 1.0, 0.0, 0.0, 1.0, np.pi)
        assert trichotomy_probe(s, 0.0) == "sign_change_up"
        assert trichotomy_probe(s, np.pi) == "sign_change_down"

    def test_zero_seed(self):
        s = integrate(free(PI_GRID), 1.0, 0.0, 0.0, 1.0, np.pi)
        zero = s.scaled_by(0.0, 0.0)
        assert trichotomy_probe(zero, 0.0) == "identically_zero"

    def test_delta_solution(self):
        q = make_delta(1.0, 0.0, G20)
        s = integrate(q, 0.0, 0.0, 0.0, 1.0, 5.0)
        assert s.y[-1] > 0
        assert trichotomy_probe(s, 0.0) == "sign_change_up"


class TestDirichlet:
    def test_free(self):
        assert dirichlet_lambda0(free(PI_GRID), (0.0, np.pi)) == pytest.approx(1.0, abs=1e-8)

    def test_shift(self):
        q = make_constant(0.7, PI_GRID)
        assert dirichlet_lambda0(q, (0.0, np.pi)) == pytest.approx(1.7, abs=1e-8)

    def test_square_well_vs_fd(self):
        grid = Grid(-10.0, 10.0, 4000)
        q = make_square_well(1.0, 1.0, grid)
        fd = fd_matrix_oracle(q, (-10.0, 10.0), 4000).lowest_eigenvalue()
        assert dirichlet_lambda0(q, (-10.0, 10.0)) == pytest.approx(fd, abs=1e-5)

    @given(st.integers(0, 10_000), st.floats(1.0, 9.0), st.floats(0.0, 1.0))
    def test_monotone_under_inclusion(self, seed, L, extra):
        grid = Grid(-10.0, 10.0, 1000)
        q = random_image(np.random.default_rng(seed), grid)[0]
        inner = dirichlet_lambda0(q, (grid.x[grid.nearest_index(-L)], grid.x[grid.nearest_index(L)]))
        M = min(L + extra, 10.0)
        outer = dirichlet_lambda0(q, (grid.x[grid.nearest_index(-M)], grid.x[grid.nearest_index(M)]))
        assert outer <= inner + 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_engine_agrees_with_fd(self, seed):
        grid = Grid(-10.0, 10.0, 4000)
        q = random_image(np.random.default_rng(seed), grid, compact=False)[0]
        fd = fd_matrix_oracle(q, (-10.0, 10.0), 4000).lowest_eigenvalue()
        assert dirichlet_lambda0(q, (-10.0, 10.0)) == pytest.approx(fd, abs=max(1e-5, 50 * grid.h**2))


class TestLine:
    def test_free_bottom(self):
        grid = Grid(-100.0, 100.0, 2000)
        rep = lambda0_line(free(grid), [25.0, 50.0, 100.0])
        assert 0 < rep.lambda0_estimate < 1e-3
        assert rep.lambda0_estimate == pytest.approx((np.pi / 200) ** 2, rel=1e-6)
        assert rep.nonneg == CERTIFIED

    def test_constant(self):
        grid = Grid(-100.0, 100.0, 2000)
        rep = lambda0_line(make_constant(0.5, grid), [50.0, 100.0])
        assert rep.lambda0_estimate == pytest.approx(0.5, abs=1e-3)

    def test_increasing_L_required(self):
        with pytest.raises(ValueError):
            lambda0_line(free(G20), [10.0, 5.0])


class TestNonnegative:
    def test_examples(self):
        assert is_nonnegative(free(G20)).verdict == CERTIFIED
        assert is_nonnegative(make_square_well(1.0, 1.0, G20)).verdict == CERTIFIED
        grid = Grid(-8.0, 318.0, 16300)
        v = is_nonnegative(make_well_perturbation(free(grid), 0.01))
        assert v.verdict == NEGATIVE and v.witness["lambda0"] < 0

    @given(st.integers(0, 10_000))
    def test_images_certified(self, seed):
        rng = np.random.default_rng(seed)
        q = forward_miura(random_compact_r(rng, G20)) if seed % 2 else random_image(rng, G20, compact=False)[0]
        assert is_nonnegative(q).verdict == CERTIFIED


class TestPositiveSolution:
    def test_free(self):
        for side in ("plus", "minus"):
            np.testing.assert_allclose(positive_solution(free(G20), side).y, 1.0, atol=1e-12)

    def test_square_well(self):
        grid = Grid(-20.0, 20.0, 20_000)
        y = positive_solution(make_square_well(1.0, 1.0, grid), "plus")
        exact = closed_form("square_well", a=1.0, b=1.0).y_plus(y.x)
        exact = exact / exact[grid.index_of(0.0)]
        assert np.max(np.abs(y.y / exact - 1)) < 1e-5

    def test_constant(self):
        grid = Grid(-10.0, 10.0, 2000)
        y = positive_solution(make_constant(1.0, grid), "plus")
        w = np.abs(y.x) <= 5
        assert np.max(np.abs(y.y[w] - np.exp(-y.x[w]))) < 1e-6

    @given(st.integers(0, 10_000))
    def test_shot_monotone_in_c(self, seed):
        q = random_image(np.random.default_rng(seed), G20)[0]
        ys = [shot(q, c).y for c in (2.5, 5.0, 10.0, 20.0)]
        x = G20.x
        for lo, hi in zip(ys, ys[1:]):
            n = min(len(lo), len(hi))
            right = (x[:n] > 0)
            left = (x[:n] < 0)
            assert np.all(hi[:n][right] >= lo[:n][right] * (1 - 1e-10) - 1e-12)
            assert np.all(hi[:n][left] <= lo[:n][left] * (1 + 1e-10) + 1e-12)


class TestGreens:
    def test_constant(self):
        grid = Grid(-10.0, 10.0, 400)
        K = greens_function(make_constant(1.0, grid))
        exact = closed_form("constant", c=1.0).G(grid.x, grid.x)
        assert np.max(np.abs(K.G - exact)) < 1e-5
        assert K.symmetry_defect() < 1e-10

    def test_round_trip(self):
        grid = Grid(-10.0, 10.0, 400)
        q = make_constant(1.0, grid)
        f = np.exp(-grid.x**2)
        u = greens_function(q).apply(f)
        Lu = fd_matrix_oracle(q, (-10.0, 10.0), 400).apply(u)
        assert np.max(np.abs(Lu - f[1:-1])) < 1e-3

    def test_needs_positive_bottom(self):
        from miura.schrodinger import NumericalError

        with pytest.raises(NumericalError):
            greens_function(free(G20))
