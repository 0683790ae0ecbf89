"""Dual functional, its gradient and the Nehari fibering machinery."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_field
from nlmaxwell.dual_energy import (
    DegenerateDirectionError,
    DivergenceError,
    energy_increment,
    fibering_gamma,
    j1,
    j_energy,
    j_grad,
    nehari_project,
    nehari_residual,
    nehari_scale,
    power_fiber_constants,
    quad_form,
    reduced_j,
)
from nlmaxwell.field_core import GridSpec, VectorField, gradient, helmholtz_project, inv_laplacian, l2_inner
from nlmaxwell.material import NonlinearityModel, WeightSpec

GRID = GridSpec(8, 8.0)
seeds = st.integers(0, 2**32 - 1)
MODELS = {
    "pure": NonlinearityModel("pure_power", 4.0, WeightSpec(2.0)),
    "double": NonlinearityModel("double_power", 3.0, WeightSpec(2.0), q=5.0),
}
PURE = MODELS["pure"]


def solenoidal(seed, grid=GRID):
    return helmholtz_project(random_field(grid, np.random.default_rng(seed)))


def sine_e2(grid):
    x = grid.mesh()[0]
    data = np.zeros((3,) + grid.shape)
    data[1] = np.sin(2.0 * np.pi * x / grid.l)
    return VectorField(grid, data)


def closed_form_t(P, m):
    a, b = power_fiber_constants(P, m)
    return (a / b) ** (1.0 / (2.0 - m.p_conj))


class TestEnergy:
    def test_zero_field(self):
        e = j_energy(VectorField.zeros(GRID), PURE)
        assert (e.j1, e.quad, e.j) == (0.0, 0.0, 0.0)

    def test_j1_of_unit_constant(self, flat4):
        g = GridSpec(4, 3.0)
        zero = np.zeros(g.shape)
        P = VectorField.from_components(g, np.ones(g.shape), zero, zero)
        assert j1(P, flat4) == pytest.approx(0.75 * g.l**3, rel=1e-14)

    def test_quad_of_single_mode(self):
        g = GridSpec(8, 5.0)
        assert quad_form(sine_e2(g)) == pytest.approx((g.l / (2 * np.pi)) ** 2 * g.l**3 / 2, rel=1e-12)

    @given(seed=seeds)
    def test_j1_midpoint_convexity(self, seed):
        rng = np.random.default_rng(seed)
        P, Q = random_field(GRID, rng), random_field(GRID, rng)
        assert j1((P + Q) * 0.5, PURE) <= 0.5 * (j1(P, PURE) + j1(Q, PURE)) * (1 + 1e-14)

    @given(seed=seeds)
    def test_quad_symmetric_bilinear(self, seed):
        rng = np.random.default_rng(seed)
        P, Q = random_field(GRID, rng), random_field(GRID, rng)
        b_pq = 0.25 * (quad_form(P + Q) - quad_form(P - Q))
        scale = quad_form(P) + quad_form(Q)
        assert abs(b_pq - l2_inner(inv_laplacian(Q), P)) <= 1e-12 * scale
        assert abs(l2_inner(inv_laplacian(P), Q) - l2_inner(inv_laplacian(Q), P)) <= 1e-12 * scale
        assert quad_form(P * 3.0) == pytest.approx(9.0 * quad_form(P), rel=1e-12)

    @given(seed=seeds, t=st.sampled_from([0.5, 2.0]))
    def test_power_homogeneity(self, seed, t):
        P = solenoidal(seed)
        e = j_energy(P, PURE)
        expect = t**PURE.p_conj * e.j1 - 0.5 * t**2 * e.quad
        assert j_energy(P * t, PURE).j == pytest.approx(expect, rel=1e-11, abs=1e-11 * e.j1)

    @given(seed=seeds, log_eps=st.floats(-12, 0))
    def test_energy_increment_matches_difference(self, seed, log_eps):
        rng = np.random.default_rng(seed)
        P = solenoidal(seed)
        Q = P + random_field(GRID, rng) * 10.0**log_eps
        for m in MODELS.values():
            direct = j_energy(Q, m).j - j_energy(P, m).j
            scale = abs(j_energy(P, m).j)
            assert abs(energy_increment(P, Q, m) - direct) <= 1e-12 * scale + 1e-9 * abs(direct)


class TestGradient:
    def test_requires_divergence_free(self):
        P = gradient(np.random.default_rng(0).standard_normal(GRID.shape), GRID)
        with pytest.raises(DivergenceError):
            j_grad(P + solenoidal(1), PURE)

    def test_quadratic_part_on_single_mode(self):
        g = GridSpec(8, 5.0)
        P = sine_e2(g)
        # the quadratic part contributes -(-Lap)^{-1} P = -(l/2pi)^2 P
        assert (inv_laplacian(P) * -1.0 - P * -((g.l / (2 * np.pi)) ** 2)).norm() < 1e-12 * P.norm()

    @pytest.mark.parametrize("name", list(MODELS))
    @given(seed=seeds)
    def test_directional_derivative(self, name, seed):
        m = MODELS[name]
        P, V = solenoidal(seed), solenoidal(seed + 1)
        exact = l2_inner(j_grad(P, m), V)
        errs = []
        for h in (1e-3, 1e-4, 1e-5, 1e-6):
            fd = (j_energy(P + V * h, m).j - j_energy(P - V * h, m).j) / (2 * h)
            errs.append(abs(fd - exact) / abs(exact))
        assert min(errs) <= 1e-5


class TestFibering:
    @given(seed=seeds)
    def test_slope_vs_central_difference(self, seed):
        P = solenoidal(seed)
        t = nehari_scale(P, PURE).t_star * 0.7
        h = 1e-4 * t
        gp = fibering_gamma(P, PURE, t)[1]
        fd = (fibering_gamma(P, PURE, t + h)[0] - fibering_gamma(P, PURE, t - h)[0]) / (2 * h)
        assert abs(fd - gp) <= 1e-7 * max(1.0, abs(gp))

    @given(seed=seeds, t=st.floats(0.05, 5.0))
    def test_closed_form_gamma(self, seed, t):
        P = solenoidal(seed)
        a, b = power_fiber_constants(P, PURE)
        pc = PURE.p_conj
        expect = t**pc * a / pc - 0.5 * t**2 * b
        got = fibering_gamma(P, PURE, t)[0]
        assert abs(got - expect) <= 1e-11 * max(1.0, t**pc * a / pc)

    def test_positive_near_zero(self):
        for seed in range(5):
            assert fibering_gamma(solenoidal(seed), PURE, 1e-6)[0] > 0

    def test_rejects_nonpositive_t(self):
        with pytest.raises(ValueError):
            fibering_gamma(solenoidal(0), PURE, 0.0)

    @given(seed=seeds)
    def test_scale_matches_closed_form(self, seed):
        P = solenoidal(seed)
        t_cl = closed_form_t(P, PURE)
        res = nehari_scale(P, PURE)
        assert abs(res.t_star - t_cl) <= 1e-10 * t_cl
        assert res.bracket <= 1e-12 * res.t_star * 2

    def test_single_mode_analytic(self, flat4):
        # |P| = |sin|, so a = int |sin|^{4/3} and b = (l/2pi)^2 l^3 / 2 in closed form on the grid
        g = GridSpec(8, 5.0)
        P = sine_e2(g)
        s = np.abs(np.sin(2 * np.pi * g.coords / g.l))
        a = g.h * np.sum(s ** (4.0 / 3.0)) * g.l**2
        b = (g.l / (2 * np.pi)) ** 2 * g.l**3 / 2
        t_cl = (a / b) ** (1.0 / (2.0 - 4.0 / 3.0))
        assert nehari_scale(P, flat4).t_star == pytest.approx(t_cl, rel=1e-10)

    @given(seed=seeds, c=st.sampled_from([0.5, 2.0, 10.0]))
    def test_scale_homogeneity(self, seed, c):
        P = solenoidal(seed)
        t = nehari_scale(P, PURE).t_star
        assert nehari_scale(P * c, PURE).t_star * c == pytest.approx(t, rel=1e-10)

    def test_degenerate_direction(self):
        with pytest.raises(DegenerateDirectionError):
            nehari_scale(VectorField.zeros(GRID), PURE)


class TestNehari:
    @pytest.mark.parametrize("name", list(MODELS))
    @given(seed=seeds)
    def test_projection_properties(self, name, seed):
        m = MODELS[name]
        P = solenoidal(seed) * 3.0
        N = nehari_project(P, m)
        assert nehari_residual(N, m) <= 1e-9
        assert (nehari_project(N, m) - N).norm() <= 1e-9 * N.norm()
        assert (nehari_project(P * 0.2, m) - N).norm() <= 1e-9 * N.norm()

    @given(seed=seeds)
    def test_reduced_functional(self, seed):
        P = solenoidal(seed)
        val = reduced_j(P, PURE)
        assert val > 0
        for c in (0.1, 7.0):
            assert reduced_j(P * c, PURE) == pytest.approx(val, rel=1e-9)
        a, b = power_fiber_constants(P, PURE)
        pc = PURE.p_conj
        closed = (1 / pc - 0.5) * a ** (2 / (2 - pc)) * b ** (-pc / (2 - pc))
        assert val == pytest.approx(closed, rel=1e-9)

    def test_reduced_is_max_over_ray(self):
        P = solenoidal(3)
        val = reduced_j(P, PURE)
        t = nehari_scale(P, PURE).t_star
        for s in (0.5, 0.9, 0.999, 1.001, 1.1, 2.0):
            assert fibering_gamma(P, PURE, s * t)[0] <= val
