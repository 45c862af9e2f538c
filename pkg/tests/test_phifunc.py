import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from multiinterp import boyd, phifunc
from multiinterp.errors import InputError, NonConvergenceError
from multiinterp.phifunc import LogGrid


def min1(t):
    return np.minimum(1.0, t)


def quad_log(fun):
    """Integral over the real line of ``fun(u)``, split at 0."""
    left = integrate.quad(fun, -np.inf, 0.0, limit=400, epsabs=0, epsrel=1e-12)[0]
    right = integrate.quad(fun, 0.0, np.inf, limit=400, epsabs=0, epsrel=1e-12)[0]
    return left + right


class TestGrid:
    def test_nodes_and_coarse_nesting(self):
        g = LogGrid(1, 4.0, 17)
        assert g.u[8] == 0.0
        np.testing.assert_array_equal(g.coarse().u, g.u[::2])
        assert g.step == pytest.approx(0.5)

    @pytest.mark.parametrize("points", [4, 7, 15])
    def test_rejects_bad_point_count(self, points):
        with pytest.raises(InputError):
            LogGrid(1, 1.0, points)

    def test_refined_halves_step_and_widens(self):
        g = LogGrid(1, 10.0, 33)
        r = g.refined()
        assert r.level == 1 and r.span > g.span
        assert r.step <= 0.5 * g.step * 1.3


class TestPhiOnGrid:
    @pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
    def test_gaussian_in_log_variable(self, p):
        grid = LogGrid(1, 12.0, 513)
        values = np.exp(-(grid.u**2))
        res = phifunc.phi_p(values, grid, (p, [boyd.atom(0.0)]))
        np.testing.assert_allclose(res.value, math.sqrt(math.pi / p) ** (1.0 / p), rtol=1e-10)
        assert not res.truncation_warning

    def test_sup(self):
        grid = LogGrid(1, 10.0, 201)
        res = phifunc.phi_p(min1(grid.t), grid, (math.inf, [boyd.atom(0.5)]))
        assert res.value == pytest.approx(1.0)

    def test_nan_rejected(self):
        grid = LogGrid(1, 2.0, 9)
        with pytest.raises(InputError):
            phifunc.phi_p(np.full(9, np.nan), grid, (1.0, [boyd.atom(0.5)]))

    def test_negative_rejected(self):
        grid = LogGrid(1, 2.0, 9)
        with pytest.raises(InputError):
            phifunc.phi_p(-np.ones(9), grid, (1.0, [boyd.atom(0.5)]))

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            phifunc.phi_p(np.ones(9), LogGrid(1, 2.0, 9), (1.0, [boyd.atom(0.5)] * 2))

    def test_zero_samples(self):
        grid = LogGrid(2, 3.0, 17)
        res = phifunc.phi_p(np.zeros(grid.shape), grid, (2.0, [boyd.atom(0.3)] * 2))
        assert res.value == 0.0 and not res.truncation_warning

    def test_tail_continuation_recovers_cut_mass(self):
        # exp(-|u|) cut at |u| = 3 misses 2 e^-3 of mass; the geometric tail restores it
        grid = LogGrid(1, 3.0, 1025)
        res = phifunc.phi_p(np.exp(-np.abs(grid.u)), grid, (1.0, [boyd.atom(0.0)]))
        np.testing.assert_allclose(res.value, 2.0, rtol=1e-5)
        assert res.tail_bound == pytest.approx(2 * math.exp(-3.0), rel=1e-3)
        assert res.truncation_warning

    def test_separable_product(self):
        grid = LogGrid(2, 14.0, 257)
        t1, t2 = grid.mesh()
        phis = [boyd.atom(0.3), boyd.atom(0.6)]
        two = phifunc.phi_p(min1(t1) * min1(t2), grid, (2.0, phis)).value
        g1 = LogGrid(1, 14.0, 257)
        one = [phifunc.phi_p(min1(g1.t), g1, (2.0, [phi])).value for phi in phis]
        np.testing.assert_allclose(two, one[0] * one[1], rtol=1e-10)

    @given(st.floats(0.01, 100.0), st.sampled_from([1.0, 2.0, math.inf]))
    def test_homogeneous(self, lam, p):
        grid = LogGrid(1, 8.0, 65)
        f = np.exp(-(grid.u**2))
        params = (p, [boyd.atom(0.2)])
        np.testing.assert_allclose(phifunc.phi_p(lam * f, grid, params).value,
                                   lam * phifunc.phi_p(f, grid, params).value, rtol=1e-12)

    @given(st.lists(st.floats(0.0, 5.0), min_size=33, max_size=33), st.floats(0.0, 3.0),
           st.sampled_from([1.0, 2.0, 4.0, math.inf]))
    def test_monotone(self, f, bump, p):
        grid = LogGrid(1, 4.0, 33)
        f = np.array(f)
        g = f + bump * np.exp(-(grid.u**2))
        params = (p, [boyd.atom(0.5, 1.0)])
        assert phifunc.phi_p(f, grid, params).value <= phifunc.phi_p(g, grid, params).value * (1 + 1e-12)


class TestRefine:
    def test_min_kernel_p1(self):
        # int min(1,t) t^(-1/2) dt/t = 2 + 2
        res = phifunc.refine_until(lambda ts: min1(ts[0]), (1.0, [boyd.atom(0.5)]), rel_tol=1e-7)
        np.testing.assert_allclose(res.value, 4.0, rtol=1e-6)

    @pytest.mark.parametrize("s", [0.25, 0.5, 0.7])
    def test_beta_integral(self, s):
        # int t^s / (1 + t) dt/t = pi / sin(pi s)
        res = phifunc.refine_until(lambda ts: ts[0] / (1.0 + ts[0]), (1.0, [boyd.atom(1.0 - s)]), rel_tol=1e-8)
        np.testing.assert_allclose(res.value, math.pi / math.sin(math.pi * s), rtol=1e-6)

    @pytest.mark.parametrize("theta, gamma, p", [(0.3, 1.0, 2.0), (0.6, -1.0, 1.5), (0.5, 2.0, 3.0)])
    def test_against_quad(self, theta, gamma, p):
        phi = boyd.atom(theta, gamma)

        def integrand(u):
            log_f = min(u, 0.0) - np.logaddexp(0.0, u)
            return math.exp(p * (log_f - float(phi.log_value(u))))

        exact = quad_log(integrand) ** (1.0 / p)
        res = phifunc.refine_until(lambda ts: min1(ts[0]) / (1.0 + ts[0]), (p, [phi]), rel_tol=1e-8)
        np.testing.assert_allclose(res.value, exact, rtol=1e-5)

    def test_log_provider(self):
        res = phifunc.refine_until(lambda us: -(us[0] ** 2), (2.0, [boyd.atom(0.0)]), rel_tol=1e-9,
                                   log_provider=True)
        np.testing.assert_allclose(res.value, (math.pi / 2) ** 0.25, rtol=1e-8)

    def test_two_dimensional_min_kernel(self):
        res = phifunc.refine_until(lambda ts: min1(ts[0]) * min1(ts[1]),
                                   (1.0, [boyd.atom(0.3), boyd.atom(0.4)]), rel_tol=1e-6)
        exact = 1.0 / (0.3 * 0.7) / (0.4 * 0.6)
        np.testing.assert_allclose(res.value, exact, rtol=1e-4)

    def test_zero_provider(self):
        res = phifunc.refine_until(lambda ts: np.zeros_like(ts[0]), (2.0, [boyd.atom(0.5)]))
        assert res.value == 0.0 and len(res.trace) == 1

    def test_unbounded_sup_does_not_converge(self):
        with pytest.raises(NonConvergenceError) as info:
            phifunc.refine_until(lambda ts: min1(ts[0]), (math.inf, [boyd.atom(1.5)]), max_levels=3)
        assert len(info.value.trace) == 4

    def test_slow_tail_sets_warning(self):
        # min(1, t) t^(-0.02) decays like t^-0.02 at infinity, far beyond the grid
        grid = phifunc.default_grid(1)
        res = phifunc.phi_p(min1(grid.t), grid, (1.0, [boyd.atom(0.02)]))
        assert res.truncation_warning

    def test_bad_tolerance(self):
        with pytest.raises(InputError):
            phifunc.refine_until(lambda ts: min1(ts[0]), (1.0, [boyd.atom(0.5)]), rel_tol=0.0)

    def test_trace_csv(self):
        res = phifunc.refine_until(lambda ts: min1(ts[0]), (1.0, [boyd.atom(0.5)]), rel_tol=1e-7)
        lines = res.trace_csv().splitlines()
        assert lines[0] == "level,value,tail_bound"
        assert len(lines) == len(res.trace) + 1
