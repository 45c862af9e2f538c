import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from multiinterp import boyd, interpnorm
from multiinterp.errors import InputError, PreconditionError
from multiinterp.ktuple import BanachTuple, TupleOperator, sigma_norm, delta_norm
from multiinterp.phifunc import LogGrid

from oracles import couple_l1_norm, triple_kernel_integral

UNIT_COUPLE = BanachTuple.from_weights([1, 1], [[1.0], [1.0]])


def l1_couple(w0, w1):
    return BanachTuple.from_weights([1, 1], [np.atleast_1d(w0), np.atleast_1d(w1)])


class TestKNorm:
    def test_couple_example(self):
        tup = BanachTuple.from_weights([1, 1], [[1.0], [4.0]])
        res = interpnorm.k_norm(tup, (1.0, [boyd.atom(0.5)]), [1.0], rel_tol=1e-7)
        np.testing.assert_allclose(res.value, 8.0, rtol=1e-6)
        assert res.flags["h1"] == "true"

    @pytest.mark.parametrize("seed", range(5))
    def test_random_couple_against_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        w0, w1 = rng.uniform(0.2, 5.0, 2)
        theta = rng.uniform(0.15, 0.85)
        p = float(rng.choice([1.0, 2.0, 3.0]))
        a = rng.normal()
        res = interpnorm.k_norm(l1_couple(w0, w1), (p, [boyd.atom(theta)]), [a], rel_tol=1e-6)
        np.testing.assert_allclose(res.value, couple_l1_norm(w0, w1, theta, p, a), rtol=1e-5)

    def test_couple_sup(self):
        res = interpnorm.k_norm(l1_couple(1.0, 4.0), (math.inf, [boyd.atom(0.5)]), [3.0])
        np.testing.assert_allclose(res.value, couple_l1_norm(1.0, 4.0, 0.5, math.inf, 3.0), rtol=1e-6)

    def test_triple_example(self):
        tri = BanachTuple.from_weights([1, 1, 1], [[1.0]] * 3)
        res = interpnorm.k_norm(tri, (1.0, [boyd.atom(1 / 3), boyd.atom(1 / 3)]), [1.0], rel_tol=1e-6)
        np.testing.assert_allclose(res.value, 27.0, rtol=1e-4)

    @pytest.mark.parametrize("th1, th2, p", [(0.2, 0.5, 1.0), (0.3, 0.3, 2.0)])
    def test_triple_against_region_integral(self, th1, th2, p):
        tri = BanachTuple.from_weights([1, 1, 1], [[1.0]] * 3)
        res = interpnorm.k_norm(tri, (p, [boyd.atom(th1), boyd.atom(th2)]), [1.0], rel_tol=1e-6)
        np.testing.assert_allclose(res.value, triple_kernel_integral(th1, th2, p) ** (1 / p), rtol=1e-4)

    def test_zero_vector(self):
        assert interpnorm.k_norm(UNIT_COUPLE, (2.0, [boyd.atom(0.5)]), [0.0]).value == 0.0

    def test_non_integrable_parameter_rejected(self):
        with pytest.raises(PreconditionError):
            interpnorm.k_norm(UNIT_COUPLE, (1.0, [boyd.atom(1.2)]), [1.0])

    def test_parameter_count_mismatch(self):
        with pytest.raises(InputError):
            interpnorm.k_norm(UNIT_COUPLE, (1.0, [boyd.atom(0.3), boyd.atom(0.3)]), [1.0])

    def test_normalized_unit_kernel(self):
        res = interpnorm.k_norm(UNIT_COUPLE, (2.0, [boyd.atom(0.3, 1.0)]), [1.0], normalize=True, rel_tol=1e-7)
        np.testing.assert_allclose(res.value, 1.0, rtol=1e-5)

    def test_non_adaptive_close_to_adaptive(self):
        params = (1.0, [boyd.atom(0.4)])
        fixed = interpnorm.k_norm(l1_couple(1.0, 2.0), params, [1.0], adaptive=False).value
        np.testing.assert_allclose(fixed, couple_l1_norm(1.0, 2.0, 0.4, 1.0, 1.0), rtol=1e-3)

    def test_k_inf_functional_on_scalar(self):
        # K_inf(1, t, 1) = t / (1 + t) for the unit couple
        res = interpnorm.k_norm(UNIT_COUPLE, (1.0, [boyd.atom(0.5)]), [1.0], functional="max", rel_tol=1e-8)
        np.testing.assert_allclose(res.value, math.pi, rtol=1e-6)

    @settings(max_examples=15)
    @given(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), st.tuples(st.floats(-3, 3), st.floats(-3, 3)),
           st.floats(0.2, 0.8), st.sampled_from([1.0, 2.0, math.inf]))
    def test_norm_axioms(self, a, b, theta, p):
        tup = BanachTuple.from_weights([1, 1], [[1.0, 3.0], [2.0, 0.5]])
        params = (p, [boyd.atom(theta)])
        a, b = np.array(a), np.array(b)
        na = interpnorm.k_norm_value(tup, params, a, rel_tol=1e-6)
        nb = interpnorm.k_norm_value(tup, params, b, rel_tol=1e-6)
        nab = interpnorm.k_norm_value(tup, params, a + b, rel_tol=1e-6)
        assert nab <= (na + nb) * (1 + 1e-4) + 1e-12
        n2 = interpnorm.k_norm_value(tup, params, -2.5 * a, rel_tol=1e-6)
        np.testing.assert_allclose(n2, 2.5 * na, rtol=1e-4, atol=1e-12)

    @settings(max_examples=10)
    @given(st.tuples(st.floats(-3, 3), st.floats(-3, 3)).filter(lambda a: max(map(abs, a)) > 1e-3),
           st.floats(0.2, 0.8), st.floats(-1.0, 1.0), st.sampled_from([1.0, 2.0]))
    def test_normalized_between_sigma_and_delta(self, a, theta, gamma, p):
        tup = BanachTuple.from_weights([1, 2], [[1.0, 3.0], [2.0, 0.5]])
        params = (p, [boyd.atom(theta, gamma)])
        v = interpnorm.k_norm_value(tup, params, a, normalize=True, rel_tol=1e-6)
        assert sigma_norm(tup, a) * (1 - 1e-4) <= v <= delta_norm(tup, a) * (1 + 1e-4)


class TestKernelConstant:
    def test_power_closed_form(self):
        assert interpnorm.kernel_constant((1.0, [boyd.atom(0.5)])) == pytest.approx(4.0)
        assert interpnorm.kernel_constant((math.inf, [boyd.atom(0.5)])) == 1.0

    def test_quadrature_branch_against_quad(self):
        phi = boyd.atom(0.4, 1.5)
        p = 2.0

        def integrand(u):
            return math.exp(p * (min(u, 0.0) - float(phi.log_value(u))))

        exact = (integrate.quad(integrand, -np.inf, 0, epsrel=1e-12)[0]
                 + integrate.quad(integrand, 0, np.inf, epsrel=1e-12)[0]) ** (1 / p)
        np.testing.assert_allclose(interpnorm.kernel_constant((p, [phi])), exact, rtol=1e-6)


class TestJSide:
    def test_single_cell_constant(self):
        tup = BanachTuple.from_weights([1, 2], [[1.0, 2.0], [0.5, 3.0]])
        a = np.array([1.0, -2.0])
        res = interpnorm.single_cell_bound(tup, (2.0, [boyd.atom(0.5)]), a)
        assert res.value <= res.constant * delta_norm(tup, a)
        assert res.representation.defect <= 1e-12 * sigma_norm(tup, a)

    def test_upper_bound_dominates_k_norm(self):
        tup = l1_couple([1.0, 2.0], [3.0, 0.5])
        params = (1.0, [boyd.atom(0.5)])
        a = [1.0, 1.0]
        j = interpnorm.j_norm_upper(tup, params, a)
        k = interpnorm.k_norm_value(tup, params, a, normalize=True, rel_tol=1e-7)
        assert j.value >= k * (1 - 1e-4)
        assert j.representation.defect <= 1e-8

    def test_needs_conditions(self):
        with pytest.raises(PreconditionError):
            interpnorm.j_norm_upper(UNIT_COUPLE, (2.0, [boyd.atom(1.2)]), [1.0])

    def test_zero(self):
        assert interpnorm.j_norm_upper(UNIT_COUPLE, (2.0, [boyd.atom(0.5)]), [0.0]).value == 0.0

    def test_sigma_integral(self):
        np.testing.assert_allclose(interpnorm.sigma_integral(UNIT_COUPLE, [1.0]), 2.0, rtol=1e-6)


class TestChecks:
    def test_operator_identity_and_scaled_identity(self):
        rng = np.random.default_rng(0)
        tup = BanachTuple.from_weights([1, 1], [rng.uniform(0.5, 2, 2), rng.uniform(0.5, 2, 2)])
        samples = [rng.normal(size=2) for _ in range(3)]
        params = (1.0, [boyd.atom(0.4)])
        ident = TupleOperator.diagonal([1.0, 1.0], tup, tup)
        rep = interpnorm.operator_bound_check(tup, tup, ident, params, samples, rel_tol=1e-6)
        assert rep.passed
        np.testing.assert_allclose([r.ratio for r in rep.rows], 1.0, rtol=1e-6)
        scaled = TupleOperator.diagonal([0.5, 0.5], tup, tup)
        rep = interpnorm.operator_bound_check(tup, tup, scaled, params, samples, rel_tol=1e-6)
        np.testing.assert_allclose([r.ratio for r in rep.rows], 1.0, rtol=1e-6)

    def test_pointwise_analytic(self):
        # sup min(1,t)/t^(1/2) = 1 against a norm of 4
        v = interpnorm.pointwise_k_bound(UNIT_COUPLE, (1.0, [boyd.atom(0.5)]), [1.0], LogGrid(1, 20.0, 401))
        np.testing.assert_allclose(v, 0.25, rtol=1e-4)

    def test_power_example(self):
        tup = BanachTuple.from_weights([1, 1], [[1.0], [3.0]])
        rep = interpnorm.power_check(tup, (1.0, [boyd.atom(0.4)]), 2.0, [[1.0], [-2.5]])
        assert rep.passed, [r.ratio for r in rep.rows]

    def test_power_needs_scalar_tuple(self):
        with pytest.raises(InputError):
            interpnorm.power_check(l1_couple([1, 1], [1, 2]), (1.0, [boyd.atom(0.4)]), 2.0, [[1.0, 1.0]])

    def test_reduction_example(self):
        tup = BanachTuple.from_weights([1, 1, 1], [[1.0], [2.0], [2.0]])
        rep = interpnorm.reduction_check(tup, (1.0, [boyd.atom(0.25), boyd.atom(0.25)]), [[1.0]])
        assert rep.passed, [r.ratio for r in rep.rows]

    def test_reduction_constant(self):
        # p = 1, alpha = beta = 1/4: (4 + 4)^1
        assert interpnorm.reduction_constant(1.0, 0.25, 0.25) == pytest.approx(8.0)
        assert interpnorm.reduction_constant(math.inf, 0.25, 0.25) == 1.0

    def test_reduction_needs_equal_spaces(self):
        tup = BanachTuple.from_weights([1, 1, 1], [[1.0], [2.0], [3.0]])
        with pytest.raises(PreconditionError):
            interpnorm.reduction_check(tup, (1.0, [boyd.atom(0.25), boyd.atom(0.25)]), [[1.0]])

    def test_permutation_of_couple(self):
        tup = l1_couple([1.0, 3.0], [2.0, 0.5])
        rep = interpnorm.permutation_check(tup, (2.0, [boyd.atom(0.3)]), [(1, 0)], [[1.0, -1.0]])
        assert rep.passed, [r.ratio for r in rep.rows]

    def test_permuted_params_swap(self):
        phis = [boyd.atom(0.3)]
        swapped = interpnorm.permuted_params(phis, (1, 0))
        t = np.array([0.5, 7.0])
        np.testing.assert_allclose(boyd.evaluate(swapped[0], t), t**0.7)

    def test_p_monotone_sup(self):
        tup = l1_couple([1.0, 3.0], [2.0, 0.5])
        rep = interpnorm.p_monotone_check(tup, [boyd.atom(0.4)], 1.0, math.inf, [[1.0, 2.0]])
        assert rep.passed and rep.rows[0].ratio <= 1.0 + 1e-3

    def test_p_monotone_order(self):
        with pytest.raises(PreconditionError):
            interpnorm.p_monotone_check(UNIT_COUPLE, [boyd.atom(0.4)], 2.0, 1.0, [[1.0]])

    def test_j_into_k(self):
        rep = interpnorm.j_into_k_check(l1_couple([1.0, 3.0], [2.0, 0.5]), (1.0, [boyd.atom(0.5)]),
                                        [[1.0, 1.0]])
        assert rep.passed

    def test_embedding_dispatch(self):
        with pytest.raises(InputError):
            interpnorm.embedding_check("nope", {})


class TestReiteration:
    def test_couple(self):
        rng = np.random.default_rng(1)
        tup = BanachTuple.from_weights([1, 1], [rng.uniform(0.5, 2, 2), rng.uniform(0.5, 2, 2)])
        rep = interpnorm.reiteration_check(tup, [[0.3], [0.6]], [0.5], [rng.normal(size=2)])
        assert rep.passed, rep.rows
        np.testing.assert_allclose(rep.notes["target"], [0.45])

    @pytest.mark.parametrize("lambdas", [[1.2], [0.0], [-0.1]])
    def test_degenerate_weights(self, lambdas):
        with pytest.raises(PreconditionError):
            interpnorm.reiteration_check(UNIT_COUPLE, [[0.3], [0.6]], lambdas, [[1.0]])

    def test_points_must_span(self):
        tri = BanachTuple.from_weights([1, 1, 1], [[1.0]] * 3)
        with pytest.raises(PreconditionError):
            interpnorm.reiteration_check(tri, [[0.2, 0.2], [0.3, 0.3]], [0.5], [[1.0]])

    def test_points_in_simplex(self):
        with pytest.raises(PreconditionError):
            interpnorm.reiteration_check(UNIT_COUPLE, [[0.3], [1.2]], [0.5], [[1.0]])
