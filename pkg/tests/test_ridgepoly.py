import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ridgelab.core import Activation, Domain, NormQuery, random_interior_points
from ridgelab.functions import from_expression
from ridgelab.ridgepoly import (
    DerivativeVanishes, Polynomial, RankDeficient, TargetUnreachable, UnderdeterminedSample,
    difference_weights, dim_homogeneous, find_anchor, graded_indices, integer_root,
    max_poly_degree, poly_best_approx, poly_by_network, poly_to_ridge, ridge_directions,
    simultaneous_error,
)

from oracles import count_homogeneous, minimax_poly_1d

LOGISTIC = Activation("logistic")


def random_poly(rng, d, k):
    return Polynomial(d, k, {a: rng.standard_normal() for a in graded_indices(d, k)})


class TestPolynomial:
    def test_eval_and_derivative(self):
        q = Polynomial(2, 3, {(1, 1): 2.0, (3, 0): 1.0, (0, 0): -1.0})
        np.testing.assert_allclose(q([[2.0, 3.0]]), [2 * 6 + 8 - 1])
        dq = q.derivative((1, 0))
        np.testing.assert_allclose(dq([[2.0, 3.0]]), [2 * 3 + 3 * 4])

    def test_degree_bound_enforced(self):
        with pytest.raises(ValueError):
            Polynomial(1, 1, {(2,): 1.0})

    def test_graded_order(self):
        assert graded_indices(2, 2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


class TestDimensions:
    @pytest.mark.parametrize("d,k,expected", [(1, 5, 1), (2, 3, 4), (3, 2, 6)])
    def test_examples(self, d, k, expected):
        assert dim_homogeneous(d, k) == expected

    @pytest.mark.parametrize("d", range(1, 7))
    def test_against_enumeration_and_bound(self, d):
        for k in range(0, 13 if d <= 4 else 7):
            s = dim_homogeneous(d, k)
            if d <= 4:
                assert s == count_homogeneous(d, k)
            assert s <= (k + 1) ** (d - 1)

    @pytest.mark.parametrize("n,d,expected", [(16, 2, 3), (9, 1, 8), (26, 3, 1), (27, 3, 2), (1, 2, 0)])
    def test_max_degree(self, n, d, expected):
        assert max_poly_degree(n, d) == expected

    @given(st.integers(1, 10 ** 6), st.integers(1, 6))
    def test_integer_root(self, n, d):
        x = integer_root(n, d)
        assert x ** d <= n < (x + 1) ** d

    @given(st.integers(1, 3000), st.integers(2, 6))
    def test_perfect_powers(self, x, d):
        assert integer_root(x ** d, d) == x


class TestRidge:
    def test_planar_counts(self):
        assert len(ridge_directions(2, 0)) == 1
        d1 = ridge_directions(2, 1)
        assert len(d1) == 2
        assert np.linalg.matrix_rank(d1.directions) == 2
        assert len(ridge_directions(2, 2)) == 3

    def test_product_identity(self):
        q = Polynomial(2, 2, {(1, 1): 1.0})
        form = poly_to_ridge(q, ridge_directions(2, 2))
        assert form.residual < 1e-8
        X = np.random.default_rng(0).uniform(-1, 1, (100, 2))
        np.testing.assert_allclose(form(X), X[:, 0] * X[:, 1], atol=1e-8)

    def test_constant(self):
        form = poly_to_ridge(Polynomial(2, 0, {(0, 0): 5.0}), ridge_directions(2, 0))
        np.testing.assert_allclose(form.coefficients, [[5.0]])

    def test_univariate(self):
        form = poly_to_ridge(Polynomial.from_univariate([0, 0, 0, 1.0]), ridge_directions(1, 3))
        np.testing.assert_array_equal(form.directions, [[1.0]])
        np.testing.assert_allclose(form.coefficients, [[0, 0, 0, 1.0]])

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            poly_to_ridge(Polynomial(2, 2, {(1, 1): 1.0}), np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_three_dims(self):
        dirs = ridge_directions(3, 3, seed=4)
        assert len(dirs) == dim_homogeneous(3, 3)
        assert dirs.condition < 1e8

    @given(st.integers(0, 10 ** 6), st.sampled_from([(2, 3), (2, 5), (3, 2), (3, 3), (4, 2)]))
    def test_round_trip(self, seed, dk):
        d, k = dk
        rng = np.random.default_rng(seed)
        q = random_poly(rng, d, k)
        form = poly_to_ridge(q, ridge_directions(d, k, seed=1))
        X = rng.uniform(-1, 1, (1000, d))
        np.testing.assert_allclose(form(X), q(X), atol=1e-8 * (1 + q.coefficient_norm()))


class TestBestApprox:
    def test_member_is_exact(self):
        f = from_expression("1 - 2*x + 3*x**2")
        _, err = poly_best_approx(f, 2, math.inf, Domain.cube(1), NormQuery(resolution=401))
        assert err < 1e-9

    def test_kink_affine(self):
        fn = lambda x: np.abs(x - 0.5)
        f = from_expression("Abs(x - 1/2)")
        _, err = poly_best_approx(f, 1, math.inf, Domain.cube(1), NormQuery(resolution=2001))
        # equioscillation puts the affine minimax at 1/4 on (0,1), the oracle agrees
        np.testing.assert_allclose(err, minimax_poly_1d(fn, 1), atol=1e-6)
        np.testing.assert_allclose(err, 0.25, atol=1e-3)

    def test_square_affine(self):
        _, err = poly_best_approx(from_expression("x**2"), 1, math.inf, Domain.cube(1),
                                  NormQuery(resolution=2001))
        np.testing.assert_allclose(err, 0.125, atol=1e-3)

    def test_least_squares(self):
        # L2 projection of x^2 onto affine functions on (0,1): x - 1/6, residual 1/sqrt(180)
        q, err = poly_best_approx(from_expression("x**2"), 1, 2, Domain.cube(1), NormQuery(resolution=4001))
        np.testing.assert_allclose(q.coeffs[(1,)], 1.0, atol=1e-5)
        np.testing.assert_allclose(q.coeffs[(0,)], -1 / 6, atol=1e-5)
        np.testing.assert_allclose(err, 1 / math.sqrt(180), rtol=1e-4)

    @pytest.mark.parametrize("p", [1, 3])
    def test_other_p_between_zero_and_norm(self, p):
        f = from_expression("Abs(x - 0.3)")
        _, err = poly_best_approx(f, 2, p, Domain.cube(1), NormQuery(resolution=401))
        assert 0 < err < 0.1

    def test_ball(self):
        f = from_expression("x**2 + y**2", 2)
        _, err = poly_best_approx(f, 2, 2, Domain.ball(2), NormQuery(resolution=41))
        assert err < 1e-10

    def test_underdetermined(self):
        with pytest.raises(UnderdeterminedSample):
            poly_best_approx(from_expression("x"), 5, 2, Domain.cube(1), NormQuery(resolution=3))

    @given(st.sampled_from(["sin(5*x)", "Abs(x - 0.4)", "exp(x)*x"]), st.sampled_from([2, math.inf]))
    def test_monotone_in_degree_and_bounded(self, expr, p):
        f = from_expression(expr)
        q = NormQuery(resolution=201)
        errs = [poly_best_approx(f, k, p, Domain.cube(1), q)[1] for k in range(4)]
        assert all(b <= a + 1e-9 for a, b in zip(errs, errs[1:]))
        from ridgelab.core import norm
        assert errs[0] <= norm(f, Domain.cube(1), q.with_p(p)) + 1e-12


class TestNetworks:
    def test_anchor_avoids_vanishing_second_derivative(self):
        c0 = find_anchor(LOGISTIC, 2)
        assert c0 > 0
        with pytest.raises(DerivativeVanishes):
            find_anchor(Activation("relu-power", k=1), 1)

    def test_difference_weights(self):
        beta, w = difference_weights(3)
        g = lambda t: np.exp(0.3 * t)
        derivs = [w[i] @ g(beta * 1e-2) / 1e-2 ** i for i in range(4)]
        np.testing.assert_allclose(derivs, 0.3 ** np.arange(4), rtol=1e-3)

    def test_constant(self):
        res = poly_by_network(Polynomial.from_univariate([3.0]), LOGISTIC, 1, 1e-10)
        assert res.n == 1
        np.testing.assert_array_equal(res.params.W, [[0.0]])
        assert res.error < 1e-10

    def test_linear(self):
        res = poly_by_network(Polynomial.from_univariate([0, 1.0]), LOGISTIC, 2, 1e-4)
        assert res.n <= 2 and res.error <= 1e-4

    def test_square(self):
        res = poly_by_network(Polynomial.from_univariate([0, 0, 1.0]), LOGISTIC, 3, 1e-3)
        assert res.n <= 3 and res.error <= 1e-3
        X = np.linspace(-1, 1, 20001)[:, None]
        from ridgelab.bestapprox import net_eval
        assert np.max(np.abs(net_eval(res.params, X) - X[:, 0] ** 2)) <= 1e-3

    def test_bivariate_within_budget(self):
        q = Polynomial(2, 2, {(1, 1): 1.0, (1, 0): 0.5})
        res = poly_by_network(q, Activation("arctan-sigmoid"), 9, 1e-3, norm=NormQuery(resolution=41))
        assert res.n <= 3 * 3

    def test_unreachable(self):
        with pytest.raises(TargetUnreachable) as info:
            poly_by_network(Polynomial.from_univariate([0, 0, 1.0]), LOGISTIC, 2, 1e-3)
        assert info.value.best is not None

    def test_density_budget_sweep(self):
        # error floor reached as the degree (and so the budget s(k+1)) grows
        f = from_expression("exp(x)")
        errs = []
        for k in (1, 2, 3):
            q, e_poly = poly_best_approx(f, k, math.inf, Domain.box([(-1, 1)]), NormQuery(resolution=401))
            res = poly_by_network(q, LOGISTIC, k + 1, 1.0)
            errs.append(e_poly + res.error)
        assert errs[2] < errs[1] < errs[0]

    def test_simultaneous_order_zero_matches(self):
        q = Polynomial.from_univariate([0, 0, 1.0])
        res = poly_by_network(q, LOGISTIC, 3, 1e-3)
        errs = simultaneous_error(q, res.params, 2)
        np.testing.assert_allclose(errs[(0,)], res.error, rtol=1e-12)
        assert all(np.isfinite(v) for v in errs.values())

    def test_simultaneous_refines_with_h(self):
        q = Polynomial.from_univariate([0, 0, 1.0])
        first = []
        for h in (1e-1, 1e-2):
            res = poly_by_network(q, LOGISTIC, 3, 1.0, h_ladder=(h,))
            first.append(simultaneous_error(q, res.params, 1)[(1,)])
        assert first[1] < first[0]

    def test_exact_realization(self):
        q = Polynomial.from_univariate([3.0])
        res = poly_by_network(q, LOGISTIC, 1, 1e-10)
        errs = simultaneous_error(q, res.params, 3)
        assert max(errs.values()) <= 1e-14
