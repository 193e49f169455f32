import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ridgelab.core import Domain, NormQuery, constant_function
from ridgelab.functions import from_expression
from ridgelab.smoothness import (
    AbstractModulus, MissingDerivatives, ModulusQuery, NoAdmissiblePoints,
    PointOutsideShrunkDomain, RateFunction, check_derivative_bound, check_phi_conditions,
    k_functional_estimate, modulus, modulus_curve, multi_indices, radial_difference,
    sobolev_seminorm,
)

from oracles import brute_modulus_1d

CUBE = Domain.cube(1)
SUP = NormQuery(math.inf, resolution=2001)


class TestRadialDifference:
    def test_constant(self):
        assert radial_difference(constant_function(3.0), 1, [0.2], [0.1]) == 0.0

    @pytest.mark.parametrize("h", [0.01, 0.1, 0.25])
    def test_square(self, h):
        f = from_expression("x**2")
        np.testing.assert_allclose(radial_difference(f, 2, [h], [0.3]), 2 * h * h, rtol=1e-12)

    def test_linear(self):
        np.testing.assert_allclose(radial_difference(from_expression("x"), 1, [0.1], [0.3]), 0.1, rtol=1e-12)

    def test_outside(self):
        with pytest.raises(PointOutsideShrunkDomain):
            radial_difference(from_expression("x"), 2, [0.3], [0.5], CUBE)

    def test_multi_indices(self):
        assert multi_indices(2, 2) == [(2, 0), (1, 1), (0, 2)]
        assert len(multi_indices(3, 3)) == 10


class TestModulus:
    def test_affine_second_order(self):
        f = from_expression("3*x - 1")
        assert modulus(f, ModulusQuery(2, 0.3, SUP), CUBE) <= 1e-14

    def test_constant(self):
        assert modulus(constant_function(2.0), ModulusQuery(1, 0.5, SUP), CUBE) == 0.0

    def test_kink(self):
        f = from_expression("Abs(x - 1/2)")
        val = modulus(f, ModulusQuery(1, 0.2, SUP), CUBE)
        np.testing.assert_allclose(val, brute_modulus_1d(lambda x: np.abs(x - 0.5), 1, 0.2), atol=1e-12)
        np.testing.assert_allclose(val, 0.2, atol=1e-12)

    def test_second_order_against_brute_force(self):
        fn = lambda x: np.sin(5 * x)
        f = from_expression("sin(5*x)")
        q = ModulusQuery(2, 0.1, NormQuery(math.inf, resolution=4001), scales=tuple(np.linspace(0.05, 1, 20)))
        np.testing.assert_allclose(modulus(f, q, CUBE), brute_modulus_1d(fn, 2, 0.1), rtol=2e-3)

    def test_no_admissible_points(self):
        with pytest.raises(NoAdmissiblePoints):
            modulus(from_expression("x"), ModulusQuery(2, 0.8, SUP, scales=(1.0,)), CUBE)

    def test_detail_reports_counts(self):
        res = modulus(from_expression("x*y", 2), ModulusQuery(1, 0.25, NormQuery(math.inf, resolution=21)),
                      Domain.cube(2), detail=True)
        assert res.admissible.shape == (4,)
        assert np.all(res.admissible > 0)

    def test_explicit_directions_checked(self):
        with pytest.raises(ValueError):
            ModulusQuery(1, 0.1, directions="explicit", explicit=((0.2,),)).direction_set(1)

    def test_invalid_query(self):
        with pytest.raises(ValueError):
            ModulusQuery(0, 0.1)
        with pytest.raises(ValueError):
            ModulusQuery(1, 0.0)

    @given(st.floats(0.01, 0.3), st.floats(0.01, 0.3), st.integers(1, 3))
    def test_monotone_in_delta(self, a, b, r):
        lo, hi = sorted((a, b))
        f = from_expression("exp(-3*x)*sin(7*x)")
        # nested direction samples: the scale set of lo is contained in that of hi
        q = NormQuery(math.inf, resolution=513)
        m_lo = modulus(f, ModulusQuery(r, lo, q, directions="explicit", explicit=((lo,),)), CUBE)
        m_hi = modulus(f, ModulusQuery(r, hi, q, directions="explicit", explicit=((lo,), (hi,))), CUBE)
        assert m_lo <= m_hi

    @given(st.floats(0.02, 0.3), st.integers(2, 4), st.sampled_from([1, 2, math.inf]))
    def test_order_doubling(self, delta, r, p):
        f = from_expression("Abs(x - 0.37)**0.5 + x**3")
        q = ModulusQuery(r, delta, NormQuery(p, resolution=257))
        # a coarse grid misses the cusp peak of the lower order, so sample that one finely
        lower = ModulusQuery(r - 1, delta, NormQuery(p, resolution=4097))
        assert modulus(f, q, CUBE) <= 2 * modulus(f, lower, CUBE) * (1 + 1e-3)

    @given(st.floats(-20, 20), st.floats(0.02, 0.3))
    def test_homogeneity(self, c, delta):
        f = from_expression("x*Abs(x - 0.6)")
        q = ModulusQuery(2, delta, NormQuery(math.inf, resolution=129))
        np.testing.assert_allclose(modulus(f.scaled(c), q, CUBE), abs(c) * modulus(f, q, CUBE),
                                   rtol=1e-13, atol=1e-15)

    def test_curve(self):
        f = from_expression("x**2")
        curve = modulus_curve(f, ModulusQuery(2, 1.0, SUP), CUBE, [0.05, 0.1, 0.2])
        np.testing.assert_allclose(curve, 2 * np.array([0.05, 0.1, 0.2]) ** 2, rtol=1e-12)


class TestSeminorm:
    def test_linear(self):
        assert sobolev_seminorm(from_expression("2*x + 1"), 2) == 0.0

    def test_product(self):
        f = from_expression("x*y", 2)
        np.testing.assert_allclose(sobolev_seminorm(f, 2, math.inf, Domain.cube(2)), 1.0)
        np.testing.assert_allclose(sobolev_seminorm(f, 2, math.inf, Domain.cube(2), count_orderings=True), 2.0)

    def test_half_square(self):
        np.testing.assert_allclose(sobolev_seminorm(from_expression("x**2/2"), 1, math.inf), 1.0)

    def test_fd_fallback(self):
        f = from_expression("sin(x)")
        plain = f.__class__(f.evaluator, 1, "sin")
        np.testing.assert_allclose(sobolev_seminorm(plain, 2, 2), sobolev_seminorm(f, 2, 2), rtol=1e-6)
        with pytest.raises(MissingDerivatives):
            sobolev_seminorm(plain, 2, 2, fd_fallback=False)


class TestDerivativeBound:
    def test_linear(self):
        rep = check_derivative_bound(from_expression("x"), 2, [0.1, 0.05], domain=CUBE)
        np.testing.assert_array_equal(rep.ratios, 0.0)
        assert rep.passed

    def test_sine(self):
        rep = check_derivative_bound(from_expression("sin(x)"), 1, [0.2, 0.1, 0.05, 0.01])
        assert rep.max_ratio <= 1.01

    def test_square(self):
        rep = check_derivative_bound(from_expression("x**2"), 2, [0.2, 0.1, 0.05, 0.01])
        assert rep.max_ratio <= 1.01
        np.testing.assert_allclose(rep.ratios, 1.0, rtol=1e-12)

    def test_kink_diverges(self):
        # |x - 1/2| has no bounded second derivative; fd fallback seminorm is finite but tiny
        f = from_expression("Abs(x - 0.5)**1.5")
        rep = check_derivative_bound(f, 2, [0.2, 0.1, 0.05, 0.02, 0.01, 0.005], domain=CUBE,
                                     modulus_query=ModulusQuery(2, 1.0, NormQuery(math.inf, resolution=4001)))
        assert not rep.passed


class TestKFunctional:
    def test_constant(self):
        assert k_functional_estimate(constant_function(4.0), 0.1, 2) <= 1e-12

    def test_zero_delta_smooth(self):
        assert k_functional_estimate(from_expression("sin(x)"), 0.0, 2) == 0.0

    def test_kink_within_modulus(self):
        f = from_expression("Abs(x - 1/2)")
        k = k_functional_estimate(f, 0.01, 2, math.inf, CUBE)
        omega = modulus(f, ModulusQuery(2, math.sqrt(0.01), SUP), CUBE)
        assert 0.0 <= k <= omega + 1e-9

    @given(st.floats(0.001, 0.5))
    def test_bounded_by_norm(self, delta):
        f = from_expression("Abs(x - 0.3)")
        k = k_functional_estimate(f, delta, 1, math.inf, CUBE, nodes=61)
        assert k <= 0.7 + 1e-12


class TestAbstractModulus:
    def test_power_axioms(self):
        rep = AbstractModulus.power(0.5).check_axioms(np.linspace(0.01, 2, 50))
        assert rep == {"zero": True, "increasing": True, "subadditive": True, "divergent_at_zero": True}
        assert not AbstractModulus.power(1.0).divergent_at_zero

    def test_tabulated(self):
        w = AbstractModulus.tabulated([0, 1, 2], [0, 1, 1.5])
        np.testing.assert_allclose(w([0.5, 1.5, 3.0]), [0.5, 1.25, 2.0])
        assert w.check_axioms([0.1, 0.5, 1.0])["subadditive"]

    def test_invalid(self):
        with pytest.raises(ValueError):
            AbstractModulus.power(1.5)
        with pytest.raises(ValueError):
            AbstractModulus.tabulated([0, 1, 1], [0, 1, 2])

    @given(st.floats(0.05, 1.0), st.floats(0, 10), st.floats(0, 10))
    def test_power_subadditive(self, alpha, a, b):
        w = AbstractModulus.power(alpha)
        assert w(a + b) <= w(a) + w(b) + 1e-12


class TestRateFunction:
    def test_power_halving(self):
        rep = check_phi_conditions(RateFunction("power", 1, 1), [0.5], (1, 1000))
        np.testing.assert_allclose(rep.c_lambda[0.5], 2.0, rtol=1e-14)

    def test_log_power_ratio(self):
        phi = RateFunction("log-power", 1, 1)
        ratio = phi(8) / phi(16)
        np.testing.assert_allclose(ratio, 16 * 5 / (8 * 4))
        assert ratio <= 4

    def test_log_power_proof_bound(self):
        rep = check_phi_conditions(RateFunction("log-power", 1, 2), [0.5, 0.25], (1, 100000))
        assert all(rep.proof_bound_ok.values())
        assert rep.decreasing

    def test_halving_constant(self):
        # floor(n/2) makes odd n worse than sqrt(2); the worst case is n = 3
        rep = check_phi_conditions(RateFunction("power", 1, 2), [0.5], (2, 10 ** 6))
        np.testing.assert_allclose(rep.d2, math.sqrt(3.0), rtol=1e-14)
        assert rep.d2_argmax == 3

    def test_invalid_lambda(self):
        with pytest.raises(ValueError):
            check_phi_conditions(RateFunction(), [1.5], (1, 10))

    @given(st.sampled_from(["power", "log-power"]), st.integers(1, 3), st.integers(1, 3),
           st.floats(1.0, 1e6), st.floats(1.001, 10))
    def test_strictly_decreasing(self, form, r, d, x, factor):
        phi = RateFunction(form, r, d)
        assert phi(x * factor) < phi(x)
