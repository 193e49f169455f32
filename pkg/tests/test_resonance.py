import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ridgelab.bestapprox import SolverConfig
from ridgelab.core import Activation, Domain, GridSpec, grid_points
from ridgelab.resonance import (
    BUMP_LIPSCHITZ, HEURISTIC, PROVEN, NonIncreasingIndexSequence, SignedGrid, bartlett_bound,
    bump, bump_derivative, check_resonance_conditions, default_resonance_component,
    dense_sign_search, find_unshatterable_signs, gliding_hump_compose, grid_size_D,
    resonance_constant_sweep, resonance_function, resonance_modulus_bound, shatter_fit,
    sign_changes, verify_corsharp_chain,
)
from ridgelab.smoothness import AbstractModulus, RateFunction

from oracles import bartlett_float, grid_size_oracle

LOGISTIC = Activation("logistic")
RELU = Activation("relu-power", k=1)
PTS3 = np.array([[0.2], [0.5], [0.8]])


class TestBump:
    def test_values(self):
        assert bump(0.0) == 1.0
        assert bump(1.0) == 0.0
        assert bump(-3.0) == 0.0
        np.testing.assert_allclose(bump(0.5), math.exp(-1 / 3), rtol=1e-15)
        np.testing.assert_allclose(bump(0.5), 0.716531, atol=1e-6)

    def test_derivative(self):
        x = np.linspace(-0.95, 0.95, 41)
        h = 1e-6
        np.testing.assert_allclose(bump_derivative(x), (bump(x + h) - bump(x - h)) / (2 * h), atol=1e-7)
        np.testing.assert_allclose(BUMP_LIPSCHITZ, np.max(np.abs(bump_derivative(np.linspace(-1, 1, 400001)))),
                                   rtol=1e-8)

    def test_flat_at_edge(self):
        x = np.array([0.999, 0.9999])
        assert np.all(bump(x) < 1e-100)

    @given(st.floats(-2, 2))
    def test_even(self, x):
        assert abs(bump(x) - bump(-x)) <= 1e-15


class TestResonanceFunction:
    def test_two_point(self):
        rf = resonance_function(SignedGrid(GridSpec(Domain.cube(1), 1), [1, -1]))
        np.testing.assert_array_equal(rf(np.array([0.0, 1.0, 0.5])), [1.0, -1.0, 0.0])

    def test_all_positive(self):
        rf = resonance_function(SignedGrid.constant(5, 1))
        x = np.linspace(0, 1, 2001)
        assert np.all(rf(x) >= 0)
        assert rf.sup_norm() == 1.0

    def test_corners(self):
        rf = resonance_function(SignedGrid.alternating(1, 2))
        np.testing.assert_array_equal(rf.values(grid_points(GridSpec(Domain.cube(2), 1))), [1, -1, -1, 1])

    def test_bad_signs(self):
        with pytest.raises(ValueError):
            SignedGrid(GridSpec(Domain.cube(1), 2), [1, 0, 1])
        with pytest.raises(ValueError):
            SignedGrid(GridSpec(Domain.cube(1), 2), [1, 1])

    def test_matches_full_sum(self):
        # nearest-point evaluation equals the explicit sum over all grid points
        rng = np.random.default_rng(0)
        sg = SignedGrid(GridSpec(Domain.cube(2), 3), rng.choice((-1, 1), size=16))
        rf = resonance_function(sg)
        X = rng.uniform(size=(500, 2))
        full = np.zeros(500)
        for z, s in zip(sg.points(), sg.flat_signs()):
            full += s * bump(6 * (X[:, 0] - z[0])) * bump(6 * (X[:, 1] - z[1]))
        np.testing.assert_allclose(rf.values(X), full, atol=1e-15)

    @given(st.integers(1, 16), st.integers(1, 2), st.integers(0, 10 ** 6))
    def test_exact_at_grid_points(self, tau, d, seed):
        rng = np.random.default_rng(seed)
        sg = SignedGrid(GridSpec(Domain.cube(d), tau), rng.choice((-1, 1), size=(tau + 1) ** d))
        rf = resonance_function(sg)
        np.testing.assert_array_equal(rf.values(sg.points()), sg.flat_signs())
        assert rf.sup_norm(per_cell=4) == 1.0


class TestModulusBound:
    def test_crude_bound(self):
        rf = resonance_function(SignedGrid.alternating(4))
        rep = resonance_modulus_bound(rf, 2, [1 / 8, 0.25])
        assert max(rep.omegas) <= 4.0

    def test_chain_rule_bound(self):
        tau = 4
        rf = resonance_function(SignedGrid.alternating(tau))
        delta = 1 / (8 * tau)
        rep = resonance_modulus_bound(rf, 1, [delta], per_cell=64)
        assert rep.omegas[0] <= delta * 2 * tau * BUMP_LIPSCHITZ * (1 + 1e-9)

    def test_gap_is_flat(self):
        # differences sampled only on cell faces, where every summand vanishes
        from ridgelab.smoothness import radial_difference
        tau = 4
        rf = resonance_function(SignedGrid.constant(tau))
        x0 = 0.5 / tau
        assert radial_difference(rf.as_target(), 2, [1 / tau], [x0], Domain.cube(1)) == 0.0
        np.testing.assert_array_equal(rf((np.arange(tau) + 0.5) / tau), 0.0)

    def test_sweep_bounded(self):
        rows = resonance_constant_sweep([1, 2, 4, 8], 1)
        c2 = [c for _, c in rows]
        assert max(c2) <= BUMP_LIPSCHITZ * 1.01
        assert max(c2) / min(c2) < 1.5


class TestShatter:
    def test_single_point(self):
        for s in (1, -1):
            assert shatter_fit(1, LOGISTIC, [[0.3]], [s]).fit

    def test_single_point_with_offset(self):
        res = shatter_fit(1, LOGISTIC, [[0.3]], [-1], offset=True)
        assert res.fit

    def test_monotone_fails_proven(self):
        res = shatter_fit(1, LOGISTIC, PTS3, [1, -1, 1])
        assert not res.fit
        assert res.certificate == PROVEN
        assert dense_sign_search(LOGISTIC, PTS3, [1, -1, 1], counts=(41, 41, 41)) == 0

    def test_two_neurons_fit(self):
        res = shatter_fit(2, LOGISTIC, PTS3, [1, -1, 1])
        assert res.fit and res.margin >= 0.1

    def test_distinct_points(self):
        with pytest.raises(ValueError):
            shatter_fit(1, LOGISTIC, [[0.1], [0.1]], [1, -1])

    def test_sign_changes(self):
        assert sign_changes([0.8, 0.2, 0.5], [1, 1, -1]) == 2

    @given(st.integers(0, 10 ** 6), st.floats(-5, 5), st.sampled_from([1, -1]))
    def test_offset_fits_any_point(self, seed, x, s):
        cfg = SolverConfig(restarts=2, iterations=100, seed=seed)
        assert shatter_fit(1, LOGISTIC, [[x]], [s], cfg, offset=True).fit


class TestUnshatterable:
    def test_logistic_three_points(self):
        res = find_unshatterable_signs(1, LOGISTIC, GridSpec(Domain.cube(1), 2))
        assert res.signed_grid.label() in ("+-+", "-+-")
        assert res.certificate == PROVEN

    def test_wide_network_shatters(self):
        cfg = SolverConfig(restarts=4, iterations=300)
        assert find_unshatterable_signs(6, LOGISTIC, GridSpec(Domain.cube(1), 2), cfg) is None

    def test_relu(self):
        res = find_unshatterable_signs(1, RELU, GridSpec(Domain.cube(1), 2))
        assert res is not None
        assert sign_changes(res.signed_grid.points()[:, 0], res.signed_grid.flat_signs()) > 1


class TestVCArithmetic:
    def test_bartlett(self):
        # formula value; 2*4*log2(96e) is 64.2213, not 64.27
        np.testing.assert_allclose(bartlett_bound(1, 1, 1), 64.22126033288096, rtol=1e-14)
        np.testing.assert_allclose(bartlett_bound(1, 1, 1), bartlett_float(1, 1, 1), rtol=1e-14)
        np.testing.assert_allclose(bartlett_bound(1, 1, 2) - bartlett_bound(1, 1, 1), 8.0, rtol=1e-13)

    @given(st.integers(1, 50), st.integers(1, 4), st.integers(1, 1000))
    def test_bartlett_monotone(self, n, d, D):
        b = bartlett_bound(n, d, D)
        assert bartlett_bound(n + 1, d, D) > b
        assert bartlett_bound(n, d + 1, D) > b
        assert bartlett_bound(n, d, D + 1) > b
        assert b == bartlett_bound(n, d, D)

    @pytest.mark.parametrize("n,d,E,expected", [(2, 1, 8, 32), (2, 2, 8, 5), (4, 1, 1.0001, 12)])
    def test_grid_size(self, n, d, E, expected):
        assert grid_size_D(n, d, E) == expected

    @given(st.integers(2, 5000), st.integers(1, 4), st.sampled_from([1.5, 2, 8, 64, 100.25]))
    def test_grid_size_oracle(self, n, d, E):
        assert grid_size_D(n, d, E) == grid_size_oracle(n, d, E)

    def test_grid_size_perfect_power(self):
        # E n (1 + log2 n) = 8 * 2 * 2 = 32 = 2^5 exactly
        assert grid_size_D(2, 5, 8) == 2
        assert grid_size_D(16, 1, 64) == 5120

    def test_invalid(self):
        with pytest.raises(ValueError):
            grid_size_D(1, 1, 8)
        with pytest.raises(ValueError):
            grid_size_D(4, 1, 1)


class TestChain:
    def test_condition_fails(self):
        rep = verify_corsharp_chain(1, 2, range(2, 100))
        assert not rep.e_condition
        assert rep.verdict == "fail"
        assert rep.failures()["e_condition"] == "fail"

    def test_condition_holds(self):
        rep = verify_corsharp_chain(1, 64, range(2, 5000))
        assert rep.e_condition
        np.testing.assert_allclose(rep.e_condition_margin, 64 - 28)
        assert rep.verdict == "pass"
        assert rep.n0 == 2

    def test_final_step_example(self):
        rep = verify_corsharp_chain(1, 64, [16])
        assert rep.D[0] == 5120
        assert 64 * 16 * 4 <= rep.Dd[0]
        assert rep.final_step[0]

    @pytest.mark.parametrize("d", [2, 3])
    def test_higher_dims(self, d):
        rep = verify_corsharp_chain(1, 64, range(2, 3000), d)
        assert rep.verdict == "pass"

    def test_bad_range(self):
        with pytest.raises(ValueError):
            verify_corsharp_chain(1, 64, [1, 2])

    @given(st.integers(2, 10 ** 5), st.integers(1, 3), st.floats(2, 200), st.floats(1, 100))
    def test_monotone_in_E(self, n, d, E, extra):
        lo = verify_corsharp_chain(1, E, [n], d)
        hi = verify_corsharp_chain(1, E + extra, [n], d)
        assert hi.D[0] >= lo.D[0]
        if lo.final_step[0]:
            assert hi.final_step[0]


class TestGlidingHump:
    def test_weights(self):
        comps = [default_resonance_component(w) for w in (1, 4, 16)]
        series = gliding_hump_compose(comps, AbstractModulus.power(0.5), RateFunction("power", 1, 1), 1, 3)
        assert series.indices == [4, 16, 64]
        np.testing.assert_allclose(series.weights, [0.5, 0.25, 0.125], rtol=1e-15)
        x = np.linspace(0, 1, 4097)[:, None]
        assert np.max(np.abs(series.partial(3).values(x))) <= 7 / 8

    def test_single_term(self):
        comps = [default_resonance_component(1)]
        series = gliding_hump_compose(comps, AbstractModulus.power(0.5), RateFunction("power", 1, 1), 1, 1)
        x = np.linspace(0, 1, 1025)[:, None]
        np.testing.assert_allclose(np.max(np.abs(series.partial(1).values(x))), series.weights[0], rtol=1e-15)

    def test_same_component(self):
        h = default_resonance_component(1)
        series = gliding_hump_compose([h, h, h], AbstractModulus.power(0.7), RateFunction("log-power", 1, 1), 2)
        x = np.linspace(0, 1, 1025)[:, None]
        assert np.max(np.abs(series.partial(3).values(x))) <= series.weight_sum() + 1e-15

    def test_growth_enforced(self):
        h = default_resonance_component(1)
        with pytest.raises(NonIncreasingIndexSequence):
            gliding_hump_compose([h, h], AbstractModulus.power(0.5), RateFunction("power", 1, 1), 1,
                                 indices=[4, 8])

    @given(st.integers(1, 4), st.floats(0.2, 1.0), st.integers(1, 2))
    def test_increment_sup(self, m, alpha, r):
        comps = [default_resonance_component(w) for w in (1, 4, 16, 64)]
        series = gliding_hump_compose(comps, AbstractModulus.power(alpha), RateFunction("power", r, 1), r, 4)
        pts = comps[m - 1].signed_grid.points()
        np.testing.assert_array_equal(np.abs(series.term(m - 1)(pts)), series.weights[m - 1])
        inc = series.partial(m).values(pts) - series.partial(m - 1).values(pts) if m > 1 \
            else series.partial(1).values(pts)
        np.testing.assert_allclose(np.max(np.abs(inc)), series.weights[m - 1], rtol=0,
                                   atol=2e-16 * series.weight_sum())
        assert series.term_sup(m - 1) == series.weights[m - 1]


class TestConditions:
    def test_width_one(self):
        h = default_resonance_component(1)
        cfg = SolverConfig(restarts=8, lawson_rounds=4)
        rep = check_resonance_conditions([h], [1], LOGISTIC, 1, cfg=cfg)
        assert rep.sup_norms == [1.0]
        assert rep.lower[0] >= 0.9
        assert rep.certificates == [PROVEN]
        assert rep.passed
        assert rep.C2[0] <= BUMP_LIPSCHITZ * 1.01

    def test_heuristic_label(self):
        h = default_resonance_component(2)
        cfg = SolverConfig(restarts=2, lawson_rounds=2)
        rep = check_resonance_conditions([h], [2], LOGISTIC, 1, cfg=cfg)
        assert rep.certificates == [HEURISTIC]
