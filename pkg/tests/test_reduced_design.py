import numpy as np
import pytest
from scipy.linalg import expm, svdvals
from scipy.optimize import brentq

import zohpde
from zohpde import (
    NumericFailure,
    analytic_eigensystem,
    controllability_check,
    envelope_constants,
    example_bound_T,
    feedback_kernel,
    gamma_constant,
    iss_identity_check,
    max_sampling_period,
    place_poles,
    synthesize_reduced,
)

RT2 = np.sqrt(2.0)
LAM1 = np.pi**2 - 15.0  # -5.1304
G1 = RT2 * np.pi


class TestControllability:
    def test_single_mode_trivially_controllable(self):
        ok, det = controllability_check(np.array([-5.13]), np.array([1.0]))
        assert ok and det == 1.0

    def test_two_modes_worked_example(self):
        lams = np.array([np.pi**2 - 15.0, 4 * np.pi**2 - 15.0])
        ok, det = controllability_check(lams, np.array([1.0, 1.0]))
        assert ok
        assert det == pytest.approx(lams[1] - lams[0], rel=1e-15)
        assert det == pytest.approx(29.608813, abs=1e-5)

    def test_duplicate_eigenvalue_degenerate(self):
        ok, det = controllability_check(np.array([1.0, 1.0]), np.array([1.0, 2.0]))
        assert not ok and det == 0.0

    def test_zero_gain_rejected(self):
        with pytest.raises(ValueError):
            controllability_check(np.array([1.0, 2.0]), np.array([1.0, 0.0]))


class TestPlacePoles:
    def test_scalar_worked_example(self):
        k = place_poles(np.array([LAM1]), np.array([G1]), np.array([-1.0]))
        # scalar algebra: -lam1 + g1 k1 = -1
        assert k[0] == pytest.approx((LAM1 - 1.0) / G1, rel=1e-12)
        assert k[0] == pytest.approx(-1.3798237955492414, rel=1e-12)

    def test_keeping_a_stable_pole_needs_no_gain(self):
        lam = np.array([np.pi**2])  # stable mode
        k = place_poles(lam, np.array([G1]), np.array([-np.pi**2]))
        assert abs(k[0]) < 1e-12

    def test_two_mode_placement_verified_by_eigensolve(self, es64):
        lams = es64.lambdas[:2]
        g = es64.gains[:2]
        k = place_poles(lams, g, np.array([-1.0, -2.0]))
        W = np.diag(-lams) + np.outer(g, k)
        achieved = np.sort(np.linalg.eigvals(W).real)
        assert np.allclose(achieved, [-2.0, -1.0], atol=1e-8)

    def test_random_targets_up_to_six_modes(self, es64):
        # random stable targets at the open-loop scale: far-flung targets
        # make the closed-loop eigenproblem too non-normal to certify
        rng = np.random.default_rng(11)
        for m in range(1, 7):
            lams = es64.lambdas[:m]
            g = es64.gains[:m]
            desired = -np.abs(lams) * rng.uniform(0.8, 1.5, size=m) - 1.0
            desired = np.sort(desired)[::-1] - 0.1 * np.arange(m)  # keep distinct
            k = place_poles(lams, g, desired)
            W = np.diag(-lams) + np.outer(g, k)
            achieved = np.sort(np.linalg.eigvals(W).real)
            assert np.allclose(achieved, np.sort(desired), atol=1e-8 * max(1, np.max(np.abs(desired))))

    def test_conjugate_pair_placement(self, es64):
        lams = es64.lambdas[:2]
        g = es64.gains[:2]
        k = place_poles(lams, g, np.array([-1 + 2j, -1 - 2j]))
        W = np.diag(-lams) + np.outer(g, k)
        achieved = np.sort_complex(np.linalg.eigvals(W))
        assert np.allclose(achieved, [-1 - 2j, -1 + 2j], atol=1e-8)

    def test_unpaired_complex_rejected(self, es64):
        with pytest.raises(ValueError):
            place_poles(es64.lambdas[:2], es64.gains[:2], np.array([-1 + 2j, -3.0]))

    def test_unstable_target_rejected(self, es64):
        with pytest.raises(ValueError):
            place_poles(es64.lambdas[:1], es64.gains[:1], np.array([1.0]))


class TestEnvelope:
    def test_scalar_exact(self):
        G, sigma, eps = envelope_constants(np.array([[-1.0]]))
        assert (G, sigma) == (1.0, 0.5)
        assert eps == pytest.approx(0.49)

    def test_normal_matrix_no_overshoot(self):
        G, sigma, eps = envelope_constants(np.diag([-1.0, -2.0]))
        assert G == pytest.approx(1.0, abs=1e-12)
        assert sigma == pytest.approx(0.5)

    def test_non_normal_overshoot_validated_by_sampling(self):
        W = np.array([[-1.0, 10.0], [0.0, -1.0]])
        G, sigma, eps = envelope_constants(W)
        assert G > 1.0
        # independent dense-sampling oracle: envelope must hold pointwise
        # (the scaled norm peaks near t = 1/(margin*mu) = 100 here)
        ts = np.linspace(0, 400, 8001)
        vals = np.array([svdvals(expm(W * t))[0] for t in ts])
        assert np.all(vals <= G * np.exp(-(sigma + eps) * ts) * (1 + 1e-9))
        assert np.max(vals * np.exp((sigma + eps) * ts)) == pytest.approx(G, rel=1e-3)

    def test_non_hurwitz_rejected(self):
        with pytest.raises(ValueError):
            envelope_constants(np.array([[1.0]]))


class TestGamma:
    def test_scalar_equals_pole_magnitude(self):
        k1 = (LAM1 - 1.0) / G1
        val = gamma_constant(np.array([G1]), np.array([k1]), np.array([LAM1]))
        assert val == pytest.approx(1.0, rel=1e-12)

    def test_zero_gain_gives_spectrum_norm(self):
        lams = np.array([2.0, -3.0])
        val = gamma_constant(np.zeros(2), np.zeros(2), lams)
        assert val == pytest.approx(np.sqrt(np.sum(lams**2)), rel=1e-15)

    def test_two_mode_brute_force(self, es64):
        lams = es64.lambdas[:2]
        g = es64.gains[:2]
        k = place_poles(lams, g, np.array([-1.0, -2.0]))
        brute = 0.0
        for n in range(2):
            e = np.zeros(2)
            e[n] = 1.0
            brute += np.sum((g[n] * k - lams[n] * e) ** 2)
        assert gamma_constant(g, k, lams) == pytest.approx(np.sqrt(brute), rel=1e-14)


class TestMaxSamplingPeriod:
    def test_worked_example_value(self, reduced64):
        # frozen from the oracle run of the scalar condition
        assert reduced64.bound.T_star == pytest.approx(0.06515568526905118, rel=1e-9)

    def test_condition_equals_one_at_root(self, reduced64):
        b = reduced64.bound
        val = b.condition_value(
            b.T_star, float(np.linalg.norm(reduced64.g)), float(np.linalg.norm(reduced64.k)),
            reduced64.lambdas[0],
        )
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_condition_strictly_increasing(self, reduced64):
        b = reduced64.bound
        gn = float(np.linalg.norm(reduced64.g))
        kn = float(np.linalg.norm(reduced64.k))
        ts = np.linspace(1e-6, 2 * b.T_star, 1000)
        vals = np.array([b.condition_value(t, gn, kn, reduced64.lambdas[0]) for t in ts])
        assert np.all(np.diff(vals) > 0)
        assert np.all(vals[ts < b.T_star] < 1.0)

    def test_scalar_equation_cross_check(self):
        # independent bisection on the stated scalar equation
        k1 = (LAM1 - 1.0) / G1
        f = lambda T: (1.0 / 0.49) * G1 * (np.expm1(-LAM1 * T) / -LAM1) * np.exp(0.5 * T) * abs(k1) - 1
        t_ref = brentq(f, 1e-8, 1.0, xtol=1e-14)
        bound = max_sampling_period(1.0, 0.5, 0.49, np.array([G1]), np.array([k1]), 1.0, LAM1)
        assert bound.T_star == pytest.approx(t_ref, rel=1e-9)

    def test_zero_eigenvalue_linear_equation(self):
        # lam1 = 0: p1(T) = T, root of (G/eps)|g| T e^{sigma T}|k| Gamma = 1
        bound = max_sampling_period(1.0, 0.5, 0.5, np.array([1.0]), np.array([1.0]), 1.0, 0.0)
        t = bound.T_star
        assert 2.0 * t * np.exp(0.5 * t) == pytest.approx(1.0, abs=1e-9)

    def test_doubling_gamma_shrinks_period(self):
        k1 = (LAM1 - 1.0) / G1
        b1 = max_sampling_period(1.0, 0.5, 0.49, np.array([G1]), np.array([k1]), 1.0, LAM1)
        b2 = max_sampling_period(1.0, 0.5, 0.49, np.array([G1]), np.array([k1]), 2.0, LAM1)
        assert b2.T_star < b1.T_star
        assert b2.T_star == pytest.approx(b1.T_star / 2, rel=0.25)  # near-linear regime

    def test_zero_gain_returns_sentinel(self):
        bound = max_sampling_period(1.0, 0.5, 0.49, np.array([1.0]), np.array([0.0]), 1.0, 1.0)
        assert np.isinf(bound.T_star)


class TestExampleBound:
    def test_worked_value(self):
        t = example_bound_T(1.0, 15.0, 7.0, 0.5)
        assert t == pytest.approx(0.07040338288373031, rel=1e-9)
        # equality at the returned T
        c = 7.0 + np.pi**2 - 15.0
        lhs = 7.0 * c * t * np.exp((15.0 + 0.5 - np.pi**2) * t) + 0.5
        assert lhs == pytest.approx(c, rel=1e-10)

    def test_sigma_near_margin_kills_period(self):
        c = 7.0 + np.pi**2 - 15.0
        t = example_bound_T(1.0, 15.0, 7.0, c * (1 - 1e-6))
        assert t < 1e-6

    def test_small_gain_expansion(self):
        # gain just above the stabilizability floor, slack sigma near its
        # cap: the admissible period collapses like (1 - sigma/margin)/k
        k = (15.0 - np.pi**2) + 0.05
        sigma = 0.045
        t = example_bound_T(1.0, 15.0, k, sigma)
        c = k + np.pi**2 - 15.0
        approx = (1 - sigma / c) / k
        assert t == pytest.approx(approx, rel=0.15)

    def test_preconditions(self):
        with pytest.raises(ValueError):
            example_bound_T(1.0, 5.0, 7.0, 0.5)  # q < p pi^2
        with pytest.raises(ValueError):
            example_bound_T(1.0, 15.0, 3.0, 0.5)  # k too small
        with pytest.raises(ValueError):
            example_bound_T(1.0, 15.0, 7.0, 10.0)  # sigma too large


class TestFeedbackKernel:
    def test_unit_gain_returns_weighted_eigenfunction(self, es64):
        ker = feedback_kernel(np.array([1.0]), es64)
        assert np.allclose(ker, es64.pairs[0].phi, atol=1e-14)  # r = 1

    def test_orthogonality_zeroes_other_modes(self, es64):
        ker = feedback_kernel(np.array([1.0]), es64)
        u = float(np.dot(es64.weights, ker * es64.pairs[1].phi))
        assert abs(u) < 1e-12

    def test_modal_and_quadrature_paths_agree(self, es64):
        rng = np.random.default_rng(2)
        k = rng.normal(size=3)
        ker = feedback_kernel(k, es64)
        state = rng.normal(size=64)
        profile = state @ es64.phi_matrix
        u_quad = float(np.dot(es64.weights, ker * profile))
        u_modal = float(np.dot(k, state[:3]))
        assert u_quad == pytest.approx(u_modal, abs=1e-8)


class TestIssIdentity:
    def test_sinh_closed_form(self, es64):
        # q_op + w = 5 > 0: xbar = sinh(sqrt5 z)/sinh(sqrt5)
        rep = iss_identity_check(es64.problem, es64, w=20.0)
        beta = np.sqrt(5.0)
        exact = (np.sinh(beta) * np.cosh(beta) / beta - 1) / (2 * np.sinh(beta) ** 2)
        assert rep.bvp_integral == pytest.approx(exact, rel=1e-10)

    def test_harmonic_case(self, es64):
        # w = 15 makes the shifted reaction vanish: xbar = z, integral = 1/3
        rep = iss_identity_check(es64.problem, es64, w=15.0)
        assert rep.bvp_integral == pytest.approx(1.0 / 3.0, rel=1e-10)

    def test_oscillatory_branch(self, es64):
        # -lambda_1 < w < 15: xbar = sin(beta z)/sin(beta)
        rep = iss_identity_check(es64.problem, es64, w=10.0)
        beta = np.sqrt(5.0)
        exact = (0.5 - np.sin(2 * beta) / (4 * beta)) / np.sin(beta) ** 2
        assert rep.bvp_integral == pytest.approx(exact, rel=1e-10)

    def test_partial_sums_converge_from_below(self, es64):
        rep = iss_identity_check(es64.problem, es64, w=20.0, n_terms=512)
        assert np.all(np.diff(rep.series_partial) > 0)
        assert np.all(rep.series_partial < rep.bvp_integral * (1 + 1e-12))
        assert rep.gap[63] < 0.02    # 64 modes within 2%
        assert rep.gap[511] < 0.003  # 512 modes within 0.3%

    def test_w_below_spectrum_rejected(self, es64):
        with pytest.raises(ValueError):
            iss_identity_check(es64.problem, es64, w=-es64.lambdas[0])

    def test_K_grows_with_sigma(self, es64):
        lo = iss_identity_check(es64.problem, es64, w=20.0, sigma=1.0)
        hi = iss_identity_check(es64.problem, es64, w=20.0, sigma=10.0)
        assert hi.K_sigma > lo.K_sigma > 0


class TestSynthesize:
    def test_worked_example_pipeline(self, es64, reduced64):
        assert reduced64.m == 1
        assert reduced64.k[0] == pytest.approx(-1.3798237955492414, rel=1e-10)
        assert 0 < reduced64.bound.T_star < np.inf
        assert reduced64.bound.Gamma == pytest.approx(1.0, rel=1e-10)
        W = reduced64.W
        assert np.max(np.linalg.eigvals(W).real) < 0

    def test_m_must_clear_unstable_spectrum(self):
        es = analytic_eigensystem(1.0, 50.0, n_max=8, grid_size=64)  # two unstable modes
        with pytest.raises(ValueError):
            synthesize_reduced(es, m=1)
        ctrl = synthesize_reduced(es)
        assert ctrl.m == 2

    def test_default_poles_scale_with_spectrum(self, es64):
        ctrl = synthesize_reduced(es64)
        assert ctrl.m == 1
        assert ctrl.closed_loop_poles[0].real == pytest.approx(-abs(es64.lambdas[0]), rel=1e-12)
