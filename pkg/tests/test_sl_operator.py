import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import zohpde
from zohpde import (
    NumericFailure,
    SLProblem,
    analytic_eigensystem,
    boundary_lifting,
    input_gain,
    shoot_eigensystem,
    validate_eigensystem,
)
from zohpde.sl_operator import EigenPair

RT2 = np.sqrt(2.0)


class TestAnalyticEigensystem:
    def test_pure_laplacian_first_mode(self):
        es = analytic_eigensystem(1.0, 0.0, n_max=1, grid_size=400)
        assert es.lambdas[0] == pytest.approx(np.pi**2, rel=1e-15)
        mid = es.pairs[0].phi[200]  # z = 0.5
        assert mid == pytest.approx(RT2, rel=1e-14)

    def test_growth_cancels_first_eigenvalue(self):
        es = analytic_eigensystem(1.0, np.pi**2, n_max=1, grid_size=8)
        assert es.lambdas[0] == 0.0

    def test_unstable_rod_eigenvalue(self):
        es = analytic_eigensystem(1.0, 15.0, n_max=1, grid_size=8)
        assert es.lambdas[0] == pytest.approx(np.pi**2 - 15.0, abs=1e-12)
        assert es.lambdas[0] == pytest.approx(-5.1304, abs=1e-4)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            analytic_eigensystem(1.0, 0.0, n_max=0, grid_size=400)
        with pytest.raises(ValueError):
            analytic_eigensystem(1.0, 0.0, n_max=1, grid_size=1)
        with pytest.raises(ValueError):
            analytic_eigensystem(1.0, 0.0, n_max=4, grid_size=401)  # odd
        with pytest.raises(ValueError):
            analytic_eigensystem(-1.0, 0.0, n_max=1, grid_size=400)

    def test_endpoint_derivatives(self):
        es = analytic_eigensystem(2.0, 3.0, n_max=3, grid_size=64)
        for pr in es.pairs:
            assert pr.dphi0 == pytest.approx(RT2 * pr.n * np.pi, rel=1e-15)
            assert pr.dphi1 == pytest.approx(RT2 * pr.n * np.pi * (-1) ** pr.n, rel=1e-15)
            assert pr.phi0 == 0.0 and pr.phi1 == 0.0


class TestShooting:
    def test_matches_analytic_constant_case(self, shoot20):
        es_an = analytic_eigensystem(1.0, 15.0, n_max=20, grid_size=400)
        assert np.max(np.abs(shoot20.lambdas - es_an.lambdas)) < 1e-8
        for i in range(20):
            diff = es_an.norm_r(shoot20.pairs[i].phi - es_an.pairs[i].phi)
            assert diff < 1e-6

    def test_boundary_conditions_satisfied(self, shoot20):
        pr = shoot20.problem
        for pair in shoot20.pairs:
            assert abs(pr.b1 * pair.phi0 + pr.b2 * pair.dphi0) < 1e-9
            assert abs(pr.a1 * pair.phi1 + pr.a2 * pair.dphi1) < 1e-6

    def test_strictly_increasing(self, shoot20):
        assert np.all(np.diff(shoot20.lambdas) > 0)

    @pytest.mark.slow
    def test_reaction_shift_moves_spectrum_only(self):
        base = SLProblem(p=1.0, q=2.0, r=1.0, b1=1.0, b2=0.0, a1=1.0, a2=0.0)
        shifted = SLProblem(p=1.0, q=5.0, r=1.0, b1=1.0, b2=0.0, a1=1.0, a2=0.0)
        es_a = shoot_eigensystem(base, n_max=4, grid_size=200)
        es_b = shoot_eigensystem(shifted, n_max=4, grid_size=200)
        assert np.allclose(es_b.lambdas - es_a.lambdas, 3.0, atol=1e-8)
        for i in range(4):
            assert es_a.norm_r(es_a.pairs[i].phi - es_b.pairs[i].phi) < 1e-7

    def test_neumann_left_closed_form(self):
        prob = SLProblem(p=1.0, q=0.0, r=1.0, b1=0.0, b2=1.0, a1=1.0, a2=0.0)
        es = shoot_eigensystem(prob, n_max=6, grid_size=400)
        n = np.arange(1, 7)
        lam_true = (n - 0.5) ** 2 * np.pi**2
        assert np.max(np.abs(es.lambdas - lam_true)) < 1e-8
        phi_true = RT2 * np.cos((1 - 0.5) * np.pi * es.grid)
        assert es.norm_r(es.pairs[0].phi - phi_true) < 1e-6

    def test_invalid_arguments(self):
        prob = SLProblem.constant_dirichlet(1.0, 0.0)
        with pytest.raises(ValueError):
            shoot_eigensystem(prob, n_max=0, grid_size=400)
        with pytest.raises(ValueError):
            shoot_eigensystem(prob, n_max=2, grid_size=400, tol=-1.0)

    def test_ode_residual_second_order(self):
        # second-difference residual of sampled eigenfunctions is O(h^2)
        def residual(es, i):
            h = es.grid[1] - es.grid[0]
            phi = es.pairs[i].phi
            lam = es.pairs[i].lam
            d2 = (phi[2:] - 2 * phi[1:-1] + phi[:-2]) / h**2
            r = -d2 + (-15.0) * phi[1:-1] - lam * phi[1:-1]
            return np.max(np.abs(r))

        prob = SLProblem.constant_dirichlet(1.0, 15.0)
        es_c = shoot_eigensystem(prob, n_max=3, grid_size=100)
        es_f = shoot_eigensystem(prob, n_max=3, grid_size=200)
        for i in range(3):
            ratio = residual(es_c, i) / residual(es_f, i)
            assert 3.0 < ratio < 5.0


class TestValidation:
    def test_gram_deviation_analytic(self, es64):
        rep = validate_eigensystem(es64)
        assert rep.gram_max_deviation < 1e-8
        assert rep.first_positive_index == 2  # lambda_1 < 0 < lambda_2

    def test_gram_deviation_shooting(self, shoot20):
        rep = validate_eigensystem(shoot20)
        assert rep.gram_max_deviation < 1e-8

    def test_partial_sums_look_convergent(self, es64):
        rep = validate_eigensystem(es64)
        # terms behave like sqrt(2)/(n^2 pi^2 - 15): exponent ~ 2
        assert rep.tail_exponent == pytest.approx(2.0, abs=0.2)
        assert rep.looks_summable
        increments = np.diff(rep.partial_sums)
        assert np.all(increments > 0) and increments[-1] < increments[0]

    def test_single_pair_reports_norm_defect(self):
        es = analytic_eigensystem(1.0, 0.0, n_max=1, grid_size=400)
        bad_phi = es.pairs[0].phi * 1.001
        pair = EigenPair(
            n=1, lam=es.pairs[0].lam, phi=bad_phi, phi0=0.0,
            dphi0=es.pairs[0].dphi0, phi1=0.0, dphi1=es.pairs[0].dphi1,
            max_abs_phi=float(np.max(np.abs(bad_phi))),
        )
        es_bad = zohpde.EigenSystem(problem=es.problem, grid=es.grid, pairs=(pair,))
        rep = validate_eigensystem(es_bad)
        assert rep.gram_max_deviation == pytest.approx(abs(1.001**2 - 1.0), rel=1e-6)

    def test_requires_positive_eigenvalue(self):
        es = analytic_eigensystem(1.0, 100.0, n_max=3, grid_size=64)
        assert np.all(es.lambdas < 0)
        with pytest.raises(ValueError):
            validate_eigensystem(es)

    def test_n_tail_bounds(self, es64):
        with pytest.raises(ValueError):
            validate_eigensystem(es64, n_tail=6400)


class TestBoundaryLifting:
    def test_dirichlet_case(self):
        lp = boundary_lifting(1.0, 0.0)
        assert (lp.sigma1, lp.sigma2) == (3.0, -2.0)
        assert lp(1.0) == pytest.approx(1.0, abs=1e-15)
        assert lp.deriv(1.0) == pytest.approx(0.0, abs=1e-15)

    def test_neumann_case(self):
        lp = boundary_lifting(0.0, 1.0)
        assert (lp.sigma1, lp.sigma2) == (-1.0, 1.0)
        assert lp.deriv(1.0) == pytest.approx(1.0, abs=1e-15)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            boundary_lifting(0.0, 0.0)

    @given(
        a1=st.floats(-10, 10, allow_nan=False),
        a2=st.floats(-10, 10, allow_nan=False),
    )
    @settings(max_examples=100, deadline=None)
    def test_boundary_identities(self, a1, a2):
        if abs(a1) + abs(a2) < 1e-6:
            return
        lp = boundary_lifting(a1, a2)
        assert lp(0.0) == 0.0 and lp.deriv(0.0) == 0.0
        assert a1 * lp(1.0) + a2 * lp.deriv(1.0) == pytest.approx(1.0, abs=1e-12)


class TestInputGain:
    def test_dirichlet_first_gain(self, es64):
        g1 = input_gain(es64.pairs[0], es64.problem)
        assert g1 == pytest.approx(RT2 * np.pi, rel=1e-14)

    def test_sign_alternation(self, es64):
        g2 = input_gain(es64.pairs[1], es64.problem)
        assert g2 == pytest.approx(-2 * RT2 * np.pi, rel=1e-14)

    def test_neumann_actuation_collapses(self):
        prob = SLProblem(p=2.0, q=0.0, r=1.0, b1=1.0, b2=0.0, a1=0.0, a2=1.0)
        pair = EigenPair(n=1, lam=1.0, phi=np.zeros(3), phi0=0.0, dphi0=1.0,
                         phi1=0.7, dphi1=0.0, max_abs_phi=1.0)
        assert input_gain(pair, prob) == pytest.approx(2.0 * 0.7)

    def test_all_gains_nonzero(self, es64):
        assert np.all(np.abs(es64.gains) > 1e-12)

    def test_corrupted_pair_detected(self, es64):
        pair = EigenPair(n=1, lam=1.0, phi=np.zeros(3), phi0=0.0, dphi0=0.0,
                         phi1=0.0, dphi1=0.0, max_abs_phi=0.0)
        with pytest.raises(NumericFailure):
            input_gain(pair, es64.problem)


class TestSLProblem:
    def test_rejects_degenerate_boundaries(self):
        with pytest.raises(ValueError):
            SLProblem(p=1.0, q=0.0, r=1.0, b1=0.0, b2=0.0, a1=1.0, a2=0.0)
        with pytest.raises(ValueError):
            SLProblem(p=1.0, q=0.0, r=1.0, b1=1.0, b2=0.0, a1=0.0, a2=0.0)

    def test_rejects_nonpositive_coefficients(self):
        with pytest.raises(ValueError):
            SLProblem(p=-1.0, q=0.0, r=1.0, b1=1.0, b2=0.0, a1=1.0, a2=0.0)
        with pytest.raises(ValueError):
            SLProblem(p=1.0, q=0.0, r=0.0, b1=1.0, b2=0.0, a1=1.0, a2=0.0)

    def test_tabulated_coefficient_roundtrip(self):
        znodes = np.linspace(0, 1, 21)
        vals = 1.0 + 0.5 * znodes**2
        prob = SLProblem(p=(znodes, vals), q=0.0, r=1.0, b1=1.0, b2=0.0, a1=1.0, a2=0.0)
        z = np.linspace(0, 1, 101)
        assert np.max(np.abs(prob.p(z) - (1 + 0.5 * z**2))) < 1e-6
