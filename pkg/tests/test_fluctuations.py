import math

import numpy as np
import pytest

from core.classical import (Flavor, Trajectory, diagonal_trajectory, edge_trajectory,
                            first_derivative, kink_well, make_grid, q1_profile)
from core.errors import DomainError, PoleError, StalledTrajectoryError
from core.fluctuations import (MELTING_COEFF, DeterminantMethod, FluctuationOperator, chi_L_R,
                               chi_T_P, chi_T_R, curvature, determinant_record, diagonal_operators,
                               edge_operators, gelfand_yaglom, lowest_transverse_eigenvalue,
                               melting_fit, melting_probe, poschl_teller_operator,
                               poschl_teller_ratio, poschl_teller_spectrum, primed_determinant,
                               pt_parameters,
                               rotated_operators, transverse_eigenvalue_expansion)
from core.model import EqualParams, SystemParams

# kappa - j >= 0.3 keeps every ratio away from a Gamma pole
PT_CASES = [(kappa, j) for kappa in (1.0, 1.5, 2.0, 2.5, 3.0) for j in (0.0, 0.3, 0.5, 0.7)]


class TestPoschlTeller:

    @pytest.mark.parametrize('kappa,j', PT_CASES)
    def test_gelfand_yaglom_matches_gamma_form(self, kappa, j):
        closed = poschl_teller_ratio(kappa, j)
        assert closed.method is DeterminantMethod.GAMMA_CLOSED_FORM
        assert gelfand_yaglom(poschl_teller_operator(kappa, j)) == pytest.approx(closed.value, rel=1e-6)

    def test_free_operator_has_unit_ratio(self):
        assert poschl_teller_ratio(2.0, 0.0).value == pytest.approx(1.0)

    def test_zero_at_pole(self):
        assert poschl_teller_ratio(2.0, 2.0).value == 0.0

    def test_bound_states(self):
        assert poschl_teller_spectrum(2.0, 2.0) == [0.0, 3.0]
        assert poschl_teller_spectrum(1.0, 0.0) == []

    def test_rejects_bad_parameters(self):
        with pytest.raises(DomainError):
            poschl_teller_ratio(0.0, 1.0)
        with pytest.raises(DomainError):
            poschl_teller_ratio(1.0, -1.0)


class TestPrimedDeterminant:

    def test_kink_operator(self):
        result = primed_determinant(poschl_teller_operator(2.0, 2.0))
        assert result.primed
        assert result.method is DeterminantMethod.REGULATED_GY
        assert result.value == pytest.approx(1.0 / 48.0, rel=1e-4)

    @pytest.mark.parametrize('mu', [-0.1, -0.2, -0.3])
    def test_diagonal_longitudinal(self, mu):
        eq = EqualParams(lam=1.0, mu=mu)
        m_l, _ = diagonal_operators(eq)
        assert 1.0 / primed_determinant(m_l).value == pytest.approx(chi_L_R(eq), rel=1e-4)
        assert chi_L_R(eq) == pytest.approx(12.0 * (1.0 + 2.0 * mu))

    def test_edge_longitudinal(self):
        m_l, _ = edge_operators(EqualParams(lam=1.0, mu=0.1))
        assert 1.0 / primed_determinant(m_l).value == pytest.approx(12.0, rel=1e-4)

    def test_shift_into_continuum(self):
        with pytest.raises(DomainError):
            gelfand_yaglom(poschl_teller_operator(1.0, 0.5), lambda_shift=1.0)


class TestTransverseRatios:

    @pytest.mark.parametrize('mu', [-0.1, -0.2, -0.3])
    def test_diagonal_closed_form_matches_gelfand_yaglom(self, mu):
        _, m_t = diagonal_operators(EqualParams(lam=1.0, mu=mu))
        assert 1.0 / gelfand_yaglom(m_t) == pytest.approx(chi_T_R(mu), rel=1e-4)

    def test_diagonal_value(self):
        assert 290.0 < chi_T_R(-0.2) < 315.0

    def test_pole_as_coupling_vanishes(self):
        mu = -1e-4
        assert chi_T_R(mu) * mu == pytest.approx(-15.0, rel=1e-2)
        with pytest.raises(PoleError):
            chi_T_R(0.0)

    @pytest.mark.parametrize('mu', [0.1, -0.5])
    def test_diagonal_window(self, mu):
        with pytest.raises(DomainError):
            chi_T_R(mu)

    def test_edge_ratio(self):
        mu = 0.05
        _, m_t = edge_operators(EqualParams(lam=1.0, mu=mu))
        assert chi_T_P(mu) == pytest.approx(math.exp(-0.2))
        assert abs(1.0 / gelfand_yaglom(m_t) - chi_T_P(mu)) < 4e-3

    def test_edge_window(self):
        with pytest.raises(DomainError):
            chi_T_P(0.25)
        with pytest.raises(DomainError):
            edge_operators(EqualParams(lam=1.0, mu=-0.3))


class TestMelting:

    def test_coefficient(self):
        fit = melting_fit([1e-2, 4e-3, 1e-3])
        assert fit.relative_error < 0.05
        assert fit.to_dict()['expected'] == pytest.approx(4.0 * math.log(2.0))
        assert MELTING_COEFF == pytest.approx(2.772588722)

    def test_needs_two_points(self):
        with pytest.raises(DomainError):
            melting_fit([1e-3, 1e-3])

    def test_eps_range(self):
        with pytest.raises(DomainError):
            melting_fit([1e-3, 0.6])

    def test_wide_eps_warns(self, caplog):
        melting_fit([1e-3, 0.1])
        assert 'asymptotic melting window' in caplog.text

    def test_coefficient_helper_matches_fit(self):
        eps = [1e-2, 4e-3, 1e-3]
        assert melting_probe(eps) == melting_fit(eps).coefficient


class TestSpectra:

    @pytest.mark.parametrize('mu', [-0.05, 0.05])
    def test_diagonal_transverse_sign(self, mu):
        eq = EqualParams(lam=1.0, mu=mu)
        _, m_t = diagonal_operators(eq)
        kappa, ell = pt_parameters(mu)
        expected = 0.25 * eq.omega_plus ** 2 * (kappa ** 2 - ell ** 2)
        value = lowest_transverse_eigenvalue(m_t)
        assert value == pytest.approx(expected, rel=1e-5)
        assert math.copysign(1.0, value) == -math.copysign(1.0, mu)

    def test_small_coupling_expansion(self):
        mu = -0.01
        kappa, ell = pt_parameters(mu)
        assert abs(kappa ** 2 - ell ** 2 - transverse_eigenvalue_expansion(mu)) < 1e-4

    @pytest.mark.parametrize('mu', [-0.01, -0.02])
    def test_edge_bound_state(self, mu):
        _, m_t = edge_operators(EqualParams(lam=1.0, mu=mu), half_span=150.0, n=6001)
        shift = lowest_transverse_eigenvalue(m_t) - (1.0 - 16.0 * mu * mu)
        assert 0.0 < shift < 800.0 * abs(mu) ** 3

    def test_edge_no_bound_state_above_zero(self):
        _, m_t = edge_operators(EqualParams(lam=1.0, mu=0.05))
        assert lowest_transverse_eigenvalue(m_t) > 1.0


class TestRotatedFrame:

    def test_equal_masses_reduce_to_diagonal_operators(self):
        eq = EqualParams(lam=1.0, mu=-0.2)
        traj = diagonal_trajectory(eq)
        blocks = rotated_operators(traj, traj.params)
        assert blocks.offdiagonal_max() < 1e-10
        expected = (1.0 - 2.0 * eq.mu) - (1.5 - eq.mu) / np.cosh(0.5 * eq.omega_plus * traj.tau) ** 2
        np.testing.assert_allclose(blocks.M_T.well, expected, atol=1e-10)
        expected_l = eq.omega_plus ** 2 * (1.0 - 1.5 / np.cosh(0.5 * eq.omega_plus * traj.tau) ** 2)
        np.testing.assert_allclose(blocks.M_L.well, expected_l, atol=1e-10)

    def test_straight_path_has_no_curvature(self):
        traj = diagonal_trajectory(EqualParams(lam=1.0, mu=-0.2))
        kappa, theta_dot = curvature(traj)
        assert np.max(np.abs(kappa[1:-1])) < 1e-10
        assert np.max(np.abs(theta_dot[1:-1])) < 1e-10

    def test_edge_path_blocks(self):
        mu = 0.1
        traj = edge_trajectory(EqualParams(lam=1.0, mu=mu))
        blocks = rotated_operators(traj, traj.params)
        np.testing.assert_array_equal(blocks.LT.first, -blocks.TL.first)
        sech2 = 1.0 / np.cosh(0.5 * traj.tau) ** 2
        transverse = 1.0 - mu * (sech2 + 3.0 * q1_profile(traj.tau))
        assert np.max(np.abs(blocks.M_T.well - transverse)) < 3.0 * mu
        assert np.max(np.abs(blocks.M_L.well - kink_well(traj.tau))) < 3.0 * mu

    def test_uncoupled_edge_blocks(self):
        traj = edge_trajectory(EqualParams(lam=1.0, mu=0.0))
        blocks = rotated_operators(traj, traj.params)
        np.testing.assert_allclose(blocks.M_L.well, kink_well(traj.tau), rtol=0.0, atol=1e-12)
        np.testing.assert_allclose(blocks.M_T.well, 1.0, rtol=0.0, atol=1e-12)

    def test_circle_has_unit_curvature(self):
        tau = make_grid(3.0, 601)
        unit = SystemParams(a_p=1.0, a_q=1.0, b_p=1.0, b_q=1.0, c=0.0)
        circle = Trajectory(flavor=Flavor.R, tau=tau, p=np.cos(tau), q=np.sin(tau),
                            dp=-np.sin(tau), dq=np.cos(tau), params=unit,
                            ddp=-np.cos(tau), ddq=-np.sin(tau))
        kappa, theta_dot = curvature(circle)
        np.testing.assert_allclose(kappa, 1.0, rtol=0.0, atol=1e-10)
        np.testing.assert_allclose(theta_dot, 1.0, rtol=0.0, atol=1e-10)
        theta = np.unwrap(np.arctan2(circle.dq, circle.dp))
        np.testing.assert_allclose(first_derivative(theta, circle.h)[2:-2], theta_dot[2:-2],
                                   rtol=0.0, atol=1e-8)

    def test_stalled_path(self):
        from dataclasses import replace
        traj = diagonal_trajectory(EqualParams(lam=1.0, mu=-0.2))
        stalled = replace(traj, dp=np.zeros_like(traj.dp), dq=np.zeros_like(traj.dq))
        with pytest.raises(StalledTrajectoryError):
            curvature(stalled)


class TestOperatorGrid:

    def test_mismatched_ends(self):
        tau = np.linspace(-10.0, 10.0, 101)
        with pytest.raises(DomainError):
            FluctuationOperator.from_samples(tau, np.linspace(1.0, 2.0, 101))

    def test_extension_keeps_step(self):
        op = poschl_teller_operator(2.0, 1.0, half_span=10.0, n=1001)
        wider = op.extended(1.25)
        assert wider.h == pytest.approx(op.h)
        assert wider.n == op.n + 250
        np.testing.assert_array_equal(wider.well[125:-125], op.well)

    def test_extension_must_add_points(self):
        op = poschl_teller_operator(2.0, 1.0, half_span=10.0, n=101)
        with pytest.raises(DomainError):
            op.extended(1.001)


class TestRecords:

    def test_inside_both_windows(self):
        row = determinant_record(-0.2)
        assert row['method'] == 'GammaClosedForm'
        assert row['chi_T_R'] == pytest.approx(chi_T_R(-0.2))
        assert row['chi_L_P'] == 12.0
        assert row['chi_T_P'] == pytest.approx(math.exp(0.8))

    def test_pole_and_windows(self):
        assert determinant_record(0.0)['chi_T_R'] == 'pole'
        above = determinant_record(0.1)
        assert above['chi_L_R'] is None and above['chi_T_R'] is None
        assert above['chi_T_P'] == pytest.approx(math.exp(-0.4))
        deep = determinant_record(-0.3)
        assert deep['chi_L_P'] is None and deep['chi_T_P'] is None

    def test_unknown_method(self):
        with pytest.raises(DomainError):
            determinant_record(-0.2, method='guess')

    def test_numeric_agrees_with_closed(self):
        closed = determinant_record(-0.2)
        numeric = determinant_record(-0.2, method='numeric')
        assert numeric['method'] == 'RegulatedGY'
        assert numeric['chi_L_R'] == pytest.approx(closed['chi_L_R'], rel=1e-4)
        assert numeric['chi_T_R'] == pytest.approx(closed['chi_T_R'], rel=1e-4)
        assert numeric['chi_L_P'] == pytest.approx(12.0, rel=1e-4)
