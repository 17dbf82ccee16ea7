import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import zeta

from core.classical import (Flavor, Trajectory, action, action_P_closed, action_R_closed,
                            bps_residual, diagonal_preferred, diagonal_trajectory,
                            edge_kinetic_integrals, edge_trajectory, eom_residual, euclidean_energy,
                            fluctuation_action, lagrangian_action, make_grid, p2_profile,
                            q1_profile, require_nontrivial, reverse, second_derivative, solve_bvp,
                            topological_action, zero_mode)
from core.errors import ConvergenceError, DomainError, NullSolutionError, OffShellError
from core.model import EqualParams


class TestGrid:

    def test_centre_is_exact_zero(self):
        tau = make_grid(20.0, 4001)
        assert tau[2000] == 0.0
        assert tau[0] == -20.0 and tau[-1] == 20.0

    @pytest.mark.parametrize('n', [4000, 63])
    def test_rejects_bad_point_counts(self, n):
        with pytest.raises(DomainError):
            make_grid(20.0, n)


class TestDiagonal:

    def test_action_matches_closed_form(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        expected = 4.0 / 3.0 * negative_mu.lam * math.sqrt(0.6)
        assert action(traj, traj.params) == pytest.approx(expected, rel=1e-8)
        assert action_R_closed(negative_mu) == pytest.approx(expected, rel=1e-14)

    def test_topological_bound_is_saturated(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        assert topological_action(traj, traj.params) == pytest.approx(action(traj, traj.params), rel=1e-8)
        assert bps_residual(traj) < 1e-12

    def test_zero_energy(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        assert np.max(np.abs(euclidean_energy(traj, traj.params))) < 1e-12 * negative_mu.lam

    def test_solves_equations_of_motion(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        assert eom_residual(traj, traj.params) < 1e-7

    def test_zero_mode_residual(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        mode, rel = zero_mode(traj, traj.params)
        assert mode.shape == (2, traj.n)
        assert rel < 1e-6

    def test_zero_mode_costs_no_action(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        s2 = fluctuation_action(traj, traj.params, traj.dp, traj.dq)
        kinetic = 0.5 * negative_mu.lam * np.sum(traj.dp ** 2 + traj.dq ** 2) * traj.h
        assert abs(s2) < 1e-5 * kinetic

    def test_boundaries(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        traj.check_boundaries()
        anti = reverse(traj)
        assert anti.anti
        anti.check_boundaries()
        assert action(anti, anti.params) == pytest.approx(action(traj, traj.params), rel=1e-12)
        assert bps_residual(anti) < 1e-12

    def test_wrong_boundaries_flagged(self, negative_mu):
        traj = replace(diagonal_trajectory(negative_mu), flavor=Flavor.P)
        with pytest.raises(DomainError) as err:
            traj.check_boundaries()
        assert err.value.conditions == ['q']

    def test_off_shell_path_rejected(self, negative_mu):
        traj = diagonal_trajectory(negative_mu)
        bent = replace(traj, dp=1.1 * traj.dp)
        with pytest.raises(OffShellError):
            action(bent, bent.params)

    def test_energy_gate_divides_out_mass_scale(self, negative_mu):
        # at lam = 10 a relative velocity error delta moves E by up to 1.5 delta
        traj = diagonal_trajectory(negative_mu)
        nudged = replace(traj, dp=(1.0 + 4e-6) * traj.dp)
        assert action(nudged, nudged.params) == pytest.approx(action(traj, traj.params), rel=1e-5)
        pushed = replace(traj, dp=(1.0 + 2e-5) * traj.dp)
        with pytest.raises(OffShellError):
            action(pushed, pushed.params)

    def test_anti_instanton_solves_equations_of_motion(self, negative_mu):
        anti = reverse(diagonal_trajectory(negative_mu))
        assert eom_residual(anti, anti.params) < 1e-10

    def test_melted_barrier(self):
        with pytest.raises(DomainError):
            diagonal_trajectory(EqualParams(lam=1.0, mu=-0.5))

    def test_bps_only_for_diagonal(self):
        with pytest.raises(DomainError):
            bps_residual(edge_trajectory(EqualParams(lam=1.0, mu=0.1)))


class TestEdge:

    def test_q1_solves_its_source_equation(self):
        tau = make_grid(10.0, 1001)
        q1 = q1_profile(tau)
        residual = second_derivative(q1, tau[1] - tau[0]) - q1 - 1.0 / np.cosh(0.5 * tau) ** 2
        inner = np.abs(tau) < 8.0
        assert np.max(np.abs(residual[inner])) < 1e-6

    def test_q1_branches_agree(self):
        assert abs(q1_profile(12.0 - 1e-9) - q1_profile(12.0 + 1e-9)) < 1e-8
        assert q1_profile(0.0) == pytest.approx(2.0 - 4.0 * math.log(2.0), rel=1e-12)

    def test_q1_decays(self):
        assert abs(q1_profile(20.0)) < 1e-6
        assert abs(q1_profile(-20.0)) < 1e-6

    def test_kinetic_integrals(self):
        values = edge_kinetic_integrals()
        z3 = float(zeta(3))
        assert values['q_dot_sq'] == pytest.approx(4 * math.pi ** 2 - 20 - 16 * z3, abs=1e-6)
        assert values['p_dot_cross'] == pytest.approx(16 * (2 - math.pi ** 2 / 3 + z3), abs=1e-6)

    def test_kinetic_integrals_sum_to_action_coefficient(self):
        values = edge_kinetic_integrals()
        total = values['q_dot_sq'] + values['p_dot_cross']
        assert total == pytest.approx(-2 * (math.pi ** 2 - 9) * 2.0 / 3.0, abs=2e-6)

    def test_uncoupled_edge_is_exact_kink(self):
        traj = edge_trajectory(EqualParams(lam=3.0, mu=0.0))
        assert not traj.perturbative
        assert lagrangian_action(traj, traj.params) == pytest.approx(2.0, rel=1e-8)
        assert np.all(traj.q == -1.0)

    def test_boundaries_and_mirror(self):
        eq = EqualParams(lam=1.0, mu=0.1)
        p_path = edge_trajectory(eq)
        q_path = edge_trajectory(eq, flavor=Flavor.Q)
        p_path.check_boundaries()
        q_path.check_boundaries()
        np.testing.assert_array_equal(p_path.p, q_path.q)

    def test_corrections_have_definite_parity(self):
        tau = make_grid(20.0, 4001)
        q1 = q1_profile(tau)
        p2 = p2_profile(tau)
        assert np.max(np.abs(q1 - q1[::-1])) < 1e-8
        assert np.max(np.abs(p2 + p2[::-1])) < 1e-8

    @staticmethod
    def _action_residual(mu):
        eq = EqualParams(lam=1.0, mu=mu)
        traj = edge_trajectory(eq)
        return abs(lagrangian_action(traj, traj.params) - action_P_closed(eq))

    @pytest.mark.parametrize('mu', [0.1, 0.15, 0.2])
    def test_action_residual_is_third_order(self, mu):
        base = self._action_residual(0.05)
        slope = math.log(self._action_residual(mu) / base) / math.log(mu / 0.05)
        assert 2.5 < slope < 3.5

    def test_stability_bound(self):
        with pytest.raises(DomainError) as err:
            edge_trajectory(EqualParams(lam=1.0, mu=0.25))
        assert err.value.conditions == ['edge_stability']
        with pytest.raises(DomainError):
            action_P_closed(EqualParams(lam=1.0, mu=-0.3))

    def test_diagonal_preference(self):
        assert diagonal_preferred(EqualParams(lam=1.0, mu=-0.2))
        assert not diagonal_preferred(EqualParams(lam=1.0, mu=0.2))


class TestRelaxation:

    def test_recovers_diagonal_profile(self):
        eq = EqualParams(lam=1.0, mu=-0.2)
        solved = solve_bvp(eq.to_system(), Flavor.R)
        exact = np.tanh(0.5 * eq.omega_plus * solved.tau)
        assert np.max(np.abs(solved.p - exact)) < 1e-8
        assert np.max(np.abs(solved.q - exact)) < 1e-8
        assert action(solved, solved.params) == pytest.approx(action_R_closed(eq), rel=1e-6)

    def test_edge_path_close_to_perturbative(self):
        eq = EqualParams(lam=1.0, mu=0.1)
        solved = solve_bvp(eq.to_system(), Flavor.P)
        solved.check_boundaries()
        guess = edge_trajectory(eq, half_span=solved.half_span, n=solved.n)
        assert np.max(np.abs(solved.q - guess.q)) < 0.05
        assert lagrangian_action(solved, solved.params) == pytest.approx(action_P_closed(eq), rel=5e-3)

    def test_uncoupled_edge_path(self):
        solved = solve_bvp(EqualParams(lam=1.0, mu=0.0).to_system(), Flavor.P)
        np.testing.assert_allclose(solved.q, -1.0, rtol=0.0, atol=1e-14)
        assert np.max(np.abs(solved.p - np.tanh(0.5 * solved.tau))) < 1e-8

    def test_vacuum_path_is_reported(self):
        tau = make_grid(20.0, 401)
        flat = np.ones_like(tau)
        vacuum = Trajectory(flavor=Flavor.R, tau=tau, p=flat, q=flat, dp=0.0 * flat, dq=0.0 * flat,
                            params=EqualParams(lam=1.0, mu=-0.2).to_system())
        with pytest.raises(NullSolutionError):
            require_nontrivial(vacuum)
        solved = diagonal_trajectory(EqualParams(lam=1.0, mu=-0.2))
        assert require_nontrivial(solved) == pytest.approx(action(solved, solved.params))

    def test_relaxation_checks_for_collapse(self, monkeypatch):
        # any relaxed kink falls below an action floor of 1e3
        monkeypatch.setattr('core.classical.NULL_ACTION', 1e3)
        with pytest.raises(NullSolutionError):
            solve_bvp(EqualParams(lam=1.0, mu=-0.2).to_system(), Flavor.R)

    def test_iteration_cap(self):
        eq = EqualParams(lam=1.0, mu=-0.2)
        with pytest.raises(ConvergenceError):
            solve_bvp(eq.to_system(), Flavor.R, max_iter=0)
