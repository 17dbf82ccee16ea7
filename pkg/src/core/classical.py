"""
Classical Instantons - Quartet

Sampled instanton paths for the three flavors:
- R (diagonal): exact tanh kink along p = q
- P / Q (edges): perturbative in mu, q = -1 + mu q1, p = tanh(tau/2) + mu² p2
- any flavor: damped Newton relaxation of the coupled Euler-Lagrange equations

plus actions, energy and zero-mode diagnostics. All grids are uniform,
symmetric about tau = 0 and have an odd number of points so the
instanton center is a grid node.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.integrate import simpson
from scipy.sparse.linalg import spsolve

from core.errors import (ConvergenceError, DomainError, NullSolutionError,
                         NumericalError, OffShellError)
from core.model import (EqualParams, SystemParams, gradient, harmonic_frequencies,
                        hessian_entries, potential, require_four_well)

logger = logging.getLogger('quartet.classical')

DEFAULT_HALF_SPAN = 20.0
DEFAULT_POINTS = 4001
MIN_POINTS = 64
Q1_SWITCH = 12.0
BOUNDARY_TOL = 1e-6
ENERGY_TOL = 1e-6
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
NULL_ACTION = 1e-8
EDGE_MU_BOUND = 0.25
P_ACTION_COEFF = 2.0 * (math.pi ** 2 - 9.0)


class Flavor(str, Enum):
    P = 'P'
    Q = 'Q'
    R = 'R'


# ── Grid helpers ───────────────────────────────────────────────────────

def make_grid(half_span: float, n: int) -> np.ndarray:
    if n < MIN_POINTS:
        raise DomainError(f"grid needs at least {MIN_POINTS} points, got {n}", ['n'])
    if n % 2 == 0:
        raise DomainError(f"grid needs an odd point count so tau=0 is a node, got {n}", ['n'])
    if not half_span > 0:
        raise DomainError(f"half_span must be positive, got {half_span}", ['half_span'])
    tau = np.linspace(-half_span, half_span, n)
    tau[n // 2] = 0.0
    return tau


def grid_step(tau: np.ndarray) -> float:
    return float(tau[1] - tau[0])


def first_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order central differences inside, second order at the two outer nodes."""
    df = np.gradient(f, h, edge_order=2)
    df[2:-2] = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * h)
    return df


def second_derivative(f: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order five-point stencil inside, lower order at the ends."""
    d2 = np.empty_like(f)
    d2[2:-2] = (-f[4:] + 16.0 * f[3:-1] - 30.0 * f[2:-2] + 16.0 * f[1:-3] - f[:-4]) / (12.0 * h * h)
    d2[1] = (f[2] - 2.0 * f[1] + f[0]) / (h * h)
    d2[-2] = (f[-1] - 2.0 * f[-2] + f[-3]) / (h * h)
    d2[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h)
    d2[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / (h * h)
    return d2


def l2_norm(f: np.ndarray, h: float) -> float:
    return float(np.sqrt(np.sum(f * f) * h))


# ── Trajectory ─────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Trajectory:
    flavor: Flavor
    tau: np.ndarray
    p: np.ndarray
    q: np.ndarray
    dp: np.ndarray
    dq: np.ndarray
    params: SystemParams
    ddp: Optional[np.ndarray] = None
    ddq: Optional[np.ndarray] = None
    anti: bool = False
    perturbative: bool = False

    @property
    def n(self) -> int:
        return len(self.tau)

    @property
    def h(self) -> float:
        return grid_step(self.tau)

    @property
    def half_span(self) -> float:
        return float(self.tau[-1])

    @property
    def equal(self) -> EqualParams:
        return EqualParams.from_system(self.params)

    def accelerations(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.ddp is not None and self.ddq is not None:
            return self.ddp, self.ddq
        return first_derivative(self.dp, self.h), first_derivative(self.dq, self.h)

    def limits(self) -> Dict[str, Tuple[float, float]]:
        """Expected (left, right) boundary values per coordinate."""
        sign = -1.0 if self.anti else 1.0
        kink = (-sign, sign)
        if self.flavor is Flavor.R:
            return {'p': kink, 'q': kink}
        if self.flavor is Flavor.P:
            return {'p': kink, 'q': (-1.0, -1.0)}
        return {'p': (-1.0, -1.0), 'q': kink}

    def check_boundaries(self, tol: float = BOUNDARY_TOL) -> None:
        bad = []
        for name, (left, right) in self.limits().items():
            values = getattr(self, name)
            if abs(values[0] - left) >= tol or abs(values[-1] - right) >= tol:
                bad.append(name)
        if bad:
            raise DomainError(f"{self.flavor.value} trajectory misses its boundary values in {bad}", bad)

    def to_dict(self) -> Dict:
        return {'flavor': self.flavor.value, 'anti': self.anti,
                'perturbative': self.perturbative, 'params': self.params.to_dict()}


# ── Diagonal (R) instanton ─────────────────────────────────────────────

def diagonal_profile(tau, omega: float):
    """tanh(omega tau / 2) with its first two derivatives."""
    tau = np.asarray(tau, dtype=float)
    x = 0.5 * omega * tau
    p = np.tanh(x)
    sech2 = 1.0 / np.cosh(x) ** 2
    return p, 0.5 * omega * sech2, -0.5 * omega * omega * sech2 * p


def diagonal_trajectory(params: EqualParams, half_span: float = DEFAULT_HALF_SPAN,
                        n: int = DEFAULT_POINTS) -> Trajectory:
    """Exact R instanton. half_span is measured in kink widths 1/omega_plus."""
    if params.mu <= -0.5:
        raise DomainError(f"mu={params.mu} <= -1/2: the barrier has melted, no instanton", ['mu'])
    omega = params.omega_plus
    tau = make_grid(half_span / omega, n)
    p, dp, ddp = diagonal_profile(tau, omega)
    return Trajectory(flavor=Flavor.R, tau=tau, p=p, q=p.copy(), dp=dp, dq=dp.copy(),
                      params=params.to_system(), ddp=ddp, ddq=ddp.copy())


# ── Edge (P/Q) corrections ─────────────────────────────────────────────

def _x_minus_log1p(x: np.ndarray) -> np.ndarray:
    # x - ln(1+x) for x < e^-12
    return x * x * (0.5 - x * (1.0 / 3.0 - x * (0.25 - 0.2 * x)))


def q1_profile(tau):
    """
    First-order edge correction, the decaying solution of q1'' - q1 = sech²(tau/2).

    Beyond |tau| = Q1_SWITCH the closed form is rewritten with x = exp(-|tau|):
    q1 = -2|tau| x + 2 (x - ln(1+x))/x - 2 x ln(1+x).
    """
    tau = np.asarray(tau, dtype=float)
    a = np.abs(tau)
    out = np.empty_like(a)

    near = a <= Q1_SWITCH
    t = a[near]
    log_2cosh = np.logaddexp(0.5 * t, -0.5 * t)
    out[near] = 2.0 + 2.0 * t * np.sinh(t) - 4.0 * np.cosh(t) * log_2cosh

    far = ~near
    x = np.exp(-a[far])
    out[far] = -2.0 * a[far] * x + 2.0 * _x_minus_log1p(x) / x - 2.0 * x * np.log1p(x)

    if out.ndim == 0:
        return float(out)
    return out


def q1_derivative(tau):
    """Analytic dq1/dtau with the same large-|tau| rewrite."""
    tau = np.asarray(tau, dtype=float)
    a = np.abs(tau)
    out = np.empty_like(a)

    near = a <= Q1_SWITCH
    t = tau[near]
    log_2cosh = np.logaddexp(0.5 * t, -0.5 * t)
    out[near] = (2.0 * np.sinh(t) + 2.0 * t * np.cosh(t)
                 - 4.0 * np.sinh(t) * log_2cosh - 2.0 * np.cosh(t) * np.tanh(0.5 * t))

    far = ~near
    x = np.exp(-a[far])
    f_prime = 0.5 - x * (2.0 / 3.0 - x * (0.75 - 0.8 * x))
    g_prime = x * (2.0 - x * (1.5 - x * 4.0 / 3.0))
    magnitude = -2.0 * x + 2.0 * a[far] * x - 2.0 * x * f_prime + 2.0 * x * g_prime
    out[far] = np.sign(tau[far]) * magnitude

    if out.ndim == 0:
        return float(out)
    return out


def kink_well(tau) -> np.ndarray:
    """1 - 3/2 sech²(tau/2): the 1D kink fluctuation potential."""
    return 1.0 - 1.5 / np.cosh(0.5 * np.asarray(tau, dtype=float)) ** 2


def _numerov_matrix(g: np.ndarray, h: float) -> sparse.csc_matrix:
    """Interior Numerov operator for y'' = g y with zero Dirichlet ends."""
    c = h * h / 12.0
    main = -(2.0 + 10.0 * c * g[1:-1])
    lower = 1.0 - c * g[1:-2]
    upper = 1.0 - c * g[2:-1]
    return sparse.diags([lower, main, upper], [-1, 0, 1], format='csc')


def p2_profile(tau: np.ndarray) -> np.ndarray:
    """
    Second-order edge correction: [d² - (1 - 3/2 sech²(tau/2))] p2 = -2 tanh(tau/2) q1,
    p2(±T) = 0, with the kink zero mode sech²(tau/2) projected out.
    """
    tau = np.asarray(tau, dtype=float)
    if tau[-1] < 15.0 or abs(tau[0] + tau[-1]) > 1e-12 * tau[-1]:
        raise DomainError("p2 needs a symmetric grid with half-span >= 15", ['grid'])
    h = grid_step(tau)
    g = kink_well(tau)
    source = -2.0 * np.tanh(0.5 * tau) * q1_profile(tau)

    zero_mode = 1.0 / np.cosh(0.5 * tau[1:-1]) ** 2
    zero_mode /= np.linalg.norm(zero_mode)
    source_interior = source[1:-1] - np.dot(zero_mode, source[1:-1]) * zero_mode
    full_source = source.copy()
    full_source[1:-1] = source_interior

    a = _numerov_matrix(g, h)
    rhs = (h * h / 12.0) * (full_source[2:] + 10.0 * full_source[1:-1] + full_source[:-2])
    border = sparse.csc_matrix(zero_mode.reshape(-1, 1))
    bordered = sparse.bmat([[a, border], [border.T, None]], format='csc')
    solution = spsolve(bordered, np.concatenate([rhs, [0.0]]))
    if not np.all(np.isfinite(solution)):
        raise NumericalError("p2 solve is singular beyond the kink zero mode")

    residual = bordered @ solution - np.concatenate([rhs, [0.0]])
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    if np.max(np.abs(residual)) > 1e-8 * scale:
        raise NumericalError(f"p2 solve residual {np.max(np.abs(residual)):.3e} too large")

    p2 = np.zeros_like(tau)
    p2[1:-1] = solution[:-1]
    logger.debug(f"p2 solved on {len(tau)} points, multiplier {solution[-1]:.3e}")
    return p2


@dataclass(frozen=True, eq=False)
class EdgeCorrections:
    tau: np.ndarray
    q1: np.ndarray
    p2: np.ndarray


def edge_corrections(tau: np.ndarray) -> EdgeCorrections:
    return EdgeCorrections(tau=tau, q1=q1_profile(tau), p2=p2_profile(tau))


def edge_trajectory(params: EqualParams, half_span: float = DEFAULT_HALF_SPAN,
                    n: int = DEFAULT_POINTS, flavor: Flavor = Flavor.P) -> Trajectory:
    """Perturbative edge instanton through O(mu²); flavor Q is the p<->q mirror."""
    if abs(params.mu) >= EDGE_MU_BOUND:
        raise DomainError(
            f"edge instanton needs |mu| < 1/4 (transverse stability bound 1 - 16 mu² > 0), got mu={params.mu}",
            ['edge_stability'])
    if flavor is Flavor.R:
        raise DomainError("edge_trajectory builds P or Q flavors only", ['flavor'])
    mu = params.mu
    tau = make_grid(half_span, n)
    h = grid_step(tau)
    corr = edge_corrections(tau)

    p0, dp0, ddp0 = diagonal_profile(tau, 1.0)
    sech2 = 1.0 / np.cosh(0.5 * tau) ** 2
    dp2 = first_derivative(corr.p2, h)
    ddp2 = kink_well(tau) * corr.p2 - 2.0 * np.tanh(0.5 * tau) * corr.q1

    kink = p0 + mu * mu * corr.p2
    dkink = dp0 + mu * mu * dp2
    ddkink = ddp0 + mu * mu * ddp2
    flat = -1.0 + mu * corr.q1
    dflat = mu * q1_derivative(tau)
    ddflat = mu * (corr.q1 + sech2)

    if flavor is Flavor.P:
        p, q, dp, dq, ddp, ddq = kink, flat, dkink, dflat, ddkink, ddflat
    else:
        p, q, dp, dq, ddp, ddq = flat, kink, dflat, dkink, ddflat, ddkink
    return Trajectory(flavor=flavor, tau=tau, p=p, q=q, dp=dp, dq=dq,
                      params=params.to_system(), ddp=ddp, ddq=ddq,
                      perturbative=mu != 0.0)


def edge_kinetic_integrals(half_span: float = DEFAULT_HALF_SPAN,
                           n: int = DEFAULT_POINTS) -> Dict[str, float]:
    """
    O(mu²) kinetic coefficients of the edge path:
    q_dot_sq = ∫q1'² and p_dot_cross = 2∫p0' p2', by quadrature.
    """
    tau = make_grid(half_span, n)
    corr = edge_corrections(tau)
    _, _, ddp0 = diagonal_profile(tau, 1.0)
    q_dot_sq = simpson(q1_derivative(tau) ** 2, x=tau)
    # integrate by parts so only p2 itself enters
    p_dot_cross = -2.0 * simpson(ddp0 * corr.p2, x=tau)
    return {'q_dot_sq': float(q_dot_sq), 'p_dot_cross': float(p_dot_cross)}


# ── Closed-form actions ────────────────────────────────────────────────

def action_R_closed(params: EqualParams) -> float:
    if params.mu < -0.5:
        raise DomainError(f"mu={params.mu} < -1/2 has no diagonal instanton", ['mu'])
    return 4.0 / 3.0 * params.lam * math.sqrt(max(0.0, 1.0 + 2.0 * params.mu))


def action_P_closed(params: EqualParams) -> float:
    if abs(params.mu) >= EDGE_MU_BOUND:
        raise DomainError(f"edge action needs |mu| < 1/4, got mu={params.mu}", ['edge_stability'])
    return 2.0 / 3.0 * params.lam * (1.0 - P_ACTION_COEFF * params.mu ** 2)


def diagonal_preferred(params: EqualParams) -> bool:
    """True when one diagonal instanton is cheaper than two edge instantons."""
    return params.omega_plus < 1.0 - P_ACTION_COEFF * params.mu ** 2


# ── Diagnostics on sampled paths ───────────────────────────────────────

def euclidean_energy(traj: Trajectory, params: SystemParams) -> np.ndarray:
    kinetic = 0.5 * params.a_p * traj.dp ** 2 + 0.5 * params.a_q * traj.dq ** 2
    return potential(params, traj.p, traj.q) - kinetic


def action(traj: Trajectory, params: SystemParams, energy_tol: float = ENERGY_TOL) -> float:
    """
    S0 = ∫[a_p p'² + a_q q'²]; only valid on zero-energy solutions.
    The gate checks E / max(1, a_p, a_q), the energy with the mass scale divided out.
    """
    energy = euclidean_energy(traj, params) / max(1.0, params.a_p, params.a_q)
    worst = float(np.max(np.abs(energy)))
    if worst > energy_tol:
        raise OffShellError(f"max reduced |E| = {worst:.3e} exceeds {energy_tol:g}; "
                            f"kinetic action formula invalid")
    return float(simpson(params.a_p * traj.dp ** 2 + params.a_q * traj.dq ** 2, x=traj.tau))


def lagrangian_action(traj: Trajectory, params: SystemParams) -> float:
    """Full Euclidean action ∫[½a_p p'² + ½a_q q'² + V]; valid off shell."""
    integrand = (0.5 * params.a_p * traj.dp ** 2 + 0.5 * params.a_q * traj.dq ** 2
                 + potential(params, traj.p, traj.q))
    return float(simpson(integrand, x=traj.tau))


def topological_action(traj: Trajectory, params: SystemParams) -> float:
    """BPS bound lam omega_plus ∫p'(1 - p²) saturated by the diagonal path."""
    eq = EqualParams.from_system(params)
    return float(eq.lam * eq.omega_plus * simpson(traj.dp * (1.0 - traj.p ** 2), x=traj.tau))


def bps_residual(traj: Trajectory) -> float:
    if traj.flavor is not Flavor.R:
        raise DomainError(f"BPS form exists for the R flavor only, got {traj.flavor.value}", ['flavor'])
    omega = traj.equal.omega_plus
    sign = -1.0 if traj.anti else 1.0
    return float(np.max(np.abs(traj.dp - sign * 0.5 * omega * (1.0 - traj.p ** 2))))


def _accelerations_from_eom(params: SystemParams, p, q):
    dv_dp, dv_dq = gradient(params, p, q)
    return dv_dp / params.a_p, dv_dq / params.a_q


def eom_residual(traj: Trajectory, params: SystemParams) -> float:
    """Max Numerov-form residual of the coupled equations on interior nodes."""
    h = traj.h
    gp, gq = _accelerations_from_eom(params, traj.p, traj.q)
    worst = 0.0
    for y, g in ((traj.p, gp), (traj.q, gq)):
        r = (y[2:] - 2.0 * y[1:-1] + y[:-2]) / (h * h) - (g[2:] + 10.0 * g[1:-1] + g[:-2]) / 12.0
        worst = max(worst, float(np.max(np.abs(r))))
    return worst


def zero_mode(traj: Trajectory, params: SystemParams) -> Tuple[np.ndarray, float]:
    """Translation mode (p', q') and the relative norm of A^-1 M applied to it."""
    mode = np.vstack([traj.dp, traj.dq])
    h = traj.h
    v_pp, v_qq, v_pq = hessian_entries(params, traj.p, traj.q)
    res_p = -second_derivative(traj.dp, h) + (v_pp * traj.dp + v_pq * traj.dq) / params.a_p
    res_q = -second_derivative(traj.dq, h) + (v_pq * traj.dp + v_qq * traj.dq) / params.a_q
    inner = slice(2, -2)
    num = math.hypot(l2_norm(res_p[inner], h), l2_norm(res_q[inner], h))
    den = math.hypot(l2_norm(traj.dp[inner], h), l2_norm(traj.dq[inner], h))
    return mode, num / den


def fluctuation_action(traj: Trajectory, params: SystemParams,
                       eta_p: np.ndarray, eta_q: np.ndarray) -> float:
    """Quadratic action ½∫[a_p eta_p'² + a_q eta_q'² + eta·H·eta] for eta vanishing at the ends."""
    h = traj.h
    v_pp, v_qq, v_pq = hessian_entries(params, traj.p, traj.q)
    d_p = first_derivative(eta_p, h)
    d_q = first_derivative(eta_q, h)
    integrand = (params.a_p * d_p ** 2 + params.a_q * d_q ** 2
                 + v_pp * eta_p ** 2 + 2.0 * v_pq * eta_p * eta_q + v_qq * eta_q ** 2)
    return 0.5 * float(simpson(integrand, x=traj.tau))


def reverse(traj: Trajectory) -> Trajectory:
    """Anti-instanton tau -> -tau on the same symmetric grid."""
    ddp, ddq = traj.accelerations()
    return replace(traj, p=traj.p[::-1].copy(), q=traj.q[::-1].copy(),
                   dp=-traj.dp[::-1], dq=-traj.dq[::-1],
                   ddp=ddp[::-1].copy(), ddq=ddq[::-1].copy(), anti=not traj.anti)


# ── Newton relaxation ──────────────────────────────────────────────────

def _default_grid(params: SystemParams) -> np.ndarray:
    slowest = min(harmonic_frequencies(params))
    return make_grid(DEFAULT_HALF_SPAN / slowest, DEFAULT_POINTS)


def _initial_profile(params: SystemParams, flavor: Flavor, tau: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    try:
        eq = EqualParams.from_system(params)
    except DomainError:
        eq = None
    if eq is not None:
        try:
            if flavor is Flavor.R:
                guess = diagonal_trajectory(eq, n=2 * len(tau) + 1,
                                            half_span=max(DEFAULT_HALF_SPAN, tau[-1] * eq.omega_plus))
            else:
                guess = edge_trajectory(eq, half_span=max(DEFAULT_HALF_SPAN, float(tau[-1])),
                                        n=2 * len(tau) + 1, flavor=flavor)
            return (np.interp(tau, guess.tau, guess.p), np.interp(tau, guess.tau, guess.q))
        except DomainError as e:
            logger.debug(f"no analytic guess for {flavor.value}: {e}")
    p_kink = np.tanh(0.5 * params.omega_p * tau)
    q_kink = np.tanh(0.5 * params.omega_q * tau)
    if flavor is Flavor.R:
        return p_kink, q_kink
    if flavor is Flavor.P:
        return p_kink, -np.ones_like(tau)
    return -np.ones_like(tau), q_kink


def _block_entries(blocks: np.ndarray, row_offset: int, col_offset: int, count: int):
    """COO triplets for a run of 2x2 blocks on a block (off-)diagonal."""
    k = np.arange(count)
    rows, cols, data = [], [], []
    for a in range(2):
        for b in range(2):
            rows.append(2 * (k + row_offset) + a)
            cols.append(2 * (k + col_offset) + b)
            data.append(blocks[:, a, b])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(data)


def _newton_system(params: SystemParams, p: np.ndarray, q: np.ndarray, h: float):
    gp, gq = _accelerations_from_eom(params, p, q)
    res_p = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / (h * h) - (gp[2:] + 10.0 * gp[1:-1] + gp[:-2]) / 12.0
    res_q = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / (h * h) - (gq[2:] + 10.0 * gq[1:-1] + gq[:-2]) / 12.0
    residual = np.empty(2 * len(res_p))
    residual[0::2] = res_p
    residual[1::2] = res_q

    v_pp, v_qq, v_pq = hessian_entries(params, p, q)
    jac_g = np.empty((len(p), 2, 2))
    jac_g[:, 0, 0] = v_pp / params.a_p
    jac_g[:, 0, 1] = v_pq / params.a_p
    jac_g[:, 1, 0] = v_pq / params.a_q
    jac_g[:, 1, 1] = v_qq / params.a_q

    m = len(p) - 2
    eye = np.eye(2)
    diag_blocks = -2.0 * eye / (h * h) - 10.0 * jac_g[1:-1] / 12.0
    lower_blocks = eye / (h * h) - jac_g[1:-2] / 12.0
    upper_blocks = eye / (h * h) - jac_g[2:-1] / 12.0
    parts = [_block_entries(diag_blocks, 0, 0, m),
             _block_entries(lower_blocks, 1, 0, m - 1),
             _block_entries(upper_blocks, 0, 1, m - 1)]
    rows = np.concatenate([r for r, _, _ in parts])
    cols = np.concatenate([c for _, c, _ in parts])
    data = np.concatenate([d for _, _, d in parts])
    return residual, rows, cols, data


def solve_bvp(params: SystemParams, flavor: Flavor, grid: Optional[np.ndarray] = None,
              initial_guess: Optional[Trajectory] = None, tol: float = NEWTON_TOL,
              max_iter: int = NEWTON_MAX_ITER) -> Trajectory:
    """
    Damped Newton relaxation of the coupled Euler-Lagrange equations on a
    uniform grid with the flavor's Dirichlet values. The second difference
    is paired with the Numerov average of the force, so the scheme is fourth
    order. The kink coordinate is pinned to zero at tau = 0 to fix the
    translation mode.
    """
    require_four_well(params)
    tau = _default_grid(params) if grid is None else np.asarray(grid, dtype=float)
    make_grid(float(tau[-1]), len(tau))
    h = grid_step(tau)

    if initial_guess is not None:
        p = np.interp(tau, initial_guess.tau, initial_guess.p)
        q = np.interp(tau, initial_guess.tau, initial_guess.q)
    else:
        p, q = _initial_profile(params, flavor, tau)

    shell = Trajectory(flavor=flavor, tau=tau, p=p, q=q, dp=p, dq=q, params=params)
    for name, (left, right) in shell.limits().items():
        values = p if name == 'p' else q
        values[0], values[-1] = left, right

    center = len(tau) // 2
    pinned_component = 1 if flavor is Flavor.Q else 0
    pinned_index = 2 * (center - 1) + pinned_component
    (q if pinned_component else p)[center] = 0.0

    def assemble(p_: np.ndarray, q_: np.ndarray):
        residual, rows, cols, data = _newton_system(params, p_, q_, h)
        keep = rows != pinned_index
        rows = np.append(rows[keep], pinned_index)
        cols = np.append(cols[keep], pinned_index)
        data = np.append(data[keep], 1.0)
        residual[pinned_index] = 0.0
        size = len(residual)
        jac = sparse.csc_matrix((data, (rows, cols)), shape=(size, size))
        jac.eliminate_zeros()
        return residual, jac

    residual, jac = assemble(p, q)
    norm = float(np.max(np.abs(residual)))
    for iteration in range(1, max_iter + 1):
        if norm < tol:
            break
        step = spsolve(jac, -residual)
        if not np.all(np.isfinite(step)):
            raise ConvergenceError(f"Newton step became non-finite at iteration {iteration}")
        merit = float(np.linalg.norm(residual))
        alpha = 1.0
        while True:
            trial_p = p.copy()
            trial_q = q.copy()
            trial_p[1:-1] += alpha * step[0::2]
            trial_q[1:-1] += alpha * step[1::2]
            trial_residual, trial_jac = assemble(trial_p, trial_q)
            if np.linalg.norm(trial_residual) < merit or alpha < 1e-9:
                break
            alpha *= 0.5
        if alpha < 1e-9:
            raise ConvergenceError(f"line search stalled at iteration {iteration} (|F|={norm:.3e})")
        p, q, residual, jac = trial_p, trial_q, trial_residual, trial_jac
        norm = float(np.max(np.abs(residual)))
        logger.debug(f"newton {flavor.value} iter {iteration}: max|F|={norm:.3e} step={alpha:g}")
    else:
        if norm >= tol:
            raise ConvergenceError(f"Newton relaxation did not reach {tol:g} in {max_iter} iterations "
                                   f"(max|F|={norm:.3e})")

    dp = first_derivative(p, h)
    dq = first_derivative(q, h)
    ddp, ddq = _accelerations_from_eom(params, p, q)
    solved = Trajectory(flavor=flavor, tau=tau, p=p, q=q, dp=dp, dq=dq,
                        params=params, ddp=ddp, ddq=ddq)
    require_nontrivial(solved)
    return solved


def require_nontrivial(traj: Trajectory, threshold: Optional[float] = None) -> float:
    """Kinetic action of a relaxed path; below threshold it sits on a vacuum p² = q² = 1."""
    params = traj.params
    kinetic = float(simpson(params.a_p * traj.dp ** 2 + params.a_q * traj.dq ** 2, x=traj.tau))
    if kinetic < (NULL_ACTION if threshold is None else threshold):
        raise NullSolutionError(f"relaxation collapsed onto the vacuum (action {kinetic:.3e})")
    return kinetic
