"""
Dilute Instanton Gas - Quartet

Summing independent P, Q and R instanton events between the four wells
turns the Euclidean amplitude into C·exp(K T) for the weighted adjacency
matrix K of the complete graph on the wells a, b, c, d. This module builds
the weights, the spectrum of K, the amplitudes and the real-time
probabilities that follow from them.

Vertex order is (a, b, c, d) = (-1,-1), (-1,1), (1,1), (1,-1) in (p, q).
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np
from scipy.special import logsumexp

from core.classical import (action, action_P_closed, action_R_closed,
                            diagonal_trajectory, edge_trajectory, lagrangian_action)
from core.errors import DomainError, NumericalError
from core.fluctuations import (diagonal_operators, edge_operators,
                               gelfand_yaglom, log_chi_T_R, primed_determinant)
from core.model import EqualParams

logger = logging.getLogger('quartet.gas')

VERTICES = ('a', 'b', 'c', 'd')
VERTEX_POSITIONS = {'a': (-1.0, -1.0), 'b': (-1.0, 1.0), 'c': (1.0, 1.0), 'd': (1.0, -1.0)}
HYPERBOLIC_LIMIT = 300.0


@dataclass(frozen=True)
class InstantonWeights:
    K_P: float
    K_Q: float
    K_R: float
    log_C: float = 0.0
    transverse_unstable: bool = False

    @property
    def C(self) -> float:
        return math.exp(self.log_C)

    @property
    def K(self) -> float:
        """Common edge weight; only defined when K_P = K_Q."""
        if not math.isclose(self.K_P, self.K_Q, rel_tol=1e-12, abs_tol=1e-300):
            raise DomainError(f"edge weights differ (K_P={self.K_P}, K_Q={self.K_Q})", ['K_P=K_Q'])
        return self.K_P

    @classmethod
    def build(cls, params: EqualParams, T: float = 0.0, method: str = 'closed') -> 'InstantonWeights':
        k_p = k_weight_P(params, method=method)
        return cls(K_P=k_p, K_Q=k_p, K_R=k_weight_R(params, method=method),
                   log_C=log_vacuum_factor(params, T),
                   transverse_unstable=not diagonal_channel_open(params))

    def to_dict(self) -> Dict:
        return {'K_P': self.K_P, 'K_Q': self.K_Q, 'K_R': self.K_R, 'C': self.C,
                'transverse_unstable': self.transverse_unstable}


@dataclass(frozen=True)
class GasSpectrum:
    lambda_S: float
    lambda_P: float
    lambda_Q: float
    lambda_R: float
    dE_P: float
    dE_Q: float
    dE_R: float

    def to_dict(self) -> Dict:
        return {k: getattr(self, k) for k in
                ('lambda_S', 'lambda_P', 'lambda_Q', 'lambda_R', 'dE_P', 'dE_Q', 'dE_R')}


# ── Weights ────────────────────────────────────────────────────────────

def log_vacuum_factor(params: EqualParams, T: float) -> float:
    if abs(params.mu) >= 0.5:
        raise DomainError(f"vacuum factor needs |mu| < 1/2, got {params.mu}", ['mu'])
    w_plus, w_minus = params.omega_plus, params.omega_minus
    return (math.log(params.lam * math.sqrt(w_plus * w_minus) / math.pi)
            - 0.5 * (w_plus + w_minus) * T)


def vacuum_factor(params: EqualParams, T: float) -> float:
    """Free harmonic amplitude in one well: (lam sqrt(w+ w-)/pi) exp(-(w+ + w-)T/2)."""
    return math.exp(log_vacuum_factor(params, T))


def ground_energy(params: EqualParams) -> float:
    return 0.5 * (params.omega_plus + params.omega_minus)


def diagonal_channel_open(params: EqualParams) -> bool:
    """False when the diagonal transverse mode is unstable (mu >= 0)."""
    return -0.5 < params.mu < 0


def _kink_weight(s0: float, chi_l: float, chi_t: float) -> float:
    # sqrt(S0/2pi) sqrt(chi_L chi_T) e^-S0, assembled in logs
    return math.exp(0.5 * math.log(s0 * chi_l * chi_t / (2.0 * math.pi)) - s0)


def k_weight_R(params: EqualParams, method: str = 'closed') -> float:
    """Diagonal instanton weight in units of omega; zero when the channel is closed."""
    if params.mu <= -0.5:
        raise DomainError(f"mu={params.mu} <= -1/2: diagonal instanton does not exist", ['mu'])
    if not diagonal_channel_open(params):
        logger.debug(f"K_R forced to zero at mu={params.mu}: transverse-unstable diagonal channel")
        return 0.0
    if method == 'closed':
        s0 = action_R_closed(params)
        log_chi, _ = log_chi_T_R(params.mu)
        return math.exp(0.5 * log_chi + 0.5 * math.log(6.0 * s0 / math.pi) - s0 + math.log(params.omega_plus))
    if method == 'numeric':
        traj = diagonal_trajectory(params)
        s0 = action(traj, traj.params)
        m_l, m_t = diagonal_operators(params)
        chi_l = 1.0 / primed_determinant(m_l).value
        chi_t = 1.0 / gelfand_yaglom(m_t)
        return _kink_weight(s0, chi_l, chi_t)
    raise DomainError(f"unknown weight method {method!r}", ['method'])


def k_weight_P(params: EqualParams, method: str = 'closed') -> float:
    """Edge instanton weight in units of omega."""
    if abs(params.mu) >= 0.25:
        raise DomainError(f"edge weight needs |mu| < 1/4, got {params.mu}", ['edge_stability'])
    if method == 'closed':
        s0 = action_P_closed(params)
        return (1.0 - 2.0 * params.mu) * math.sqrt(6.0 * s0 / math.pi) * math.exp(-s0)
    if method == 'numeric':
        traj = edge_trajectory(params)
        s0 = lagrangian_action(traj, traj.params)
        m_l, m_t = edge_operators(params)
        chi_l = 1.0 / primed_determinant(m_l).value
        chi_t = 1.0 / gelfand_yaglom(m_t)
        return _kink_weight(s0, chi_l, chi_t)
    raise DomainError(f"unknown weight method {method!r}", ['method'])


def k_weight_Q(params: EqualParams, method: str = 'closed') -> float:
    return k_weight_P(params, method=method)


# ── Graph algebra ──────────────────────────────────────────────────────

def adjacency(weights: InstantonWeights) -> np.ndarray:
    p, q, r = weights.K_P, weights.K_Q, weights.K_R
    return np.array([
        [0.0, q, r, p],
        [q, 0.0, p, r],
        [r, p, 0.0, q],
        [p, r, q, 0.0],
    ])


def parity_states() -> np.ndarray:
    """Columns psi_S, psi_Q, psi_P, psi_R over the vertices (a, b, c, d)."""
    return 0.5 * np.array([
        [1.0, 1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0, -1.0],
    ])


def _eigenvalues(weights: InstantonWeights) -> np.ndarray:
    """(lambda_S, lambda_Q, lambda_P, lambda_R), matching the parity_states columns."""
    p, q, r = weights.K_P, weights.K_Q, weights.K_R
    return np.array([p + q + r, -p + q - r, p - q - r, -p - q + r])


def spectrum(weights: InstantonWeights, verify: bool = True) -> GasSpectrum:
    lam_s, lam_q, lam_p, lam_r = _eigenvalues(weights)
    if verify:
        numeric = np.linalg.eigvalsh(adjacency(weights))
        closed = np.sort([lam_s, lam_q, lam_p, lam_r])
        scale = max(1.0, float(np.max(np.abs(closed))))
        if np.max(np.abs(numeric - closed)) > 1e-12 * scale:
            raise NumericalError(f"adjacency eigenvalues {numeric} disagree with {closed}")
    return GasSpectrum(lambda_S=lam_s, lambda_P=lam_p, lambda_Q=lam_q, lambda_R=lam_r,
                       dE_P=lam_s - lam_p, dE_Q=lam_s - lam_q, dE_R=lam_s - lam_r)


def level_energies(params: EqualParams, weights: InstantonWeights) -> Dict[str, float]:
    """E_i = E0 - lambda_i for the four parity states."""
    e0 = ground_energy(params)
    spec = spectrum(weights)
    return {'E_S': e0 - spec.lambda_S, 'E_P': e0 - spec.lambda_P,
            'E_Q': e0 - spec.lambda_Q, 'E_R': e0 - spec.lambda_R}


def amplitude_matrix(weights: InstantonWeights, T: float) -> np.ndarray:
    """C·exp(K T) through the parity basis, summed in the log domain."""
    states = parity_states()
    exponents = _eigenvalues(weights) * T
    out = np.empty((4, 4))
    for i in range(4):
        for j in range(4):
            coeff = states[i] * states[j]
            value, sign = logsumexp(exponents, b=coeff, return_sign=True)
            out[i, j] = sign * np.exp(weights.log_C + value) if np.isfinite(value) else 0.0
    return out


def amplitudes(weights: InstantonWeights, T: float) -> Dict[str, float]:
    """A_aa, A_ab, A_ac, A_ad in hyperbolic form; large K·T goes through the log domain."""
    if max(abs(weights.K_P), abs(weights.K_Q), abs(weights.K_R)) * abs(T) > HYPERBOLIC_LIMIT:
        m = amplitude_matrix(weights, T)
        return {'A_aa': m[0, 0], 'A_ab': m[0, 1], 'A_ac': m[0, 2], 'A_ad': m[0, 3]}
    c_p, s_p = math.cosh(weights.K_P * T), math.sinh(weights.K_P * T)
    c_q, s_q = math.cosh(weights.K_Q * T), math.sinh(weights.K_Q * T)
    c_r, s_r = math.cosh(weights.K_R * T), math.sinh(weights.K_R * T)
    c = weights.C
    return {
        'A_aa': c * (c_p * c_q * c_r + s_p * s_q * s_r),
        'A_ab': c * (c_p * s_q * c_r + s_p * c_q * s_r),
        'A_ac': c * (c_p * c_q * s_r + s_p * s_q * c_r),
        'A_ad': c * (s_p * c_q * c_r + c_p * s_q * s_r),
    }


# ── Real time ──────────────────────────────────────────────────────────

def survival_probabilities(weights: InstantonWeights, t):
    """(P_a, P_b, P_c, P_d) after preparing the system in well a; t may be an array."""
    k = weights.K
    t = np.asarray(t, dtype=float)
    cos_k = np.cos(2.0 * k * t)
    cos_r = np.cos(2.0 * weights.K_R * t)
    p_a = 0.25 * (1.0 + cos_k ** 2 + 2.0 * cos_k * cos_r)
    p_b = 0.25 * np.sin(2.0 * k * t) ** 2
    p_c = 0.25 * (1.0 + cos_k ** 2 - 2.0 * cos_k * cos_r)
    if t.ndim == 0:
        return float(p_a), float(p_b), float(p_c), float(p_b)
    return p_a, p_b, p_c, p_b.copy()


def probability_trace(weights: InstantonWeights, times: Sequence[float]) -> List[Dict[str, float]]:
    times = np.asarray(times, dtype=float)
    p_a, p_b, p_c, p_d = survival_probabilities(weights, times)
    return [{'t': float(t), 'P_a': float(a), 'P_b': float(b), 'P_c': float(c), 'P_d': float(d)}
            for t, a, b, c, d in zip(times, p_a, p_b, p_c, p_d)]


def depletion_rate(weights: InstantonWeights) -> float:
    """Coefficient of t² in 1 - P_a at short times."""
    return 2.0 * weights.K ** 2 + weights.K_R ** 2


def lifetime(weights: InstantonWeights) -> float:
    rate = depletion_rate(weights)
    if rate <= 0:
        raise DomainError("no tunneling (K = K_R = 0): lifetime is infinite", ['K'])
    return math.pi / (2.0 * math.sqrt(rate))


# ── Sweeps ─────────────────────────────────────────────────────────────

def gas_row(lam: float, mu: float) -> Dict:
    params = EqualParams(lam=lam, mu=mu)
    weights = InstantonWeights.build(params)
    spec = spectrum(weights)
    return {'lambda': lam, 'mu': mu, 'K': weights.K_P, 'K_R': weights.K_R,
            'dE_P': spec.dE_P, 'dE_R': spec.dE_R,
            'flag': 'transverse-unstable' if weights.transverse_unstable else ''}


def sweep(mu_list: Iterable[float], lambda_list: Iterable[float]) -> List[Dict]:
    """Rows (lambda, mu, K, K_R, dE_P, dE_R) over the product grid, lambda varying fastest."""
    lambdas = list(lambda_list)
    rows = []
    for mu in mu_list:
        for lam in lambdas:
            try:
                rows.append(gas_row(lam, mu))
            except DomainError as e:
                rows.append({'lambda': lam, 'mu': mu, 'K': None, 'K_R': None,
                             'dE_P': None, 'dE_R': None, 'flag': f"domain: {e}"})
    unstable = sorted({r['mu'] for r in rows if r['flag'] == 'transverse-unstable'})
    if unstable:
        logger.warning(f"K_R forced to zero for mu in {unstable}: transverse-unstable diagonal channel")
    return rows
