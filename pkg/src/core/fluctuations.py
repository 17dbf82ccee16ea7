"""
Fluctuation Determinants - Quartet

Second-variation operators around an instanton and their determinant
ratios:
- rotated (longitudinal / transverse) frame blocks of a sampled trajectory
- closed-form Pöschl-Teller ratios through log-Gamma
- Gelfand-Yaglom ratios by Numerov integration, with the zero mode removed
  by a small spectral shift
- stability eigenvalues and the symmetry-melting singularity at mu -> -1/2

Operators are one-dimensional, -d²/dtau² + W(tau). Determinant ratios are
taken against the free operator with W equal to the plateau value.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, gammasgn

from core.classical import (Trajectory, first_derivative, kink_well, make_grid,
                             q1_profile)
from core.errors import (DomainError, NumericalError, PoleError, SaturationError,
                         SoftModeError, StalledTrajectoryError)
from core.model import EqualParams, SystemParams, hessian_entries

logger = logging.getLogger('quartet.fluctuations')

OPERATOR_HALF_SPAN = 30.0
OPERATOR_POINTS = 6001
PLATEAU_TOL = 1e-9
TAIL_TOL = 1e-10
RESCALE_THRESHOLD = 1e100
SATURATION_TOL = 1e-8
SATURATION_FACTOR = 1.25
EPS_SCHEDULE = (1e-4, 1e-3, 1e-2)
POLE_TOL = 1e-8
STALL_V2 = 1e-290
MELTING_WINDOW = 0.05
MELTING_LIMIT = 0.5
MELTING_COEFF = 4.0 * math.log(2.0)


class DeterminantMethod(str, Enum):
    GAMMA_CLOSED_FORM = 'GammaClosedForm'
    GELFAND_YAGLOM = 'GelfandYaglom'
    REGULATED_GY = 'RegulatedGY'


@dataclass(frozen=True)
class DeterminantRatio:
    value: float
    primed: bool
    method: DeterminantMethod

    def to_dict(self) -> Dict:
        return {'value': self.value, 'primed': self.primed, 'method': self.method.value}


# ── Operators ──────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class FluctuationOperator:
    """-d²/dtau² + W(tau) sampled on a symmetric grid."""

    tau: np.ndarray
    well: np.ndarray
    plateau: float
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ''

    @property
    def h(self) -> float:
        return float(self.tau[1] - self.tau[0])

    @property
    def n(self) -> int:
        return len(self.tau)

    @property
    def half_span(self) -> float:
        return float(self.tau[-1])

    @classmethod
    def from_profile(cls, profile: Callable[[np.ndarray], np.ndarray], plateau: float,
                     half_span: float = OPERATOR_HALF_SPAN, n: int = OPERATOR_POINTS,
                     name: str = '') -> 'FluctuationOperator':
        tau = make_grid(half_span, n)
        op = cls(tau=tau, well=np.asarray(profile(tau), dtype=float), plateau=float(plateau),
                 profile=profile, name=name)
        op.check()
        return op

    @classmethod
    def from_samples(cls, tau: np.ndarray, well: np.ndarray, plateau: Optional[float] = None,
                     strict: bool = True, name: str = '') -> 'FluctuationOperator':
        """Operator from sampled W; plateau defaults to the mean of the two end values."""
        well = np.asarray(well, dtype=float)
        if plateau is None:
            if strict and abs(well[0] - well[-1]) > PLATEAU_TOL * max(1.0, abs(well[0])):
                raise DomainError(f"well ends disagree: W(-T)={well[0]!r}, W(T)={well[-1]!r}", ['plateau'])
            plateau = 0.5 * (well[0] + well[-1])
        op = cls(tau=np.asarray(tau, dtype=float), well=well, plateau=float(plateau), name=name)
        if strict:
            op.check()
        return op

    def check(self) -> None:
        if not self.plateau > 0:
            raise DomainError(f"operator plateau must be positive, got {self.plateau}", ['plateau'])
        tail = max(abs(self.well[0] - self.plateau), abs(self.well[-1] - self.plateau))
        if tail > TAIL_TOL * max(1.0, self.plateau):
            logger.warning(f"operator {self.name or '?'}: W - plateau = {tail:.2e} at the grid ends")

    def extended(self, factor: float = SATURATION_FACTOR) -> 'FluctuationOperator':
        """Same step, half-span grown by `factor`; the old grid stays a subset."""
        pad = int(round((factor - 1.0) * (self.n - 1) / 2))
        if pad < 1:
            raise DomainError(f"extension factor {factor} adds no grid points", ['factor'])
        h = self.h
        left = self.tau[0] - h * np.arange(pad, 0, -1)
        right = self.tau[-1] + h * np.arange(1, pad + 1)
        tau = np.concatenate([left, self.tau, right])
        if self.profile is not None:
            well = np.concatenate([self.profile(left), self.well, self.profile(right)])
        else:
            fill = np.full(pad, self.plateau)
            well = np.concatenate([fill, self.well, fill])
        return FluctuationOperator(tau=tau, well=well, plateau=self.plateau,
                                   profile=self.profile, name=self.name)

    def to_rows(self) -> List[Dict]:
        return [{'tau': float(t), 'W': float(w)} for t, w in zip(self.tau, self.well)]


def poschl_teller_operator(kappa: float, j: float, half_span: float = OPERATOR_HALF_SPAN,
                           n: int = OPERATOR_POINTS) -> FluctuationOperator:
    """kappa² - j(j+1) sech²x in its natural units."""
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}", ['kappa'])
    depth = j * (j + 1.0)
    return FluctuationOperator.from_profile(
        lambda x: kappa * kappa - depth / np.cosh(x) ** 2, kappa * kappa,
        half_span=half_span, n=n, name=f"PT(kappa={kappa:g}, j={j:g})")


def poschl_teller_spectrum(kappa: float, j: float) -> List[float]:
    """Bound-state eigenvalues kappa² - (j-k)², k = 0, 1, ... while j-k > 0."""
    levels = []
    k = 0
    while j - k > 0:
        levels.append(kappa * kappa - (j - k) ** 2)
        k += 1
    return levels


def pt_parameters(mu: float) -> Tuple[float, float]:
    """(kappa, ell) of the diagonal transverse operator in x = omega_plus tau / 2."""
    if mu <= -0.5 or mu >= 0.5:
        raise DomainError(f"transverse Pöschl-Teller form needs |mu| < 1/2, got {mu}", ['mu'])
    kappa = 2.0 * math.sqrt((1.0 - 2.0 * mu) / (1.0 + 2.0 * mu))
    depth = (6.0 - 4.0 * mu) / (1.0 + 2.0 * mu)
    ell = 0.5 * (-1.0 + math.sqrt(1.0 + 4.0 * depth))
    return kappa, ell


def diagonal_operators(params: EqualParams, half_span: float = OPERATOR_HALF_SPAN,
                       n: int = OPERATOR_POINTS) -> Tuple[FluctuationOperator, FluctuationOperator]:
    """
    (M_L, M_T) around the diagonal instanton in tau units. half_span is
    measured in x = omega_plus tau / 2.
    """
    w_plus = params.omega_plus
    w_minus2 = 1.0 - 2.0 * params.mu
    mu = params.mu
    span = 2.0 * half_span / w_plus

    def longitudinal(t):
        return w_plus ** 2 * (1.0 - 1.5 / np.cosh(0.5 * w_plus * t) ** 2)

    def transverse(t):
        return w_minus2 - (1.5 - mu) / np.cosh(0.5 * w_plus * t) ** 2

    m_l = FluctuationOperator.from_profile(longitudinal, w_plus ** 2, half_span=span, n=n, name='M_L^R')
    m_t = FluctuationOperator.from_profile(transverse, w_minus2, half_span=span, n=n, name='M_T^R')
    return m_l, m_t


def edge_operators(params: EqualParams, half_span: float = OPERATOR_HALF_SPAN,
                   n: int = OPERATOR_POINTS) -> Tuple[FluctuationOperator, FluctuationOperator]:
    """(M_L, M_T) around the P edge instanton, through O(mu)."""
    mu = params.mu
    if abs(mu) >= 0.25:
        raise DomainError(f"edge operators need |mu| < 1/4, got {mu}", ['edge_stability'])

    def transverse(t):
        return 1.0 - mu * (1.0 / np.cosh(0.5 * t) ** 2 + 3.0 * q1_profile(t))

    m_l = FluctuationOperator.from_profile(kink_well, 1.0, half_span=half_span, n=n, name='M_L^P')
    m_t = FluctuationOperator.from_profile(transverse, 1.0, half_span=half_span, n=n, name='M_T^P')
    return m_l, m_t


# ── Rotated frame ──────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class BlockProfile:
    """second·(-d²) + first·d/dtau + potential."""

    second: np.ndarray
    first: np.ndarray
    potential: np.ndarray


@dataclass(frozen=True, eq=False)
class RotatedBlocks:
    tau: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    LL: BlockProfile
    LT: BlockProfile
    TL: BlockProfile
    TT: BlockProfile
    M_L: FluctuationOperator
    M_T: FluctuationOperator

    @property
    def M_LT(self) -> BlockProfile:
        return self.LT

    @property
    def M_TL(self) -> BlockProfile:
        return self.TL

    def offdiagonal_max(self) -> float:
        return float(max(np.max(np.abs(b)) for b in
                         (self.LT.first, self.LT.potential, self.TL.first, self.TL.potential)))


def curvature(traj: Trajectory) -> Tuple[np.ndarray, np.ndarray]:
    """(kappa, theta_dot) along the path: |p'q'' - q'p''|/v³ and (p'q'' - q'p'')/v²."""
    ddp, ddq = traj.accelerations()
    cross = traj.dp * ddq - traj.dq * ddp
    v2 = traj.dp ** 2 + traj.dq ** 2
    if np.any(v2[1:-1] < STALL_V2):
        where = int(np.argmin(v2[1:-1])) + 1
        raise StalledTrajectoryError(f"velocity vanishes at tau={traj.tau[where]:.6g}")
    v2 = np.maximum(v2, STALL_V2)
    kappa = np.abs(cross) / v2 ** 1.5
    return kappa, cross / v2


def rotated_operators(traj: Trajectory, params: SystemParams) -> RotatedBlocks:
    """
    Fluctuation operator -A d² + H expressed in the comoving frame
    (L along the velocity, T normal to it).

    M_L and M_T are the diagonal blocks divided by their mass coefficient;
    they are exact 1D operators when a_p = a_q.
    """
    _, theta_dot = curvature(traj)
    theta = np.unwrap(np.arctan2(traj.dq, traj.dp))
    theta_ddot = first_derivative(theta_dot, traj.h)
    c = np.cos(theta)
    s = np.sin(theta)

    v_pp, v_qq, v_pq = hessian_entries(params, traj.p, traj.q)
    h_ll = c * c * v_pp + 2.0 * c * s * v_pq + s * s * v_qq
    h_tt = s * s * v_pp - 2.0 * c * s * v_pq + c * c * v_qq
    h_lt = c * s * (v_qq - v_pp) + (c * c - s * s) * v_pq

    a_ll = c * c * params.a_p + s * s * params.a_q
    a_tt = s * s * params.a_p + c * c * params.a_q
    a_lt = c * s * (params.a_q - params.a_p)
    td2 = theta_dot ** 2

    ll = BlockProfile(a_ll, -2.0 * theta_dot * a_lt, a_ll * td2 - theta_ddot * a_lt + h_ll)
    lt = BlockProfile(a_lt, 2.0 * theta_dot * a_ll, a_lt * td2 + theta_ddot * a_ll + h_lt)
    tl = BlockProfile(a_lt, -2.0 * theta_dot * a_tt, a_lt * td2 - theta_ddot * a_tt + h_lt)
    tt = BlockProfile(a_tt, 2.0 * theta_dot * a_lt, a_tt * td2 + theta_ddot * a_lt + h_tt)

    m_l = FluctuationOperator.from_samples(traj.tau, ll.potential / a_ll, strict=False, name='M_L')
    m_t = FluctuationOperator.from_samples(traj.tau, tt.potential / a_tt, strict=False, name='M_T')
    return RotatedBlocks(tau=traj.tau, theta=theta, theta_dot=theta_dot,
                         LL=ll, LT=lt, TL=tl, TT=tt, M_L=m_l, M_T=m_t)


# ── Determinants ───────────────────────────────────────────────────────

def poschl_teller_ratio(kappa: float, j: float) -> DeterminantRatio:
    """det O / det O_0 = Γ(κ)Γ(κ+1) / (Γ(κ-j)Γ(κ+j+1))."""
    if kappa <= 0:
        raise DomainError(f"kappa must be positive, got {kappa}", ['kappa'])
    if j < 0:
        raise DomainError(f"j must be non-negative, got {j}", ['j'])
    shifted = kappa - j
    nearest = round(shifted)
    if nearest <= 0 and abs(shifted - nearest) < 1e-12:
        return DeterminantRatio(0.0, primed=False, method=DeterminantMethod.GAMMA_CLOSED_FORM)
    log_value = gammaln(kappa) + gammaln(kappa + 1.0) - gammaln(shifted) - gammaln(kappa + j + 1.0)
    sign = gammasgn(shifted)
    return DeterminantRatio(float(sign * np.exp(log_value)), primed=False,
                            method=DeterminantMethod.GAMMA_CLOSED_FORM)


def _numerov_ratios(op: FluctuationOperator, shifts: np.ndarray) -> np.ndarray:
    """phi(T)/phi_free(T) for each shift, both started at phi=0, phi'=1."""
    h = op.h
    c = h * h / 12.0
    shifts = np.asarray(shifts, dtype=float)
    # g[i, 0] is the operator, g[i, 1] the free comparison
    g = np.empty((op.n, 2, len(shifts)))
    g[:, 0, :] = op.well[:, None] - shifts[None, :]
    g[:, 1, :] = (op.plateau - shifts)[None, :]
    centre = 2.0 * (1.0 + 5.0 * c * g)
    side = 1.0 - c * g

    phi_prev = np.zeros((2, len(shifts)))
    phi = h + h ** 3 * g[0] / 6.0
    rescales = 0
    for i in range(1, op.n - 1):
        nxt = (centre[i] * phi - side[i - 1] * phi_prev) / side[i + 1]
        phi_prev, phi = phi, nxt
        big = np.max(np.abs(phi), axis=0)
        if np.any(big > RESCALE_THRESHOLD):
            scale = np.where(big > RESCALE_THRESHOLD, big, 1.0)
            phi = phi / scale
            phi_prev = phi_prev / scale
            rescales += 1
    if rescales:
        logger.debug(f"GY {op.name or '?'}: {rescales} co-rescales over {op.n} nodes")
    if not np.all(np.isfinite(phi)):
        raise NumericalError(f"GY integration overflowed for {op.name or 'operator'}")
    return phi[0] / phi[1]


def gelfand_yaglom(op: FluctuationOperator, lambda_shift: float = 0.0,
                   check_saturation: bool = True) -> float:
    """det(M - shift)/det(M_free - shift) from the boundary value of an initial-value solution."""
    return float(_gy_checked(op, np.array([lambda_shift]), check_saturation)[0])


def _gy_checked(op: FluctuationOperator, shifts: np.ndarray, check_saturation: bool) -> np.ndarray:
    if np.any(op.plateau - shifts <= 0):
        raise DomainError(f"shift reaches the continuum (plateau {op.plateau})", ['lambda_shift'])
    ratios = _numerov_ratios(op, shifts)
    if check_saturation:
        wider = _numerov_ratios(op.extended(SATURATION_FACTOR), shifts)
        drift = np.abs(wider - ratios)
        bound = SATURATION_TOL * np.maximum(np.abs(ratios), np.abs(wider)) + 1e-12
        if np.any(drift > bound):
            worst = float(np.max(drift / np.maximum(np.abs(ratios), 1e-300)))
            raise SaturationError(f"GY ratio for {op.name or 'operator'} still depends on the half-span "
                                  f"(relative drift {worst:.2e} at T -> {SATURATION_FACTOR}T)")
    return ratios


def primed_determinant(op: FluctuationOperator,
                       schedule: Sequence[float] = EPS_SCHEDULE) -> DeterminantRatio:
    """
    det'M/det M_free from D(eps) = det(M - eps)/det(M_free - eps) near eps = 0.

    D is sampled at eps = 0 and the schedule, a cubic through the points
    gives the slope, and det' = -D'(0) in the operator's own units.
    """
    eps = np.concatenate([[0.0], np.sort(np.asarray(schedule, dtype=float))])
    if len(eps) != 4 or eps[1] <= 0:
        raise DomainError("primed determinant needs three positive shifts", ['schedule'])
    values = _gy_checked(op, eps, check_saturation=True)
    d3, d2, d1, d0 = np.polyfit(eps, values, 3)
    logger.debug(f"primed {op.name or '?'}: D(0)={d0:.3e} D'(0)={d1:.6e} D''(0)/2={d2:.3e}")

    if np.any(values[1:] >= 0) or d1 >= 0:
        raise SoftModeError(f"{op.name or 'operator'} has no isolated zero mode: D(eps) = {values[1:]}")
    if abs(d0) > 0.05 * abs(d1) * eps[1]:
        raise SoftModeError(f"{op.name or 'operator'}: lowest eigenvalue ~{-d0 / d1:.2e} is not a zero mode "
                            f"on the shift scale {eps[1]:g}")
    if abs(d1) * eps[-1] < 0.5 * abs(values[-1]):
        raise SoftModeError(f"{op.name or 'operator'}: D(eps) is not linear at small shifts, "
                            f"more than one soft mode")
    return DeterminantRatio(float(-d1), primed=True, method=DeterminantMethod.REGULATED_GY)


# ── Closed-form chi ratios ─────────────────────────────────────────────

def _require_diagonal_window(mu: float) -> None:
    if mu <= -0.5:
        raise DomainError(f"mu={mu} <= -1/2: below the melting point", ['mu'])
    if mu > 0:
        raise DomainError(f"mu={mu} > 0: diagonal transverse mode is unstable", ['transverse_unstable'])


def log_chi_T_R(mu: float) -> Tuple[float, float]:
    """(ln|chi_T^R|, sign), free of Gamma overflow."""
    _require_diagonal_window(mu)
    kappa, ell = pt_parameters(mu)
    if abs(kappa - ell) < POLE_TOL:
        raise PoleError(f"Gamma pole at mu={mu}: two zero modes (kappa - ell = {kappa - ell:.2e})")
    log_abs = (gammaln(kappa - ell) + gammaln(kappa + ell + 1.0)
               - gammaln(kappa) - gammaln(kappa + 1.0))
    return float(log_abs), float(gammasgn(kappa - ell))


def chi_T_R(mu: float) -> float:
    """det M_T,0 / det M_T for the diagonal instanton."""
    log_abs, sign = log_chi_T_R(mu)
    return sign * math.exp(log_abs)


def chi_T_P(mu: float) -> float:
    if abs(mu) >= 0.25:
        raise DomainError(f"edge transverse ratio needs |mu| < 1/4, got {mu}", ['edge_stability'])
    return math.exp(-4.0 * mu)


def chi_L_R(params: EqualParams) -> float:
    return 12.0 * params.omega_plus ** 2


def chi_L_P() -> float:
    return 12.0


def transverse_eigenvalue_expansion(mu: float) -> float:
    """Small-mu expansion of kappa² - ell² (x units)."""
    return 4.0 * (-0.8 * mu + 136.0 / 125.0 * mu * mu)


# ── Spectra ────────────────────────────────────────────────────────────

def _lowest_dirichlet(well: np.ndarray, h: float) -> float:
    inner = well[1:-1]
    diag = 2.0 / (h * h) + inner
    off = np.full(len(inner) - 1, -1.0 / (h * h))
    values = eigh_tridiagonal(diag, off, eigvals_only=True, select='i', select_range=(0, 0))
    return float(values[0])


def lowest_transverse_eigenvalue(op: FluctuationOperator, richardson: bool = True) -> float:
    """Lowest Dirichlet eigenvalue of -d² + W, Richardson-corrected against the 2h grid."""
    fine = _lowest_dirichlet(op.well, op.h)
    if not richardson or (op.n - 1) % 2 or op.n < 129:
        return fine
    coarse = _lowest_dirichlet(op.well[::2], 2.0 * op.h)
    return (4.0 * fine - coarse) / 3.0


@dataclass
class MeltingFit:
    coefficient: float
    intercept: float
    eps: List[float] = field(default_factory=list)

    @property
    def relative_error(self) -> float:
        return abs(self.coefficient - MELTING_COEFF) / MELTING_COEFF

    def to_dict(self) -> Dict:
        return {'coefficient': self.coefficient, 'intercept': self.intercept,
                'expected': MELTING_COEFF, 'eps': list(self.eps)}


def melting_fit(eps_list: Sequence[float]) -> MeltingFit:
    """Least-squares fit ln chi_T^R(-1/2 + eps) ≈ A/sqrt(eps) + B."""
    eps = np.asarray(sorted(set(float(e) for e in eps_list)), dtype=float)
    if len(eps) < 2:
        raise DomainError(f"melting fit needs at least 2 distinct eps values, got {len(eps)}", ['eps_list'])
    if np.any(eps <= 0) or np.any(eps > MELTING_LIMIT):
        raise DomainError(f"eps must lie in (0, {MELTING_LIMIT}], got {eps.tolist()}", ['eps_list'])
    if np.any(eps > MELTING_WINDOW):
        logger.warning(f"eps above {MELTING_WINDOW} is outside the asymptotic melting window")
    logs = np.array([log_chi_T_R(-0.5 + e)[0] for e in eps])
    design = np.column_stack([1.0 / np.sqrt(eps), np.ones_like(eps)])
    (coeff, intercept), *_ = np.linalg.lstsq(design, logs, rcond=None)
    return MeltingFit(coefficient=float(coeff), intercept=float(intercept), eps=eps.tolist())


def melting_probe(eps_list: Sequence[float]) -> float:
    return melting_fit(eps_list).coefficient


# ── Records ────────────────────────────────────────────────────────────

def determinant_record(mu: float, method: str = 'closed', half_span: float = OPERATOR_HALF_SPAN,
                       n: int = OPERATOR_POINTS) -> Dict:
    """
    chi ratios for both flavors at one mu. Entries outside a flavor's window
    are None; a Gamma pole is reported as the string 'pole'.
    """
    if method not in ('closed', 'numeric'):
        raise DomainError(f"unknown determinant method {method!r}", ['method'])
    eq = EqualParams(lam=1.0, mu=mu)
    row: Dict = {'mu': mu, 'method': 'GammaClosedForm' if method == 'closed' else 'RegulatedGY',
                 'chi_L_R': None, 'chi_T_R': None, 'chi_L_P': None, 'chi_T_P': None}

    if -0.5 < mu <= 0:
        if method == 'closed':
            row['chi_L_R'] = chi_L_R(eq)
            try:
                row['chi_T_R'] = chi_T_R(mu)
            except PoleError:
                row['chi_T_R'] = 'pole'
        else:
            m_l, m_t = diagonal_operators(eq, half_span=half_span, n=n)
            row['chi_L_R'] = 1.0 / primed_determinant(m_l).value
            if mu == 0:
                row['chi_T_R'] = 'pole'
            else:
                row['chi_T_R'] = 1.0 / gelfand_yaglom(m_t)

    if abs(mu) < 0.25:
        if method == 'closed':
            row['chi_L_P'] = chi_L_P()
            row['chi_T_P'] = chi_T_P(mu)
        else:
            m_l, m_t = edge_operators(eq, half_span=half_span, n=n)
            row['chi_L_P'] = 1.0 / primed_determinant(m_l).value
            row['chi_T_P'] = 1.0 / gelfand_yaglom(m_t)
    return row
