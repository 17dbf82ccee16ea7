"""
Four-Well Model - Quartet

The coupled quartic potential

    V(p, q) = 1/8 b_p (p²-1)² + 1/8 b_q (q²-1)² + 1/4 c (p²-1)(q²-1)

in dimensionless coordinates, its parameter validity checks and its
critical points. Everything downstream (trajectories, operators, the grid
Hamiltonian) reads the model through this module.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import numpy as np

from core.errors import DomainError

logger = logging.getLogger('quartet.model')

FOUR_WELL_CONDITIONS = ('discriminant', 'bp_plus_c', 'bq_plus_c')
EQUAL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SystemParams:
    """The five base constants; derived couplings are properties, never fields."""

    a_p: float
    a_q: float
    b_p: float
    b_q: float
    c: float

    def __post_init__(self):
        values = (self.a_p, self.a_q, self.b_p, self.b_q, self.c)
        if not all(math.isfinite(v) for v in values):
            raise DomainError(f"non-finite system parameters: {values}", ['finite'])
        for name in ('a_p', 'a_q', 'b_p', 'b_q'):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)}", [name])

    @property
    def omega_p(self) -> float:
        return math.sqrt(self.b_p / self.a_p)

    @property
    def omega_q(self) -> float:
        return math.sqrt(self.b_q / self.a_q)

    @property
    def mu(self) -> float:
        return self.c / (2.0 * self.b_p)

    @property
    def nu(self) -> float:
        return self.c / (2.0 * self.b_q)

    @property
    def discriminant(self) -> float:
        return self.b_p * self.b_q - self.c * self.c

    @classmethod
    def from_physical(cls, m_p: float, omega_p: float, x_p: float,
                      m_q: float, omega_q: float, y_q: float,
                      c_pq: float, hbar: float = 1.0) -> 'SystemParams':
        """
        Scale physical constants once: x = x_p p, y = y_q q, energies in hbar.
        The physical coupling c_pq (x²-x_p²)(y²-y_q²) becomes 1/4 c (p²-1)(q²-1).
        """
        if hbar <= 0:
            raise DomainError(f"hbar must be positive, got {hbar}", ['hbar'])
        return cls(
            a_p=m_p * x_p ** 2 / hbar,
            a_q=m_q * y_q ** 2 / hbar,
            b_p=m_p * omega_p ** 2 * x_p ** 2 / hbar,
            b_q=m_q * omega_q ** 2 * y_q ** 2 / hbar,
            c=4.0 * c_pq * x_p ** 2 * y_q ** 2 / hbar,
        )

    def to_dict(self) -> Dict[str, float]:
        return {'a_p': self.a_p, 'b_p': self.b_p, 'a_q': self.a_q, 'b_q': self.b_q, 'c': self.c}

    @classmethod
    def from_dict(cls, data: Dict) -> 'SystemParams':
        missing = [k for k in ('a_p', 'b_p', 'a_q', 'b_q', 'c') if k not in data]
        if missing:
            raise DomainError(f"system parameters missing keys: {missing}", missing)
        return cls(a_p=float(data['a_p']), a_q=float(data['a_q']),
                   b_p=float(data['b_p']), b_q=float(data['b_q']), c=float(data['c']))


@dataclass(frozen=True)
class EqualParams:
    """Equal-parameter case: lam is the large parameter, mu the coupling."""

    lam: float
    mu: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and math.isfinite(self.mu)):
            raise DomainError(f"non-finite parameters lam={self.lam}, mu={self.mu}", ['finite'])
        if self.lam <= 0:
            raise DomainError(f"lambda must be positive, got {self.lam}", ['lambda'])

    @property
    def omega_plus(self) -> float:
        if self.mu <= -0.5:
            raise DomainError(f"mu={self.mu} <= -1/2: diagonal barrier has vanished", ['omega_plus'])
        return math.sqrt(1.0 + 2.0 * self.mu)

    @property
    def omega_minus(self) -> float:
        if self.mu >= 0.5:
            raise DomainError(f"mu={self.mu} >= 1/2: no stable transverse mode", ['omega_minus'])
        return math.sqrt(1.0 - 2.0 * self.mu)

    def to_system(self) -> SystemParams:
        # time measured in units of 1/omega, so a = b = lambda
        return SystemParams(a_p=self.lam, a_q=self.lam, b_p=self.lam, b_q=self.lam,
                            c=2.0 * self.mu * self.lam)

    @classmethod
    def from_system(cls, params: SystemParams, tol: float = EQUAL_TOLERANCE) -> 'EqualParams':
        def close(x: float, y: float) -> bool:
            return abs(x - y) <= tol * max(1.0, abs(x), abs(y))

        problems = []
        if not close(params.a_p, params.a_q):
            problems.append('a_p=a_q')
        if not close(params.omega_p, params.omega_q):
            problems.append('omega_p=omega_q')
        if not close(params.mu, params.nu):
            problems.append('mu=nu')
        if problems:
            raise DomainError(f"not an equal-parameter system: {problems}", problems)
        # lambda = a omega once time is rescaled by omega
        return cls(lam=math.sqrt(params.a_p * params.b_p), mu=params.mu)


@dataclass
class ValidityReport:
    four_well: bool
    violated: List[str] = field(default_factory=list)
    marginal: bool = False

    def to_dict(self) -> Dict:
        return {'four_well': self.four_well, 'violated': list(self.violated), 'marginal': self.marginal}


class CriticalKind(str, Enum):
    MINIMUM = 'Minimum'
    SADDLE = 'Saddle'
    LOCAL_MAXIMUM = 'LocalMaximum'


@dataclass(frozen=True)
class CriticalPoint:
    location: Tuple[float, float]
    kind: CriticalKind
    value: float

    def to_dict(self) -> Dict:
        return {'p': self.location[0], 'q': self.location[1],
                'kind': self.kind.value, 'value': self.value}


def validate_params(params: SystemParams) -> ValidityReport:
    """Check the strict inequalities for exactly four degenerate minima."""
    checks = {
        'discriminant': params.b_p * params.b_q - params.c ** 2,
        'bp_plus_c': params.b_p + params.c,
        'bq_plus_c': params.b_q + params.c,
    }
    violated = [name for name in FOUR_WELL_CONDITIONS if not checks[name] > 0]
    marginal = any(checks[name] == 0 for name in FOUR_WELL_CONDITIONS)
    if violated:
        logger.debug(f"four-well check failed: {violated} (marginal={marginal})")
    return ValidityReport(four_well=not violated, violated=violated, marginal=marginal)


def require_four_well(params: SystemParams) -> None:
    report = validate_params(params)
    if not report.four_well:
        raise DomainError(
            f"parameters violate four-well conditions {report.violated}"
            + (" (marginal)" if report.marginal else ""),
            report.violated,
        )


def potential(params: SystemParams, p, q):
    """V(p, q); accepts scalars or numpy arrays."""
    big_p = np.multiply(p, p) - 1.0
    big_q = np.multiply(q, q) - 1.0
    value = (0.125 * params.b_p * big_p * big_p
             + 0.125 * params.b_q * big_q * big_q
             + 0.25 * params.c * big_p * big_q)
    if np.ndim(value) == 0:
        return float(value)
    return value


def gradient(params: SystemParams, p, q):
    """(dV/dp, dV/dq)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    big_p = p * p - 1.0
    big_q = q * q - 1.0
    dv_dp = 0.5 * p * (params.b_p * big_p + params.c * big_q)
    dv_dq = 0.5 * q * (params.b_q * big_q + params.c * big_p)
    if dv_dp.ndim == 0:
        return float(dv_dp), float(dv_dq)
    return dv_dp, dv_dq


def hessian_entries(params: SystemParams, p, q):
    """(V_pp, V_qq, V_pq) sampled along arrays of points."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    v_pp = 0.5 * params.b_p * (3.0 * p * p - 1.0) + 0.5 * params.c * (q * q - 1.0)
    v_qq = 0.5 * params.b_q * (3.0 * q * q - 1.0) + 0.5 * params.c * (p * p - 1.0)
    v_pq = params.c * p * q
    return v_pp, v_qq, v_pq


def hessian(params: SystemParams, p: float, q: float) -> np.ndarray:
    v_pp, v_qq, v_pq = hessian_entries(params, p, q)
    return np.array([[float(v_pp), float(v_pq)], [float(v_pq), float(v_qq)]])


def _kind_from_hessian(h: np.ndarray) -> CriticalKind:
    det = float(np.linalg.det(h))
    if det < 0:
        return CriticalKind.SADDLE
    if det > 0 and np.trace(h) > 0:
        return CriticalKind.MINIMUM
    if det > 0 and np.trace(h) < 0:
        return CriticalKind.LOCAL_MAXIMUM
    raise DomainError(f"degenerate Hessian (det={det})", ['hessian'])


def classify_critical_points(params: SystemParams) -> List[CriticalPoint]:
    """The nine critical points in closed form; each kind is checked against its Hessian."""
    require_four_well(params)
    q_m = math.sqrt(1.0 + params.c / params.b_q)
    p_m = math.sqrt(1.0 + params.c / params.b_p)

    expected = []
    for sp in (1.0, -1.0):
        for sq in (1.0, -1.0):
            expected.append(((sp, sq), CriticalKind.MINIMUM))
    for s in (1.0, -1.0):
        expected.append(((0.0, s * q_m), CriticalKind.SADDLE))
    for s in (1.0, -1.0):
        expected.append(((s * p_m, 0.0), CriticalKind.SADDLE))
    expected.append(((0.0, 0.0), CriticalKind.LOCAL_MAXIMUM))

    points = []
    for (p, q), kind in expected:
        found = _kind_from_hessian(hessian(params, p, q))
        if found is not kind:
            raise DomainError(f"critical point ({p}, {q}) classified {found.value}, expected {kind.value}",
                              ['hessian'])
        points.append(CriticalPoint(location=(p, q), kind=kind, value=potential(params, p, q)))
    return points


def harmonic_frequencies(params: SystemParams) -> Tuple[float, float]:
    """
    Normal-mode frequencies at the minimum (1, 1).

    omega_plus is the in-phase mode (equal-sign eigenvector), omega_minus the
    out-of-phase one; with c = 0 the larger frequency is reported first.
    """
    require_four_well(params)
    wp2 = params.omega_p ** 2
    wq2 = params.omega_q ** 2
    radicand = (wp2 - wq2) ** 2 + 16.0 * params.mu * params.nu * wp2 * wq2
    if radicand < 0:
        raise DomainError(f"negative radicand {radicand} in normal-mode frequencies", ['radicand'])
    root = math.sqrt(radicand)
    sign = 1.0 if params.c >= 0 else -1.0
    w_plus2 = 0.5 * (wp2 + wq2) + 0.5 * sign * root
    w_minus2 = 0.5 * (wp2 + wq2) - 0.5 * sign * root
    if min(w_plus2, w_minus2) <= 0:
        raise DomainError("no stable harmonic well: a squared frequency is not positive", ['omega_minus'])
    return math.sqrt(w_plus2), math.sqrt(w_minus2)
