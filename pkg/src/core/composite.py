"""
Composite Tunneling - Quartet

A one-dimensional diatomic molecule (two atoms of mass m/2 in the same
double well U) has centre-of-mass coordinate y and bond length x. With a
soft bond the total potential

    U_T = U(y + x/2) + U(y - x/2) + (m Omega²/32L²)(x² - L²)²

is exactly a coupled quartic in (y², x²), so it maps onto SystemParams
with p = y/y0 and q = x/x0.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from core.errors import DomainError, MappingError
from core.model import SystemParams, potential, validate_params

logger = logging.getLogger('quartet.composite')

ROUND_TRIP_TOL = 1e-10
ROUND_TRIP_POINTS = 50


@dataclass(frozen=True)
class MoleculeParams:
    m: float
    omega: float
    Omega: float
    a: float
    L: float

    def __post_init__(self):
        for name in ('m', 'omega', 'Omega', 'a', 'L'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"molecule parameter {name} must be positive, got {value}", [name])

    @property
    def rigid_bond_limit(self) -> float:
        return 2.0 * self.a / math.sqrt(3.0)

    def to_dict(self) -> Dict[str, float]:
        return {'m': self.m, 'omega': self.omega, 'Omega': self.Omega, 'a': self.a, 'L': self.L}

    @classmethod
    def from_dict(cls, data: Dict) -> 'MoleculeParams':
        missing = [k for k in ('m', 'omega', 'Omega', 'a', 'L') if k not in data]
        if missing:
            raise DomainError(f"molecule parameters missing keys: {missing}", missing)
        return cls(**{k: float(data[k]) for k in ('m', 'omega', 'Omega', 'a', 'L')})


@dataclass(frozen=True)
class EffectiveQuartic:
    x0: float
    y0: float
    Omega_tilde: float
    C: float
    system: SystemParams
    molecule: MoleculeParams
    hbar: float = 1.0

    def to_dict(self) -> Dict:
        return {'x0': self.x0, 'y0': self.y0, 'Omega_tilde': self.Omega_tilde, 'C': self.C,
                'system': self.system.to_dict(), 'molecule': self.molecule.to_dict(), 'hbar': self.hbar}


def atom_potential(mol: MoleculeParams, x):
    """U(x) = (m omega²/16a²)(x² - a²)²."""
    return mol.m * mol.omega ** 2 / (16.0 * mol.a ** 2) * (np.multiply(x, x) - mol.a ** 2) ** 2


def total_potential(mol: MoleculeParams, x, y):
    bond = mol.m * mol.Omega ** 2 / (32.0 * mol.L ** 2) * (np.multiply(x, x) - mol.L ** 2) ** 2
    return atom_potential(mol, y + 0.5 * np.asarray(x)) + atom_potential(mol, y - 0.5 * np.asarray(x)) + bond


def total_gradient(mol: MoleculeParams, x, y) -> Tuple[np.ndarray, np.ndarray]:
    """(dU_T/dx, dU_T/dy)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = mol.m * mol.omega ** 2 / (4.0 * mol.a ** 2)

    def du(z):
        return k * (z * z - mol.a ** 2) * z

    plus, minus = y + 0.5 * x, y - 0.5 * x
    d_bond = mol.m * mol.Omega ** 2 / (8.0 * mol.L ** 2) * (x * x - mol.L ** 2) * x
    return 0.5 * du(plus) - 0.5 * du(minus) + d_bond, du(plus) + du(minus)


def rigid_effective_potential(m: float, omega: float, a: float, L: float) -> Tuple[float, float]:
    """(y0, K) of the rigid-rod centre-of-mass double well."""
    limit = 2.0 * a / math.sqrt(3.0)
    if L >= limit:
        raise DomainError(f"L={L} >= 2a/sqrt(3)={limit:.6g}: the centre-of-mass potential is a pure quartic "
                          f"with a single minimum, no instanton", ['rigid_bond_limit'])
    f = math.sqrt(1.0 - 0.75 * L * L / (a * a))
    offset = m * omega ** 2 * L * L / 8.0 * (1.0 - L * L / (2.0 * a * a))
    return a * f, offset


def nonrigid_effective_potential(mol: MoleculeParams) -> EffectiveQuartic:
    """Minima, shifted bond frequency and offset of U_T, plus the induced SystemParams."""
    r = mol.omega ** 2 / mol.Omega ** 2
    ratio = mol.L ** 2 / mol.a ** 2
    denom = 1.0 - 2.0 * r * ratio
    if not denom > 0:
        raise DomainError(f"1 - 2 omega² L²/(Omega² a²) = {denom:.6g} must be positive", ['bond_denominator'])
    x_num = 1.0 - 2.0 * r
    if not x_num > 0:
        raise DomainError(f"1 - 2 omega²/Omega² = {x_num:.6g} must be positive: no relative-coordinate well",
                          ['x0_squared'])
    y_num = 1.0 - 0.75 * ratio - 0.5 * r * ratio
    if not y_num > 0:
        raise DomainError(f"1 - 3L²/4a² - omega² L²/(2 a² Omega²) = {y_num:.6g} must be positive: "
                          f"no centre-of-mass barrier", ['y0_squared'])

    x0 = mol.L * math.sqrt(x_num / denom)
    y0 = mol.a * math.sqrt(y_num / denom)
    omega_tilde = mol.Omega * math.sqrt(1.0 + r * ratio / 4.0)
    offset = float(total_potential(mol, x0, y0))
    eq = EffectiveQuartic(x0=x0, y0=y0, Omega_tilde=omega_tilde, C=offset,
                          system=_induced_system(mol, x0, y0, omega_tilde), molecule=mol)
    logger.debug(f"composite minima x0={x0:.6g} y0={y0:.6g} C={offset:.6g}")
    return eq


def closed_form_offset(mol: MoleculeParams) -> float:
    r = mol.omega ** 2 / mol.Omega ** 2
    ratio = mol.L ** 2 / mol.a ** 2
    return mol.m * mol.omega ** 2 * mol.L ** 2 / 8.0 * (1.0 - r - ratio / 2.0) / (1.0 - 2.0 * r * ratio)


def _induced_system(mol: MoleculeParams, x0: float, y0: float, omega_tilde: float,
                    hbar: float = 1.0) -> SystemParams:
    # U_T - C = A (x²-x0²)² + B (y²-y0²)² + D (y²-y0²)(x²-x0²)
    coeff_x = mol.m * omega_tilde ** 2 / (32.0 * mol.L ** 2)
    coeff_y = mol.m * mol.omega ** 2 / (8.0 * mol.a ** 2)
    cross = 3.0 * mol.m * mol.omega ** 2 / (16.0 * mol.a ** 2)
    return SystemParams(
        a_p=mol.m * y0 ** 2 / hbar,
        a_q=mol.m * x0 ** 2 / (4.0 * hbar),
        b_p=8.0 * coeff_y * y0 ** 4 / hbar,
        b_q=8.0 * coeff_x * x0 ** 4 / hbar,
        c=4.0 * cross * x0 ** 2 * y0 ** 2 / hbar,
    )


def to_system_params(eq: EffectiveQuartic, hbar: float = 1.0,
                     points: int = ROUND_TRIP_POINTS, tol: float = ROUND_TRIP_TOL) -> SystemParams:
    """Induced SystemParams, checked against U_T - C on a grid around the (+x0, +y0) minimum."""
    system = _induced_system(eq.molecule, eq.x0, eq.y0, eq.Omega_tilde, hbar=hbar)
    xs = np.linspace(0.5 * eq.x0, 1.5 * eq.x0, points)
    ys = np.linspace(0.5 * eq.y0, 1.5 * eq.y0, points)
    xx, yy = np.meshgrid(xs, ys, indexing='ij')
    direct = (total_potential(eq.molecule, xx, yy) - eq.C) / hbar
    mapped = potential(system, yy / eq.y0, xx / eq.x0)
    scale = float(np.max(np.abs(direct)))
    mismatch = float(np.max(np.abs(direct - mapped)))
    if mismatch > tol * max(scale, 1e-300):
        raise MappingError(f"induced quartic misses U_T by {mismatch:.3e} (scale {scale:.3e})")

    report = validate_params(system)
    if not report.four_well:
        logger.warning(f"induced parameters violate {report.violated}")
    effective_couplings(system)
    return system


def effective_couplings(system: SystemParams, tol: float = 1e-9) -> Tuple[float, float, bool]:
    """(mu, nu, equal); the equal-parameter fast path only applies when mu = nu."""
    mu, nu = system.mu, system.nu
    equal = abs(mu - nu) <= tol * max(1.0, abs(mu), abs(nu))
    if not equal:
        logger.warning(f"composite mapping gives mu={mu:.6g} != nu={nu:.6g}; "
                       f"equal-parameter results do not apply directly")
    return mu, nu, equal
