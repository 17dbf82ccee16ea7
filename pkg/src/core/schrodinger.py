"""
Grid Schrödinger Oracle - Quartet

Finite-difference diagonalization of

    H = -(1/2 lam)(d²/dp² + d²/dq²) + lam W(p, q)

on a square grid, used to check the semiclassical splittings. The grid is
symmetric under p -> -p and q -> -q, so H splits exactly into four parity
sectors; splittings are read from the lowest level of each sector, which
labels states by symmetry rather than by energy order.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from core.errors import ConvergenceError, DomainError, NumericalError, ParityLabelError
from core.gas import InstantonWeights, spectrum
from core.model import EqualParams

logger = logging.getLogger('quartet.schrodinger')

DEFAULT_EXTENT = 3.0
DEFAULT_POINTS = 301
MIN_EXTENT = 2.5
SPACING_GATE = 0.1
EIG_TOL = 1e-13
RESIDUAL_TOL = 1e-8
DEGENERATE_GAP = 1e-13
AMBIGUOUS_OVERLAP = 0.1
PRECISION_FLOOR = 1e-10
SEMICLASSICAL_ACTION = 2.0
NEAR_CRITICAL_MU = -0.45

# (sign under p -> -p, sign under q -> -q) of each dilute-gas level
SECTORS: Dict[str, Tuple[int, int]] = {'S': (1, 1), 'P': (1, -1), 'Q': (-1, 1), 'R': (-1, -1)}


@dataclass(frozen=True)
class Grid2D:
    extent: float = DEFAULT_EXTENT
    n: int = DEFAULT_POINTS

    def __post_init__(self):
        if self.extent < MIN_EXTENT:
            raise DomainError(f"grid extent {self.extent} < {MIN_EXTENT}: wells too close to the wall", ['extent'])
        if self.n % 2 == 0 or self.n < 5:
            raise DomainError(f"grid needs an odd point count >= 5, got {self.n}", ['n'])

    @property
    def h(self) -> float:
        return 2.0 * self.extent / (self.n - 1)

    @property
    def axis(self) -> np.ndarray:
        x = np.linspace(-self.extent, self.extent, self.n)
        x[self.n // 2] = 0.0
        return x

    def to_dict(self) -> Dict:
        return {'extent': self.extent, 'n': self.n}


@dataclass
class EigenResult:
    energies: np.ndarray
    residuals: np.ndarray
    grid: Optional[Grid2D] = None
    vectors: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> Dict:
        return {'energies': [float(e) for e in self.energies],
                'residuals': [float(r) for r in self.residuals],
                'grid': self.grid.to_dict() if self.grid else None}


# ── Operators ──────────────────────────────────────────────────────────

def _kinetic_1d(n: int, h: float, lam: float) -> sparse.csr_matrix:
    off = np.full(n - 1, -1.0)
    lap = sparse.diags([off, np.full(n, 2.0), off], [-1, 0, 1]) / (h * h)
    return (lap / (2.0 * lam)).tocsr()


def reduced_potential(params: EqualParams, p, q):
    big_p = np.multiply(p, p) - 1.0
    big_q = np.multiply(q, q) - 1.0
    return 0.125 * big_p ** 2 + 0.125 * big_q ** 2 + 0.5 * params.mu * big_p * big_q


def check_spacing(params: EqualParams, grid: Grid2D) -> None:
    """Reject grids coarser than a tenth of the shortest harmonic length."""
    omega_max = max(params.omega_plus, params.omega_minus)
    length = 1.0 / math.sqrt(params.lam * omega_max)
    if grid.h > SPACING_GATE * length:
        raise DomainError(f"grid spacing {grid.h:.4g} exceeds {SPACING_GATE} x oscillator length "
                          f"{length:.4g} (lambda={params.lam})", ['spacing'])


def build_hamiltonian(params: EqualParams, grid: Grid2D, gate: bool = True) -> sparse.csr_matrix:
    """Five-point Laplacian with Dirichlet walls; unknown index = i_p * n + i_q."""
    if gate:
        check_spacing(params, grid)
    n = grid.n
    t1 = _kinetic_1d(n, grid.h, params.lam)
    eye = sparse.identity(n, format='csr')
    pp, qq = np.meshgrid(grid.axis, grid.axis, indexing='ij')
    well = params.lam * reduced_potential(params, pp, qq).ravel()
    h = sparse.kron(t1, eye) + sparse.kron(eye, t1) + sparse.diags(well)
    return h.tocsr()


def parity_isometry(grid: Grid2D, parity: Tuple[int, int]) -> sparse.csc_matrix:
    """Orthonormal columns spanning one (p-sign, q-sign) sector, indexed on the quarter grid."""
    sp, sq = parity
    n = grid.n
    c = n // 2
    i_vals = np.arange(c if sp > 0 else c + 1, n)
    j_vals = np.arange(c if sq > 0 else c + 1, n)
    ii, jj = np.meshgrid(i_vals, j_vals, indexing='ij')
    ii, jj = ii.ravel(), jj.ravel()
    cols = np.arange(len(ii))

    images = [(ii, jj, 1.0), (n - 1 - ii, jj, sp), (ii, n - 1 - jj, sq), (n - 1 - ii, n - 1 - jj, sp * sq)]
    rows = np.concatenate([a * n + b for a, b, _ in images])
    data = np.concatenate([np.full(len(ii), 0.5 * s) for _, _, s in images])
    iso = sparse.csc_matrix((data, (rows, np.tile(cols, 4))), shape=(n * n, len(ii)))
    iso.sum_duplicates()
    norms = np.sqrt(np.asarray(iso.multiply(iso).sum(axis=0)).ravel())
    return (iso @ sparse.diags(1.0 / norms)).tocsc()


def sector_hamiltonian(h: sparse.spmatrix, grid: Grid2D,
                       parity: Tuple[int, int]) -> Tuple[sparse.csc_matrix, sparse.csc_matrix]:
    iso = parity_isometry(grid, parity)
    return (iso.T @ h @ iso).tocsc(), iso


# ── Eigenproblems ──────────────────────────────────────────────────────

def _lower_bound(h: sparse.spmatrix) -> float:
    """Gershgorin lower bound of the spectrum."""
    h = h.tocsr()
    diag = h.diagonal()
    radius = np.asarray(abs(h).sum(axis=1)).ravel() - np.abs(diag)
    return float(np.min(diag - radius))


def lowest_eigenvalues(h: sparse.spmatrix, k: int = 4, seed: int = 0, tol: float = EIG_TOL,
                       maxiter: Optional[int] = None, grid: Optional[Grid2D] = None) -> EigenResult:
    """k smallest eigenpairs by shift-invert Lanczos below the Gershgorin bound."""
    size = h.shape[0]
    if k >= size:
        raise DomainError(f"asked for {k} eigenvalues of a {size}x{size} operator", ['k'])
    sigma = _lower_bound(h) - 0.5
    v0 = np.random.default_rng(seed).standard_normal(size)
    try:
        energies, vectors = eigsh(h.tocsc(), k=k, sigma=sigma, which='LM', v0=v0, tol=tol, maxiter=maxiter)
    except ArpackNoConvergence as e:
        raise ConvergenceError(f"eigensolver stopped after the iteration cap: {e}") from e
    order = np.argsort(energies)
    energies, vectors = energies[order], vectors[:, order]
    logger.debug(f"eigsh: {k} levels of {size} unknowns, shift {sigma:.4g}")

    residuals = np.linalg.norm(h @ vectors - vectors * energies, axis=0) / np.linalg.norm(vectors, axis=0)
    if np.any(residuals > RESIDUAL_TOL):
        raise ConvergenceError(f"eigenpair residuals {residuals.max():.2e} above {RESIDUAL_TOL}")
    gaps = np.diff(energies) / np.maximum(np.abs(energies[1:]), 1e-300)
    if np.any(gaps < DEGENERATE_GAP):
        logger.warning(f"degenerate eigenvalue cluster (relative gap {gaps.min():.1e}); "
                       f"eigenvectors inside it are not unique")
    return EigenResult(energies=energies, residuals=residuals, grid=grid, vectors=vectors)


def classify_parity(vec: np.ndarray, grid: Grid2D) -> Dict[str, float]:
    """Weight of a grid vector in each parity sector; weights sum to one."""
    v = np.asarray(vec).reshape(grid.n, grid.n)
    flip_p = v[::-1, :]
    flip_q = v[:, ::-1]
    flip_pq = v[::-1, ::-1]
    total = float(np.sum(v * v))
    weights = {}
    for label, (sp, sq) in SECTORS.items():
        proj = 0.25 * (v + sp * flip_p + sq * flip_q + sp * sq * flip_pq)
        weights[label] = float(np.sum(proj * proj)) / total
    return weights


def parity_label(vec: np.ndarray, grid: Grid2D) -> str:
    weights = classify_parity(vec, grid)
    strong = [k for k, w in weights.items() if w > AMBIGUOUS_OVERLAP]
    if len(strong) != 1:
        raise ParityLabelError(f"eigenvector overlaps several parity sectors: {weights}")
    return strong[0]


def sector_levels(params: EqualParams, grid: Grid2D = Grid2D(), seed: int = 0,
                  tol: float = EIG_TOL, gate: bool = True) -> Dict[str, float]:
    """Lowest energy in each of the sectors S, P, Q, R."""
    h = build_hamiltonian(params, grid, gate=gate)
    levels = {}
    for label, parity in SECTORS.items():
        block, _ = sector_hamiltonian(h, grid, parity)
        levels[label] = float(lowest_eigenvalues(block, k=1, seed=seed, tol=tol).energies[0])
    logger.debug(f"sector levels lam={params.lam} mu={params.mu}: {levels}")
    return levels


def splittings_from_levels(levels: Dict[str, float]) -> Tuple[float, float]:
    """(dE_P, dE_R) with the near-degenerate P and Q levels averaged."""
    e_s = levels['S']
    return 0.5 * (levels['P'] + levels['Q']) - e_s, levels['R'] - e_s


def numeric_splittings(params: EqualParams, grid: Grid2D = Grid2D(), seed: int = 0,
                       gate: bool = True) -> Tuple[float, float]:
    return splittings_from_levels(sector_levels(params, grid, seed=seed, gate=gate))


def double_well_levels(lam: float, n_levels: int = 2, extent: float = DEFAULT_EXTENT,
                       n: int = DEFAULT_POINTS) -> np.ndarray:
    """Levels of -(1/2 lam) d² + lam (x²-1)²/8 on the same 1D grid."""
    grid = Grid2D(extent=extent, n=n)
    x = grid.axis
    diag = np.full(n, 1.0 / (lam * grid.h ** 2)) + lam * 0.125 * (x * x - 1.0) ** 2
    off = np.full(n - 1, -0.5 / (lam * grid.h ** 2))
    return eigh_tridiagonal(diag, off, eigvals_only=True, select='i', select_range=(0, n_levels - 1))


# ── Semiclassical comparison ───────────────────────────────────────────

def semiclassical_splittings(params: EqualParams) -> Tuple[float, float]:
    spec = spectrum(InstantonWeights.build(params))
    return spec.dE_P, spec.dE_R


def splitting_row(mu: float, lam: float, grid: Grid2D = Grid2D(), seed: int = 0,
                  levels: Optional[Dict[str, float]] = None,
                  solver: Optional[Callable[..., Dict[str, float]]] = None) -> Dict:
    """
    One convergence-table row. Failures are recorded in 'flag' instead of raised;
    pass precomputed sector levels to skip the grid solve, or a solver with the
    sector_levels signature to route it (e.g. through a cache).
    """
    params = EqualParams(lam=lam, mu=mu)
    row: Dict = {'lambda': lam, 'mu': mu, 'dE_P_semi': None, 'dE_P_num': None,
                 'dE_R_semi': None, 'dE_R_num': None, 'dev_P': None, 'dev_R': None,
                 'ratio_num': None, 'flag': ''}
    flags: List[str] = []

    try:
        row['dE_P_semi'], row['dE_R_semi'] = semiclassical_splittings(params)
        if lam * 2.0 / 3.0 < SEMICLASSICAL_ACTION:
            flags.append('non-semiclassical')
    except DomainError as e:
        flags.append(f"outside-window: {e}")

    if mu < NEAR_CRITICAL_MU and levels is None:
        flags.append('precision-limited: near-critical coupling')
        row['flag'] = '; '.join(flags)
        return row

    try:
        if levels is None:
            levels = (solver or sector_levels)(params, grid, seed=seed)
        d_p, d_r = splittings_from_levels(levels)
        row['dE_P_num'], row['dE_R_num'] = d_p, d_r
        if min(abs(d_p), abs(d_r)) < PRECISION_FLOOR:
            flags.append('precision-limited')
        else:
            row['ratio_num'] = d_r / d_p
    except (NumericalError, DomainError) as e:
        flags.append(f"precision-limited: {e}")

    for semi, num, key in (('dE_P_semi', 'dE_P_num', 'dev_P'), ('dE_R_semi', 'dE_R_num', 'dev_R')):
        if row[semi] is not None and row[num] and abs(row[num]) >= PRECISION_FLOOR:
            row[key] = abs(row[semi] - row[num]) / abs(row[num])
    row['flag'] = '; '.join(flags)
    return row


def convergence_sweep(mu: float, lambda_list: Sequence[float], grid: Grid2D = Grid2D(),
                      seed: int = 0, solver: Optional[Callable[..., Dict[str, float]]] = None) -> List[Dict]:
    """Rows (lambda, dE_P_semi, dE_P_num, dE_R_semi, dE_R_num, deviations) in lambda order."""
    return [splitting_row(mu, lam, grid, seed=seed, solver=solver) for lam in lambda_list]
