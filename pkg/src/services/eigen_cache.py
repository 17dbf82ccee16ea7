"""
Eigenvalue Cache - Quartet

Stores converged sector energies of the grid Hamiltonian so repeated
sweeps over the same (mu, lambda, grid) skip the eigen-solve.
"""

import hashlib
import json
import logging
import sqlite3
import threading
from datetime import datetime
from typing import Dict, List, Optional

from core.model import EqualParams
from core.schrodinger import (EIG_TOL, SECTORS, Grid2D, build_hamiltonian, lowest_eigenvalues,
                              sector_hamiltonian)

logger = logging.getLogger('quartet.eigen_cache')


class EigenCache:
    """Sector energies keyed by sha256 of the canonical parameter JSON."""

    def __init__(self, db_connection: sqlite3.Connection):
        self.db = db_connection
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    @staticmethod
    def key(mu: float, lam: float, n: int, extent: float, sector: str) -> str:
        canonical = json.dumps({'mu': float(mu), 'lam': float(lam), 'n': int(n),
                                'extent': float(extent), 'sector': sector},
                               sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def get(self, mu: float, lam: float, n: int, extent: float, sector: str) -> Optional[List[float]]:
        with self._lock:
            cursor = self.db.cursor()
            cursor.execute("SELECT energies FROM eigen_cache WHERE key=?",
                           (self.key(mu, lam, n, extent, sector),))
            row = cursor.fetchone()
            if not row:
                self.misses += 1
                return None
            self.hits += 1
        return [float(e) for e in json.loads(row[0])]

    def put(self, mu: float, lam: float, n: int, extent: float, sector: str,
            energies: List[float]) -> str:
        key = self.key(mu, lam, n, extent, sector)
        with self._lock:
            cursor = self.db.cursor()
            cursor.execute("""
                INSERT OR REPLACE INTO eigen_cache (key, mu, lam, n, extent, sector, energies, created_at)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            """, (key, float(mu), float(lam), int(n), float(extent), sector,
                  json.dumps([float(e) for e in energies]), datetime.now().isoformat()))
            self.db.commit()
        return key

    def clear(self) -> int:
        cursor = self.db.cursor()
        cursor.execute("DELETE FROM eigen_cache")
        self.db.commit()
        logger.info(f"✓ Eigen cache cleared ({cursor.rowcount} entries)")
        return cursor.rowcount

    def count(self) -> int:
        cursor = self.db.cursor()
        cursor.execute("SELECT COUNT(*) FROM eigen_cache")
        return cursor.fetchone()[0]

    def sector_levels(self, params: EqualParams, grid: Grid2D = Grid2D(), seed: int = 0,
                      tol: float = EIG_TOL) -> Dict[str, float]:
        """schrodinger.sector_levels with each sector looked up before it is solved."""
        levels: Dict[str, float] = {}
        h = None
        for label, parity in SECTORS.items():
            cached = self.get(params.mu, params.lam, grid.n, grid.extent, label)
            if cached:
                levels[label] = cached[0]
                continue
            if h is None:
                h = build_hamiltonian(params, grid)
            block, _ = sector_hamiltonian(h, grid, parity)
            energy = float(lowest_eigenvalues(block, k=1, seed=seed, tol=tol).energies[0])
            self.put(params.mu, params.lam, grid.n, grid.extent, label, [energy])
            levels[label] = energy
        return levels
