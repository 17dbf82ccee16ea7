"""
Database Schema - Quartet

sqlite store for the eigenvalue cache and the run ledger.
"""

import os
import sqlite3


class DatabaseSchema:
    """Create and hand out the quartet database connection."""

    def __init__(self, db_path=None, base_dir=None):
        if db_path:
            self.db_path = db_path
        elif base_dir:
            self.db_path = os.path.join(base_dir, 'data', 'databases', 'quartet.db')
        else:
            self.db_path = os.path.join(
                os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
                'data', 'databases', 'quartet.db'
            )
        self.ensure_database_directory()
        self.conn = None

    def ensure_database_directory(self):
        if self.db_path != ':memory:':
            os.makedirs(os.path.dirname(os.path.abspath(self.db_path)), exist_ok=True)

    def connect(self):
        if self.conn is not None:
            return self.conn
        self.conn = sqlite3.connect(self.db_path, check_same_thread=False)
        self.conn.row_factory = sqlite3.Row
        return self.conn

    def initialize_schema(self):
        cursor = self.connect().cursor()

        # Converged sector energies keyed by a hash of (mu, lam, n, extent, sector)
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS eigen_cache (
                key TEXT PRIMARY KEY,
                mu REAL NOT NULL,
                lam REAL NOT NULL,
                n INTEGER NOT NULL,
                extent REAL NOT NULL,
                sector TEXT NOT NULL,
                energies TEXT NOT NULL,
                created_at TEXT
            )
        """)

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                command TEXT NOT NULL,
                config TEXT,
                status TEXT DEFAULT 'running',
                started_at TEXT,
                finished_at TEXT,
                summary TEXT,
                output_dir TEXT
            )
        """)

        cursor.execute("CREATE INDEX IF NOT EXISTS idx_eigen_params ON eigen_cache(mu, lam)")
        cursor.execute("CREATE INDEX IF NOT EXISTS idx_runs_started ON runs(started_at)")
        self.conn.commit()

    def get_connection(self):
        if self.conn is None:
            self.connect()
        return self.conn

    def close(self):
        if self.conn:
            self.conn.close()
            self.conn = None
