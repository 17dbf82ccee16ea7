"""
Run Log Service - Quartet

Ledger of CLI runs: command, merged config, outcome and a short summary.
Timestamps live here and never in the output files.
"""

import json
import logging
import sqlite3
from datetime import datetime
from typing import Dict, List, Optional

logger = logging.getLogger('quartet.run_log')

STATUSES = ('running', 'ok', 'domain_error', 'numerical_error')


class RunLog:
    """Persistent record of every command run, stored in quartet.db."""

    def __init__(self, db_connection: sqlite3.Connection):
        self.db = db_connection

    def start_run(self, command: str, config: Dict, output_dir: str = '') -> int:
        cursor = self.db.cursor()
        cursor.execute("""
            INSERT INTO runs (command, config, status, started_at, output_dir)
            VALUES (?, ?, 'running', ?, ?)
        """, (
            command,
            json.dumps(config, sort_keys=True, default=str),
            datetime.now().isoformat(),
            output_dir,
        ))
        self.db.commit()
        run_id = cursor.lastrowid
        logger.debug(f"run #{run_id} started: {command}")
        return run_id

    def finish_run(self, run_id: int, status: str, summary: Optional[Dict] = None) -> bool:
        if status not in STATUSES:
            raise ValueError(f"unknown run status {status!r}")
        cursor = self.db.cursor()
        cursor.execute("""
            UPDATE runs
            SET status=?, finished_at=?, summary=?
            WHERE id=?
        """, (status, datetime.now().isoformat(), json.dumps(summary or {}, default=str), run_id))
        self.db.commit()
        return cursor.rowcount > 0

    def get_run(self, run_id: int) -> Optional[Dict]:
        cursor = self.db.cursor()
        cursor.execute("SELECT * FROM runs WHERE id=?", (run_id,))
        row = cursor.fetchone()
        if not row:
            return None
        return self._decode(row)

    def list_runs(self, limit: int = 10, command: str = None) -> List[Dict]:
        cursor = self.db.cursor()
        if command:
            cursor.execute("SELECT * FROM runs WHERE command=? ORDER BY id DESC LIMIT ?",
                           (command, limit))
        else:
            cursor.execute("SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,))
        return [self._decode(row) for row in cursor.fetchall()]

    @staticmethod
    def _decode(row) -> Dict:
        run = dict(row)
        run['config'] = json.loads(run.get('config') or '{}')
        run['summary'] = json.loads(run.get('summary') or '{}')
        return run
