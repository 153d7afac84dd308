#!/usr/bin/env python3
"""
Results Database - duckdb archive of benchmark runs

Each record is keyed by (run name, instance hash, variant), so re-running an
experiment under the same name replaces its rows instead of duplicating them.
The instance hash is an md5 of the polynomial text and the basis labels.
"""

import duckdb
import hashlib
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

from src.core.gram_map import MonomialBasis
from src.core.polynomial import Polynomial


def instance_hash(f: Polynomial, basis: MonomialBasis) -> str:
    """md5 of the canonical polynomial text and the basis"""
    content = f"{f.to_string()}|{','.join(basis.labels())}"
    return hashlib.md5(content.encode("utf-8")).hexdigest()


class ResultsDatabase:
    """Archive of BenchRecords"""

    def __init__(self, db_path: Union[str, Path] = "bench_runs.duckdb"):
        self.db_path = str(db_path)
        self.logger = logging.getLogger(__name__)
        Path(self.db_path).parent.mkdir(parents=True, exist_ok=True)
        self._init_database()

    def _init_database(self):
        """Create the bench_runs table"""
        try:
            with duckdb.connect(self.db_path) as conn:
                conn.execute("""
                    CREATE TABLE IF NOT EXISTS bench_runs (
                        run_name TEXT,
                        instance_hash TEXT,
                        variant TEXT,
                        mode TEXT,
                        n INTEGER,
                        r INTEGER,
                        p INTEGER,
                        fr DOUBLE,
                        seed INTEGER,
                        iterations INTEGER,
                        time_s DOUBLE,
                        rel_err DOUBLE,
                        rank INTEGER,
                        converged BOOLEAN,
                        theta DOUBLE,
                        exact BOOLEAN,
                        squares INTEGER,
                        error TEXT,
                        recorded_at TIMESTAMP,
                        PRIMARY KEY (run_name, instance_hash, variant)
                    )
                """)
                self.logger.debug("Results database initialized")
        except Exception as e:
            self.logger.error(f"Failed to initialize results database: {e}")
            raise

    def store_report(self, report) -> int:
        """
        Insert or replace every record of a BenchReport.

        Records without an instance hash (the instance could not be built)
        are skipped.

        Returns:
            Number of rows written
        """
        stored = 0
        now = datetime.now()
        try:
            with duckdb.connect(self.db_path) as conn:
                for record in report.records:
                    if record.instance_hash is None:
                        continue
                    conn.execute("""
                        INSERT OR REPLACE INTO bench_runs
                        (run_name, instance_hash, variant, mode, n, r, p, fr, seed, iterations,
                         time_s, rel_err, rank, converged, theta, exact, squares, error, recorded_at)
                        VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                    """, [
                        report.name, record.instance_hash, record.variant, report.mode,
                        record.n, record.r, record.p, record.FR, record.seed, record.iterations,
                        record.time_s, record.rel_err, record.rank, record.converged,
                        record.theta, record.exact, record.squares, record.error, now,
                    ])
                    stored += 1
        except Exception as e:
            self.logger.error(f"Error archiving run '{report.name}': {e}")
            return stored

        self.logger.info(f"💾 Archived {stored} records for run '{report.name}'")
        return stored

    def summarize_run(self, run_name: str) -> List[Dict]:
        """Median iterations, time, rel_err and rank per (variant, n, r)"""
        try:
            with duckdb.connect(self.db_path) as conn:
                rows = conn.execute("""
                    SELECT variant, n, r, COUNT(*) AS runs,
                           SUM(CASE WHEN converged THEN 1 ELSE 0 END) AS converged,
                           MEDIAN(iterations) AS median_iterations,
                           MEDIAN(time_s) AS median_time_s,
                           MEDIAN(rel_err) AS median_rel_err,
                           MEDIAN(rank) AS median_rank
                    FROM bench_runs
                    WHERE run_name = ? AND error IS NULL
                    GROUP BY variant, n, r
                    ORDER BY n, r, variant
                """, [run_name]).fetchall()
        except Exception as e:
            self.logger.error(f"Error summarizing run '{run_name}': {e}")
            return []

        columns = ["variant", "n", "r", "runs", "converged", "median_iterations",
                   "median_time_s", "median_rel_err", "median_rank"]
        return [dict(zip(columns, row)) for row in rows]

    def get_records(self, run_name: str, variant: Optional[str] = None) -> List[Dict]:
        """All archived rows of a run, optionally for one variant"""
        query = "SELECT * FROM bench_runs WHERE run_name = ?"
        params = [run_name]
        if variant:
            query += " AND variant = ?"
            params.append(variant)
        query += " ORDER BY n, r, seed, variant"

        try:
            with duckdb.connect(self.db_path) as conn:
                cursor = conn.execute(query, params)
                columns = [desc[0] for desc in cursor.description]
                return [dict(zip(columns, row)) for row in cursor.fetchall()]
        except Exception as e:
            self.logger.error(f"Error reading run '{run_name}': {e}")
            return []

    def list_runs(self) -> List[str]:
        try:
            with duckdb.connect(self.db_path) as conn:
                return [row[0] for row in conn.execute(
                    "SELECT DISTINCT run_name FROM bench_runs ORDER BY run_name"
                ).fetchall()]
        except Exception as e:
            self.logger.error(f"Error listing runs: {e}")
            return []
