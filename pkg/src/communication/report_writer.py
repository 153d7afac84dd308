#!/usr/bin/env python3
"""
Report Writer - certificates, solve dumps and benchmark reports

Every writer takes an open text stream (stdout by default in the CLI) so
the same code serves files and the terminal. Output only depends on the
data passed in, so identical runs give identical bytes.
"""

import csv
import json
import logging
from dataclasses import asdict
from typing import IO, Dict, List, Optional

from src.config.settings import BENCH_CONFIG
from src.core.exact import SosCertificate
from src.core.solver import HistoryRecord, SolveResult

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ["iter", "mu", "tau", "s_k", "rel_err", "objective", "rank"]


class HistoryCsvWriter:
    """on_iteration callback streaming solver history as CSV rows"""

    def __init__(self, stream: IO[str]):
        self.stream = stream
        self.writer = csv.writer(stream, lineterminator="\n")
        self.writer.writerow(HISTORY_COLUMNS)
        self.rows = 0

    def __call__(self, record: HistoryRecord):
        data = asdict(record)
        self.writer.writerow([data[c] for c in HISTORY_COLUMNS])
        self.rows += 1


class ReportWriter:
    """Formats results as json, csv or text"""

    FORMATS = {
        "json": "JSON document",
        "csv": "comma-separated rows",
        "text": "human-readable summary",
    }

    def __init__(self, fmt: str = "text"):
        """
        Args:
            fmt: Output format ('json', 'csv', 'text')
        """
        if fmt not in self.FORMATS:
            raise ValueError(f"Unsupported format: {fmt}. Supported: {list(self.FORMATS.keys())}")
        self.fmt = fmt

    def write_certificate(self, certificate: SosCertificate, stream: IO[str],
                          summary: Optional[Dict] = None):
        """Certificate JSON (plus an optional summary block) or text"""
        if self.fmt == "text":
            self._write_summary_text(summary or {}, stream)
            stream.write(f"exact: {certificate.exact}\n")
            if certificate.exact:
                stream.write(f"squares: {certificate.num_squares}\n")
                for weight, square in zip(certificate.weights, certificate.squares):
                    stream.write(f"  {weight} * ({square})^2\n")
            else:
                self.write_failure(certificate, stream)
            return

        payload = certificate.to_dict()
        if summary:
            payload["summary"] = summary
        if self.fmt == "csv":
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(["weight", "square"])
            for weight, square in zip(payload["weights"], payload["squares"]):
                writer.writerow([weight, square])
            return
        json.dump(payload, stream, indent=2)
        stream.write("\n")

    def write_failure(self, certificate: SosCertificate, stream: IO[str]):
        """Residual polynomial, witness vector or weight problem"""
        if certificate.residual is not None:
            stream.write(f"residual: {certificate.residual}\n")
        if certificate.witness is not None:
            stream.write(f"witness: [{', '.join(str(v) for v in certificate.witness)}]\n")
            stream.write(f"witness value: {certificate.witness_value}\n")
        elif certificate.margin is not None:
            stream.write(f"margin: {certificate.margin}\n")

    def _write_summary_text(self, summary: Dict, stream: IO[str]):
        for key in ("n", "p", "iterations", "rel_err", "rank", "theta"):
            if summary.get(key) is not None:
                value = summary[key]
                stream.write(f"{key}: {value:.3e}\n" if isinstance(value, float) else f"{key}: {value}\n")

    def write_solve_result(self, result: SolveResult, stream: IO[str]):
        """W, rel_err, rank and history"""
        if self.fmt == "csv":
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(HISTORY_COLUMNS)
            for record in result.history:
                data = asdict(record)
                writer.writerow([data[c] for c in HISTORY_COLUMNS])
            return

        if self.fmt == "text":
            stream.write(
                f"iterations: {result.iterations}\nrel_err: {result.rel_err:.3e}\n"
                f"rank: {result.rank}\nconverged: {result.converged}\n"
                f"fixed_point_residual: {result.fixed_point_residual:.3e}\n"
            )
            for row in result.w:
                stream.write(" ".join(f"{v: .6g}" for v in row) + "\n")
            return

        payload = {
            "n": int(result.w.shape[0]),
            "iterations": result.iterations,
            "rel_err": result.rel_err,
            "rank": result.rank,
            "converged": result.converged,
            "fixed_point_residual": result.fixed_point_residual,
            "diagnostics": result.diagnostics,
            "w": result.w.tolist(),
            "history": [asdict(record) for record in result.history],
        }
        json.dump(payload, stream, indent=2)
        stream.write("\n")

    def write_bench_csv(self, report, stream: IO[str], columns: Optional[List[str]] = None):
        columns = columns or BENCH_CONFIG["csv_columns"]
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(columns)
        for record in report.records:
            writer.writerow(["" if v is None else v for v in record.to_row(columns)])

    def write_bench_json(self, report, stream: IO[str]):
        payload = {
            "name": report.name,
            "mode": report.mode,
            "records": [asdict(record) for record in report.records],
            "aggregate": report.aggregates,
        }
        json.dump(payload, stream, indent=2)
        stream.write("\n")

    def write_bench_report(self, report, stream: IO[str]):
        """Report in this writer's format"""
        if self.fmt == "json":
            self.write_bench_json(report, stream)
        elif self.fmt == "csv":
            self.write_bench_csv(report, stream)
        else:
            for row in report.aggregates:
                stream.write(
                    f"{row['variant']:>8} n={row['n']:<5} r={row['r']:<4} runs={row['runs']} "
                    f"converged={row['converged']} median_iter={row['median_iterations']} "
                    f"median_rel_err={row['median_rel_err']}\n"
                )

    def write_archive_rows(self, rows: List[Dict], stream: IO[str]):
        """Rows read back from the results database"""
        if self.fmt == "json":
            json.dump(rows, stream, indent=2, default=str)
            stream.write("\n")
        elif self.fmt == "csv":
            if not rows:
                return
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(list(rows[0]))
            for row in rows:
                writer.writerow(["" if v is None else v for v in row.values()])
        else:
            for row in rows:
                stream.write(" ".join(f"{key}={value}" for key, value in row.items()) + "\n")
