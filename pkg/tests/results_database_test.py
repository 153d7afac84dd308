#!/usr/bin/env python3
"""
Tests for the duckdb results archive
"""

import pytest

from src.bench.harness import BenchRecord, BenchReport
from src.core.gram_map import build_basis
from src.core.polynomial import parse_polynomial
from src.data.results_database import ResultsDatabase, instance_hash


@pytest.fixture
def db(tmp_path):
    return ResultsDatabase(tmp_path / "archive" / "runs.duckdb")


def _report(name="run", iterations=(10, 20, 30)):
    records = [
        BenchRecord("afpc-bb", 6, 2, p=15, FR=0.733333, seed=seed, iterations=it, rel_err=1e-4 * it,
                    rank=2, converged=True, instance_hash=f"hash{seed}")
        for seed, it in enumerate(iterations)
    ]
    records.append(BenchRecord("mfpc", 6, 2, seed=0, iterations=99, instance_hash="hash0", converged=False))
    records.append(BenchRecord("mfpc", 6, 2, seed=9, error="instance failed"))
    return BenchReport(name, "recovery", records)


def test_instance_hash_is_stable():
    f = parse_polynomial("x1^2 + 2*x1 + 1")
    g = parse_polynomial("x1^2 + 1")
    assert instance_hash(f, build_basis(f)) == instance_hash(parse_polynomial("1 + 2*x1 + x1^2"), build_basis(f))
    assert instance_hash(f, build_basis(f)) != instance_hash(g, build_basis(g))
    assert len(instance_hash(f, build_basis(f))) == 32


def test_store_skips_records_without_hash(db):
    assert db.store_report(_report()) == 4
    assert len(db.get_records("run")) == 4
    assert db.list_runs() == ["run"]


def test_rerun_replaces_rows(db):
    db.store_report(_report())
    db.store_report(_report(iterations=(11, 21, 31)))
    rows = db.get_records("run", variant="afpc-bb")
    assert [row["iterations"] for row in rows] == [11, 21, 31]


def test_summarize_run_uses_medians(db):
    db.store_report(_report())
    summary = {row["variant"]: row for row in db.summarize_run("run")}
    assert summary["afpc-bb"]["runs"] == 3
    assert summary["afpc-bb"]["converged"] == 3
    assert summary["afpc-bb"]["median_iterations"] == 20
    assert summary["mfpc"]["runs"] == 1
    assert summary["mfpc"]["converged"] == 0


def test_runs_are_kept_apart(db):
    db.store_report(_report("first"))
    db.store_report(_report("second", iterations=(1, 2, 3)))
    assert db.list_runs() == ["first", "second"]
    assert db.get_records("missing") == []
    assert db.summarize_run("missing") == []
