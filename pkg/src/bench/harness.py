#!/usr/bin/env python3
"""
Benchmark Harness

Runs the solver variants over planted instances and aggregates iteration
counts, timings, errors and recovered ranks. Instances run concurrently on
a thread pool; records always come back in spec order.

Modes:
    compare   no continuation, full eigendecomposition each iteration
    recovery  continuation with the default schedule
    exact     recovery plus refinement and the exact certificate ladder
"""

import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from src.config.settings import BENCH_CONFIG, BENCH_PRESETS, LOGGING_CONFIG, LOGS_DIR
from src.core.errors import ExperimentSpecError
from src.core.pipeline import SosPipeline
from src.core.solver import SolverConfig, SolverVariant, solve
from src.bench.instances import BenchInstance, random_instance
from src.data.problem_loader import load_experiment_spec
from src.data.results_database import instance_hash

logger = logging.getLogger(__name__)

MODES = ("compare", "recovery", "exact")


def setup_logging(level: Optional[str] = None, log_file: Optional[str] = None):
    """
    Install handlers for an entry point.

    Logs go to stderr and stdout carries the report. A file handler
    under LOGS_DIR is added when log_file is given.
    """
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        LOGS_DIR.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(LOGS_DIR / log_file))

    logging.basicConfig(
        level=getattr(logging, (level or LOGGING_CONFIG["level"]).upper(), logging.INFO),
        format=LOGGING_CONFIG["format"],
        handlers=handlers,
        force=True,
    )


@dataclass
class ExperimentSpec:
    """Which instances, variants and seeds to run"""
    name: str = "experiment"
    mode: str = "recovery"
    cases: List[Tuple[int, int]] = field(default_factory=list)
    variants: List[str] = field(default_factory=lambda: ["afpc-bb"])
    seeds: List[int] = field(default_factory=lambda: [0])
    epsilon: float = 1e-3
    max_iter: int = 1000
    workers: Optional[int] = None
    sparse_basis: bool = False
    timing: bool = True
    allow_large: bool = False
    exact: bool = False
    entry_bound: int = BENCH_CONFIG["entry_bound"]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ExperimentSpecError(f"Unknown mode '{self.mode}'. Choose from {list(MODES)}")
        valid = [v.value for v in SolverVariant]
        for variant in self.variants:
            if variant not in valid:
                raise ExperimentSpecError(f"Unknown variant '{variant}'. Choose from {valid}")

        cases = []
        for case in self.cases:
            try:
                n, r = (case["n"], case["r"]) if isinstance(case, Mapping) else case
                n, r = int(n), int(r)
            except (KeyError, TypeError, ValueError):
                raise ExperimentSpecError(f"Case {case!r} must give integer n and r")
            if n < 1 or not 1 <= r <= n:
                raise ExperimentSpecError(f"Case n={n}, r={r} needs 1 <= r <= n")
            limit = BENCH_CONFIG["hard_max_n"] if self.allow_large else BENCH_CONFIG["desk_max_n"]
            if n > limit:
                raise ExperimentSpecError(f"Case n={n} exceeds the limit {limit} (allow_large={self.allow_large})")
            cases.append((n, r))
        self.cases = cases

        if self.epsilon <= 0 or self.max_iter < 0:
            raise ExperimentSpecError("epsilon must be positive and max_iter non-negative")
        if self.workers is not None and self.workers < 1:
            raise ExperimentSpecError(f"workers must be at least 1, got {self.workers}")
        if self.mode == "exact":
            self.exact = True

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ExperimentSpecError(f"Unknown experiment fields: {sorted(unknown)}")
        return cls(**dict(data))

    @classmethod
    def preset(cls, name: str) -> "ExperimentSpec":
        if name not in BENCH_PRESETS:
            raise ExperimentSpecError(f"Unknown preset '{name}'. Choose from {sorted(BENCH_PRESETS)}")
        return cls.from_dict(BENCH_PRESETS[name])

    def solver_config(self, variant: str) -> SolverConfig:
        if self.mode == "compare":
            return SolverConfig(
                variant=variant,
                epsilon=self.epsilon,
                max_iter=self.max_iter,
                continuation=False,
                full_decomposition=True,
            )
        return SolverConfig(variant=variant, epsilon=self.epsilon, max_iter=self.max_iter)


@dataclass
class BenchRecord:
    variant: str
    n: int
    r: int
    p: Optional[int] = None
    FR: Optional[float] = None
    seed: int = 0
    iterations: Optional[int] = None
    time_s: float = 0.0
    rel_err: Optional[float] = None
    rank: Optional[int] = None
    converged: bool = False
    theta: Optional[float] = None
    exact: Optional[bool] = None
    squares: Optional[int] = None
    instance_hash: Optional[str] = None
    error: Optional[str] = None

    def to_row(self, columns: Optional[List[str]] = None) -> List:
        data = asdict(self)
        return [data[c] for c in (columns or BENCH_CONFIG["csv_columns"])]


@dataclass
class BenchReport:
    name: str
    mode: str
    records: List[BenchRecord] = field(default_factory=list)

    @property
    def aggregates(self) -> List[Dict]:
        """Medians per (variant, n, r) over successful runs"""
        groups: Dict[Tuple[str, int, int], List[BenchRecord]] = {}
        for record in self.records:
            groups.setdefault((record.variant, record.n, record.r), []).append(record)

        summary = []
        for (variant, n, r), records in groups.items():
            finished = [rec for rec in records if rec.error is None]

            def _median(attr: str) -> Optional[float]:
                values = [getattr(rec, attr) for rec in finished if getattr(rec, attr) is not None]
                return float(np.median(values)) if values else None

            summary.append({
                "variant": variant,
                "n": n,
                "r": r,
                "runs": len(records),
                "failed": len(records) - len(finished),
                "converged": sum(1 for rec in finished if rec.converged),
                "median_iterations": _median("iterations"),
                "median_time_s": _median("time_s"),
                "median_rel_err": _median("rel_err"),
                "median_rank": _median("rank"),
                "exact": sum(1 for rec in finished if rec.exact) if any(
                    rec.exact is not None for rec in finished) else None,
            })
        return summary

    def median(self, variant: str, attr: str = "iterations") -> Optional[float]:
        values = [
            getattr(rec, attr) for rec in self.records
            if rec.variant == variant and rec.error is None and getattr(rec, attr) is not None
        ]
        return float(np.median(values)) if values else None


def _run_variant(spec: ExperimentSpec, instance: BenchInstance, variant: str, digest: str) -> BenchRecord:
    record = BenchRecord(
        variant=variant,
        n=instance.n,
        r=instance.r,
        p=instance.p,
        FR=round(instance.fr, 6),
        seed=instance.seed,
        instance_hash=digest,
    )
    config = spec.solver_config(variant)

    start = time.perf_counter()
    result = solve(instance.cs, config)
    if spec.exact:
        pipeline = SosPipeline(solver_config=config)
        refined = pipeline.refine(instance.f, instance.basis, instance.cs, result)
        certificate = pipeline.certify(instance.f, instance.basis, instance.cs, refined)
        record.theta = refined.theta
        record.exact = certificate.exact
        record.squares = certificate.num_squares if certificate.exact else None
    elapsed = time.perf_counter() - start

    record.iterations = result.iterations
    record.rel_err = result.rel_err
    record.rank = result.rank
    record.converged = result.converged
    record.time_s = round(elapsed, 4) if spec.timing else 0.0
    return record


def _run_instance(spec: ExperimentSpec, n: int, r: int, seed: int) -> List[BenchRecord]:
    try:
        instance = random_instance(
            n, r, seed,
            entry_bound=spec.entry_bound,
            sparse_basis=spec.sparse_basis,
            allow_large=spec.allow_large,
        )
        digest = instance_hash(instance.f, instance.basis)
    except Exception as e:
        logger.error(f"❌ Instance n={n}, r={r}, seed={seed} could not be built: {e}")
        return [BenchRecord(variant=v, n=n, r=r, seed=seed, error=str(e)) for v in spec.variants]

    records = []
    for variant in spec.variants:
        try:
            record = _run_variant(spec, instance, variant, digest)
            logger.info(
                f"{'✅' if record.converged else '⚠️'} {variant} n={n} r={r} seed={seed}: "
                f"{record.iterations} iterations, rel_err={record.rel_err:.3e}, rank={record.rank}"
            )
        except Exception as e:
            logger.error(f"❌ {variant} n={n} r={r} seed={seed} failed: {e}")
            record = BenchRecord(
                variant=variant, n=n, r=r, p=instance.p, FR=round(instance.fr, 6),
                seed=seed, instance_hash=digest, error=str(e),
            )
        records.append(record)
    return records


def run_experiment(
    spec: ExperimentSpec,
    on_record: Optional[Callable[[BenchRecord], None]] = None,
) -> BenchReport:
    """
    Execute every (case, seed, variant) combination of the spec.

    Individual failures become records with `error` set; the harness keeps
    going. on_record sees records in spec order once all runs finished.
    """
    report = BenchReport(spec.name, spec.mode)
    jobs = [(n, r, seed) for n, r in spec.cases for seed in spec.seeds]
    if not jobs or not spec.variants:
        logger.info("📊 Empty experiment; nothing to run")
        return report

    workers = spec.workers or BENCH_CONFIG["max_workers"]
    logger.info(
        f"🚀 Running '{spec.name}' ({spec.mode}): {len(jobs)} instances x "
        f"{len(spec.variants)} variants on {workers} workers"
    )
    start = time.perf_counter()

    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_run_instance, spec, n, r, seed) for n, r, seed in jobs]
        for future in futures:
            for record in future.result():
                report.records.append(record)
                if on_record is not None:
                    on_record(record)

    logger.info(f"⏱️ Experiment finished in {time.perf_counter() - start:.2f}s")
    for row in report.aggregates:
        logger.info(
            f"📊 {row['variant']} n={row['n']} r={row['r']}: median iterations "
            f"{row['median_iterations']}, converged {row['converged']}/{row['runs']}"
        )
    return report


def load_spec(source: Optional[Path] = None, preset: Optional[str] = None) -> ExperimentSpec:
    """Spec from a preset name or a JSON file"""
    if preset:
        return ExperimentSpec.preset(preset)
    if source is None:
        raise ExperimentSpecError("Either a spec file or a preset name is required")
    return ExperimentSpec.from_dict(load_experiment_spec(source))
