#!/usr/bin/env python3
"""
gramsos - exact sum-of-squares certificates through low-rank Gram matrix completion

Subcommands:
    sos      polynomial -> exact rational SOS certificate
    solve    constraint-system JSON -> low-rank PSD solution
    bench    run a benchmark experiment (spec file or preset)
    verify   re-check a certificate against a polynomial

Exit codes:
    0  success
    2  usage error
    3  input error (parse, odd degree, malformed file, invalid spec)
    4  numerical stage failed (solver or refinement)
    5  certification failed (identity residual or PSD witness)
    6  harness or internal error
"""

import argparse
import logging
import sys
from contextlib import contextmanager
from typing import IO, Iterator, List, Optional

from src.bench.harness import ExperimentSpec, load_spec, run_experiment, setup_logging
from src.communication.report_writer import HistoryCsvWriter, ReportWriter
from src.config.settings import DATA_DIR, RESULTS_DATABASE
from src.core.errors import GramSosError
from src.core.exact import verify_certificate
from src.core.pipeline import SosPipeline, prove_sos
from src.core.polynomial import parse_polynomial
from src.core.solver import SolverConfig, SolverVariant, solve
from src.data.problem_loader import load_basis, load_certificate, load_constraint_system, load_polynomial_text
from src.data.results_database import ResultsDatabase

logger = logging.getLogger("gramsos")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_CERTIFY = 5
EXIT_INTERNAL = 6

INPUT_STAGES = ("parse", "basis", "constraints")
NUMERICAL_STAGES = ("solve", "refine")


@contextmanager
def _output(path: Optional[str]) -> Iterator[IO[str]]:
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as handle:
            yield handle


@contextmanager
def _history(path: Optional[str]) -> Iterator[Optional[HistoryCsvWriter]]:
    if path is None:
        yield None
    else:
        with open(path, "w", encoding="utf-8") as handle:
            yield HistoryCsvWriter(handle)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(
        variant=args.variant,
        epsilon=args.eps,
        mu_1=args.mu1,
        mu_bar=args.mu_bar,
        eta=args.eta,
        tau_fixed=args.tau,
        tau_min=args.tau_min,
        tau_max=args.tau_max,
        max_iter=args.max_iter,
        xtol=args.xtol,
        eps_rank=args.eps_rank,
        continuation=not args.no_continuation,
        bb_rule=args.bb,
        mu_norm=args.norm,
        seed=args.seed,
    )


def cmd_sos(args: argparse.Namespace) -> int:
    """Full pipeline for one polynomial"""
    if args.input:
        text = load_polynomial_text(args.input)
    elif args.polynomial is not None:
        text = args.polynomial
    else:
        print("❌ A polynomial or --input FILE is required", file=sys.stderr)
        return EXIT_USAGE

    pipeline = SosPipeline(
        solver_config=_solver_config(args),
        basis_mode=args.basis,
        basis=load_basis(args.basis_file) if args.basis_file else None,
        rank=args.rank,
        denom_bound=args.denom_bound,
    )
    with _history(args.history) as history:
        results = prove_sos(text, pipeline, approx_ok=args.approx_ok, on_iteration=history)

    for error in results["errors"]:
        print(f"❌ {error}", file=sys.stderr)
    for warning in results["warnings"]:
        print(f"⚠️ {warning}", file=sys.stderr)

    if results["failed_stage"] in INPUT_STAGES:
        return EXIT_INPUT

    certificate = results["certificate"]
    if certificate is not None:
        summary = {key: results[key] for key in ("n", "p", "iterations", "rel_err", "rank", "theta", "squares")}
        with _output(args.out) as stream:
            ReportWriter(args.format).write_certificate(certificate, stream, summary)

    if results["success"]:
        return EXIT_OK
    if results["failed_stage"] in NUMERICAL_STAGES:
        return EXIT_NUMERICAL
    return EXIT_CERTIFY


def cmd_solve(args: argparse.Namespace) -> int:
    """Solver only, on a constraint-system file"""
    cs = load_constraint_system(args.constraint_file)
    config = _solver_config(args)
    with _history(args.history) as history:
        result = solve(cs, config, on_iteration=history)

    with _output(args.out) as stream:
        ReportWriter(args.format).write_solve_result(result, stream)
    return EXIT_OK if result.converged else EXIT_NUMERICAL


def _database_path(db: str) -> str:
    return db if db != "default" else str(DATA_DIR / RESULTS_DATABASE)


def cmd_archive(args: argparse.Namespace) -> int:
    """Rows or medians read back from a results database"""
    if not args.db:
        print("❌ --summary and --records need --db PATH", file=sys.stderr)
        return EXIT_USAGE
    db = ResultsDatabase(_database_path(args.db))
    if args.records is not None:
        rows = db.get_records(args.records, args.variant)
    elif args.summary:
        rows = db.summarize_run(args.summary)
    else:
        rows = [{"run_name": name, **row} for name in db.list_runs() for row in db.summarize_run(name)]

    with _output(args.out) as stream:
        ReportWriter(args.format).write_archive_rows(rows, stream)
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    """Benchmark experiment from a spec file or preset"""
    if args.summary is not None or args.records is not None:
        return cmd_archive(args)

    spec = load_spec(args.spec_file, args.preset)
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.no_timing:
        overrides["timing"] = False
    if args.allow_large:
        overrides["allow_large"] = True
    if args.seed is not None:
        overrides["seeds"] = [args.seed]
    if overrides:
        spec = ExperimentSpec.from_dict({**spec.__dict__, **overrides})

    try:
        report = run_experiment(spec)
    except Exception as e:
        logger.error(f"❌ Benchmark harness failed: {e}")
        return EXIT_INTERNAL

    writer = ReportWriter(args.format)
    with _output(args.out) as stream:
        writer.write_bench_report(report, stream)
    if args.json:
        with _output(args.json) as stream:
            writer.write_bench_json(report, stream)
    if args.db:
        expected = sum(1 for record in report.records if record.instance_hash is not None)
        stored = ResultsDatabase(_database_path(args.db)).store_report(report)
        if stored < expected:
            logger.error(f"❌ Archived only {stored} of {expected} records")
            return EXIT_INTERNAL

    failed = sum(1 for record in report.records if record.error)
    if failed:
        logger.warning(f"⚠️ {failed} of {len(report.records)} runs failed")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Exact re-check of a certificate file"""
    text = load_polynomial_text(args.input) if args.input else args.polynomial
    if text is None:
        print("❌ A polynomial or --input FILE is required", file=sys.stderr)
        return EXIT_USAGE
    f = parse_polynomial(text)
    certificate = verify_certificate(f, load_certificate(args.certificate_file))

    writer = ReportWriter("text")
    if certificate.exact:
        print(f"✅ Certificate verified: {certificate.num_squares} squares")
        return EXIT_OK

    print("❌ Certificate rejected")
    writer.write_failure(certificate, sys.stdout)
    return EXIT_CERTIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gramsos",
        description="Exact SOS certificates via low-rank Gram matrix completion",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-file", default=None, help="Also log to this file under logs/")

    solver_flags = argparse.ArgumentParser(add_help=False)
    solver_flags.add_argument("--variant", default=SolverConfig.variant.value,
                              choices=[v.value for v in SolverVariant])
    solver_flags.add_argument("--eps", type=float, default=SolverConfig.epsilon, help="Relative error tolerance")
    solver_flags.add_argument("--mu1", type=float, default=None, help="Initial mu (default 1/4 ||A*b||)")
    solver_flags.add_argument("--mu-bar", type=float, default=None, help="Target mu (default 1e-4 ||A*b||)")
    solver_flags.add_argument("--eta", type=float, default=SolverConfig.eta, help="Continuation factor")
    solver_flags.add_argument("--tau", type=float, default=None, help="Fixed step size for mfpc (default 1.99 / L)")
    solver_flags.add_argument("--tau-min", type=float, default=None)
    solver_flags.add_argument("--tau-max", type=float, default=None)
    solver_flags.add_argument("--max-iter", type=int, default=SolverConfig.max_iter)
    solver_flags.add_argument("--xtol", type=float, default=SolverConfig.xtol, help="Stagnation tolerance on ||X+ - X||")
    solver_flags.add_argument("--eps-rank", type=float, default=SolverConfig.eps_rank,
                              help="Relative eigenvalue cut of the rank estimate")
    solver_flags.add_argument("--seed", type=int, default=None, help="Seed for power iteration and Lanczos")
    solver_flags.add_argument("--no-continuation", action="store_true", help="Run with mu = mu_bar only")
    solver_flags.add_argument("--bb", default=SolverConfig.bb_rule, choices=["bb1", "bb2"])
    solver_flags.add_argument("--norm", default=SolverConfig.mu_norm, choices=["spectral", "fro"],
                              help="Norm of A*b used to scale mu")
    solver_flags.add_argument("--history", default=None, help="Stream per-iteration CSV to this file")

    output_flags = argparse.ArgumentParser(add_help=False)
    output_flags.add_argument("--out", default=None, help="Output file (default stdout)")
    output_flags.add_argument("--format", default="json", choices=list(ReportWriter.FORMATS))

    subparsers = parser.add_subparsers(dest="command", required=True)

    sos = subparsers.add_parser("sos", parents=[solver_flags, output_flags], help="Certify a polynomial")
    sos.add_argument("polynomial", nargs="?", default=None, help='e.g. "x1^2 + 2*x1 + 1"')
    sos.add_argument("--input", default=None, help="Read the polynomial from a file")
    sos.add_argument("--rank", type=int, default=None, help="Number of squares to refine with")
    sos.add_argument("--denom-bound", type=int, default=None, help="First denominator bound of the ladder")
    sos.add_argument("--basis", default="full", choices=["full", "homogeneous"])
    sos.add_argument("--basis-file", default=None, help="Use the monomial basis from this JSON file or certificate")
    sos.add_argument("--approx-ok", action="store_true",
                     help="Succeed when the solver reached eps even without an exact certificate")
    sos.set_defaults(handler=cmd_sos)

    solve_parser = subparsers.add_parser("solve", parents=[solver_flags, output_flags],
                                         help="Solve a constraint-system file")
    solve_parser.add_argument("constraint_file")
    solve_parser.set_defaults(handler=cmd_solve)

    bench = subparsers.add_parser("bench", parents=[output_flags], help="Run a benchmark experiment")
    bench.add_argument("spec_file", nargs="?", default=None)
    bench.add_argument("--preset", default=None, help="compare-desk, recovery-desk or exact-desk")
    bench.add_argument("--json", default=None, help="Also write the JSON report here")
    bench.add_argument("--db", default=None, help="Archive records into this duckdb file ('default' for data/)")
    bench.add_argument("--workers", type=int, default=None, help="Worker threads (default GRAMSOS_THREADS)")
    bench.add_argument("--seed", type=int, default=None, help="Run only this seed")
    bench.add_argument("--no-timing", action="store_true", help="Write zero times for byte-stable output")
    bench.add_argument("--allow-large", action="store_true", help="Accept n above desk scale")
    bench.add_argument("--summary", nargs="?", const="", default=None, metavar="RUN",
                       help="Print archived medians of RUN (all runs if omitted) from --db instead of running")
    bench.add_argument("--records", default=None, metavar="RUN", help="Print the archived rows of RUN from --db")
    bench.add_argument("--variant", default=None, help="With --records, only this variant")
    bench.set_defaults(handler=cmd_bench, format="csv")

    verify = subparsers.add_parser("verify", help="Verify a certificate file")
    verify.add_argument("polynomial", nargs="?", default=None)
    verify.add_argument("certificate_file")
    verify.add_argument("--input", default=None, help="Read the polynomial from a file")
    verify.set_defaults(handler=cmd_verify)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    setup_logging(args.log_level, args.log_file)

    try:
        if args.command in ("sos", "solve"):
            _solver_config(args)
    except ValueError as e:
        print(f"❌ Invalid solver flags: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.handler(args)
    except GramSosError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:
        logger.exception(f"❌ Internal error: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
