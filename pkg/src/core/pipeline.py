#!/usr/bin/env python3
"""
SOS Pipeline - from polynomial text to an exact rational certificate

Stages run in order and each records its outcome in a results dictionary:

    parse -> basis -> constraints -> solve -> refine -> exact

A failing stage stops the run and is named in results["failed_stage"];
non-convergence of the numerical stages is a warning, the exact stage
decides success.
"""

import copy
import logging
import time
from typing import Callable, Dict, Optional, Union

import numpy as np

from src.core.errors import DegreeError, GramSosError
from src.core.exact import SosCertificate, exact_certificate
from src.core.gram_map import ConstraintSystem, MonomialBasis, build_basis, build_constraints
from src.core.polynomial import Polynomial, parse_polynomial
from src.core.refine import RefineResult, SosFactors, refine_with_rank_search
from src.core.solver import HistoryRecord, SolveResult, SolverConfig, solve

logger = logging.getLogger(__name__)

STAGES = ("parse", "basis", "constraints", "solve", "refine", "exact")


class SosPipeline:
    """Runs the certification stages for one polynomial"""

    def __init__(self,
                 solver_config: Optional[SolverConfig] = None,
                 basis_mode: str = "full",
                 basis: Optional[MonomialBasis] = None,
                 rank: Optional[int] = None,
                 denom_bound: Optional[int] = None,
                 refine_tol: Optional[float] = None,
                 max_gn: Optional[int] = None):
        """
        Args:
            solver_config: Solver settings (defaults from settings)
            basis_mode: "full" or "homogeneous"
            basis: Fixed monomial basis; overrides basis_mode and lifts f to
                the basis variable count
            rank: Number of squares to refine with (numerical rank when None)
            denom_bound: First denominator bound of the rounding ladder
            refine_tol: Gauss-Newton target backward error
            max_gn: Gauss-Newton step cap
        """
        self.solver_config = solver_config or SolverConfig()
        self.basis_mode = basis_mode
        self.basis = basis
        self.rank = rank
        self.denom_bound = denom_bound
        self.refine_tol = refine_tol
        self.max_gn = max_gn

    def parse(self, polynomial: Union[str, Polynomial]) -> Polynomial:
        f = polynomial if isinstance(polynomial, Polynomial) else parse_polynomial(polynomial)
        if self.basis is not None:
            f = f.with_nvars(self.basis.nvars)
        if f.degree % 2:
            raise DegreeError(f"Polynomial has odd degree {f.degree}; it cannot be a sum of squares")
        logger.info(f"📄 Parsed polynomial in {f.nvars} variables, degree {f.degree}, {len(f.terms)} terms")
        return f

    def build(self, f: Polynomial) -> MonomialBasis:
        if self.basis is not None:
            basis = build_basis(f, "custom", self.basis.monomials)
        else:
            basis = build_basis(f, self.basis_mode)
        logger.info(f"🧱 Basis of {basis.n} monomials up to degree {basis.max_degree}")
        return basis

    def constraints(self, f: Polynomial, basis: MonomialBasis) -> ConstraintSystem:
        cs = build_constraints(f, basis)
        logger.info(f"🧮 {cs.p} coefficient constraints on a {cs.n}x{cs.n} Gram matrix")
        return cs

    def solve(self, cs: ConstraintSystem,
              on_iteration: Optional[Callable[[HistoryRecord], None]] = None) -> SolveResult:
        return solve(cs, self.solver_config, on_iteration)

    def refine(self, f: Polynomial, basis: MonomialBasis, cs: ConstraintSystem,
               result: SolveResult) -> RefineResult:
        r = self.rank if self.rank is not None else max(1, result.rank)
        return refine_with_rank_search(
            f, result.w, r, basis, tol=self.refine_tol, max_gn=self.max_gn, cs=cs
        )

    def certify(self, f: Polynomial, basis: MonomialBasis, cs: ConstraintSystem,
                refined: RefineResult) -> SosCertificate:
        return exact_certificate(f, refined.factors.gram(), basis, cs, self.denom_bound)


def prove_sos(polynomial: Union[str, Polynomial],
              pipeline: Optional[SosPipeline] = None,
              basis: Optional[MonomialBasis] = None,
              approx_ok: bool = False,
              on_iteration: Optional[Callable[[HistoryRecord], None]] = None) -> Dict:
    """
    Run the full pipeline and collect a summary.

    Args:
        polynomial: Polynomial text or an already parsed Polynomial
        pipeline: Configured SosPipeline (defaults when None)
        basis: Fixed monomial basis for this run; takes precedence over the
            pipeline's own basis settings
        approx_ok: Count the run as successful when the solver reached epsilon,
            even without an exact certificate
        on_iteration: Solver history callback

    Returns:
        Dictionary with success, exact, failed_stage, errors, warnings,
        stage timings and the numerical summary (rank, rel_err, theta, ...)
    """
    pipeline = pipeline or SosPipeline()
    if basis is not None:
        pipeline = copy.copy(pipeline)
        pipeline.basis = basis
    start_time = time.perf_counter()
    results = {
        "success": False,
        "exact": False,
        "failed_stage": None,
        "errors": [],
        "warnings": [],
        "stage_times": {},
        "polynomial": None,
        "n": None,
        "p": None,
        "iterations": None,
        "rel_err": None,
        "rank": None,
        "converged": None,
        "theta": None,
        "squares": None,
        "certificate": None,
        "solve_result": None,
        "processing_time": 0.0,
    }

    def _run(stage: str, fn, *args):
        stage_start = time.perf_counter()
        try:
            return fn(*args)
        finally:
            results["stage_times"][stage] = time.perf_counter() - stage_start

    stage = "parse"
    try:
        logger.info("🚀 Starting SOS certification")
        f = _run(stage, pipeline.parse, polynomial)
        results["polynomial"] = f.to_string()

        stage = "basis"
        basis = _run(stage, pipeline.build, f)

        stage = "constraints"
        cs = _run(stage, pipeline.constraints, f, basis)
        results["n"], results["p"] = cs.n, cs.p

        stage = "solve"
        solved = _run(stage, pipeline.solve, cs, on_iteration)
        results.update(
            iterations=solved.iterations,
            rel_err=solved.rel_err,
            rank=solved.rank,
            converged=solved.converged,
            solve_result=solved,
        )
        if not solved.converged:
            results["warnings"].append(
                f"Solver stopped at rel_err={solved.rel_err:.3e} without reaching "
                f"epsilon={pipeline.solver_config.epsilon:g}"
            )

        approx_success = approx_ok and solved.rel_err <= pipeline.solver_config.epsilon

        if f.is_zero():
            stage = "exact"
            certificate = _run(stage, pipeline.certify, f, basis, cs, _zero_refinement(basis))
            refined = None
        else:
            stage = "refine"
            refined = _run(stage, pipeline.refine, f, basis, cs, solved)
            results["theta"] = refined.theta
            if not refined.converged:
                results["warnings"].append(
                    f"Refinement reached theta={refined.theta:.3e} with {refined.factors.r} squares"
                )

            stage = "exact"
            certificate = _run(stage, pipeline.certify, f, basis, cs, refined)

        results["certificate"] = certificate
        results["exact"] = certificate.exact
        results["squares"] = certificate.num_squares if certificate.exact else None

        if certificate.exact:
            results["success"] = True
        else:
            failed = "refine" if refined is not None and not refined.converged else "exact"
            margin = f" (most negative pivot {certificate.margin})" if certificate.margin is not None else ""
            message = f"No exact certificate{margin}"
            if approx_success:
                results["warnings"].append(message)
                results["success"] = True
            else:
                results["failed_stage"] = failed
                results["errors"].append(message)

    except GramSosError as e:
        logger.error(f"❌ Stage '{stage}' failed: {e}")
        results["failed_stage"] = stage
        results["errors"].append(f"{stage}: {e}")

    results["processing_time"] = time.perf_counter() - start_time

    if results["success"]:
        logger.info(
            f"✅ Certification finished in {results['processing_time']:.2f}s: "
            f"rank={results['rank']}, rel_err={results['rel_err']:.3e}, exact={results['exact']}"
        )
    elif results["failed_stage"]:
        logger.error(f"❌ Certification failed at stage '{results['failed_stage']}'")
    if results["warnings"]:
        logger.info(f"⚠️ Warnings: {len(results['warnings'])}")

    return results


def _zero_refinement(basis: MonomialBasis) -> RefineResult:
    # Single zero factor, Gram matrix 0
    return RefineResult(SosFactors(np.zeros((1, basis.n)), basis), 0.0, True, 0)
