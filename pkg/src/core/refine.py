#!/usr/bin/env python3
"""
Gauss-Newton refinement of numerical SOS factors

A Gram matrix W ~ C^T C is turned into r factor polynomials (rows of C over
the monomial basis). The factors are then refined so that sum_i factor_i^2
matches f coefficient by coefficient; the backward error theta is the
2-norm of the residual coefficient vector.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Union

import numpy as np

from src.config.settings import REFINE_CONFIG
from src.core.gram_map import ConstraintSystem, MonomialBasis, apply_map, build_constraints
from src.core.polynomial import Polynomial
from src.core.spectral import schur_sym

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SosFactors:
    """Rows of `coefficients` are factor polynomials over `basis`"""
    coefficients: np.ndarray
    basis: MonomialBasis

    def __post_init__(self):
        self.coefficients = np.atleast_2d(np.asarray(self.coefficients, dtype=float))
        if self.coefficients.shape[0] < 1:
            raise ValueError("At least one factor is required")
        if self.coefficients.shape[1] != self.basis.n:
            raise ValueError(
                f"Factor coefficients have {self.coefficients.shape[1]} columns, basis has {self.basis.n}"
            )

    @property
    def r(self) -> int:
        return self.coefficients.shape[0]

    def gram(self) -> np.ndarray:
        """C^T C"""
        return self.coefficients.T @ self.coefficients

    def polynomials(self) -> List[Polynomial]:
        """Factors as polynomials (floats converted exactly)"""
        result = []
        for row in self.coefficients:
            terms = {m: Fraction(float(c)) for m, c in zip(self.basis.monomials, row) if c != 0}
            result.append(Polynomial(self.basis.nvars, terms))
        return result


@dataclass(eq=False)
class RefineResult:
    factors: SosFactors
    theta: float
    converged: bool
    gn_iterations: int


def _positive_count(lam: np.ndarray) -> int:
    if lam.size == 0:
        return 0
    floor = REFINE_CONFIG["positive_tol"] * max(1.0, float(lam[0]))
    return int(np.count_nonzero(lam > floor))


def truncated_factor(w: np.ndarray, r: int, basis: MonomialBasis) -> SosFactors:
    """
    Factor coefficients sqrt(lambda_i) * q_i from the top-r eigenpairs of W.

    Raises:
        ValueError: If r < 1 or r exceeds the number of positive eigenvalues
    """
    if r < 1:
        raise ValueError(f"Number of squares must be at least 1, got {r}")
    decomp = schur_sym(w)
    positives = _positive_count(decomp.lam)
    if r > positives:
        raise ValueError(f"Requested {r} factors but W has only {positives} positive eigenvalues")

    coefficients = (decomp.q[:, :r] * np.sqrt(decomp.lam[:r])).T
    return SosFactors(coefficients, basis)


def _seed_factors(w: np.ndarray, r: int, basis: MonomialBasis) -> SosFactors:
    # Like truncated_factor, but tops up with small multiples of the
    # remaining eigenvectors when W has fewer than r positive eigenvalues
    decomp = schur_sym(w)
    floor = REFINE_CONFIG["positive_tol"] * max(1.0, float(decomp.lam[0])) * 1e3
    scales = np.sqrt(np.maximum(decomp.lam[:r], floor))
    return SosFactors((decomp.q[:, :r] * scales).T, basis)


def squares_image(cs: ConstraintSystem, coefficients: np.ndarray) -> np.ndarray:
    """Coefficient vector of sum_i factor_i^2, i.e. A(C^T C)"""
    c = np.atleast_2d(coefficients)
    return apply_map(cs, c.T @ c)


def residual_jacobian(cs: ConstraintSystem, coefficients: np.ndarray) -> np.ndarray:
    """
    Jacobian of squares_image with respect to the flattened factor matrix.

    J[m, i*n + beta] = 2 * sum_gamma c[i, gamma] [mon_beta * mon_gamma = m]
    """
    if cs.pair_index is None:
        raise ValueError("Constraint system has no pair index; build it from a polynomial")
    c = np.atleast_2d(np.asarray(coefficients, dtype=float))
    r, n = c.shape

    rows = np.broadcast_to(cs.pair_index, (r, n, n))
    cols = np.broadcast_to((np.arange(r)[:, None] * n + np.arange(n)[None, :])[:, :, None], (r, n, n))
    values = np.broadcast_to(2.0 * c[:, None, :], (r, n, n))

    jacobian = np.zeros((cs.p, r * n))
    np.add.at(jacobian, (rows.ravel(), cols.ravel()), values.ravel())
    return jacobian


def gauss_newton_refine(
    f: Polynomial,
    init: SosFactors,
    tol: Optional[float] = None,
    max_gn: Optional[int] = None,
    cs: Optional[ConstraintSystem] = None,
) -> RefineResult:
    """
    Damped Gauss-Newton on f = sum_i factor_i^2.

    Each step takes the least-norm solution of J dc = b - A(C^T C) and halves
    it (up to max_halvings times) until theta decreases; a step that never
    decreases theta ends the iteration with the best iterate so far.

    Args:
        f: Target polynomial
        init: Starting factors
        tol: Stop once theta < tol
        max_gn: Maximum accepted steps
        cs: Constraint system of f over init.basis (built when omitted)
    """
    tol = REFINE_CONFIG["tol"] if tol is None else tol
    max_gn = REFINE_CONFIG["max_gn"] if max_gn is None else max_gn
    max_halvings = REFINE_CONFIG["max_halvings"]
    cs = cs or build_constraints(f, init.basis)

    c = init.coefficients.copy()
    target = cs.b
    theta = float(np.linalg.norm(target - squares_image(cs, c)))
    if not np.isfinite(theta):
        raise ValueError("Initial residual is not finite")

    iterations = 0
    while theta >= tol and iterations < max_gn:
        jacobian = residual_jacobian(cs, c)
        res = target - squares_image(cs, c)
        delta = np.linalg.lstsq(jacobian, res, rcond=None)[0].reshape(c.shape)

        step = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            trial = c + step * delta
            trial_theta = float(np.linalg.norm(target - squares_image(cs, trial)))
            if trial_theta < theta:
                accepted = True
                break
            step /= 2.0

        if not accepted:
            logger.debug(f"Gauss-Newton stalled at theta={theta:.3e} after {iterations} steps")
            break

        c, theta = trial, trial_theta
        iterations += 1
        logger.debug(f"GN step {iterations}: theta={theta:.3e} (step {step:g})")

    converged = theta < tol
    return RefineResult(SosFactors(c, init.basis), theta, converged, iterations)


def refine_with_rank_search(
    f: Polynomial,
    w: np.ndarray,
    r: int,
    basis: MonomialBasis,
    tol: Optional[float] = None,
    max_gn: Optional[int] = None,
    retries: Optional[int] = None,
    cs: Optional[ConstraintSystem] = None,
) -> RefineResult:
    """
    Refine with r squares, then r+1, ... up to r+retries (capped at n).

    Returns the first converged result, otherwise the one with the
    smallest theta.
    """
    retries = REFINE_CONFIG["rank_retries"] if retries is None else retries
    cs = cs or build_constraints(f, basis)
    r = max(1, min(r, basis.n))

    best: Optional[RefineResult] = None
    for rank in range(r, min(r + retries, basis.n) + 1):
        init = _seed_factors(w, rank, basis)
        result = gauss_newton_refine(f, init, tol, max_gn, cs)
        logger.info(
            f"{'✅' if result.converged else '⚠️'} Refinement with {rank} squares: "
            f"theta={result.theta:.3e} in {result.gn_iterations} steps"
        )
        if result.converged:
            return result
        if best is None or result.theta < best.theta:
            best = result

    return best


def backward_error(
    f: Polynomial,
    factors_or_gram: Union[SosFactors, np.ndarray],
    basis: MonomialBasis,
    cs: Optional[ConstraintSystem] = None,
) -> float:
    """theta = ||coefficients of f - mon^T W mon||_2"""
    if isinstance(factors_or_gram, SosFactors):
        w = factors_or_gram.gram()
    else:
        w = np.asarray(factors_or_gram, dtype=float)
    cs = cs or build_constraints(f, basis)
    return float(np.linalg.norm(cs.b - apply_map(cs, w)))
