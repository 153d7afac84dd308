#!/usr/bin/env python3
"""
Gram map: monomial basis and the linear constraint system A(W) = b

Coefficient matching of f = mon^T W mon gives one constraint per product
monomial m: the sum of W_ij over all ordered pairs (i, j) with
mon_i * mon_j = m must equal the coefficient of m in f. Each constraint
matrix A_m is stored as (row, col, coefficient) triplets with row <= col;
an off-diagonal triplet stands for both (row, col) and (col, row), so
<A_m, W> counts W_ij + W_ji and b stays equal to the raw coefficients.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from src.config.settings import GRAM_CONFIG
from src.core.errors import BasisError, ConstraintFormatError, DegreeError, DimensionError
from src.core.polynomial import (
    Monomial,
    Polynomial,
    format_monomial,
    monomial_key,
    monomial_product,
    monomials_of_degree,
    monomials_up_to,
    parse_polynomial,
)

logger = logging.getLogger(__name__)

Triplet = Tuple[int, int, Fraction]


@dataclass(frozen=True)
class MonomialBasis:
    """Ordered, duplicate-free monomial vector mon"""
    monomials: Tuple[Monomial, ...]
    nvars: int
    max_degree: int

    def __post_init__(self):
        if len(set(self.monomials)) != len(self.monomials):
            raise BasisError("Basis monomials must be distinct")
        for m in self.monomials:
            if len(m) != self.nvars:
                raise DimensionError(f"Basis monomial {m} does not have {self.nvars} exponents")

    @property
    def n(self) -> int:
        return len(self.monomials)

    def labels(self) -> List[str]:
        return [format_monomial(m) for m in self.monomials]

    @classmethod
    def from_monomials(cls, monomials: Sequence[Monomial], nvars: int) -> "MonomialBasis":
        ordered = tuple(sorted((tuple(m) for m in monomials), key=monomial_key))
        degree = max((sum(m) for m in ordered), default=0)
        return cls(ordered, nvars, degree)

    @classmethod
    def from_labels(cls, labels: Sequence[str], nvars: int) -> "MonomialBasis":
        """Basis from monomial text such as ["1", "x2", "x1*x2"], order kept"""
        monomials = []
        for label in labels:
            term = parse_polynomial(str(label), nvars)
            if len(term.terms) != 1 or next(iter(term.terms.values())) != 1:
                raise ConstraintFormatError(f"Basis entry '{label}' is not a monic monomial")
            monomials.append(next(iter(term.terms)))
        return cls(tuple(monomials), nvars, max((sum(m) for m in monomials), default=0))


@dataclass(frozen=True)
class ConstraintSystem:
    """A(W) = b as p sparse symmetric matrices plus the right-hand side"""
    n: int
    rows: Tuple[Tuple[Triplet, ...], ...]
    b_exact: Tuple[Fraction, ...]
    monomials: Optional[Tuple[Monomial, ...]] = None
    basis: Optional[MonomialBasis] = None
    pair_index: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise DimensionError(f"Gram dimension must be positive, got {self.n}")
        if len(self.rows) != len(self.b_exact):
            raise DimensionError(
                f"{len(self.rows)} constraint matrices but {len(self.b_exact)} right-hand sides"
            )
        if self.monomials is not None and len(self.monomials) != len(self.rows):
            raise DimensionError("One product monomial per constraint row is required")
        for k, row in enumerate(self.rows):
            for i, j, _ in row:
                if not (0 <= i <= j < self.n):
                    raise DimensionError(
                        f"Constraint {k} entry ({i}, {j}) outside upper triangle of {self.n}x{self.n}"
                    )

    @property
    def p(self) -> int:
        return len(self.rows)

    @cached_property
    def b(self) -> np.ndarray:
        return np.array([float(v) for v in self.b_exact], dtype=float)

    @cached_property
    def operator(self) -> sp.csr_matrix:
        """A as a p x n^2 sparse matrix acting on row-major vec(W)"""
        n = self.n
        row_idx: List[int] = []
        col_idx: List[int] = []
        values: List[float] = []
        for k, row in enumerate(self.rows):
            for i, j, c in row:
                row_idx.append(k)
                col_idx.append(i * n + j)
                values.append(float(c))
                if i != j:
                    row_idx.append(k)
                    col_idx.append(j * n + i)
                    values.append(float(c))
        return sp.csr_matrix((values, (row_idx, col_idx)), shape=(self.p, n * n))


def build_basis(
    f: Polynomial,
    mode: str = "full",
    custom: Optional[Sequence[Monomial]] = None,
) -> MonomialBasis:
    """
    Monomial basis for a Gram representation of f.

    Args:
        f: Polynomial of even degree 2d
        mode: "full" (all monomials of degree <= d), "homogeneous" (degree
            exactly d, f must be homogeneous) or "custom"
        custom: Caller-supplied monomials for mode "custom"
    """
    degree = f.degree
    if degree % 2:
        raise DegreeError(f"Polynomial has odd degree {degree}; no Gram representation exists")
    d = degree // 2

    if mode == "full":
        monomials = monomials_up_to(f.nvars, d)
    elif mode == "homogeneous":
        if not f.is_homogeneous():
            raise BasisError("Homogeneous basis requested for a non-homogeneous polynomial")
        monomials = monomials_of_degree(f.nvars, d)
    elif mode == "custom":
        if not custom:
            raise BasisError("Custom basis mode needs a non-empty monomial list")
        return MonomialBasis.from_monomials(custom, f.nvars)
    else:
        raise ValueError(f"Unknown basis mode: {mode}")

    return MonomialBasis(tuple(monomials), f.nvars, d)


def build_constraints(f: Polynomial, basis: MonomialBasis) -> ConstraintSystem:
    """
    Coefficient-matching constraints for f = mon^T W mon.

    Every product monomial gets a row, including those absent from f
    (b entry 0).

    Raises:
        BasisError: If f has a monomial that no basis product reaches
    """
    if f.nvars != basis.nvars:
        raise DimensionError(f"Polynomial has {f.nvars} variables, basis has {basis.nvars}")

    n = basis.n
    pairs: Dict[Monomial, List[Tuple[int, int]]] = {}
    for i, mi in enumerate(basis.monomials):
        for j in range(i, n):
            m = monomial_product(mi, basis.monomials[j])
            pairs.setdefault(m, []).append((i, j))

    for m in f.monomials():
        if m not in pairs:
            raise BasisError(
                f"Monomial {format_monomial(m)} of f is not a product of basis monomials", m
            )

    products = sorted(pairs, key=monomial_key)
    pair_index = np.empty((n, n), dtype=np.int64)
    rows = []
    for k, m in enumerate(products):
        for i, j in pairs[m]:
            pair_index[i, j] = k
            pair_index[j, i] = k
        rows.append(tuple((i, j, Fraction(1)) for i, j in pairs[m]))

    cs = ConstraintSystem(
        n=n,
        rows=tuple(rows),
        b_exact=tuple(f.coefficient(m) for m in products),
        monomials=tuple(products),
        basis=basis,
        pair_index=pair_index,
    )
    logger.debug(f"Built constraint system n={n}, p={cs.p}")
    return cs


def _check_square(cs: ConstraintSystem, w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (cs.n, cs.n):
        raise DimensionError(f"Expected {cs.n}x{cs.n} matrix, got shape {w.shape}")
    return w


def apply_map(cs: ConstraintSystem, w: np.ndarray) -> np.ndarray:
    """y_i = <A_i, W>"""
    w = _check_square(cs, w)
    return cs.operator @ w.reshape(-1)


def apply_adjoint(cs: ConstraintSystem, y: np.ndarray) -> np.ndarray:
    """A*y = sum_i y_i A_i"""
    y = np.asarray(y, dtype=float)
    if y.shape != (cs.p,):
        raise DimensionError(f"Expected vector of length {cs.p}, got shape {y.shape}")
    return (cs.operator.T @ y).reshape(cs.n, cs.n)


def residual(cs: ConstraintSystem, w: np.ndarray) -> np.ndarray:
    """A(W) - b"""
    return apply_map(cs, w) - cs.b


def gradient(cs: ConstraintSystem, w: np.ndarray) -> np.ndarray:
    """A*(A(W) - b), the gradient of 1/2 ||A(W) - b||^2"""
    return apply_adjoint(cs, residual(cs, w))


def op_norm_sq(
    cs: ConstraintSystem,
    tol: Optional[float] = None,
    max_steps: Optional[int] = None,
    safety: Optional[float] = None,
    seed: Optional[int] = None,
) -> float:
    """
    Estimate L = ||A||_2^2 = lambda_max(A* o A) by power iteration.

    Starts from a seeded random symmetric matrix; the final Rayleigh
    quotient is multiplied by a small safety factor so the estimate sits
    on the upper side.
    """
    tol = GRAM_CONFIG["power_iter_tol"] if tol is None else tol
    max_steps = GRAM_CONFIG["power_iter_max"] if max_steps is None else max_steps
    safety = GRAM_CONFIG["power_iter_safety"] if safety is None else safety
    seed = GRAM_CONFIG["power_iter_seed"] if seed is None else seed

    if cs.p == 0 or cs.operator.nnz == 0:
        return 0.0

    rng = np.random.default_rng(seed)
    w = rng.standard_normal((cs.n, cs.n))
    w = (w + w.T) / 2
    w /= np.linalg.norm(w)

    estimate = 0.0
    for step in range(max_steps):
        image = apply_adjoint(cs, apply_map(cs, w))
        rayleigh = float(np.vdot(w, image))
        norm = np.linalg.norm(image)
        if norm == 0.0:
            break
        w = image / norm
        converged = step > 0 and abs(rayleigh - estimate) <= tol * abs(rayleigh)
        estimate = rayleigh
        if converged:
            break

    return safety * estimate


def gram_coefficients(cs: ConstraintSystem, w: np.ndarray) -> Dict[Monomial, float]:
    """A(W) keyed by product monomial"""
    if cs.monomials is None:
        raise BasisError("Constraint system carries no product monomials")
    values = apply_map(cs, w)
    return {m: float(v) for m, v in zip(cs.monomials, values)}
