#!/usr/bin/env python3
"""
Exact rational SOS certificates

Turns a numerical Gram matrix into a certificate f = sum_i d_i q_i^2 with
rational d_i > 0:

    rationalize -> project onto {W : A(W) = b} exactly -> pivoted LDL^T

Every check runs in Fraction arithmetic; a certificate is only marked
exact when the Gram identity, the PSD check and the re-expanded squares
all hold with zero residual.
"""

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import EXACT_CONFIG
from src.core.errors import ConstraintFormatError, DimensionError, InfeasibleSystemError
from src.core.gram_map import ConstraintSystem, MonomialBasis, build_constraints
from src.core.polynomial import (
    Monomial,
    Polynomial,
    expand_square_sum,
    monomial_product,
    parse_polynomial,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RationalSymMatrix:
    """Exactly symmetric matrix of Fractions"""
    entries: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self):
        n = len(self.entries)
        for i, row in enumerate(self.entries):
            if len(row) != n:
                raise DimensionError(f"Row {i} has {len(row)} entries, expected {n}")
        for i in range(n):
            for j in range(i):
                if self.entries[i][j] != self.entries[j][i]:
                    raise DimensionError(f"Matrix is not symmetric at ({i}, {j})")

    @property
    def n(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: Tuple[int, int]) -> Fraction:
        i, j = index
        return self.entries[i][j]

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence]) -> "RationalSymMatrix":
        return cls(tuple(tuple(Fraction(v) for v in row) for row in rows))

    @classmethod
    def from_array(cls, a: np.ndarray) -> "RationalSymMatrix":
        return cls.from_rows(a.tolist())

    def as_array(self) -> np.ndarray:
        """Object-dtype copy for elimination"""
        a = np.empty((self.n, self.n), dtype=object)
        for i, row in enumerate(self.entries):
            for j, v in enumerate(row):
                a[i, j] = v
        return a

    def to_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.entries], dtype=float)

    def to_strings(self) -> List[List[str]]:
        return [[str(v) for v in row] for row in self.entries]


@dataclass(frozen=True, eq=False)
class LdlResult:
    """
    Pivoted P W P^T = L D L^T, or a witness v with v^T W v < 0.

    `perm[k]` is the original index placed at position k; `l` is unit lower
    triangular in permuted order.
    """
    psd: bool
    perm: Tuple[int, ...]
    l: np.ndarray
    d: Tuple[Fraction, ...]
    witness: Optional[Tuple[Fraction, ...]] = None
    witness_value: Optional[Fraction] = None
    margin: Optional[Fraction] = None

    @property
    def rank(self) -> int:
        return sum(1 for v in self.d if v != 0)


@dataclass(frozen=True, eq=False)
class SosCertificate:
    gram: RationalSymMatrix
    basis: MonomialBasis
    weights: Tuple[Fraction, ...]
    squares: Tuple[Polynomial, ...]
    exact: bool
    residual: Optional[Polynomial] = None
    witness: Optional[Tuple[Fraction, ...]] = None
    witness_value: Optional[Fraction] = None
    margin: Optional[Fraction] = None
    denom_bound: Optional[int] = None

    @property
    def num_squares(self) -> int:
        return len(self.squares)

    def to_dict(self) -> Dict:
        return {
            "exact": self.exact,
            "weights": [str(w) for w in self.weights],
            "squares": [q.to_string() for q in self.squares],
            "gram": self.gram.to_strings(),
            "basis": self.basis.labels(),
            "nvars": self.basis.nvars,
        }


def rationalize(w, denom_bound: int) -> RationalSymMatrix:
    """
    Entrywise closest fraction with denominator <= denom_bound.

    Only the lower triangle is read, so the result is exactly symmetric;
    denom_bound = 1 rounds to the nearest integers.
    """
    if denom_bound < 1:
        raise ValueError(f"denom_bound must be >= 1, got {denom_bound}")
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionError(f"Expected a square matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("Cannot rationalize non-finite entries")

    n = w.shape[0]
    rows = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(i + 1):
            value = Fraction(float(w[i, j])).limit_denominator(denom_bound)
            rows[i][j] = value
            rows[j][i] = value
    return RationalSymMatrix.from_rows(rows)


def apply_map_exact(cs: ConstraintSystem, w: RationalSymMatrix) -> List[Fraction]:
    """<A_k, W> in exact arithmetic"""
    values = []
    for row in cs.rows:
        total = Fraction(0)
        for i, j, c in row:
            total += c * w[i, j] if i == j else 2 * c * w[i, j]
        values.append(total)
    return values


def _solve_consistent(matrix: List[List[Fraction]], rhs: List[Fraction]) -> List[Fraction]:
    """
    One solution of matrix @ y = rhs by exact Gauss-Jordan elimination.

    Free variables are set to zero.

    Raises:
        InfeasibleSystemError: If rhs is outside the column space
    """
    size = len(rhs)
    a = [list(row) + [rhs[k]] for k, row in enumerate(matrix)]
    pivots: List[int] = []
    row = 0
    for col in range(size):
        pivot = next((k for k in range(row, size) if a[k][col] != 0), None)
        if pivot is None:
            continue
        a[row], a[pivot] = a[pivot], a[row]
        scale = a[row][col]
        a[row] = [v / scale for v in a[row]]
        for k in range(size):
            if k != row and a[k][col] != 0:
                factor = a[k][col]
                a[k] = [vk - factor * vr for vk, vr in zip(a[k], a[row])]
        pivots.append(col)
        row += 1
        if row == size:
            break

    for k in range(row, size):
        if a[k][size] != 0:
            raise InfeasibleSystemError(
                "Constraint system is inconsistent: b is not in the range of A"
            )

    y = [Fraction(0)] * size
    for k, col in enumerate(pivots):
        y[col] = a[k][size]
    return y


def project_affine_exact(w: RationalSymMatrix, cs: ConstraintSystem) -> RationalSymMatrix:
    """
    Frobenius projection W* = w - A*(M^{-1}(A(w) - b)), M_kl = <A_k, A_l>.

    Polynomial constraint systems touch every (i, j) in exactly one row, so
    M is diagonal; other systems fall back to exact elimination.

    Raises:
        InfeasibleSystemError: If A(W) = b has no solution
    """
    if w.n != cs.n:
        raise DimensionError(f"Matrix is {w.n}x{w.n}, constraint system expects {cs.n}")

    rhs = [a - b for a, b in zip(apply_map_exact(cs, w), cs.b_exact)]
    if not any(rhs):
        return w

    occupancy: Dict[Tuple[int, int], List[Tuple[int, Fraction]]] = {}
    for k, row in enumerate(cs.rows):
        for i, j, c in row:
            occupancy.setdefault((i, j), []).append((k, c))

    def _weight(i: int, j: int) -> int:
        return 1 if i == j else 2

    if all(len(entries) == 1 for entries in occupancy.values()):
        y = []
        for k, row in enumerate(cs.rows):
            diagonal = sum((c * c * _weight(i, j) for i, j, c in row), Fraction(0))
            if diagonal == 0:
                if rhs[k] != 0:
                    raise InfeasibleSystemError(f"Constraint {k} is empty but requires {cs.b_exact[k]}")
                y.append(Fraction(0))
            else:
                y.append(rhs[k] / diagonal)
    else:
        p = cs.p
        gram = [[Fraction(0)] * p for _ in range(p)]
        for (i, j), entries in occupancy.items():
            for k, ck in entries:
                for l, cl in entries:
                    gram[k][l] += ck * cl * _weight(i, j)
        y = _solve_consistent(gram, rhs)

    a = w.as_array()
    for k, row in enumerate(cs.rows):
        if y[k] == 0:
            continue
        for i, j, c in row:
            a[i, j] -= y[k] * c
            if i != j:
                a[j, i] -= y[k] * c
    return RationalSymMatrix.from_array(a)


def _lift_witness(l: np.ndarray, k: int, tail: List[Fraction]) -> List[Fraction]:
    # Solve L11^T u1 = -L21^T e so that x = (u1, e) gives x^T A x = e^T S e
    n = l.shape[0]
    u = [Fraction(0)] * k + list(tail)
    for i in range(k - 1, -1, -1):
        total = Fraction(0)
        for j in range(i + 1, n):
            if u[j] != 0 and l[j, i] != 0:
                total += l[j, i] * u[j]
        u[i] = -total
    return u


def exact_psd_check(w: RationalSymMatrix) -> LdlResult:
    """
    Symmetric LDL^T with complete diagonal pivoting over the rationals.

    The largest remaining diagonal entry is taken as pivot (ties by lowest
    index). A negative remaining diagonal entry, or a nonzero off-diagonal
    entry beside an all-zero diagonal, yields a witness vector instead.
    """
    n = w.n
    a = w.as_array()
    perm = list(range(n))
    l = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            l[i, j] = Fraction(1) if i == j else Fraction(0)
    d: List[Fraction] = []

    def _failure(k: int, tail: List[Fraction], margin: Fraction) -> LdlResult:
        u = _lift_witness(l, k, tail)
        v = [Fraction(0)] * n
        for position, original in enumerate(perm):
            v[original] = u[position]
        value = sum(
            (v[i] * w[i, j] * v[j] for i in range(n) for j in range(n) if v[i] and v[j]),
            Fraction(0),
        )
        return LdlResult(False, tuple(perm), l, tuple(d), tuple(v), value, margin)

    for k in range(n):
        size = n - k
        diag = [a[k + i, k + i] for i in range(size)]
        lowest = min(range(size), key=lambda i: (diag[i], i))
        if diag[lowest] < 0:
            tail = [Fraction(0)] * size
            tail[lowest] = Fraction(1)
            return _failure(k, tail, diag[lowest])

        top = max(range(size), key=lambda i: (diag[i], -i))
        if diag[top] == 0:
            offending = next(
                ((i, j) for i in range(size) for j in range(i + 1, size) if a[k + i, k + j] != 0),
                None,
            )
            if offending is None:
                d.extend([Fraction(0)] * size)
                break
            i, j = offending
            entry = a[k + i, k + j]
            tail = [Fraction(0)] * size
            tail[i] = Fraction(1)
            tail[j] = Fraction(-1) if entry > 0 else Fraction(1)
            return _failure(k, tail, -2 * abs(entry))

        p = k + top
        if p != k:
            a[[k, p], :] = a[[p, k], :]
            a[:, [k, p]] = a[:, [p, k]]
            perm[k], perm[p] = perm[p], perm[k]
            l[[k, p], :k] = l[[p, k], :k]

        pivot = a[k, k]
        d.append(pivot)
        column = a[k + 1:, k]
        if size > 1:
            l[k + 1:, k] = column / pivot
            a[k + 1:, k + 1:] = a[k + 1:, k + 1:] - np.outer(column, column) / pivot

    return LdlResult(True, tuple(perm), l, tuple(d))


def gram_polynomial(basis: MonomialBasis, w: RationalSymMatrix) -> Polynomial:
    """mon^T W mon, expanded exactly"""
    if w.n != basis.n:
        raise DimensionError(f"Gram matrix is {w.n}x{w.n}, basis has {basis.n} monomials")
    terms: Dict[Monomial, Fraction] = {}
    mons = basis.monomials
    for i in range(basis.n):
        for j in range(i, basis.n):
            value = w[i, j]
            if value == 0:
                continue
            m = monomial_product(mons[i], mons[j])
            terms[m] = terms.get(m, Fraction(0)) + (value if i == j else 2 * value)
    return Polynomial(basis.nvars, terms)


def _squares_from_ldl(ldl: LdlResult, basis: MonomialBasis) -> Tuple[Tuple[Fraction, ...], Tuple[Polynomial, ...]]:
    weights = []
    squares = []
    n = basis.n
    for k, dk in enumerate(ldl.d):
        if dk == 0:
            continue
        terms = {}
        for i in range(k, n):
            c = ldl.l[i, k]
            if c != 0:
                terms[basis.monomials[ldl.perm[i]]] = c
        weights.append(dk)
        squares.append(Polynomial(basis.nvars, terms))
    return tuple(weights), tuple(squares)


def _weighted_sum(squares: Sequence[Polynomial], weights: Sequence[Fraction], nvars: int) -> Polynomial:
    if not squares:
        return Polynomial.zero(nvars)
    return expand_square_sum(squares, weights)


def certify(f: Polynomial, w: RationalSymMatrix, basis: MonomialBasis) -> SosCertificate:
    """
    Exact check that w is a PSD Gram matrix of f.

    The Gram identity is checked first (a mismatch returns the residual
    polynomial f - mon^T w mon), then exact_psd_check (a failure returns the
    witness), then the weighted squares are re-expanded against f.
    """
    if f.nvars != basis.nvars:
        raise DimensionError(f"Polynomial has {f.nvars} variables, basis has {basis.nvars}")
    if w.n != basis.n:
        raise DimensionError(f"Gram matrix is {w.n}x{w.n}, basis has {basis.n} monomials")

    residual = f - gram_polynomial(basis, w)
    if not residual.is_zero():
        logger.debug(f"Gram identity fails, residual {residual}")
        return SosCertificate(w, basis, (), (), False, residual=residual)

    ldl = exact_psd_check(w)
    if not ldl.psd:
        logger.debug(f"Gram matrix is not PSD, margin {ldl.margin}")
        return SosCertificate(
            w, basis, (), (), False,
            witness=ldl.witness, witness_value=ldl.witness_value, margin=ldl.margin,
        )

    weights, squares = _squares_from_ldl(ldl, basis)
    expanded_residual = f - _weighted_sum(squares, weights, basis.nvars)
    exact = expanded_residual.is_zero()
    return SosCertificate(
        w, basis, weights, squares, exact,
        residual=None if exact else expanded_residual,
    )


def denominator_ladder(denom_bound: Optional[int] = None) -> List[int]:
    """Integer rounding (bound 1) first, then denom_bound * escalation^k"""
    bound = EXACT_CONFIG["denom_bound"] if denom_bound is None else denom_bound
    rungs = [1] if EXACT_CONFIG["integer_rounding"] else []
    while bound <= EXACT_CONFIG["max_denom_bound"]:
        if bound not in rungs:
            rungs.append(bound)
        bound *= EXACT_CONFIG["escalation"]
    return rungs


def exact_certificate(
    f: Polynomial,
    w: np.ndarray,
    basis: MonomialBasis,
    cs: Optional[ConstraintSystem] = None,
    denom_bound: Optional[int] = None,
) -> SosCertificate:
    """
    Walk the denominator ladder: rationalize, project, certify.

    Returns the first exact certificate, otherwise the failed certificate of
    the finest rung (its margin is the most negative pivot).
    """
    cs = cs or build_constraints(f, basis)
    last: Optional[SosCertificate] = None
    for rung in denominator_ladder(denom_bound):
        projected = project_affine_exact(rationalize(w, rung), cs)
        certificate = replace(certify(f, projected, basis), denom_bound=rung)
        if certificate.exact:
            logger.info(
                f"✅ Exact certificate with {certificate.num_squares} squares (denominator bound {rung})"
            )
            return certificate
        logger.debug(f"Denominator bound {rung} failed (margin {certificate.margin})")
        last = certificate

    logger.warning(
        f"⚠️ No exact certificate on any rung; most negative pivot {last.margin}. "
        f"Re-refining to a smaller backward error may help"
    )
    return last


def verify_certificate(f: Polynomial, payload: Mapping) -> SosCertificate:
    """
    Re-check a certificate dictionary (the to_dict layout) against f.

    When "gram" and "basis" are present the Gram identity and the exact
    PSD check run first; then every weight must be positive and
    sum_i d_i q_i^2 must equal f.
    """
    nvars = payload.get("nvars", f.nvars)
    if isinstance(nvars, int) and nvars > f.nvars:
        f = f.with_nvars(nvars)
    try:
        weights = tuple(Fraction(str(v)) for v in payload["weights"])
        squares = tuple(parse_polynomial(str(s), f.nvars) for s in payload["squares"])
    except KeyError as e:
        raise ConstraintFormatError(f"Certificate is missing field {e}")
    except (ValueError, ZeroDivisionError) as e:
        raise ConstraintFormatError(f"Malformed certificate entry: {e}")
    if len(weights) != len(squares):
        raise ConstraintFormatError(f"{len(weights)} weights for {len(squares)} squares")

    if "gram" in payload and "basis" in payload:
        basis = MonomialBasis.from_labels(payload["basis"], f.nvars)
        try:
            gram = RationalSymMatrix.from_rows([[Fraction(str(v)) for v in row] for row in payload["gram"]])
        except (ValueError, ZeroDivisionError) as e:
            raise ConstraintFormatError(f"Malformed Gram entry: {e}")
        gram_check = certify(f, gram, basis)
        if not gram_check.exact:
            return gram_check
    else:
        basis = MonomialBasis((), f.nvars, 0)
        gram = RationalSymMatrix(())

    if any(v <= 0 for v in weights):
        logger.debug("Certificate has a non-positive weight")
        return SosCertificate(gram, basis, weights, squares, False, margin=min(weights))

    residual = f - _weighted_sum(squares, weights, f.nvars)
    exact = residual.is_zero()
    return SosCertificate(gram, basis, weights, squares, exact, residual=None if exact else residual)
