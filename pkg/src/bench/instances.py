#!/usr/bin/env python3
"""
Planted benchmark instances

A planted instance samples an integer n x r factor L, sets W = L L^T and
expands f = mon^T W mon over a basis of n monomials of degree <= 2, so a
feasible Gram matrix of rank <= r is known in advance.
"""

import logging
from dataclasses import dataclass
from math import comb
from typing import Optional

import numpy as np

from src.config.settings import BENCH_CONFIG
from src.core.errors import ExperimentSpecError
from src.core.gram_map import ConstraintSystem, MonomialBasis, build_constraints
from src.core.polynomial import Polynomial, expand_square_sum, monomials_up_to

logger = logging.getLogger(__name__)

BASIS_DEGREE = 2


@dataclass(eq=False)
class BenchInstance:
    n: int
    r: int
    factor_l: np.ndarray
    w_true: np.ndarray
    f: Polynomial
    basis: MonomialBasis
    cs: ConstraintSystem
    seed: int
    sparse: bool = False

    @property
    def p(self) -> int:
        return self.cs.p

    @property
    def fr(self) -> float:
        return freedom_ratio(self.n, self.r, self.p)


def freedom_ratio(n: int, r: int, p: int) -> float:
    """FR = d_r / p with d_r = r (2n - r + 1) / 2"""
    if not 1 <= r <= n:
        raise ValueError(f"Need 1 <= r <= n, got r={r}, n={n}")
    if p < 1:
        raise ValueError(f"Need at least one constraint, got p={p}")
    return r * (2 * n - r + 1) / 2 / p


def variables_for(size: int) -> int:
    """Smallest s with C(s + 2, 2) >= size"""
    s = 1
    while comb(s + BASIS_DEGREE, BASIS_DEGREE) < size:
        s += 1
    if s > BENCH_CONFIG["max_vars"]:
        raise ExperimentSpecError(
            f"A basis of {size} monomials needs {s} variables (limit {BENCH_CONFIG['max_vars']})"
        )
    return s


def _check_size(n: int, r: int, allow_large: bool):
    if n < 1 or not 1 <= r <= n:
        raise ExperimentSpecError(f"Need 1 <= r <= n, got n={n}, r={r}")
    if n > BENCH_CONFIG["hard_max_n"]:
        raise ExperimentSpecError(f"n={n} exceeds the hard limit {BENCH_CONFIG['hard_max_n']}")
    if n > BENCH_CONFIG["desk_max_n"]:
        if not allow_large:
            raise ExperimentSpecError(
                f"n={n} exceeds desk scale ({BENCH_CONFIG['desk_max_n']}); pass allow_large to run it"
            )
        logger.warning(f"⚠️ n={n} is above desk scale; expect long runtimes and large memory use")


def _select_basis(n: int, rng: np.random.Generator, sparse: bool) -> MonomialBasis:
    if not sparse:
        s = variables_for(n)
        return MonomialBasis(tuple(monomials_up_to(s, BASIS_DEGREE)[:n]), s, BASIS_DEGREE)

    pool_size = BENCH_CONFIG["sparse_basis_factor"] * n
    s = variables_for(pool_size)
    pool = monomials_up_to(s, BASIS_DEGREE)[:pool_size]
    chosen = sorted(rng.choice(len(pool), size=n, replace=False))
    return MonomialBasis.from_monomials([pool[i] for i in chosen], s)


def random_instance(
    n: int,
    r: int,
    seed: int,
    entry_bound: Optional[int] = None,
    sparse_basis: bool = False,
    allow_large: bool = False,
    factor_l: Optional[np.ndarray] = None,
) -> BenchInstance:
    """
    Build a planted instance.

    Args:
        n: Gram dimension (basis size)
        r: Planted rank
        seed: Seed for the basis subsample and the factor entries
        entry_bound: L entries are uniform integers in [-entry_bound, entry_bound]
        sparse_basis: Sample the n basis monomials from a larger candidate pool
        allow_large: Accept n above desk scale
        factor_l: Explicit integer factor (n x r) instead of a random one
    """
    entry_bound = BENCH_CONFIG["entry_bound"] if entry_bound is None else entry_bound
    _check_size(n, r, allow_large)
    rng = np.random.default_rng(seed)

    basis = _select_basis(n, rng, sparse_basis)
    if factor_l is None:
        factor_l = rng.integers(-entry_bound, entry_bound + 1, size=(n, r))
    else:
        factor_l = np.asarray(factor_l, dtype=np.int64).reshape(n, r)

    columns = [
        Polynomial(basis.nvars, {m: int(c) for m, c in zip(basis.monomials, factor_l[:, k])})
        for k in range(r)
    ]
    f = expand_square_sum(columns)
    cs = build_constraints(f, basis)
    w_true = factor_l @ factor_l.T

    logger.debug(f"Instance n={n}, r={r}, seed={seed}: {basis.nvars} variables, p={cs.p}")
    return BenchInstance(n, r, factor_l, w_true, f, basis, cs, seed, sparse_basis)
