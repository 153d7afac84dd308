#!/usr/bin/env python3
"""
Symmetric eigendecompositions and eigenvalue thresholding

Eigenpairs are always reported in non-increasing algebraic order with each
eigenvector's first significant component made positive. The partial solver
uses Lanczos with full reorthogonalization and falls back to a dense subset
solve for small matrices or large requested counts.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import scipy.linalg

from src.config.settings import SPECTRAL_CONFIG
from src.core.errors import SpectralError

logger = logging.getLogger(__name__)

SymMatrix = np.ndarray


def as_sym_matrix(w) -> SymMatrix:
    """Validate a square finite matrix and symmetrize it from its lower triangle"""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise SpectralError(f"Expected a square matrix, got shape {w.shape}")
    if not np.all(np.isfinite(w)):
        raise SpectralError("Matrix contains non-finite entries")
    return np.tril(w) + np.tril(w, -1).T


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """W (restricted to the captured spectrum) = q diag(lam) q^T"""
    q: np.ndarray
    lam: np.ndarray
    complete: bool

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def k(self) -> int:
        return self.lam.shape[0]

    def reconstruct(self) -> SymMatrix:
        w = (self.q * self.lam) @ self.q.T
        return (w + w.T) / 2

    def rank(self, rel_tol: float = 1e-6) -> int:
        if self.k == 0 or self.lam[0] <= 0:
            return 0
        return int(np.count_nonzero(self.lam > rel_tol * self.lam[0]))


def _canonical_order(lam: np.ndarray, q: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    q = q[:, order].copy()

    tol = SPECTRAL_CONFIG["sign_tol"]
    for c in range(q.shape[1]):
        significant = np.flatnonzero(np.abs(q[:, c]) > tol)
        if significant.size and q[significant[0], c] < 0:
            q[:, c] = -q[:, c]
    return lam, q


def schur_sym(w) -> EigenDecomposition:
    """Complete decomposition W = Q Lambda Q^T"""
    w = as_sym_matrix(w)
    lam, q = scipy.linalg.eigh(w)
    lam, q = _canonical_order(lam, q)
    return EigenDecomposition(q, lam, True)


def _lanczos_basis(w: SymMatrix, m: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """
    m orthonormal Krylov vectors Q and the products W Q.

    Full reorthogonalization (applied twice) keeps Q orthonormal; on
    breakdown the recurrence restarts from a fresh random direction
    orthogonal to what we already have.
    """
    n = w.shape[0]
    basis = np.zeros((n, m))
    images = np.zeros((n, m))

    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    for i in range(m):
        basis[:, i] = q
        u = w @ q
        images[:, i] = u
        if i == m - 1:
            break

        current = basis[:, : i + 1]
        r = u - current @ (current.T @ u)
        r -= current @ (current.T @ r)
        beta = np.linalg.norm(r)

        if beta <= 1e-12 * max(1.0, abs(float(q @ u))):
            # Invariant subspace found
            r = rng.standard_normal(n)
            r -= current @ (current.T @ r)
            r -= current @ (current.T @ r)
            beta = np.linalg.norm(r)
        q = r / beta

    return basis, images


def _lanczos_top(w: SymMatrix, s_k: int, seed: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    n = w.shape[0]
    tol = SPECTRAL_CONFIG["lanczos_tol"]
    rng = np.random.default_rng(SPECTRAL_CONFIG["lanczos_seed"] if seed is None else seed)
    m = min(n, max(2 * s_k + 10, 20))

    while True:
        basis, images = _lanczos_basis(w, m, rng)
        projected = basis.T @ images
        theta, s = np.linalg.eigh((projected + projected.T) / 2)
        theta, s = theta[::-1][:s_k], s[:, ::-1][:, :s_k]

        ritz = basis @ s
        residuals = np.linalg.norm(images @ s - ritz * theta, axis=0)
        scale = max(1.0, abs(theta[0]))
        if m >= n or np.all(residuals <= tol * scale):
            logger.debug(f"Lanczos converged with {m} vectors for s_k={s_k}")
            return theta, ritz
        m = min(n, 2 * m)


def partial_schur(w, s_k: int, method: str = "auto", seed: Optional[int] = None) -> EigenDecomposition:
    """
    Top-s_k algebraically largest eigenpairs.

    Args:
        w: Symmetric matrix
        s_k: Number of eigenpairs, 1 <= s_k <= n
        method: "auto", "dense" or "lanczos"
        seed: Lanczos start-vector seed (settings default when None)
    """
    w = as_sym_matrix(w)
    n = w.shape[0]
    if not 1 <= s_k <= n:
        raise SpectralError(f"s_k={s_k} outside [1, {n}]")
    if s_k == n:
        return schur_sym(w)

    if method == "auto":
        dense = n <= SPECTRAL_CONFIG["dense_max_n"] or s_k > SPECTRAL_CONFIG["dense_fraction"] * n
        method = "dense" if dense else "lanczos"

    if method == "dense":
        lam, q = scipy.linalg.eigh(w, subset_by_index=[n - s_k, n - 1])
    elif method == "lanczos":
        lam, q = _lanczos_top(w, s_k, seed)
    else:
        raise ValueError(f"Unknown eigen method: {method}")

    lam, q = _canonical_order(lam, q)
    return EigenDecomposition(q, lam, False)


def shrink(decomp: EigenDecomposition, nu: float) -> EigenDecomposition:
    """Apply D_nu to the eigenvalues, keeping only the positive part"""
    if nu < 0:
        raise SpectralError(f"Threshold must be non-negative, got {nu}")
    shifted = decomp.lam - nu
    keep = shifted > 0
    return EigenDecomposition(decomp.q[:, keep], shifted[keep], decomp.complete)


def threshold(w: Union[SymMatrix, EigenDecomposition], nu: float) -> SymMatrix:
    """D_nu(W) = Q diag((lambda_i - nu)_+) Q^T"""
    if nu < 0:
        raise SpectralError(f"Threshold must be non-negative, got {nu}")
    decomp = w if isinstance(w, EigenDecomposition) else schur_sym(w)
    return shrink(decomp, nu).reconstruct()


def threshold_partial(
    w,
    s_k: int,
    nu: float,
    method: str = "auto",
    seed: Optional[int] = None,
) -> Tuple[EigenDecomposition, EigenDecomposition]:
    """
    D_nu restricted to the top s_k eigenpairs.

    Exactly s_k eigenpairs are computed; eigenvalues beyond them are
    dropped even when they exceed nu, so the result has rank <= s_k.
    Equals the full D_nu whenever the s_k-th eigenvalue is <= nu.

    Returns:
        Tuple of (thresholded decomposition, computed eigenpairs of w)
    """
    w = as_sym_matrix(w)
    count = max(1, min(s_k, w.shape[0]))
    computed = partial_schur(w, count, method, seed)
    return shrink(computed, nu), computed


def nuclear_norm(w) -> float:
    """Sum of absolute eigenvalues"""
    w = as_sym_matrix(w)
    return float(np.sum(np.abs(scipy.linalg.eigvalsh(w))))
