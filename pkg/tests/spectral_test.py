#!/usr/bin/env python3
"""
Tests for eigendecompositions and the thresholding operator
"""

import numpy as np
import pytest

from src.core.errors import SpectralError
from src.core.spectral import (
    as_sym_matrix,
    nuclear_norm,
    partial_schur,
    schur_sym,
    shrink,
    threshold,
    threshold_partial,
)


def _random_symmetric(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) * scale
    return (m + m.T) / 2


def _random_low_rank(rng, n, r, noise=0.0):
    factor = rng.standard_normal((n, r))
    w = factor @ factor.T
    if noise:
        w = w + noise * _random_symmetric(rng, n)
    return w


def test_schur_of_zero():
    decomp = schur_sym(np.zeros((3, 3)))
    assert np.allclose(decomp.lam, 0.0)
    assert decomp.complete


def test_schur_of_diagonal():
    decomp = schur_sym(np.diag([5.0, 1.0, -3.0]))
    assert decomp.lam == pytest.approx([5.0, 1.0, -3.0])
    assert np.allclose(np.abs(decomp.q), np.eye(3))
    assert np.allclose(decomp.q, np.eye(3))


def test_schur_two_by_two_closed_form():
    decomp = schur_sym(np.array([[3.0, 1.0], [1.0, 3.0]]))
    assert decomp.lam == pytest.approx([4.0, 2.0])
    s = 1 / np.sqrt(2)
    assert np.allclose(decomp.q[:, 0], [s, s])
    assert np.allclose(decomp.q[:, 1], [s, -s])


def test_schur_reconstructs_and_is_ordered():
    rng = np.random.default_rng(0)
    for n in (1, 4, 9):
        w = _random_symmetric(rng, n)
        decomp = schur_sym(w)
        assert np.all(np.diff(decomp.lam) <= 0)
        assert np.allclose(decomp.q.T @ decomp.q, np.eye(n), atol=1e-12)
        assert np.allclose(decomp.reconstruct(), w, atol=1e-12)


def test_sign_convention_first_component_positive():
    rng = np.random.default_rng(4)
    decomp = schur_sym(_random_symmetric(rng, 6))
    for c in range(decomp.k):
        column = decomp.q[:, c]
        first = column[np.flatnonzero(np.abs(column) > 1e-14)[0]]
        assert first > 0


def test_lower_triangle_defines_the_matrix():
    w = as_sym_matrix([[1.0, 99.0], [2.0, 3.0]])
    assert np.array_equal(w, [[1.0, 2.0], [2.0, 3.0]])


def test_invalid_matrices():
    with pytest.raises(SpectralError):
        schur_sym(np.zeros((2, 3)))
    with pytest.raises(SpectralError):
        schur_sym(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_partial_schur_examples():
    w = np.diag([5.0, 1.0, -3.0])
    top = partial_schur(w, 1)
    assert top.lam == pytest.approx([5.0])
    assert not top.complete

    full = partial_schur(w, 3)
    assert full.lam == pytest.approx(schur_sym(w).lam)

    with pytest.raises(SpectralError):
        partial_schur(w, 0)
    with pytest.raises(SpectralError):
        partial_schur(w, 4)
    with pytest.raises(ValueError):
        partial_schur(np.diag([3.0, 2.0, 1.0, 0.0]), 1, method="power")


@pytest.mark.parametrize("method", ["dense", "lanczos"])
def test_partial_schur_captures_dominant_eigenvalues(method):
    rng = np.random.default_rng(8)
    w = _random_low_rank(rng, 50, 5, noise=1e-6)
    oracle = schur_sym(w).lam[:5]
    decomp = partial_schur(w, 5, method=method)
    assert decomp.lam == pytest.approx(oracle, abs=1e-8)
    assert np.allclose(decomp.q.T @ decomp.q, np.eye(5), atol=1e-8)


def test_threshold_examples():
    assert np.allclose(threshold(np.zeros((3, 3)), 1.7), 0.0)
    assert np.allclose(threshold(np.diag([5.0, 1.0, -3.0]), 2.0), np.diag([3.0, 0.0, 0.0]))
    assert np.allclose(threshold(np.array([[3.0, 1.0], [1.0, 3.0]]), 2.5), [[0.75, 0.75], [0.75, 0.75]])
    with pytest.raises(SpectralError):
        threshold(np.eye(2), -1.0)


def test_threshold_accepts_a_decomposition():
    w = np.diag([5.0, 1.0, -3.0])
    assert np.allclose(threshold(schur_sym(w), 2.0), threshold(w, 2.0))


def test_threshold_output_is_psd_with_expected_rank():
    rng = np.random.default_rng(12)
    for _ in range(50):
        w = _random_symmetric(rng, 8)
        nu = float(rng.uniform(0.0, 1.0))
        result = threshold(w, nu)
        eigenvalues = np.linalg.eigvalsh(result)
        assert eigenvalues.min() >= -1e-10
        expected_rank = int(np.sum(np.linalg.eigvalsh(w) > nu))
        assert int(np.sum(eigenvalues > 1e-9)) == expected_rank


def test_shrink_drops_non_positive_part():
    decomp = shrink(schur_sym(np.diag([5.0, 1.0, -3.0])), 2.0)
    assert decomp.k == 1
    assert decomp.lam == pytest.approx([3.0])


def test_threshold_is_non_expansive():
    rng = np.random.default_rng(31)
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        x1 = _random_symmetric(rng, n, scale=float(rng.uniform(0.1, 5.0)))
        x2 = _random_symmetric(rng, n, scale=float(rng.uniform(0.1, 5.0)))
        spread = max(np.linalg.norm(x1, 2), np.linalg.norm(x2, 2))
        nu = float(rng.uniform(0.0, 2.0 * spread))
        lhs = np.linalg.norm(threshold(x1, nu) - threshold(x2, nu))
        assert lhs <= np.linalg.norm(x1 - x2) + 1e-10


def test_threshold_equality_case():
    rng = np.random.default_rng(32)
    for _ in range(100):
        n = 5
        x1 = _random_low_rank(rng, n, n) + 3.0 * np.eye(n)
        x2 = x1 + float(rng.uniform(0.1, 2.0)) * np.eye(n)
        nu = 1.0
        moved = threshold(x1, nu) - threshold(x2, nu)
        assert np.allclose(moved, x1 - x2, atol=1e-10)
        assert np.linalg.norm(moved) == pytest.approx(np.linalg.norm(x1 - x2), abs=1e-10)


def test_partial_threshold_matches_full_threshold():
    rng = np.random.default_rng(44)
    for trial in range(100):
        w = _random_low_rank(rng, 50, 5) - 0.5 * np.eye(50)
        nu = float(rng.uniform(0.0, 1.0))
        expected = threshold(w, nu)
        decomp, computed = threshold_partial(w, 6, nu)
        assert computed.k == 6
        assert computed.lam[-1] <= nu
        assert np.linalg.norm(decomp.reconstruct() - expected) <= 1e-8


def test_partial_threshold_keeps_exactly_s_k_eigenpairs():
    w = np.diag([9.0, 8.0, 7.0, 6.0, 0.0, 0.0, 0.0, 0.0])
    decomp, computed = threshold_partial(w, 2, 0.5)
    assert computed.lam == pytest.approx([9.0, 8.0])
    assert decomp.k == 2
    assert np.allclose(decomp.reconstruct(), np.diag([8.5, 7.5, 0, 0, 0, 0, 0, 0]))

    decomp, computed = threshold_partial(w, 5, 0.5)
    assert computed.k == 5
    assert np.allclose(decomp.reconstruct(), threshold(w, 0.5))


def test_threshold_minimizes_nuclear_prox_over_psd():
    rng = np.random.default_rng(45)
    for _ in range(100):
        y = _random_symmetric(rng, 6)
        nu = float(rng.uniform(0.0, 1.5))
        x = threshold(y, nu)

        def objective(z):
            return nu * nuclear_norm(z) + 0.5 * np.linalg.norm(z - y) ** 2

        best = objective(x)
        for _ in range(20):
            candidate = _random_symmetric(rng, 6, scale=0.1)
            candidate = threshold(x + candidate, 0.0)
            assert objective(candidate) >= best - 1e-10
        assert objective(x + 1e-3 * np.eye(6)) >= best
        assert objective(np.zeros((6, 6))) >= best - 1e-12


def test_nuclear_norm_examples():
    assert nuclear_norm(np.zeros((3, 3))) == 0.0
    assert nuclear_norm(np.diag([5.0, 1.0, -3.0])) == pytest.approx(9.0)


def test_nuclear_norm_of_psd_is_trace():
    rng = np.random.default_rng(50)
    for _ in range(100):
        w = _random_low_rank(rng, 6, int(rng.integers(1, 7)))
        assert nuclear_norm(w) == pytest.approx(np.trace(w), rel=1e-10, abs=1e-10)
