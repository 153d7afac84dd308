#!/usr/bin/env python3
"""
Tests for the monomial basis and the constraint operator A
"""

from fractions import Fraction

import numpy as np
import pytest

from src.core.errors import BasisError, DegreeError, DimensionError
from src.core.gram_map import (
    ConstraintSystem,
    MonomialBasis,
    apply_adjoint,
    apply_map,
    build_basis,
    build_constraints,
    gram_coefficients,
    gradient,
    op_norm_sq,
    residual,
)
from src.core.polynomial import Polynomial, parse_polynomial


@pytest.fixture
def square_system():
    f = parse_polynomial("x1^2 + 2*x1 + 1")
    return build_constraints(f, build_basis(f))


def _random_symmetric(rng, n):
    m = rng.standard_normal((n, n))
    return (m + m.T) / 2


def test_basis_sizes():
    f = parse_polynomial("x1^2 + 2*x1 + 1")
    basis = build_basis(f)
    assert basis.n == 2
    assert basis.labels() == ["1", "x1"]

    g = parse_polynomial("x1^4 + x2^4")
    basis = build_basis(g)
    assert basis.n == 6
    assert basis.labels() == ["1", "x2", "x1", "x2^2", "x1*x2", "x1^2"]

    h = parse_polynomial("x1^4 + x2^4 + x3^4")
    assert build_basis(h).n == 10


def test_homogeneous_basis():
    f = parse_polynomial("x1^2 + 2*x1*x2 + x2^2")
    basis = build_basis(f, mode="homogeneous")
    assert basis.labels() == ["x2", "x1"]
    with pytest.raises(BasisError):
        build_basis(parse_polynomial("x1^2 + 1"), mode="homogeneous")


def test_custom_basis_is_sorted():
    f = parse_polynomial("x1^2 + 1")
    basis = build_basis(f, mode="custom", custom=[(1,), (0,)])
    assert basis.monomials == ((0,), (1,))
    with pytest.raises(BasisError):
        build_basis(f, mode="custom", custom=[])


def test_odd_degree_is_rejected():
    with pytest.raises(DegreeError):
        build_basis(parse_polynomial("x1^3 + 1"))


def test_duplicate_basis_monomials_are_rejected():
    with pytest.raises(BasisError):
        MonomialBasis(((0,), (0,)), 1, 0)


def test_square_constraints(square_system):
    cs = square_system
    assert cs.p == 3
    assert cs.b_exact == (Fraction(1), Fraction(2), Fraction(1))
    assert cs.rows[0] == ((0, 0, Fraction(1)),)
    assert cs.rows[1] == ((0, 1, Fraction(1)),)
    assert cs.rows[2] == ((1, 1, Fraction(1)),)

    w = np.array([[1.0, 1.0], [1.0, 1.0]])
    assert apply_map(cs, w) == pytest.approx([1.0, 2.0, 1.0])
    assert np.allclose(residual(cs, w), 0.0)


def test_two_variable_constraints():
    f = parse_polynomial("x1^2 + 2*x1*x2 + x2^2 + 1")
    cs = build_constraints(f, build_basis(f))
    assert cs.p == 6
    assert [float(v) for v in cs.b_exact] == [1, 0, 0, 1, 2, 1]


def test_zero_polynomial_gives_zero_rhs():
    f = Polynomial.zero(1)
    basis = MonomialBasis(((0,), (1,)), 1, 1)
    cs = build_constraints(f, basis)
    assert all(v == 0 for v in cs.b_exact)
    assert np.allclose(residual(cs, np.zeros((2, 2))), 0.0)


def test_unreachable_monomial_is_named():
    f = parse_polynomial("x1^4 + 1")
    basis = MonomialBasis(((0,), (1,)), 1, 1)
    with pytest.raises(BasisError) as info:
        build_constraints(f, basis)
    assert "x1^4" in str(info.value)
    assert info.value.monomial == (4,)


def test_apply_map_trivial_cases():
    trace_system = ConstraintSystem(n=3, rows=(((0, 0, Fraction(1)), (1, 1, Fraction(1)), (2, 2, Fraction(1))),),
                                    b_exact=(Fraction(0),))
    assert apply_map(trace_system, np.zeros((3, 3))) == pytest.approx([0.0])
    assert apply_map(trace_system, np.eye(3)) == pytest.approx([3.0])
    with pytest.raises(DimensionError):
        apply_map(trace_system, np.eye(2))


def test_apply_adjoint_trivial_cases(square_system):
    cs = square_system
    assert np.allclose(apply_adjoint(cs, np.zeros(3)), 0.0)
    assert np.allclose(apply_adjoint(cs, np.array([1.0, 0.0, 0.0])), [[1, 0], [0, 0]])
    assert np.allclose(apply_adjoint(cs, np.array([0.0, 1.0, 0.0])), [[0, 1], [1, 0]])
    with pytest.raises(DimensionError):
        apply_adjoint(cs, np.zeros(2))


def test_adjoint_identity():
    rng = np.random.default_rng(17)
    f = parse_polynomial("x1^4 + x1^2*x2^2 + x2^4 + x1*x2 + 3")
    cs = build_constraints(f, build_basis(f))
    for _ in range(100):
        w = _random_symmetric(rng, cs.n)
        y = rng.standard_normal(cs.p)
        lhs = float(apply_map(cs, w) @ y)
        rhs = float(np.sum(w * apply_adjoint(cs, y)))
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_adjoint_output_is_symmetric():
    rng = np.random.default_rng(2)
    f = parse_polynomial("x1^4 + x2^4 + x1*x2")
    cs = build_constraints(f, build_basis(f))
    image = apply_adjoint(cs, rng.standard_normal(cs.p))
    assert np.array_equal(image, image.T)


def test_gradient_vanishes_at_solution(square_system):
    assert np.allclose(gradient(square_system, np.ones((2, 2))), 0.0)


def test_operator_norm_examples(square_system):
    safety = 1.01
    trace_system = ConstraintSystem(n=3, rows=(((0, 0, Fraction(1)), (1, 1, Fraction(1)), (2, 2, Fraction(1))),),
                                    b_exact=(Fraction(0),))
    assert op_norm_sq(trace_system) == pytest.approx(3.0 * safety, rel=1e-4)

    corner = ConstraintSystem(n=2, rows=(((0, 0, Fraction(1)),),), b_exact=(Fraction(1),))
    assert op_norm_sq(corner) == pytest.approx(1.0 * safety, rel=1e-4)

    assert op_norm_sq(square_system) == pytest.approx(2.0 * safety, rel=1e-4)

    empty = ConstraintSystem(n=2, rows=(), b_exact=())
    assert op_norm_sq(empty) == 0.0


def test_operator_norm_bounds_the_map():
    rng = np.random.default_rng(23)
    f = parse_polynomial("x1^4 + 2*x1^2*x2^2 + x2^4 + x1 + 1")
    cs = build_constraints(f, build_basis(f))
    lipschitz = op_norm_sq(cs)
    for _ in range(50):
        w = _random_symmetric(rng, cs.n)
        assert np.linalg.norm(apply_map(cs, w)) ** 2 <= lipschitz * np.sum(w * w) * (1 + 1e-9)


def test_gram_coefficients_keyed_by_monomial(square_system):
    coefficients = gram_coefficients(square_system, np.ones((2, 2)))
    assert coefficients == {(0,): 1.0, (1,): 2.0, (2,): 1.0}

    bare = ConstraintSystem(n=1, rows=(((0, 0, Fraction(1)),),), b_exact=(Fraction(1),))
    with pytest.raises(BasisError):
        gram_coefficients(bare, np.ones((1, 1)))


def test_constraint_system_validation():
    with pytest.raises(DimensionError):
        ConstraintSystem(n=2, rows=(((1, 0, Fraction(1)),),), b_exact=(Fraction(1),))
    with pytest.raises(DimensionError):
        ConstraintSystem(n=2, rows=(((0, 0, Fraction(1)),),), b_exact=())
    with pytest.raises(DimensionError):
        ConstraintSystem(n=0, rows=(), b_exact=())
