#!/usr/bin/env python3
"""
Tests for the fixed-point continuation solvers
"""

import math
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from src.bench.instances import random_instance
from src.core.gram_map import ConstraintSystem, apply_adjoint, apply_map, build_basis, build_constraints, op_norm_sq
from src.core import solver as solver_module
from src.core.polynomial import parse_polynomial
from src.core.spectral import schur_sym, shrink
from src.core.solver import (
    SolverConfig,
    SolverVariant,
    afpc_step,
    bb_step_size,
    fixed_point_residual,
    initial_state,
    mfpc_step,
    momentum_point,
    resolve_parameters,
    solve,
    update_rank_estimate,
)


def _scalar_system(b=10):
    return ConstraintSystem(n=1, rows=(((0, 0, Fraction(1)),),), b_exact=(Fraction(b),))


@pytest.fixture
def square_system():
    f = parse_polynomial("x1^2 + 2*x1 + 1")
    return build_constraints(f, build_basis(f))


@pytest.fixture
def small_instance():
    return random_instance(6, 2, seed=3)


def test_config_accepts_variant_names():
    assert SolverConfig(variant="MFPC_BB").variant == SolverVariant.MFPC_BB
    assert SolverConfig(variant="afpc-bb").variant == SolverVariant.AFPC_BB


@pytest.mark.parametrize("kwargs", [
    {"variant": "newton"},
    {"eta": 1.0},
    {"eta": 0.0},
    {"epsilon": 0.0},
    {"tau_min": 2.0, "tau_max": 1.0},
    {"mu_1": 1e-5, "mu_bar": 1e-3},
    {"bb_rule": "bb3"},
    {"mu_norm": "nuclear"},
    {"eps_rank": 0.0},
    {"eps_rank": 1.0},
    {"xtol": -1.0},
])
def test_config_rejects_invalid_values(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_resolve_parameters_defaults(square_system):
    params = resolve_parameters(square_system, SolverConfig())
    assert params.lipschitz == pytest.approx(2.02, rel=1e-4)
    assert params.atb_norm == pytest.approx(3.0)
    assert params.mu_bar == pytest.approx(3e-4)
    assert params.mu_1 == pytest.approx(0.75)
    assert params.tau_fixed == pytest.approx(1.99 / params.lipschitz)
    assert params.tau_min == pytest.approx(1e-3 / params.lipschitz)
    assert params.tau_max == pytest.approx(10.0 / params.lipschitz)

    fro = resolve_parameters(square_system, SolverConfig(mu_norm="fro"))
    assert fro.atb_norm == pytest.approx(math.sqrt(10.0))

    flat = resolve_parameters(square_system, SolverConfig(continuation=False))
    assert flat.mu_1 == flat.mu_bar


def test_mfpc_step_zero_rhs_is_fixed():
    cs = _scalar_system(b=0)
    state = mfpc_step(initial_state(1), cs, 0.5, 2.0)
    assert np.allclose(state.x, 0.0)


def test_mfpc_step_scalar_arithmetic():
    state = mfpc_step(initial_state(1), _scalar_system(), 0.5, 2.0)
    assert state.y == pytest.approx(np.array([[5.0]]))
    assert state.x == pytest.approx(np.array([[4.0]]))
    assert state.iter == 1
    assert state.residual_norm == pytest.approx(6.0)


def test_mfpc_step_rejects_non_positive_parameters():
    with pytest.raises(ValueError):
        mfpc_step(initial_state(1), _scalar_system(), 0.0, 1.0)
    with pytest.raises(ValueError):
        mfpc_step(initial_state(1), _scalar_system(), 1.0, -1.0)


def test_bb_step_examples():
    n = 4
    assert bb_step_size(np.eye(n), 2 * np.eye(n), 1e-3, 10.0) == pytest.approx(0.5)
    assert bb_step_size(100 * np.eye(n), np.eye(n), 1e-3, 10.0) == 10.0
    assert bb_step_size(np.eye(n) * 1e-9, np.eye(n), 1e-3, 10.0) == 1e-3

    dx = np.array([[1.0, 0.0], [0.0, 0.0]])
    dg = np.array([[0.0, 0.0], [0.0, 1.0]])
    assert bb_step_size(dx, dg, 1e-3, 10.0) == 10.0
    assert bb_step_size(dx, -dx, 1e-3, 10.0) == 10.0


def test_bb_step_keeps_previous_on_vanishing_gradient_change():
    zero = np.zeros((2, 2))
    assert bb_step_size(np.eye(2), zero, 1e-3, 10.0, previous=0.25) == 0.25
    assert bb_step_size(np.eye(2), zero, 1e-3, 10.0) == 10.0


def test_bb2_rule():
    assert bb_step_size(np.eye(3), 4 * np.eye(3), 1e-3, 10.0, rule="bb2") == pytest.approx(0.25)


def test_afpc_first_step_equals_mfpc(square_system):
    state = initial_state(2)
    assert momentum_point(state) is state.x
    mfpc = mfpc_step(state, square_system, 0.4, 0.1)
    afpc = afpc_step(state, square_system, 0.4, 0.1)
    assert np.allclose(mfpc.x, afpc.x)


def test_afpc_momentum_recursion(square_system):
    state = afpc_step(initial_state(2), square_system, 0.4, 0.1)
    assert state.t == pytest.approx(1.618034, abs=1e-6)
    assert state.t_prev == 1.0
    state = afpc_step(state, square_system, 0.4, 0.1)
    assert state.t == pytest.approx(2.147899, abs=1e-6)
    assert state.t_prev == pytest.approx(1.618034, abs=1e-6)


def test_fixed_point_residual_examples():
    assert fixed_point_residual(np.zeros((1, 1)), _scalar_system(b=0), 0.5, 2.0) == 0.0
    assert fixed_point_residual(np.array([[4.0]]), _scalar_system(), 0.5, 2.0) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fixed_point_residual(np.zeros((1, 1)), _scalar_system(), 0.0, 2.0)


def test_rank_estimate_examples():
    state = initial_state(3)
    assert update_rank_estimate(state, [5.0, 4.0, 0.001], eps_rank=0.01).s_k == 2
    assert update_rank_estimate(state, [-1.0, -2.0, -3.0]).s_k == 1
    assert update_rank_estimate(state, []).s_k == 1


def test_rank_estimate_boost_after_violations():
    zero = np.zeros((3, 3))
    state = replace(initial_state(3), x=np.eye(3), y=zero, y_prev=zero, violation_count=9)
    before = update_rank_estimate(replace(state, violation_count=0), [5.0, 4.0, 0.001], 0.01, 10)
    after = update_rank_estimate(state, [5.0, 4.0, 0.001], 0.01, 10)
    assert before.s_k == 2
    assert after.s_k == before.s_k + 1
    assert after.violation_count == 0
    assert after.rank_boost == 1


def test_rank_estimate_grows_when_spectrum_is_saturated():
    state = replace(initial_state(5), s_k=2)
    assert update_rank_estimate(state, [5.0, 4.0], 0.01, 10, threshold=1.0).s_k == 3
    assert update_rank_estimate(state, [5.0, 0.5], 0.01, 10, threshold=1.0).s_k == 2
    assert update_rank_estimate(state, [5.0, 0.01], 0.01, 10, threshold=0.001).s_k == 1
    assert update_rank_estimate(state, [5.0, 4.0], 0.01, 10).s_k == 2

    full = replace(initial_state(2), s_k=2)
    assert update_rank_estimate(full, [5.0, 4.0], 0.01, 10, threshold=1.0).s_k == 2


def test_solve_zero_rhs_returns_immediately():
    cs = ConstraintSystem(n=2, rows=(((0, 0, Fraction(1)),), ((0, 1, Fraction(1)),)),
                          b_exact=(Fraction(0), Fraction(0)))
    result = solve(cs)
    assert result.iterations <= 1
    assert np.allclose(result.w, 0.0)
    assert result.converged


def test_solve_without_iterations_reports_not_converged(square_system):
    result = solve(square_system, SolverConfig(max_iter=0))
    assert result.iterations == 0
    assert not result.converged
    assert result.rel_err == pytest.approx(1.0)


@pytest.mark.parametrize("variant", ["mfpc", "mfpc-bb", "afpc-bb"])
def test_solve_recovers_planted_instance(variant):
    instance = random_instance(10, 2, seed=5)
    result = solve(instance.cs, SolverConfig(variant=variant, max_iter=3000))
    assert result.converged
    assert result.rel_err <= 1e-3
    assert result.history[-1].rel_err <= 1e-3
    assert result.diagnostics["mu_bar_over_n"] == pytest.approx(result.diagnostics["mu_bar"] / 10)
    assert np.allclose(result.w, result.w.T)
    assert np.linalg.eigvalsh(result.w).min() >= -1e-8


def test_continuation_schedule(small_instance):
    config = SolverConfig(variant="afpc-bb", epsilon=1e-9, max_iter=400)
    result = solve(small_instance.cs, config)
    mus = []
    for record in result.history:
        if not mus or record.mu != mus[-1]:
            mus.append(record.mu)
    mu_bar = result.diagnostics["mu_bar"]
    assert mus[0] == pytest.approx(result.diagnostics["mu_1"])
    for previous, current in zip(mus, mus[1:]):
        assert current == pytest.approx(max(config.eta * previous, mu_bar))
    assert all(mu >= mu_bar for mu in mus)


def test_history_is_streamed_and_deterministic(small_instance):
    streamed = []
    first = solve(small_instance.cs, SolverConfig(max_iter=50), on_iteration=streamed.append)
    second = solve(small_instance.cs, SolverConfig(max_iter=50))
    assert streamed == first.history
    assert first.history == second.history
    assert [record.iter for record in first.history] == list(range(1, first.iterations + 1))


def test_fixed_point_residual_of_stagnated_run(small_instance):
    cs = small_instance.cs
    config = SolverConfig(variant="mfpc", continuation=False, epsilon=1e-12, xtol=1e-10,
                          max_iter=20000, full_decomposition=True)
    result = solve(cs, config)
    residual = fixed_point_residual(result.w, cs, result.tau, result.mu)
    assert residual <= 1e-4 * max(1.0, np.linalg.norm(result.w))
    assert result.fixed_point_residual == pytest.approx(residual)


def test_gradient_map_is_non_expansive(small_instance):
    cs = small_instance.cs
    rng = np.random.default_rng(61)
    lipschitz = op_norm_sq(cs)
    for _ in range(1000):
        tau = float(rng.uniform(0.0, 2.0 / lipschitz))
        x1 = rng.standard_normal((cs.n, cs.n))
        x2 = rng.standard_normal((cs.n, cs.n))
        x1, x2 = (x1 + x1.T) / 2, (x2 + x2.T) / 2
        diff = x1 - x2
        moved = diff - tau * apply_adjoint(cs, apply_map(cs, diff))
        assert np.linalg.norm(moved) <= np.linalg.norm(diff) + 1e-10


def test_mfpc_distance_to_limit_is_monotone(small_instance):
    cs = small_instance.cs
    config = SolverConfig(variant="mfpc", full_decomposition=True)
    params = resolve_parameters(cs, SolverConfig(continuation=False))
    tau, mu = 1.0 / params.lipschitz, params.mu_bar

    state = initial_state(cs.n)
    for _ in range(20000):
        previous = state.x
        state = mfpc_step(state, cs, tau, mu, config)
        if np.linalg.norm(state.x - previous) < 1e-14:
            break
    limit = state.x

    state = initial_state(cs.n)
    distance = np.linalg.norm(state.x - limit)
    for _ in range(300):
        state = mfpc_step(state, cs, tau, mu, config)
        current = np.linalg.norm(state.x - limit)
        assert current <= distance + 1e-9
        distance = current


@pytest.mark.slow
def test_larger_planted_instance_with_continuation():
    instance = random_instance(60, 5, seed=0)
    result = solve(instance.cs, SolverConfig(variant="afpc-bb"))
    assert result.rel_err < 1e-3
    assert result.rank <= 10


def test_partial_decomposition_caps_rank(monkeypatch):
    instance = random_instance(30, 3, seed=1)
    steps = []
    original = solver_module._threshold_step

    def recording(state, *args, **kwargs):
        new_state = original(state, *args, **kwargs)
        steps.append((state.s_k, new_state.lam.size))
        return new_state

    monkeypatch.setattr(solver_module, "_threshold_step", recording)
    result = solve(instance.cs, SolverConfig(max_iter=1000))
    assert steps
    assert all(rank <= s_k for s_k, rank in steps)
    assert max(s_k for s_k, _ in steps) > 1
    assert result.rel_err <= 1e-3
    assert result.rank <= 6


def test_every_iterate_is_psd(small_instance, monkeypatch):
    iterates = []
    original = solver_module._threshold_step

    def recording(*args, **kwargs):
        state = original(*args, **kwargs)
        iterates.append(state.x)
        return state

    monkeypatch.setattr(solver_module, "_threshold_step", recording)
    for variant in ("mfpc", "mfpc-bb", "afpc-bb"):
        solve(small_instance.cs, SolverConfig(variant=variant, max_iter=200))
    assert iterates
    for x in iterates:
        assert np.allclose(x, x.T)
        assert np.linalg.eigvalsh(x).min() >= -1e-10 * max(1.0, np.linalg.norm(x))


def test_fixed_point_satisfies_subgradient_condition(small_instance):
    cs = small_instance.cs
    config = SolverConfig(variant="mfpc", continuation=False, epsilon=1e-12, xtol=1e-10,
                          max_iter=20000, full_decomposition=True)
    result = solve(cs, config)
    tau, mu = result.tau, result.mu
    g = apply_adjoint(cs, apply_map(cs, result.w) - cs.b)

    image = schur_sym(result.w - tau * g)
    error = np.linalg.norm(result.w - shrink(image, tau * mu).reconstruct())
    tol = error / (tau * mu) + 1e-8
    assert tol < 1e-2

    keep = image.lam > tau * mu
    assert keep.any()
    q_range, q_null = image.q[:, keep], image.q[:, ~keep]
    scaled = -g / mu
    on_range = q_range.T @ scaled @ q_range
    assert np.linalg.norm(on_range - np.eye(on_range.shape[0])) <= tol
    if q_null.shape[1]:
        assert np.linalg.norm(q_range.T @ scaled @ q_null) <= tol
        assert np.linalg.eigvalsh(q_null.T @ scaled @ q_null).max() <= 1.0 + tol


@pytest.mark.slow
def test_accelerated_objective_gap_decays_quadratically(small_instance):
    cs = small_instance.cs
    config = SolverConfig(variant="afpc-bb", full_decomposition=True)
    params = resolve_parameters(cs, SolverConfig(continuation=False))
    tau, mu = 1.0 / params.lipschitz, params.mu_bar

    state = initial_state(cs.n)
    for _ in range(20000):
        state = afpc_step(state, cs, tau, mu, config)
    best, minimizer = state.objective, state.x

    bound = 2.0 * params.lipschitz * np.linalg.norm(minimizer) ** 2 * 1.1 + 1e-8
    state = initial_state(cs.n)
    for k in range(1, 501):
        state = afpc_step(state, cs, tau, mu, config)
        assert np.linalg.eigvalsh(state.x).min() >= -1e-10 * max(1.0, np.linalg.norm(state.x))
        best = min(best, state.objective)
        assert (k + 1) ** 2 * (state.objective - best) <= bound
