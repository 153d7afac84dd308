#!/usr/bin/env python3
"""
Fixed-point continuation solvers for the nuclear-norm regularized problem

    min  mu ||X||_*  +  1/2 ||A(X) - b||_2^2   over PSD X

Three variants share one loop:
    MFPC     fixed step tau = 1.99 / ||A||^2
    MFPC_BB  Barzilai-Borwein step clamped to [tau_min, tau_max]
    AFPC_BB  BB step plus Nesterov momentum (t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2)

mu follows the continuation schedule mu_{k+1} = max(eta * mu_k, mu_bar), each
stage warm-started from the previous one with the momentum scalar reset to 1.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from src.config.settings import SOLVER_CONFIG
from src.core.gram_map import ConstraintSystem, apply_adjoint, gradient, op_norm_sq, residual
from src.core.spectral import schur_sym, shrink, threshold, threshold_partial

logger = logging.getLogger(__name__)


class SolverVariant(Enum):
    """Iteration schemes"""
    MFPC = "mfpc"
    MFPC_BB = "mfpc-bb"
    AFPC_BB = "afpc-bb"


@dataclass
class SolverConfig:
    """Schedule and stopping parameters; None means derived from the problem"""
    variant: SolverVariant = SolverVariant(SOLVER_CONFIG["variant"])
    mu_bar: Optional[float] = SOLVER_CONFIG["mu_bar"]
    mu_1: Optional[float] = SOLVER_CONFIG["mu_1"]
    eta: float = SOLVER_CONFIG["eta"]
    tau_fixed: Optional[float] = SOLVER_CONFIG["tau_fixed"]
    tau_min: Optional[float] = SOLVER_CONFIG["tau_min"]
    tau_max: Optional[float] = SOLVER_CONFIG["tau_max"]
    epsilon: float = SOLVER_CONFIG["epsilon"]
    eps_rank: float = SOLVER_CONFIG["eps_rank"]
    max_iter: int = SOLVER_CONFIG["max_iter"]
    xtol: float = SOLVER_CONFIG["xtol"]
    stage_xtol: float = SOLVER_CONFIG["stage_xtol"]
    continuation: bool = SOLVER_CONFIG["continuation"]
    bb_rule: str = SOLVER_CONFIG["bb_rule"]
    mu_norm: str = SOLVER_CONFIG["mu_norm"]
    full_decomposition: bool = SOLVER_CONFIG["full_decomposition"]
    eigen_method: str = "auto"
    violation_limit: int = SOLVER_CONFIG["violation_limit"]
    seed: Optional[int] = None  # Power-iteration and Lanczos seeds; settings defaults when None

    def __post_init__(self):
        if isinstance(self.variant, str):
            try:
                self.variant = SolverVariant(self.variant.lower().replace("_", "-"))
            except ValueError:
                raise ValueError(
                    f"Unknown solver variant '{self.variant}'. "
                    f"Choose from {[v.value for v in SolverVariant]}"
                )
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.eps_rank < 1:
            raise ValueError(f"eps_rank must lie in (0, 1), got {self.eps_rank}")
        if self.xtol < 0:
            raise ValueError(f"xtol must be non-negative, got {self.xtol}")
        if self.max_iter < 0:
            raise ValueError(f"max_iter must be non-negative, got {self.max_iter}")
        if self.tau_min is not None and self.tau_min <= 0:
            raise ValueError(f"tau_min must be positive, got {self.tau_min}")
        if self.tau_min is not None and self.tau_max is not None and self.tau_min >= self.tau_max:
            raise ValueError(f"Need tau_min < tau_max, got {self.tau_min} >= {self.tau_max}")
        if self.tau_fixed is not None and self.tau_fixed <= 0:
            raise ValueError(f"tau_fixed must be positive, got {self.tau_fixed}")
        if self.mu_bar is not None and self.mu_bar <= 0:
            raise ValueError(f"mu_bar must be positive, got {self.mu_bar}")
        if self.mu_bar is not None and self.mu_1 is not None and self.mu_1 < self.mu_bar:
            raise ValueError(f"Need mu_1 >= mu_bar, got {self.mu_1} < {self.mu_bar}")
        if self.bb_rule not in ("bb1", "bb2"):
            raise ValueError(f"bb_rule must be 'bb1' or 'bb2', got {self.bb_rule}")
        if self.mu_norm not in ("spectral", "fro"):
            raise ValueError(f"mu_norm must be 'spectral' or 'fro', got {self.mu_norm}")


@dataclass(frozen=True)
class ResolvedParameters:
    """Concrete schedule values for one constraint system"""
    mu_1: float
    mu_bar: float
    eta: float
    tau_fixed: float
    tau_min: float
    tau_max: float
    lipschitz: float
    atb_norm: float


@dataclass(frozen=True, eq=False)
class SolverState:
    """Per-iteration quantities; steps return a new state"""
    x: np.ndarray
    x_prev: np.ndarray
    lam: np.ndarray
    spectrum: np.ndarray = field(default_factory=lambda: np.zeros(0))
    point: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    point_prev: Optional[np.ndarray] = None
    g_prev: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    y_prev: Optional[np.ndarray] = None
    tau: float = 0.0
    t: float = 1.0
    t_prev: float = 1.0
    mu: float = 0.0
    s_k: int = 1
    violation_count: int = 0
    rank_boost: int = 0
    iter: int = 0
    objective: float = 0.0
    residual_norm: float = 0.0


@dataclass(frozen=True)
class HistoryRecord:
    iter: int
    mu: float
    tau: float
    s_k: int
    rel_err: float
    objective: float
    rank: int


@dataclass(eq=False)
class SolveResult:
    w: np.ndarray
    rel_err: float
    iterations: int
    rank: int
    fixed_point_residual: float
    converged: bool
    history: List[HistoryRecord] = field(default_factory=list)
    mu: float = 0.0
    tau: float = 0.0
    diagnostics: Dict[str, float] = field(default_factory=dict)


class RankEstimate(NamedTuple):
    s_k: int
    violation_count: int
    rank_boost: int


def initial_state(n: int, mu: float = 0.0, tau: float = 0.0) -> SolverState:
    """X^0 = 0"""
    zero = np.zeros((n, n))
    return SolverState(x=zero, x_prev=zero, lam=np.zeros(0), mu=mu, tau=tau)


def resolve_parameters(cs: ConstraintSystem, config: SolverConfig) -> ResolvedParameters:
    """Fill in defaults scaled by ||A||^2 and ||A*b||"""
    lipschitz = op_norm_sq(cs, seed=config.seed)
    if lipschitz <= 0:
        logger.warning("⚠️ Constraint operator is zero; using unit Lipschitz constant")
        lipschitz = 1.0

    atb = apply_adjoint(cs, cs.b)
    atb_norm = float(np.linalg.norm(atb, 2 if config.mu_norm == "spectral" else "fro"))
    if atb_norm == 0.0:
        logger.warning("⚠️ A*b vanishes; continuation scale falls back to 1")
        atb_norm = 1.0

    mu_bar = config.mu_bar if config.mu_bar is not None else SOLVER_CONFIG["mu_bar_factor"] * atb_norm
    if not config.continuation:
        mu_1 = mu_bar
    elif config.mu_1 is not None:
        mu_1 = config.mu_1
    else:
        mu_1 = max(SOLVER_CONFIG["mu_1_factor"] * atb_norm, mu_bar)

    tau_min = config.tau_min if config.tau_min is not None else SOLVER_CONFIG["tau_min_factor"] / lipschitz
    tau_max = config.tau_max if config.tau_max is not None else SOLVER_CONFIG["tau_max_factor"] / lipschitz
    tau_fixed = config.tau_fixed if config.tau_fixed is not None else SOLVER_CONFIG["tau_fixed_factor"] / lipschitz

    if not 0 < tau_min < tau_max:
        raise ValueError(f"Need 0 < tau_min < tau_max, got {tau_min}, {tau_max}")
    if not 0 < mu_bar <= mu_1:
        raise ValueError(f"Need 0 < mu_bar <= mu_1, got {mu_bar}, {mu_1}")

    return ResolvedParameters(
        mu_1=mu_1,
        mu_bar=mu_bar,
        eta=config.eta,
        tau_fixed=tau_fixed,
        tau_min=tau_min,
        tau_max=tau_max,
        lipschitz=lipschitz,
        atb_norm=atb_norm,
    )


def bb_step_size(
    dx: np.ndarray,
    dg: np.ndarray,
    tau_min: float,
    tau_max: float,
    rule: str = "bb1",
    previous: Optional[float] = None,
) -> float:
    """
    Barzilai-Borwein step clamped to [tau_min, tau_max].

    bb1: <dX, dg> / <dg, dg>;  bb2: <dX, dX> / <dX, dg>.
    A vanishing dg keeps the previous step (tau_max if there is none);
    negative, zero or non-finite ratios become tau_max.
    """
    dx_dg = float(np.vdot(dx, dg))
    if rule == "bb1":
        denominator = float(np.vdot(dg, dg))
        numerator = dx_dg
    else:
        denominator = dx_dg
        numerator = float(np.vdot(dx, dx))

    if not np.any(dg):
        raw = previous if previous is not None else tau_max
    elif denominator == 0.0:
        raw = tau_max
    else:
        raw = numerator / denominator

    if not math.isfinite(raw) or raw <= 0:
        raw = tau_max
    return max(tau_min, min(raw, tau_max))


def momentum_point(state: SolverState) -> np.ndarray:
    """Z^k = X^k + ((t_{k-1} - 1) / t_k) (X^k - X^{k-1})"""
    weight = (state.t_prev - 1.0) / state.t
    if weight == 0.0:
        return state.x
    return state.x + weight * (state.x - state.x_prev)


def _threshold_step(
    state: SolverState,
    cs: ConstraintSystem,
    point: np.ndarray,
    tau: float,
    mu: float,
    config: SolverConfig,
    grad: Optional[np.ndarray],
) -> SolverState:
    if tau <= 0 or mu <= 0:
        raise ValueError(f"tau and mu must be positive, got tau={tau}, mu={mu}")

    g = gradient(cs, point) if grad is None else grad
    y = point - tau * g
    if config.full_decomposition:
        computed = schur_sym(y)
        shrunk = shrink(computed, tau * mu)
    else:
        shrunk, computed = threshold_partial(y, state.s_k, tau * mu, config.eigen_method, config.seed)

    x_new = shrunk.reconstruct()
    res_norm = float(np.linalg.norm(residual(cs, x_new)))
    objective = mu * float(np.sum(shrunk.lam)) + 0.5 * res_norm ** 2

    return replace(
        state,
        x=x_new,
        x_prev=state.x,
        lam=shrunk.lam,
        spectrum=computed.lam,
        point=point,
        g=g,
        point_prev=state.point,
        g_prev=state.g,
        y=y,
        y_prev=state.y,
        tau=tau,
        mu=mu,
        iter=state.iter + 1,
        objective=objective,
        residual_norm=res_norm,
    )


def mfpc_step(
    state: SolverState,
    cs: ConstraintSystem,
    tau: float,
    mu: float,
    config: Optional[SolverConfig] = None,
    grad: Optional[np.ndarray] = None,
) -> SolverState:
    """X+ = D_{tau mu}(X - tau A*(A(X) - b))"""
    return _threshold_step(state, cs, state.x, tau, mu, config or SolverConfig(), grad)


def afpc_step(
    state: SolverState,
    cs: ConstraintSystem,
    tau: float,
    mu: float,
    config: Optional[SolverConfig] = None,
    grad: Optional[np.ndarray] = None,
) -> SolverState:
    """Momentum step from Z^k, then the t recursion"""
    z = momentum_point(state)
    new_state = _threshold_step(state, cs, z, tau, mu, config or SolverConfig(), grad)
    t_next = (1.0 + math.sqrt(1.0 + 4.0 * state.t ** 2)) / 2.0
    return replace(new_state, t=t_next, t_prev=state.t)


def update_rank_estimate(
    state: SolverState,
    lambda_prev: Sequence[float],
    eps_rank: float = SOLVER_CONFIG["eps_rank"],
    violation_limit: int = SOLVER_CONFIG["violation_limit"],
    threshold: Optional[float] = None,
) -> RankEstimate:
    """
    s_k = #{lambda_i >= eps_rank * lambda_1} (at least 1), plus one extra
    eigenpair for every `violation_limit` observed breaches of
    ||X^{k+1} - X^k||_F <= ||Y^k - Y^{k-1}||_F.

    lambda_prev are the eigenvalues computed in the last step. When all
    s_k of them lie above both the threshold and eps_rank * lambda_1 the
    cut may have hidden further eigenvalues, and s_k grows by one instead.
    """
    lam = np.asarray(lambda_prev, dtype=float)
    n = state.x.shape[0]
    if lam.size == 0 or lam[0] <= 0:
        count = 1
    else:
        count = max(1, int(np.count_nonzero(lam >= eps_rank * lam[0])))

    violations = state.violation_count
    boost = state.rank_boost
    if state.y is not None and state.y_prev is not None:
        step = np.linalg.norm(state.x - state.x_prev)
        image_step = np.linalg.norm(state.y - state.y_prev)
        if step > image_step * (1.0 + 1e-12) + 1e-15:
            violations += 1
    boosted = violations >= violation_limit
    if boosted:
        boost += 1
        violations = 0

    saturated = (
        threshold is not None
        and 0 < lam.size == state.s_k < n
        and lam[0] > 0
        and lam[-1] > threshold
        and lam[-1] >= eps_rank * lam[0]
    )
    if saturated:
        s_k = state.s_k + 1 + int(boosted)
    else:
        s_k = count + boost
    return RankEstimate(min(n, s_k), violations, boost)


def fixed_point_residual(w: np.ndarray, cs: ConstraintSystem, tau: float, mu: float) -> float:
    """||W - D_{tau mu}(W - tau A*(A(W) - b))||_F"""
    if tau <= 0 or mu <= 0:
        raise ValueError(f"tau and mu must be positive, got tau={tau}, mu={mu}")
    w = np.asarray(w, dtype=float)
    h = w - tau * gradient(cs, w)
    return float(np.linalg.norm(w - threshold(h, tau * mu)))


def _choose_tau(
    state: SolverState,
    point: np.ndarray,
    g: np.ndarray,
    params: ResolvedParameters,
    config: SolverConfig,
) -> float:
    if config.variant == SolverVariant.MFPC:
        return params.tau_fixed
    if state.point is None:
        return max(params.tau_min, min(params.tau_fixed, params.tau_max))
    return bb_step_size(
        point - state.point,
        g - state.g,
        params.tau_min,
        params.tau_max,
        config.bb_rule,
        previous=state.tau,
    )


def _numerical_rank(w: np.ndarray, rel_tol: float) -> int:
    return schur_sym(w).rank(rel_tol)


def solve(
    cs: ConstraintSystem,
    config: Optional[SolverConfig] = None,
    on_iteration: Optional[Callable[[HistoryRecord], None]] = None,
) -> SolveResult:
    """
    Run the configured variant with continuation over mu.

    Stops when rel_err <= epsilon, when the final stage stagnates
    (||X+ - X||_F / max(1, ||X||_F) < xtol), or after max_iter iterations.
    Non-convergence is reported through `converged`, never raised.

    Args:
        cs: Constraint system
        config: Solver configuration (defaults from settings)
        on_iteration: Called with every HistoryRecord (CSV streaming)
    """
    config = config or SolverConfig()
    n = cs.n
    b_norm = float(np.linalg.norm(cs.b))
    relative = b_norm > 0
    rank_tol = SOLVER_CONFIG["rank_rel_tol"]

    def rel_err_of(res_norm: float) -> float:
        return res_norm / b_norm if relative else res_norm

    state = initial_state(n)
    if cs.p == 0 or rel_err_of(b_norm) <= config.epsilon:
        logger.info("✅ Zero iterate already satisfies the tolerance")
        return SolveResult(
            w=state.x,
            rel_err=rel_err_of(b_norm),
            iterations=0,
            rank=0,
            fixed_point_residual=0.0,
            converged=True,
        )

    params = resolve_parameters(cs, config)
    logger.info(
        f"🚀 Solving n={n}, p={cs.p} with {config.variant.value}: "
        f"L={params.lipschitz:.4g}, mu_1={params.mu_1:.4g}, mu_bar={params.mu_bar:.4g}"
    )

    step_fn = afpc_step if config.variant == SolverVariant.AFPC_BB else mfpc_step
    history: List[HistoryRecord] = []
    converged = False
    mu = params.mu_1
    rel_err = rel_err_of(b_norm)

    while state.iter < config.max_iter:
        state = replace(state, t=1.0, t_prev=1.0, mu=mu)
        final_stage = mu <= params.mu_bar
        xtol = config.xtol if final_stage else config.stage_xtol
        logger.debug(f"Continuation stage mu={mu:.4g} (final={final_stage})")

        while state.iter < config.max_iter:
            point = momentum_point(state) if config.variant == SolverVariant.AFPC_BB else state.x
            g = gradient(cs, point)
            tau = _choose_tau(state, point, g, params, config)
            previous_x = state.x

            state = step_fn(state, cs, tau, mu, config, grad=g)
            estimate = update_rank_estimate(
                state, state.spectrum, config.eps_rank, config.violation_limit, threshold=tau * mu
            )
            state = replace(
                state,
                s_k=estimate.s_k,
                violation_count=estimate.violation_count,
                rank_boost=estimate.rank_boost,
            )

            rel_err = rel_err_of(state.residual_norm)
            lam = state.lam
            iterate_rank = int(np.count_nonzero(lam > rank_tol * lam[0])) if lam.size else 0
            record = HistoryRecord(state.iter, mu, tau, state.s_k, rel_err, state.objective, iterate_rank)
            history.append(record)
            if on_iteration is not None:
                on_iteration(record)
            logger.debug(
                f"iter {state.iter}: rel_err={rel_err:.3e} tau={tau:.3e} s_k={state.s_k} rank={iterate_rank}"
            )

            if rel_err <= config.epsilon:
                converged = True
                break
            change = np.linalg.norm(state.x - previous_x) / max(1.0, np.linalg.norm(previous_x))
            if change < xtol:
                break

        if converged or final_stage:
            break
        mu = max(params.eta * mu, params.mu_bar)

    w = state.x
    rank = _numerical_rank(w, rank_tol)
    residual_norm = float(np.linalg.norm(residual(cs, w)))
    fp_residual = fixed_point_residual(w, cs, state.tau, state.mu) if state.iter else 0.0

    if converged:
        logger.info(f"✅ Converged in {state.iter} iterations: rel_err={rel_err:.3e}, rank={rank}")
    else:
        logger.warning(f"⚠️ Stopped after {state.iter} iterations: rel_err={rel_err:.3e}, rank={rank}")

    return SolveResult(
        w=w,
        rel_err=rel_err_of(residual_norm),
        iterations=state.iter,
        rank=rank,
        fixed_point_residual=fp_residual,
        converged=converged,
        history=history,
        mu=state.mu,
        tau=state.tau,
        diagnostics={
            "residual_norm": residual_norm,
            "mu_bar_over_n": params.mu_bar / n,
            "lipschitz": params.lipschitz,
            "mu_bar": params.mu_bar,
            "mu_1": params.mu_1,
        },
    )
