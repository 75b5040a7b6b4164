"""Iterative solvers: stochastic gradient descent and accelerated line search.

Every solver returns (final iterate, IterTrace). Traces record the
unregularized cost, which is the quantity all benchmark output plots,
regardless of which regularized objective the solver descends.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import BacktrackLimit, InitNotConfined, RankDeficient, ShapeMismatch
from .geometry import (
    ProductPoint,
    ProductTangent,
    project_tangent,
    retract,
    tangent_inner,
)
from .model import (
    FactorPair,
    ProblemData,
    confinement_euclidean,
    confinement_manifold,
    cost_euclidean,
    cost_manifold,
    cost_unregularized,
    full_grad_euclidean,
    full_grad_manifold,
    full_grad_pw,
    pair_inner,
    require_positive_weights,
    sample_index,
    stoch_grad_euclidean,
    stoch_grad_manifold,
    stoch_grad_pw,
)
from .step_policy import PolicyKind, StepPolicy, adaptive_A_B, phi_t


@dataclass(frozen=True)
class Budget:
    """Either an iteration count or a wall-clock limit; exactly one is set."""

    max_iterations: int | None = None
    max_seconds: float | None = None

    def __post_init__(self):
        if (self.max_iterations is None) == (self.max_seconds is None):
            raise ShapeMismatch("set exactly one of max_iterations / max_seconds")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ShapeMismatch("max_iterations must be >= 0")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ShapeMismatch("max_seconds must be positive")


@dataclass(frozen=True)
class ArmijoParams:
    """Backtracking parameters; alpha_bar and beta follow the usual defaults."""

    iota: float
    alpha_bar: float = 1.0
    beta: float = 0.5
    max_backtracks: int = 60

    def __post_init__(self):
        if self.alpha_bar <= 0 or not 0 < self.beta < 1 or not 0 < self.iota < 1:
            raise ShapeMismatch("need alpha_bar > 0 and beta, iota in (0, 1)")


class TraceRecord(NamedTuple):
    t: int
    elapsed_seconds: float
    cost_unregularized: float
    grad_norm: float | None = None
    phi: float | None = None
    rho: float | None = None
    objective: float | None = None


@dataclass
class IterTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def append(self, rec: TraceRecord) -> None:
        if self.records:
            last = self.records[-1]
            if rec.t <= last.t:
                raise ShapeMismatch("trace iteration numbers must increase")
            if rec.elapsed_seconds < last.elapsed_seconds:
                raise ShapeMismatch("trace elapsed times must not decrease")
        self.records.append(rec)

    @property
    def costs(self) -> np.ndarray:
        return np.array([r.cost_unregularized for r in self.records])

    @property
    def iterations(self) -> np.ndarray:
        return np.array([r.t for r in self.records], dtype=np.int64)

    def final_cost(self) -> float:
        return self.records[-1].cost_unregularized


@dataclass(frozen=True)
class SolverConfig:
    kind: PolicyKind
    policy: StepPolicy
    budget: Budget
    seed: int
    trace_every: int = 10
    adaptive: bool = False
    record_grad_norm: bool = False
    record_rho: bool = False

    def __post_init__(self):
        if self.trace_every < 1:
            raise ShapeMismatch("trace_every must be >= 1")


def _check_confined(rho_init: float, rho0: float) -> None:
    if rho_init > rho0 * (1.0 + 1e-12) + 1e-12:
        raise InitNotConfined(f"initial confinement {rho_init} exceeds rho0 {rho0}")


def _retract_with_retry(p: ProductPoint, v: ProductTangent) -> ProductPoint:
    # A true tangent cannot make U + dU rank deficient; if round-off ever
    # does, re-project once and retry before giving up.
    try:
        return retract(p, v)
    except RankDeficient:
        return retract(p, project_tangent(p, v))


def _run_sgd(
    point,
    data: ProblemData,
    config: SolverConfig,
    grad_fn: Callable,
    move_fn: Callable,
    rho_fn: Callable,
    full_grad_norm_fn: Callable,
) -> tuple[object, IterTrace]:
    policy = config.policy
    rng = np.random.default_rng(config.seed)
    trace = IterTrace()
    start = time.perf_counter()

    def emit(t, pt, phi=None) -> float:
        elapsed = time.perf_counter() - start
        trace.append(
            TraceRecord(
                t=t,
                elapsed_seconds=elapsed,
                cost_unregularized=cost_unregularized(pt, data),
                grad_norm=full_grad_norm_fn(pt) if config.record_grad_norm else None,
                phi=phi,
                rho=rho_fn(pt) if config.record_rho else None,
            )
        )
        return elapsed

    emit(0, point)
    budget = config.budget
    t = 0
    while budget.max_iterations is None or t < budget.max_iterations:
        s = sample_index(data, rng)
        g = grad_fn(point, s)
        if config.adaptive:
            a_t, b_t = adaptive_A_B(config.kind, point, data, policy)
            phi = phi_t(policy, a_t, b_t, t)
        else:
            phi = policy.phi_min
        point = move_fn(point, g, -policy.schedule(t) / phi)
        t += 1
        if t % config.trace_every == 0:
            elapsed = emit(t, point, phi)
            if budget.max_seconds is not None and elapsed > budget.max_seconds:
                break
    if trace.records[-1].t != t:
        emit(t, point)
    return point, trace


def sgd_manifold(
    init: ProductPoint, data: ProblemData, config: SolverConfig
) -> tuple[ProductPoint, IterTrace]:
    """Stochastic descent of the regularized objective on the product manifold.

    Constant mode divides the schedule by phi_min; adaptive mode recomputes
    the safeguards A_t, B_t every iteration.
    """
    policy = config.policy
    _check_confined(confinement_manifold(init), policy.rho0)
    return _run_sgd(
        init,
        data,
        config,
        grad_fn=lambda p, s: stoch_grad_manifold(p, s, data, policy.lam),
        move_fn=lambda p, g, step: _retract_with_retry(p, g.scaled(step)),
        rho_fn=confinement_manifold,
        full_grad_norm_fn=lambda p: full_grad_manifold(p, data, policy.lam).norm(),
    )


def sgd_euclidean(
    init: FactorPair, data: ProblemData, config: SolverConfig
) -> tuple[FactorPair, IterTrace]:
    """Stochastic descent of the factored objective; retraction is addition."""
    policy = config.policy
    _check_confined(confinement_euclidean(init), policy.rho0)
    return _run_sgd(
        init,
        data,
        config,
        grad_fn=lambda f, s: stoch_grad_euclidean(f, s, data, policy.lam),
        move_fn=lambda f, g, step: f.add_scaled(g, step),
        rho_fn=confinement_euclidean,
        full_grad_norm_fn=lambda f: full_grad_euclidean(f, data, policy.lam).norm(),
    )


def sgd_pw(
    init: ProductPoint, data: ProblemData, config: SolverConfig
) -> tuple[ProductPoint, IterTrace]:
    """Positive-weights stochastic descent; the traced objective is the raw cost."""
    require_positive_weights(data)
    policy = config.policy
    _check_confined(confinement_manifold(init), policy.rho0)
    return _run_sgd(
        init,
        data,
        config,
        grad_fn=lambda p, s: stoch_grad_pw(p, s, data, policy.lam),
        move_fn=lambda p, g, step: _retract_with_retry(p, g.scaled(step)),
        rho_fn=confinement_manifold,
        full_grad_norm_fn=lambda p: full_grad_pw(p, data).norm(),
    )


# ---------------------------------------------------------------------------
# Armijo backtracking and accelerated line search.


def _generic_inner(a, b) -> float:
    if isinstance(a, ProductTangent):
        return tangent_inner(a, b)
    if isinstance(a, FactorPair):
        return pair_inner(a, b)
    return float(np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float)))


def _generic_scale(d, c: float):
    if isinstance(d, (ProductTangent, FactorPair)):
        return d.scaled(c)
    return c * np.asarray(d, dtype=float)


def armijo_step(
    cost: Callable,
    grad,
    point,
    direction,
    params: ArmijoParams,
    retractor: Callable,
    inner: Callable | None = None,
    scale: Callable | None = None,
) -> tuple[float, int]:
    """Smallest m with f(x) - f(R_x(beta^m abar eta)) >= -iota <grad, beta^m abar eta>.

    Returns (tau, m) with tau = beta^m * alpha_bar. The direction must be a
    descent direction or zero; a zero direction accepts immediately.
    """
    inner = inner or _generic_inner
    scale = scale or _generic_scale
    if inner(direction, direction) == 0.0:
        return params.alpha_bar, 0
    slope = inner(grad, direction)
    f0 = cost(point)
    tau = params.alpha_bar
    for m in range(params.max_backtracks + 1):
        if f0 - cost(retractor(point, scale(direction, tau))) >= -params.iota * tau * slope:
            return tau, m
        tau *= params.beta
    raise BacktrackLimit(
        f"no Armijo step within {params.max_backtracks} backtracks "
        "(gradient and cost may be inconsistent)"
    )


def _run_als(
    point,
    cost_fn: Callable,
    grad_fn: Callable,
    retract_fn: Callable,
    trace_cost_fn: Callable,
    rho_fn: Callable,
    params: ArmijoParams,
    budget: Budget,
    trace_every: int,
) -> tuple[object, IterTrace]:
    if trace_every < 1:
        raise ShapeMismatch("trace_every must be >= 1")
    trace = IterTrace()
    start = time.perf_counter()

    def emit(t, pt, gnorm) -> float:
        elapsed = time.perf_counter() - start
        trace.append(
            TraceRecord(
                t=t,
                elapsed_seconds=elapsed,
                cost_unregularized=trace_cost_fn(pt),
                grad_norm=gnorm,
                rho=rho_fn(pt),
                objective=cost_fn(pt),
            )
        )
        return elapsed

    g = grad_fn(point)
    emit(0, point, _norm_of(g))
    t = 0
    eps = np.finfo(float).eps
    while budget.max_iterations is None or t < budget.max_iterations:
        # Once the full-step sufficient decrease drops below float noise no
        # backtracked step can satisfy the Armijo test, so the iterate is
        # numerically stationary; freeze it instead of exhausting backtracks.
        decrease_scale = params.iota * params.alpha_bar * _norm_of(g) ** 2
        if decrease_scale > 1024.0 * eps * max(1.0, abs(cost_fn(point))):
            eta = _generic_scale(g, -1.0)
            tau, _ = armijo_step(cost_fn, g, point, eta, params, retract_fn)
            point = retract_fn(point, _generic_scale(eta, tau))
            g = grad_fn(point)
        t += 1
        if t % trace_every == 0:
            elapsed = emit(t, point, _norm_of(g))
            if budget.max_seconds is not None and elapsed > budget.max_seconds:
                break
    if trace.records[-1].t != t:
        emit(t, point, _norm_of(g))
    return point, trace


def _norm_of(g) -> float:
    if isinstance(g, (ProductTangent, FactorPair)):
        return g.norm()
    return float(np.linalg.norm(g))


def als_manifold(
    init: ProductPoint,
    data: ProblemData,
    lam: float,
    params: ArmijoParams,
    budget: Budget,
    trace_every: int = 1,
) -> tuple[ProductPoint, IterTrace]:
    """Line search along the negative full gradient of the regularized objective."""
    return _run_als(
        init,
        cost_fn=lambda p: cost_manifold(p, data, lam),
        grad_fn=lambda p: full_grad_manifold(p, data, lam),
        retract_fn=_retract_with_retry,
        trace_cost_fn=lambda p: cost_unregularized(p, data),
        rho_fn=confinement_manifold,
        params=params,
        budget=budget,
        trace_every=trace_every,
    )


def als_euclidean(
    init: FactorPair,
    data: ProblemData,
    lam: float,
    params: ArmijoParams,
    budget: Budget,
    trace_every: int = 1,
) -> tuple[FactorPair, IterTrace]:
    """Line search on the factor pair with the additive retraction."""
    return _run_als(
        init,
        cost_fn=lambda f: cost_euclidean(f, data, lam),
        grad_fn=lambda f: full_grad_euclidean(f, data, lam),
        retract_fn=lambda f, d: f.add_scaled(d, 1.0),
        trace_cost_fn=lambda f: cost_unregularized(f, data),
        rho_fn=confinement_euclidean,
        params=params,
        budget=budget,
        trace_every=trace_every,
    )


def als_pw(
    init: ProductPoint,
    data: ProblemData,
    params: ArmijoParams,
    budget: Budget,
    trace_every: int = 1,
) -> tuple[ProductPoint, IterTrace]:
    """Positive-weights line search; the objective is the raw cost itself."""
    require_positive_weights(data)
    return _run_als(
        init,
        cost_fn=lambda p: cost_unregularized(p, data),
        grad_fn=lambda p: full_grad_pw(p, data),
        retract_fn=_retract_with_retry,
        trace_cost_fn=lambda p: cost_unregularized(p, data),
        rho_fn=confinement_manifold,
        params=params,
        budget=budget,
        trace_every=trace_every,
    )
