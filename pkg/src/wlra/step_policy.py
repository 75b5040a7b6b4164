"""Step-size safeguards for the stochastic descent algorithms.

The step actually taken at iteration t is c_t / phi_t, where c_t is the
preferred schedule and phi_t = max{A_t, B_t, c_t / theta, phi_min} shrinks
it enough to keep the iterates confined. A_t and B_t are per-iteration
quantities (a confinement inner product and a Hessian bound maximized over
the observed support); the tilde variants are cheap closed-form upper
bounds, and phi_min alone suffices in the constant-step regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Union

import numpy as np

from .errors import EmptySupport, LambdaOutOfRange, ShapeMismatch
from .geometry import ProductPoint
from .model import (
    FactorPair,
    ProblemData,
    check_lambda_pw,
    confinement_euclidean,
    confinement_manifold,
    require_positive_weights,
)

DEFAULT_C = 1.0
DEFAULT_SIGMA = math.pi**2 / 6.0


def default_schedule(t: int) -> float:
    """Preferred step sizes c_t = 1 / (t + 1)."""
    return 1.0 / (t + 1)


class PolicyKind(Enum):
    MANIFOLD = "manifold"
    EUCLIDEAN = "euclidean"
    POSITIVE_WEIGHTS = "positive-weights"


Iterate = Union[ProductPoint, FactorPair]


def alpha_of(data: ProblemData) -> float:
    """Maximum squared observed entry; missing cells never contribute."""
    if data.nnz == 0:
        raise EmptySupport("no observed entries")
    return float(np.max(data.a_vals**2))


def compute_rho0(
    kind: PolicyKind,
    init_norm_sq: float,
    alpha: float,
    lam: float,
    w0: float | None = None,
) -> float:
    """Confinement threshold: the larger of the initial size and a lam-based floor."""
    if kind is PolicyKind.MANIFOLD:
        return max(init_norm_sq, alpha / (4.0 * lam))
    if kind is PolicyKind.EUCLIDEAN:
        return max(init_norm_sq, alpha / (2.0 * lam))
    if w0 is None:
        raise LambdaOutOfRange("positive-weights mode needs w0")
    check_lambda_pw(lam, w0)
    return max(init_norm_sq, alpha / (4.0 * lam * (1.0 - lam / w0)))


def compute_phi_min(
    kind: PolicyKind,
    big_k: float,
    lam: float,
    alpha: float,
    k: int,
    rho0: float,
    w0: float | None = None,
    c: float = DEFAULT_C,
    sigma: float = DEFAULT_SIGMA,
) -> float:
    """Constant step-size safeguard, scaled by the tuning factor K >= 1.

    The default-schedule values (c = 1, sigma = pi^2 / 6) reproduce the
    closed forms with the (pi^2 + 12)/6 and (pi^2 + 6)/6 constants; other
    schedules fall through to the general expressions in c and sigma.
    """
    is_default = abs(c - DEFAULT_C) < 1e-15 and abs(sigma - DEFAULT_SIGMA) < 1e-15
    if kind is PolicyKind.MANIFOLD:
        tail = (math.pi**2 + 12.0) / 6.0 if is_default else 2.0 * c + sigma
        return big_k * max(
            (lam + 2.0 * math.sqrt(lam) + 1.0) * alpha,
            math.sqrt(
                32.0 * k * alpha * lam
                + 8.0 * k * (2.0 + lam**2) * (2.0 * lam * rho0 + tail)
            ),
        )
    if kind is PolicyKind.EUCLIDEAN:
        tail = (12.0 + math.pi**2) / 6.0 if is_default else 2.0 * c + sigma
        return big_k * max(
            2.0 * alpha * math.sqrt(alpha) + alpha**2 / (2.0 * lam) + 2.0 * lam * alpha,
            math.sqrt(
                ((2.0 * math.sqrt(alpha) + rho0 + tail / (2.0 * lam)) ** 2 + 4.0 * lam**2)
                * (2.0 * lam * rho0 + tail)
            ),
        )
    if w0 is None:
        raise LambdaOutOfRange("positive-weights mode needs w0")
    check_lambda_pw(lam, w0)
    tail = (6.0 + math.pi**2) / 6.0 if is_default else c + sigma / 2.0
    return big_k * max(
        4.0 * alpha * (w0 / 2.0 + 2.0 * math.sqrt(w0 / 2.0) + 1.0),
        math.sqrt(
            16.0 * k * (2.0 * alpha * w0 + (2.0 + w0**2 / 4.0) * (w0 * rho0 + tail))
        ),
    )


@dataclass(frozen=True)
class StepPolicy:
    """Everything fixed about step sizes for one solver run."""

    kind: PolicyKind
    lam: float
    a: float
    b: float
    theta: float
    phi_min: float
    big_k: float
    alpha: float
    rho0: float
    schedule: Callable[[int], float] = default_schedule
    c: float = DEFAULT_C
    sigma: float = DEFAULT_SIGMA
    w0: float | None = None

    def __post_init__(self):
        if self.big_k < 1.0:
            raise LambdaOutOfRange(f"need K >= 1, got {self.big_k}")
        if min(self.lam, self.a, self.b, self.theta, self.phi_min) <= 0:
            raise LambdaOutOfRange("policy scalars must be positive")

    @property
    def rho1(self) -> float:
        """Confinement ceiling rho0 + c*a + b^2 * sigma / 2."""
        return self.rho0 + self.c * self.a + self.b**2 * self.sigma / 2.0


def make_policy(
    kind: PolicyKind,
    data: ProblemData,
    init_norm_sq: float,
    lam: float | None,
    big_k: float,
    schedule: Callable[[int], float] = default_schedule,
    c: float = DEFAULT_C,
    sigma: float = DEFAULT_SIGMA,
) -> StepPolicy:
    """Build a StepPolicy with the standard scale choices.

    Regularized kinds take a = 1/lam and b = 1/sqrt(lam); the
    positive-weights kind defaults lam to w0/2 and uses a = 1/w0,
    b = 1/sqrt(w0).
    """
    alpha = alpha_of(data)
    w0 = None
    if kind is PolicyKind.POSITIVE_WEIGHTS:
        w0 = require_positive_weights(data)
        if lam is None:
            lam = w0 / 2.0
        a, b = 1.0 / w0, 1.0 / math.sqrt(w0)
    else:
        if lam is None or lam <= 0:
            raise LambdaOutOfRange("lam must be positive")
        a, b = 1.0 / lam, 1.0 / math.sqrt(lam)
    rho0 = compute_rho0(kind, init_norm_sq, alpha, lam, w0)
    phi_min = compute_phi_min(kind, big_k, lam, alpha, data.k, rho0, w0, c, sigma)
    return StepPolicy(
        kind=kind,
        lam=lam,
        a=a,
        b=b,
        theta=c / phi_min,
        phi_min=phi_min,
        big_k=big_k,
        alpha=alpha,
        rho0=rho0,
        schedule=schedule,
        c=c,
        sigma=sigma,
        w0=w0,
    )


def _support_arrays(data: ProblemData):
    sup = data.support
    return data.rows[sup], data.cols[sup], data.a_vals[sup], data.w_vals[sup]


def adaptive_A_B(
    kind: PolicyKind, iterate: Iterate, data: ProblemData, policy: StepPolicy
) -> tuple[float, float]:
    """Exact per-iteration safeguards, maximized over the weighted support."""
    lam = policy.lam
    rows, cols, a, w = _support_arrays(data)
    if kind is PolicyKind.EUCLIDEAN:
        if not isinstance(iterate, FactorPair):
            raise ShapeMismatch("euclidean policy needs a FactorPair iterate")
        p = np.einsum("tk,tk->t", iterate.x[rows], iterate.y[cols])
        rho = confinement_euclidean(iterate)
        r = a - p
        a_terms = 8.0 * r * p - 4.0 * lam * rho
        row_sq = np.sum(iterate.x[rows] ** 2, axis=1) + np.sum(
            iterate.y[cols] ** 2, axis=1
        )
        b_inner = 4.0 * (r**2 * row_sq + 4.0 * lam * r * p + lam**2 * rho)
        b_terms = np.sqrt(np.maximum(b_inner, 0.0))
    else:
        if not isinstance(iterate, ProductPoint):
            raise ShapeMismatch("manifold policy needs a ProductPoint iterate")
        p = np.einsum("tk,k,tk->t", iterate.u[rows], iterate.x, iterate.v[cols])
        rho = confinement_manifold(iterate)
        if kind is PolicyKind.POSITIVE_WEIGHTS:
            r = a - (1.0 - lam / w) * p
        else:
            r = a - p
        a_terms = 4.0 * r * p - 4.0 * lam * rho
        m = -r[:, None] * (iterate.u[rows] * iterate.v[cols]) + lam * iterate.x
        b_terms = np.sqrt(8.0 * np.sum(m**2, axis=1))
    a_t = max(0.0, float(a_terms.max())) / policy.a
    b_t = float(b_terms.max()) / policy.b
    return a_t, b_t


def adaptive_A_B_tilde(
    kind: PolicyKind, iterate: Iterate, data: ProblemData, policy: StepPolicy
) -> tuple[float, float]:
    """Closed-form upper bounds on A_t and B_t needing only norms and alpha."""
    lam, alpha = policy.lam, policy.alpha
    if kind is PolicyKind.EUCLIDEAN:
        if not isinstance(iterate, FactorPair):
            raise ShapeMismatch("euclidean policy needs a FactorPair iterate")
        rho = confinement_euclidean(iterate)
        if rho >= alpha / (2.0 * lam):
            a_t = 0.0
        else:
            a_t = 4.0 * ((math.sqrt(alpha) + rho / 2.0) * rho + lam * rho) / policy.a
        b_t = (
            math.sqrt(8.0 * (math.sqrt(alpha) + rho / 2.0) ** 2 * rho + 8.0 * lam**2 * rho)
            / policy.b
        )
        return a_t, b_t
    if not isinstance(iterate, ProductPoint):
        raise ShapeMismatch("manifold policy needs a ProductPoint iterate")
    rho = confinement_manifold(iterate)
    xn = math.sqrt(rho)
    if kind is PolicyKind.POSITIVE_WEIGHTS:
        if policy.w0 is None:
            raise LambdaOutOfRange("positive-weights policy needs w0")
        floor = alpha / (4.0 * lam * (1.0 - lam / policy.w0))
    else:
        floor = alpha / (4.0 * lam)
    if rho >= floor:
        a_t = 0.0
    else:
        a_t = (4.0 * (math.sqrt(alpha) + xn) * xn + 4.0 * lam * rho) / policy.a
    b_t = math.sqrt(16.0 * data.k * (2.0 * alpha + (2.0 + lam**2) * rho)) / policy.b
    return a_t, b_t


def phi_t(policy: StepPolicy, a_t: float, b_t: float, t: int) -> float:
    """Per-iteration shrink factor max{A_t, B_t, c_t / theta, phi_min}."""
    if min(a_t, b_t) < 0:
        raise ShapeMismatch("A_t and B_t must be non-negative")
    return max(a_t, b_t, policy.schedule(t) / policy.theta, policy.phi_min)
