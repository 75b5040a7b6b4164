"""Problem data, cost functions, sampling, and gradients.

The data matrix is stored as triplets over its observed support; costs and
gradients only ever touch observed entries. Three parametrizations are
supported: the product manifold (U, x, V), the Euclidean factor pair
(X, Y), and the positive-weights variant of the manifold problem.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    EmptySupport,
    LambdaOutOfRange,
    NonPositiveWeight,
    ShapeMismatch,
)
from .geometry import ProductPoint, ProductTangent, project_tangent


@dataclass(frozen=True)
class ProblemData:
    """Observed entries of an m-by-n matrix with probability weights.

    rows/cols/a_vals hold the observed triplets; w_vals are non-negative
    weights on the same support summing to one. k is the rank cap.
    """

    m: int
    n: int
    k: int
    rows: np.ndarray
    cols: np.ndarray
    a_vals: np.ndarray
    w_vals: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        a_vals = np.asarray(self.a_vals, dtype=float).reshape(-1)
        w_vals = np.asarray(self.w_vals, dtype=float).reshape(-1)
        if not (rows.size == cols.size == a_vals.size == w_vals.size):
            raise ShapeMismatch("triplet arrays must have equal lengths")
        if rows.size == 0:
            raise EmptySupport("no observed entries")
        if self.k > min(self.m, self.n) or self.k < 1:
            raise ShapeMismatch(f"need 1 <= k <= min(m, n), got k={self.k}")
        if rows.min() < 0 or rows.max() >= self.m or cols.min() < 0 or cols.max() >= self.n:
            raise ShapeMismatch("triplet indices out of range")
        if w_vals.min() < 0:
            raise NonPositiveWeight("weights must be non-negative")
        if abs(w_vals.sum() - 1.0) > 1e-12:
            raise ShapeMismatch(f"weights sum to {w_vals.sum()!r}, expected 1")
        for name, arr in (("rows", rows), ("cols", cols), ("a_vals", a_vals), ("w_vals", w_vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nnz(self) -> int:
        return self.rows.size

    @cached_property
    def support(self) -> np.ndarray:
        """Indices of triplets with strictly positive weight (the set Delta)."""
        idx = np.flatnonzero(self.w_vals > 0)
        idx.setflags(write=False)
        return idx

    @cached_property
    def inv_w(self) -> np.ndarray:
        """Reciprocal weights, defined only when every cell is positively weighted."""
        require_positive_weights(self)
        inv = 1.0 / self.w_vals
        inv.setflags(write=False)
        return inv

    @cached_property
    def sampler(self) -> "AliasSampler":
        return AliasSampler(self.w_vals[self.support])

    @cached_property
    def _index_of(self) -> dict[tuple[int, int], int]:
        return {
            (int(i), int(j)): t
            for t, (i, j) in enumerate(zip(self.rows, self.cols))
        }

    def dense(self) -> np.ndarray:
        """Dense m-by-n matrix of observed values, zeros elsewhere."""
        a = np.zeros((self.m, self.n))
        a[self.rows, self.cols] = self.a_vals
        return a

    def dense_weights(self) -> np.ndarray:
        w = np.zeros((self.m, self.n))
        w[self.rows, self.cols] = self.w_vals
        return w


def require_positive_weights(data: ProblemData) -> float:
    """Check the all-positive-weights regime; returns w0 = min weight."""
    if data.nnz != data.m * data.n:
        raise NonPositiveWeight(
            "positive-weights mode needs every cell observed and weighted"
        )
    w0 = float(data.w_vals.min())
    if w0 <= 0:
        raise NonPositiveWeight("positive-weights mode needs all weights > 0")
    return w0


def check_lambda_pw(lam: float, w0: float) -> None:
    if not 0 < lam < w0:
        raise LambdaOutOfRange(f"need 0 < lambda < w0, got lambda={lam}, w0={w0}")


@dataclass(frozen=True)
class FactorPair:
    """Euclidean iterate (X, Y) with X m-by-k and Y n-by-k; doubles as a tangent."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
            raise ShapeMismatch(f"bad factor shapes {x.shape}, {y.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    def add_scaled(self, d: "FactorPair", c: float) -> "FactorPair":
        return FactorPair(self.x + c * d.x, self.y + c * d.y)

    def scaled(self, c: float) -> "FactorPair":
        return FactorPair(c * self.x, c * self.y)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.x**2) + np.sum(self.y**2)))


def pair_inner(a: FactorPair, b: FactorPair) -> float:
    return float(np.sum(a.x * b.x) + np.sum(a.y * b.y))


class AliasSampler:
    """Walker alias table for sampling an index with fixed probabilities.

    One draw consumes one `integers` and one `random` call of the supplied
    generator, in that order, so sequences are reproducible per seed.
    """

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        if probs.size == 0 or probs.min() <= 0:
            raise EmptySupport("sampler needs at least one positive probability")
        n = probs.size
        scaled = probs * (n / probs.sum())
        self.accept = np.ones(n)
        self.alias = np.arange(n)
        small = [i for i in range(n) if scaled[i] < 1.0]
        large = [i for i in range(n) if scaled[i] >= 1.0]
        scaled = scaled.copy()
        while small and large:
            s = small.pop()
            l = large.pop()
            self.accept[s] = scaled[s]
            self.alias[s] = l
            scaled[l] -= 1.0 - scaled[s]
            (small if scaled[l] < 1.0 else large).append(l)
        for i in small + large:
            self.accept[i] = 1.0

    def draw(self, rng: np.random.Generator) -> int:
        i = int(rng.integers(0, self.accept.size))
        if rng.random() < self.accept[i]:
            return i
        return int(self.alias[i])

    def draw_many(self, rng: np.random.Generator, count: int) -> np.ndarray:
        idx = rng.integers(0, self.accept.size, size=count)
        take = rng.random(count) < self.accept[idx]
        return np.where(take, idx, self.alias[idx])


def sample_index(data: ProblemData, rng: np.random.Generator) -> tuple[int, int]:
    """Draw an observed index pair (i, j) with probability w_ij."""
    t = data.support[data.sampler.draw(rng)]
    return int(data.rows[t]), int(data.cols[t])


# ---------------------------------------------------------------------------
# Predicted entries restricted to the observed support.


def _point_entries(p: ProductPoint, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.einsum("tk,k,tk->t", p.u[rows], p.x, p.v[cols])


def _pair_entries(f: FactorPair, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.einsum("tk,tk->t", f.x[rows], f.y[cols])


def _entries(source, data: ProblemData) -> np.ndarray:
    if isinstance(source, ProductPoint):
        return _point_entries(source, data.rows, data.cols)
    if isinstance(source, FactorPair):
        return _pair_entries(source, data.rows, data.cols)
    p = np.asarray(source, dtype=float)
    if p.shape != (data.m, data.n):
        raise ShapeMismatch(f"matrix shape {p.shape} != ({data.m}, {data.n})")
    return p[data.rows, data.cols]


def predicted_entry(p: ProductPoint, i: int, j: int) -> float:
    """p_ij = sum_l u_il x_l v_jl, computed without materializing the matrix."""
    return float(np.dot(p.u[i] * p.x, p.v[j]))


def predicted_entry_pair(f: FactorPair, i: int, j: int) -> float:
    return float(np.dot(f.x[i], f.y[j]))


# ---------------------------------------------------------------------------
# Costs.


def cost_unregularized(source, data: ProblemData) -> float:
    """Weighted squared error over the observed support.

    `source` may be a ProductPoint, a FactorPair, or a dense m-by-n matrix.
    """
    res = data.a_vals - _entries(source, data)
    return float(np.dot(data.w_vals, res**2))


def cost_manifold(p: ProductPoint, data: ProblemData, lam: float) -> float:
    """Unregularized cost plus lam * ||x||^2 (the regularized manifold objective)."""
    return cost_unregularized(p, data) + lam * float(np.dot(p.x, p.x))


def cost_euclidean(f: FactorPair, data: ProblemData, lam: float) -> float:
    """Unregularized cost plus lam * (||X||_F^2 + ||Y||_F^2)."""
    return cost_unregularized(f, data) + lam * (
        float(np.sum(f.x**2)) + float(np.sum(f.y**2))
    )


def sample_cost_manifold(
    p: ProductPoint, s: tuple[int, int], data: ProblemData, lam: float
) -> float:
    """Per-sample objective (a_ij - p_ij)^2 + lam * ||x||^2."""
    i, j = s
    r = _observed_value(data, i, j) - predicted_entry(p, i, j)
    return r * r + lam * float(np.dot(p.x, p.x))


def sample_cost_euclidean(
    f: FactorPair, s: tuple[int, int], data: ProblemData, lam: float
) -> float:
    i, j = s
    r = _observed_value(data, i, j) - predicted_entry_pair(f, i, j)
    return r * r + lam * (float(np.sum(f.x**2)) + float(np.sum(f.y**2)))


def sample_cost_pw(
    p: ProductPoint, s: tuple[int, int], data: ProblemData, lam: float
) -> float:
    """Per-sample positive-weights objective; its expectation is the raw cost."""
    w0 = require_positive_weights(data)
    check_lambda_pw(lam, w0)
    i, j = s
    a = _observed_value(data, i, j)
    w = _observed_weight(data, i, j)
    pv = predicted_entry(p, i, j)
    r = a - pv
    return r * r - (lam / w) * pv * pv + lam * float(np.dot(p.x, p.x))


def _triplet_index(data: ProblemData, i: int, j: int) -> int:
    t = _index_map(data).get((i, j))
    if t is None:
        raise ShapeMismatch(f"({i}, {j}) is not an observed entry")
    return t


def _index_map(data: ProblemData) -> dict[tuple[int, int], int]:
    return data._index_of


def _observed_value(data: ProblemData, i: int, j: int) -> float:
    return float(data.a_vals[_triplet_index(data, i, j)])


def _observed_weight(data: ProblemData, i: int, j: int) -> float:
    return float(data.w_vals[_triplet_index(data, i, j)])


# ---------------------------------------------------------------------------
# Stochastic gradients (single sampled entry).


def _manifold_tangent_from_residual(
    p: ProductPoint, i: int, j: int, coeff: float, lam: float
) -> ProductTangent:
    """Assemble and project the gradient whose only data term sits at (i, j).

    coeff is -2 * (residual); the ambient U gradient has row i equal to
    coeff * (x * V_j), the V gradient has row j equal to coeff * (x * U_i),
    and the x gradient is coeff * (U_i * V_j) + 2 * lam * x.
    """
    gu = np.zeros_like(p.u)
    gv = np.zeros_like(p.v)
    gu[i] = coeff * (p.x * p.v[j])
    gv[j] = coeff * (p.x * p.u[i])
    gx = coeff * (p.u[i] * p.v[j]) + 2.0 * lam * p.x
    return project_tangent(p, ProductTangent(gu, gx, gv))


def stoch_grad_manifold(
    p: ProductPoint, s: tuple[int, int], data: ProblemData, lam: float
) -> ProductTangent:
    """Gradient of the per-sample regularized objective at a product point."""
    i, j = s
    r = _observed_value(data, i, j) - predicted_entry(p, i, j)
    return _manifold_tangent_from_residual(p, i, j, -2.0 * r, lam)


def stoch_grad_euclidean(
    f: FactorPair, s: tuple[int, int], data: ProblemData, lam: float
) -> FactorPair:
    """Gradient of the per-sample Euclidean objective; returned as a FactorPair."""
    i, j = s
    r = _observed_value(data, i, j) - predicted_entry_pair(f, i, j)
    gx = 2.0 * lam * f.x.copy()
    gy = 2.0 * lam * f.y.copy()
    gx[i] += -2.0 * r * f.y[j]
    gy[j] += -2.0 * r * f.x[i]
    return FactorPair(gx, gy)


def stoch_grad_pw(
    p: ProductPoint, s: tuple[int, int], data: ProblemData, lam: float
) -> ProductTangent:
    """Positive-weights per-sample gradient: the residual uses a tilted prediction."""
    w0 = require_positive_weights(data)
    check_lambda_pw(lam, w0)
    i, j = s
    t = _triplet_index(data, i, j)
    pv = predicted_entry(p, i, j)
    r = data.a_vals[t] - (1.0 - lam * data.inv_w[t]) * pv
    return _manifold_tangent_from_residual(p, i, j, -2.0 * r, lam)


# ---------------------------------------------------------------------------
# Full gradients (sums over the observed support).


def full_grad_manifold(
    p: ProductPoint, data: ProblemData, lam: float
) -> ProductTangent:
    """Gradient of the regularized manifold objective, O(nnz * k)."""
    rows, cols = data.rows, data.cols
    e = -2.0 * data.w_vals * (data.a_vals - _point_entries(p, rows, cols))
    gu = np.zeros_like(p.u)
    gv = np.zeros_like(p.v)
    np.add.at(gu, rows, e[:, None] * (p.x * p.v[cols]))
    np.add.at(gv, cols, e[:, None] * (p.x * p.u[rows]))
    gx = (e[:, None] * (p.u[rows] * p.v[cols])).sum(axis=0) + 2.0 * lam * p.x
    return project_tangent(p, ProductTangent(gu, gx, gv))


def full_grad_euclidean(
    f: FactorPair, data: ProblemData, lam: float
) -> FactorPair:
    """Gradient of the regularized Euclidean objective, O(nnz * k)."""
    rows, cols = data.rows, data.cols
    e = -2.0 * data.w_vals * (data.a_vals - _pair_entries(f, rows, cols))
    gx = 2.0 * lam * f.x.copy()
    gy = 2.0 * lam * f.y.copy()
    np.add.at(gx, rows, e[:, None] * f.y[cols])
    np.add.at(gy, cols, e[:, None] * f.x[rows])
    return FactorPair(gx, gy)


def full_grad_pw(p: ProductPoint, data: ProblemData) -> ProductTangent:
    """Gradient of the raw (unregularized) cost on the manifold, dense route.

    Positive-weights mode has a fully observed matrix, so the Hadamard
    product form E = -2 W . (A - P) is evaluated densely: the U slot is
    E (V diag x), the V slot is E^T (U diag x), and the x slot is
    diag(U^T E V). No regularization term appears here.
    """
    require_positive_weights(data)
    a = data.dense()
    w = data.dense_weights()
    pm = (p.u * p.x) @ p.v.T
    e = -2.0 * w * (a - pm)
    gu = e @ (p.v * p.x)
    gv = e.T @ (p.u * p.x)
    gx = np.einsum("il,ij,jl->l", p.u, e, p.v)
    return project_tangent(p, ProductTangent(gu, gx, gv))


# ---------------------------------------------------------------------------
# Confinement functions.


def confinement_manifold(p: ProductPoint) -> float:
    """Squared norm of x, which equals the squared Frobenius norm of the iterate."""
    return float(np.dot(p.x, p.x))


def confinement_euclidean(f: FactorPair) -> float:
    """||X||_F^2 + ||Y||_F^2."""
    return float(np.sum(f.x**2) + np.sum(f.y**2))
