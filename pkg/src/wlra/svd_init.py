"""Column-mean imputation, truncated-SVD initialization, and the best
rank-k approximation used as a test oracle.

The SVD is a self-contained one-sided Jacobi iteration, accurate for the
small dense matrices produced by imputation at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NegativeSingularValue, ShapeMismatch
from .geometry import ProductPoint
from .model import FactorPair, ProblemData

JACOBI_TOL = 1e-12
MAX_SWEEPS = 60


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD A = U diag(s) V^T with s non-negative and descending."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def _complete_column(u: np.ndarray, j: int) -> None:
    """Replace column j by a unit vector orthogonal to columns 0..j-1, ..., j+1.."""
    m = u.shape[0]
    others = np.delete(np.arange(u.shape[1]), j)
    basis = u[:, others]
    for i in range(m):
        cand = np.zeros(m)
        cand[i] = 1.0
        cand -= basis @ (basis.T @ cand)
        norm = np.linalg.norm(cand)
        if norm > 0.5:
            u[:, j] = cand / norm
            return
    raise ShapeMismatch("could not complete an orthonormal basis")


def _one_sided_jacobi(b: np.ndarray, tol: float, max_sweeps: int):
    """Hestenes rotations on the columns of b (requires rows >= cols)."""
    g = b.copy()
    n = g.shape[1]
    v = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = float(g[:, p] @ g[:, p])
                aqq = float(g[:, q] @ g[:, q])
                apq = float(g[:, p] @ g[:, q])
                if apq == 0.0 or abs(apq) <= tol * math.sqrt(app * aqq):
                    continue
                rotated = True
                zeta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta**2))
                c = 1.0 / math.sqrt(1.0 + t**2)
                s = c * t
                gp = c * g[:, p] - s * g[:, q]
                gq = s * g[:, p] + c * g[:, q]
                g[:, p], g[:, q] = gp, gq
                vp = c * v[:, p] - s * v[:, q]
                vq = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vp, vq
        if not rotated:
            break
    s_vals = np.linalg.norm(g, axis=0)
    u = np.zeros_like(g)
    scale = float(s_vals.max()) if s_vals.size else 0.0
    for j in range(n):
        if s_vals[j] > max(scale, 1.0) * 1e-14:
            u[:, j] = g[:, j] / s_vals[j]
        else:
            s_vals[j] = 0.0
    order = np.argsort(-s_vals, kind="stable")
    u, s_vals, v = u[:, order], s_vals[order], v[:, order]
    for j in range(n):
        if s_vals[j] == 0.0:
            _complete_column(u, j)
    return u, s_vals, v


def jacobi_svd(a, tol: float = JACOBI_TOL, max_sweeps: int = MAX_SWEEPS) -> SvdResult:
    """Thin SVD of a dense matrix via one-sided Jacobi iteration."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {a.shape}")
    m, n = a.shape
    if m >= n:
        u, s, v = _one_sided_jacobi(a, tol, max_sweeps)
    else:
        v, s, u = _one_sided_jacobi(a.T, tol, max_sweeps)
    return SvdResult(u=u, s=s, v=v)


def fill_missing_column_mean(data: ProblemData) -> np.ndarray:
    """Dense copy of the observations with each missing cell set to its
    column's observed mean (zero for all-missing columns)."""
    counts = np.zeros(data.n)
    sums = np.zeros(data.n)
    np.add.at(counts, data.cols, 1.0)
    np.add.at(sums, data.cols, data.a_vals)
    means = np.divide(sums, counts, out=np.zeros(data.n), where=counts > 0)
    out = np.tile(means, (data.m, 1))
    out[data.rows, data.cols] = data.a_vals
    return out


def truncated_svd_init(dense, k: int) -> tuple[ProductPoint, FactorPair]:
    """Rank-k truncated SVD as starting iterates for both parametrizations.

    The factor pair splits the singular values evenly: X0 = U0 sqrt(diag(x0))
    and Y0 = V0 sqrt(diag(x0)), so X0 Y0^T equals the assembled product point.
    """
    dense = np.asarray(dense, dtype=float)
    m, n = dense.shape
    if not 1 <= k <= min(m, n):
        raise ShapeMismatch(f"need 1 <= k <= min(m, n), got k={k}")
    res = jacobi_svd(dense)
    lead = res.s[:k]
    if np.any(lead < 0):
        raise NegativeSingularValue(f"singular values {lead}")
    point = ProductPoint(res.u[:, :k].copy(), lead.copy(), res.v[:, :k].copy())
    root = np.sqrt(lead)
    pair = FactorPair(res.u[:, :k] * root, res.v[:, :k] * root)
    return point, pair


def best_rank_k(a, k: int) -> tuple[np.ndarray, float]:
    """Best rank-<=k approximation in Frobenius norm and its squared error.

    The optimum is the truncation of the SVD; the error is the sum of the
    squared trailing singular values. When the k-th and (k+1)-th singular
    values tie, the minimizer is not unique and the truncation of this
    deterministic SVD is returned.
    """
    a = np.asarray(a, dtype=float)
    if k < 0:
        raise ShapeMismatch("k must be >= 0")
    res = jacobi_svd(a)
    k = min(k, res.s.size)
    p = (res.u[:, :k] * res.s[:k]) @ res.v[:, :k].T
    return p, float(np.sum(res.s[k:] ** 2))


def check_stationarity(a, p, tol: float) -> bool:
    """True iff A^T P = P^T P and P A^T = P P^T hold within tol (Frobenius)."""
    a = np.asarray(a, dtype=float)
    p = np.asarray(p, dtype=float)
    if a.shape != p.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {p.shape} disagree")
    left = np.linalg.norm(a.T @ p - p.T @ p)
    right = np.linalg.norm(p @ a.T - p @ p.T)
    return bool(left <= tol and right <= tol)
