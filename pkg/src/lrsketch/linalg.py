"""Dense matrix arithmetic and a trusted reference SVD.

Matrices are plain 2-D float64 numpy arrays in row-major order. The
reference SVD is a one-sided Jacobi iteration, deliberately independent
of the power-method SVD used elsewhere, so the two can cross-check each
other. `matmul` accumulates over the inner index in ascending order,
which makes it bit-reproducible against a naive triple loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative threshold below which a singular value counts as zero.
RANK_TOL = 1e-10

_JACOBI_EPS = 1e-15
_JACOBI_MAX_SWEEPS = 60


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 C-order array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={out.ndim}")
    return out


def require_finite(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains non-finite entries")
    return a


@dataclass(frozen=True)
class SvdFactors:
    """Compact SVD: u (rows x r), sigma (r, nonincreasing > 0), v (cols x r)."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.shape[0])

    def reconstruct(self) -> np.ndarray:
        return matmul(self.u * self.sigma, self.v.T)


def matmul(a, b) -> np.ndarray:
    """Matrix product with fixed (ascending inner index) summation order."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"cannot multiply shapes {a.shape} and {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += np.multiply.outer(a[:, k], b[k, :])
    return out


def frobenius_norm(a) -> float:
    a = as_matrix(a)
    return float(np.sqrt(np.sum(a * a)))


def _jacobi_tall(a: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided Jacobi on a matrix with rows >= cols.

    Rotates column pairs of a working copy until all pairs are mutually
    orthogonal; accumulates the rotations into v. Returns (w, sigma, v)
    with w's columns orthogonal and sigma their norms (unsorted).
    """
    n, d = a.shape
    w = a.copy()
    v = np.eye(d)
    for _ in range(_JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(d - 1):
            for q in range(p + 1, d):
                app = float(w[:, p] @ w[:, p])
                aqq = float(w[:, q] @ w[:, q])
                apq = float(w[:, p] @ w[:, q])
                if abs(apq) <= _JACOBI_EPS * np.sqrt(app * aqq):
                    continue
                rotated = True
                tau = (aqq - app) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                if tau == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                wp = w[:, p].copy()
                w[:, p] = c * wp - s * w[:, q]
                w[:, q] = s * wp + c * w[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            break
    sigma = np.sqrt(np.sum(w * w, axis=0))
    return w, sigma, v


def reference_svd(a, rank_tol: float = RANK_TOL) -> SvdFactors:
    """Compact SVD by one-sided Jacobi iteration.

    Rank is the count of singular values above rank_tol * sigma_max.
    Column signs are fixed so the largest-magnitude entry of each u
    column is positive.
    """
    a = as_matrix(a)
    require_finite(a, "SVD input")
    n, d = a.shape
    transposed = d > n
    work = a.T.copy() if transposed else a
    w, sigma, v = _jacobi_tall(work)

    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    smax = sigma[0] if sigma.size else 0.0
    if smax <= 0.0:
        rank = 0
    else:
        rank = int(np.sum(sigma > rank_tol * smax))
    order = order[:rank]
    sigma = sigma[:rank]
    u = w[:, order] / sigma if rank else np.zeros((w.shape[0], 0))
    vr = v[:, order]

    if transposed:
        u, vr = vr, u
    # sign convention: largest-|entry| of each left singular vector positive
    for j in range(rank):
        i = int(np.argmax(np.abs(u[:, j])))
        if u[i, j] < 0:
            u[:, j] = -u[:, j]
            vr[:, j] = -vr[:, j]
    return SvdFactors(u=u, sigma=sigma, v=vr)


def best_rank_k(a, k: int) -> np.ndarray:
    """Truncated-SVD reconstruction from the top min(k, rank) triples."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    a = as_matrix(a)
    f = reference_svd(a)
    r = min(k, f.rank)
    if r == 0:
        return np.zeros_like(a)
    return matmul(f.u[:, :r] * f.sigma[:r], f.v[:, :r].T)
