"""Deterministic dense linear algebra: thin SVD, orthogonal projections, PCA.

The SVD works on the Gram matrix of the smaller side (the embedding use case
is n >> d with d <= ~1024, so the d x d eigenproblem is cheap) and
diagonalizes it with fixed-order cyclic Jacobi rotations. Everything here is
single-threaded with fixed reduction order, so identical inputs produce
bit-identical outputs. Sign ambiguity is resolved by a fixed convention:
in every column of V the entry of largest magnitude is non-negative, with
U flipped alongside to preserve the product.
"""

from __future__ import annotations

import math

import numpy as np

from .core import SvdResult
from .errors import (
    DimensionError,
    InvalidMatrix,
    InvalidVector,
    NumericalFailure,
    RankError,
    ZeroVectorError,
)

# Sweep budget for the Jacobi eigensolver. Exceeding it is a reported error,
# never a silent best-effort result.
MAX_SWEEPS = 100

_CONVERGENCE_RTOL = 1e-14
# Residual tolerance of project_out: inputs whose projection coefficients are
# already below this (relative to the input norm) are returned unchanged, so
# repeated removal is an exact fixed point even through 32-bit storage.
_RESIDUAL_RTOL = 1e-6


def as_matrix(m) -> np.ndarray:
    """Validate and convert input to a finite 2-D float64 array."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidMatrix(f"expected a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidMatrix("matrix must have at least one row and one column")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    return a


def _as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1 or a.size == 0:
        raise InvalidVector("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(a)):
        raise InvalidVector("vector has non-finite entries")
    return a


def _as_basis(b, dim: int) -> np.ndarray:
    a = np.asarray(b, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidMatrix("basis must be a 2-D d x r matrix")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("basis has non-finite entries")
    if a.shape[0] != dim:
        raise DimensionError(
            f"vector dimension {dim} != basis dimension {a.shape[0]}"
        )
    return a


def jacobi_eigh(a, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors) in matrix order (unsorted); the
    eigenvectors are the columns of the second array. Rotations run in a
    fixed row-cyclic order, so the result is deterministic. Raises
    NumericalFailure (carrying the sweep count) if the off-diagonal mass has
    not fallen below 1e-14 of the Frobenius norm within `max_sweeps` sweeps.
    """
    a = as_matrix(a)
    n = a.shape[0]
    if a.shape[1] != n:
        raise InvalidMatrix("matrix is not square")
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    if np.max(np.abs(a - a.T)) > 1e-10 * (1.0 + scale):
        raise InvalidMatrix("matrix is not symmetric")

    a = 0.5 * (a + a.T)  # exact symmetry for the rotation updates
    v = np.eye(n)
    threshold = _CONVERGENCE_RTOL * float(np.linalg.norm(a))

    def off_norm(m: np.ndarray) -> float:
        # Summing only the off-diagonal entries avoids the cancellation a
        # sum(m^2) - sum(diag^2) formulation hits once they are tiny.
        off = m.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.linalg.norm(off))

    for _sweep in range(max_sweeps):
        if off_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = float(a[p, q])
                if apq == 0.0:
                    continue
                diff = float(a[q, q] - a[p, p])
                if abs(apq) < 1e-150 * (1.0 + abs(diff)):
                    # Angle below resolvable precision; dropping the entry
                    # perturbs the matrix by a negligible |apq|.
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    continue
                tau = diff / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        if off_norm(a) > threshold:
            raise NumericalFailure(
                f"Jacobi eigensolver did not converge within {max_sweeps} sweeps",
                iterations=max_sweeps,
            )
    return np.diag(a).copy(), v


def _complete_column(out: np.ndarray, i: int) -> np.ndarray:
    # Deterministic null-space completion: first coordinate direction whose
    # residual against the existing columns is comfortably non-degenerate.
    m = out.shape[0]
    floor = 0.5 / np.sqrt(m)
    for j in range(m):
        cand = np.zeros(m)
        cand[j] = 1.0
        for _ in range(2):
            if i:
                cand -= out[:, :i] @ (out[:, :i].T @ cand)
        nrm = float(np.linalg.norm(cand))
        if nrm > floor:
            return cand / nrm
    raise NumericalFailure("could not complete an orthonormal basis", iterations=m)


def _recover_side(a: np.ndarray, basis: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Build the other orthonormal factor from a @ basis.

    Columns are re-orthonormalized in order (two Gram-Schmidt passes); columns
    belonging to near-zero singular values are replaced by a deterministic
    completion so the factor always has exactly orthonormal columns.
    """
    w = a @ basis
    m, k = w.shape
    out = np.zeros((m, k))
    top = float(sigma[0]) if sigma.size else 0.0
    cutoff = 1e-8 * (top if top > 0.0 else 1.0)
    for i in range(k):
        col = w[:, i].copy()
        for _ in range(2):
            if i:
                col -= out[:, :i] @ (out[:, :i].T @ col)
        nrm = float(np.linalg.norm(col))
        if nrm > cutoff:
            out[:, i] = col / nrm
        else:
            out[:, i] = _complete_column(out, i)
    return out


def _apply_sign_convention(u: np.ndarray, v: np.ndarray) -> None:
    # Orient each column of V so its largest-magnitude entry (first such index
    # on ties) is non-negative; flip the paired U column to keep the product.
    for i in range(v.shape[1]):
        j = int(np.argmax(np.abs(v[:, i])))
        if v[j, i] < 0.0:
            v[:, i] = -v[:, i]
            u[:, i] = -u[:, i]


def svd(m) -> SvdResult:
    """Thin SVD of a dense matrix via the Gram matrix of the smaller side.

    For an n x d input this eigendecomposes the min(n, d)-sized Gram matrix
    with cyclic Jacobi and recovers the other factor, which is cheap and
    stable in the n >> d regime this package targets. The contract is the
    usual one either way: sigma non-negative and non-increasing, orthonormal
    factors, and reconstruction to 1e-6 relative Frobenius error.
    """
    a = as_matrix(m)
    n, d = a.shape
    if n >= d:
        w, vecs = jacobi_eigh(a.T @ a)
        order = np.argsort(-w, kind="stable")
        sigma = np.sqrt(np.maximum(w[order], 0.0))
        v = vecs[:, order].copy()
        u = _recover_side(a, v, sigma)
    else:
        w, vecs = jacobi_eigh(a @ a.T)
        order = np.argsort(-w, kind="stable")
        sigma = np.sqrt(np.maximum(w[order], 0.0))
        u = vecs[:, order].copy()
        v = _recover_side(a.T, u, sigma)
    _apply_sign_convention(u, v)
    return SvdResult(u=u, sigma=sigma, v=v)


def project_out(v, basis) -> np.ndarray:
    """Remove the component of v lying in the span of the basis columns.

    Returns v - basis (basis^T v) for an orthonormal basis. Inputs already
    orthogonal to the basis (all coefficients within 1e-6 of the vector norm)
    come back unchanged, which makes repeated application an exact fixed
    point. An empty (d x 0) basis is the identity.
    """
    vec = _as_vector(v)
    b = _as_basis(basis, vec.size)
    if b.shape[1] == 0:
        return vec.copy()
    coef = b.T @ vec
    if float(np.max(np.abs(coef))) <= _RESIDUAL_RTOL * float(np.linalg.norm(vec)):
        return vec.copy()
    return vec - b @ coef


def project_out_scaled(v, basis) -> np.ndarray:
    """Remove the basis component with coefficients divided by ||v||_2.

    Returns v - basis (basis^T v) / ||v||_2, exactly as written: this variant
    only coincides with the orthogonal projection on unit vectors and is not
    idempotent off the unit sphere (e.g. with a basis column c, the input 2c
    maps to c, not to zero).
    """
    vec = _as_vector(v)
    b = _as_basis(basis, vec.size)
    nrm = float(np.linalg.norm(vec))
    if nrm == 0.0:
        raise ZeroVectorError("norm-scaled removal is undefined for a zero vector")
    if b.shape[1] == 0:
        return vec.copy()
    return vec - b @ (b.T @ vec / nrm)


def pca_project(m, k: int) -> np.ndarray:
    """Principal-component scores: first k columns of U diag(sigma) after
    centering the columns of m. Deterministic via the SVD sign convention."""
    a = as_matrix(m)
    n, d = a.shape
    if n < 2:
        raise RankError("PCA projection needs at least two rows")
    if not 1 <= k <= min(n, d):
        raise RankError(f"k={k} outside valid range [1, {min(n, d)}]")
    centered = a - a.mean(axis=0)
    res = svd(centered)
    return res.u[:, :k] * res.sigma[:k]
