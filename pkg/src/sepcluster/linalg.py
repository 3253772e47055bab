"""Dense-matrix primitives: norms, singular value decompositions, projections.

Points are rows. Every routine accepts anything ``np.asarray`` understands and
validates it with :func:`as_matrix`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceWarning, DegenerateLineError, InputError

# Dimension above which the Gram matrix is applied implicitly as M^T (M x).
_EXPLICIT_GRAM_MAX = 4096
# Seed of the pseudo-random start vectors; part of the deterministic contract.
_START_SEED = 0x5EED


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return ``M`` as a finite 2-D float64 array with at least one row and column."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    return arr


def frobenius_norm(M) -> float:
    M = as_matrix(M)
    return float(np.sqrt(np.sum(M * M)))


# ---------------------------------------------------------------------------
# Full SVD by one-sided Jacobi


def jacobi_svd(M, max_sweeps: int = 80) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``M = U diag(s) V^T`` by one-sided (Hestenes) Jacobi rotations.

    Returns ``U`` (n x m), ``s`` (m,), ``V`` (d x m) with m = min(n, d) and the
    singular values sorted non-increasing. Columns of ``U`` belonging to zero
    singular values are completed to an orthonormal set.
    """
    M = as_matrix(M)
    transposed = M.shape[0] < M.shape[1]
    W = (M.T if transposed else M).copy()
    n, m = W.shape
    V = np.eye(m)
    eps = np.finfo(float).eps

    for _ in range(max_sweeps):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                wp, wq = W[:, p], W[:, q]
                alpha = wp @ wp
                beta = wq @ wq
                gamma = wp @ wq
                if abs(gamma) <= eps * np.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                diff = beta - alpha
                if abs(diff) > 1e150 * abs(gamma):
                    t = gamma / diff  # tan of the rotation angle -> 1 / (2 zeta) as zeta grows
                else:
                    zeta = diff / (2.0 * gamma)
                    t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                W[:, [p, q]] = np.column_stack((c * wp - s * wq, s * wp + c * wq))
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        if not rotated:
            break

    sigma = np.sqrt(np.sum(W * W, axis=0))
    order = np.argsort(-sigma, kind="stable")
    sigma, W, V = sigma[order], W[:, order], V[:, order]
    U = np.zeros_like(W)
    tiny = sigma > eps * max(sigma[0] if m else 0.0, 1e-300) * max(n, m)
    U[:, tiny] = W[:, tiny] / sigma[tiny]
    sigma = np.where(tiny, sigma, 0.0)
    U = _complete_columns(U, tiny)
    if transposed:
        return V, sigma, U
    return U, sigma, V


def _complete_columns(U: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Replace the columns of ``U`` where ``valid`` is False with an orthonormal completion."""
    if np.all(valid):
        return U
    n = U.shape[0]
    missing = np.flatnonzero(~valid)
    basis = U[:, valid]
    rng = np.random.default_rng(_START_SEED)
    out = U.copy()
    for j in missing:
        for _ in range(10):
            v = rng.standard_normal(n)
            if basis.shape[1]:
                v -= basis @ (basis.T @ v)
                v -= basis @ (basis.T @ v)
            norm = np.linalg.norm(v)
            if norm > 1e-8:
                break
        v /= norm
        out[:, j] = v
        basis = np.column_stack((basis, v))
    return out


# ---------------------------------------------------------------------------
# Block power iteration on the Gram matrix


@dataclass(frozen=True)
class _GramOperator:
    M: np.ndarray
    right: bool  # True: M^T M acting on d-vectors; False: M M^T acting on n-vectors
    gram: np.ndarray | None

    @classmethod
    def build(cls, M: np.ndarray) -> _GramOperator:
        n, d = M.shape
        right = d <= n
        dim = d if right else n
        gram = None
        if dim <= _EXPLICIT_GRAM_MAX:
            gram = M.T @ M if right else M @ M.T
        return cls(M, right, gram)

    @property
    def dim(self) -> int:
        return self.M.shape[1] if self.right else self.M.shape[0]

    def __matmul__(self, X: np.ndarray) -> np.ndarray:
        if self.gram is not None:
            return self.gram @ X
        if self.right:
            return self.M.T @ (self.M @ X)
        return self.M @ (self.M.T @ X)


def _start_block(dim: int, b: int) -> np.ndarray:
    X = np.empty((dim, b))
    X[:, 0] = 1.0 / np.sqrt(dim)
    if b > 1:
        X[:, 1:] = np.random.default_rng(_START_SEED).standard_normal((dim, b - 1))
    return X


def _block_power(G: _GramOperator, t: int, block: int, tol: float, max_iter: int, criterion: str = "residual"):
    """Subspace iteration with Rayleigh-Ritz on a PSD operator.

    ``criterion="residual"`` stops once the top-``t`` Ritz pairs have residual
    ``||G q - lam q||`` at most ``tol * lam_1`` (needed when the subspace itself
    is used); ``criterion="value"`` stops once the top-``t`` Ritz values change
    by at most ``tol`` relative between iterations. Returns (Q, ritz values,
    converged, iterations) with Q's columns ordered by decreasing Ritz value.
    """
    dim = G.dim
    b = min(dim, block)
    Q, _ = np.linalg.qr(_start_block(dim, b))
    if b == dim:
        max_iter = 1  # the block spans everything: one Rayleigh-Ritz step is exact
    converged = False
    it = 0
    lam = np.zeros(b)
    prev = None
    while it < max_iter:
        it += 1
        GQ = G @ Q
        H = Q.T @ GQ
        H = 0.5 * (H + H.T)
        lam, S = np.linalg.eigh(H)
        lam, S = lam[::-1], S[:, ::-1]
        Q = Q @ S
        GQ = GQ @ S
        top = max(lam[0], 0.0)
        if b == dim or top == 0.0:
            converged = True
            break
        if criterion == "value":
            if prev is not None and np.all(np.abs(lam[:t] - prev) <= tol * top):
                converged = True
                break
            prev = lam[:t].copy()
        else:
            res = np.linalg.norm(GQ[:, :t] - Q[:, :t] * lam[:t], axis=0)
            if np.all(res <= tol * top):
                converged = True
                break
        Q, _ = np.linalg.qr(GQ)
        if np.linalg.norm(GQ) == 0.0:
            converged = True
            break
    return Q, np.maximum(lam, 0.0), converged, it


@dataclass(frozen=True)
class PowerIterationResult:
    value: float
    converged: bool
    iterations: int


def spectral_norm_info(M, tol: float = 1e-9, max_iter: int = 10_000, block: int = 16) -> PowerIterationResult:
    """Largest singular value via block power iteration on the smaller Gram matrix.

    The first start vector is the normalized all-ones vector; the remaining
    ``block - 1`` columns are fixed pseudo-random vectors, which cover the case
    where the all-ones vector is orthogonal to the top eigenvector.
    """
    M = as_matrix(M)
    if not np.any(M):
        return PowerIterationResult(0.0, True, 0)
    G = _GramOperator.build(M)
    Q, lam, converged, it = _block_power(G, 1, block, tol, max_iter, criterion="value")
    # Recompute from ||M q|| rather than sqrt(lam): better relative accuracy.
    q = Q[:, 0]
    value = float(np.linalg.norm(M @ q) if G.right else np.linalg.norm(M.T @ q))
    return PowerIterationResult(value, converged, it)


def spectral_norm(M, tol: float = 1e-9, max_iter: int = 10_000) -> float:
    info = spectral_norm_info(M, tol=tol, max_iter=max_iter)
    if not info.converged:
        warnings.warn(
            f"spectral_norm hit {max_iter} iterations; returning best estimate",
            ConvergenceWarning,
            stacklevel=2,
        )
    return info.value


# ---------------------------------------------------------------------------
# Truncated SVD


@dataclass(frozen=True)
class SvdResult:
    """Top-t singular triplets. Vectors are stored as rows."""

    singular_values: np.ndarray  # (t,)
    right_singular_vectors: np.ndarray  # (t, d)
    left_singular_vectors: np.ndarray  # (t, n)
    converged: bool = True
    iterations: int = 0

    @property
    def rank(self) -> int:
        return len(self.singular_values)

    def reconstruct(self) -> np.ndarray:
        return (self.left_singular_vectors.T * self.singular_values) @ self.right_singular_vectors

    def right_projector(self) -> np.ndarray:
        V = self.right_singular_vectors
        return V.T @ V


def truncated_svd(M, t: int, tol: float = 1e-10, max_iter: int = 10_000, oversample: int | None = None) -> SvdResult:
    """Top-``t`` singular triplets of ``M``.

    Block power iteration on the smaller Gram matrix finds the dominant
    subspace; the triplets are then read off a Jacobi SVD of ``M`` restricted to
    that subspace, so singular values are not squared-then-rooted.
    """
    M = as_matrix(M)
    n, d = M.shape
    if not (1 <= t <= min(n, d)):
        raise InputError(f"t must be in [1, {min(n, d)}], got {t}")
    G = _GramOperator.build(M)
    extra = max(t, 8) if oversample is None else oversample
    Q, _, converged, it = _block_power(G, t, t + extra, tol, max_iter)
    if not converged:
        warnings.warn(
            f"truncated_svd hit {max_iter} iterations; subspace may be inaccurate",
            ConvergenceWarning,
            stacklevel=2,
        )
    if G.right:
        # M Q = U S W^T  =>  right vectors Q W, left vectors U
        U, s, W = jacobi_svd(M @ Q)
        right = (Q @ W)[:, :t].T
        left = U[:, :t].T
    else:
        # M^T Q = V S W^T  =>  left vectors Q W, right vectors V
        V, s, W = jacobi_svd(M.T @ Q)
        left = (Q @ W)[:, :t].T
        right = V[:, :t].T
    return SvdResult(s[:t].copy(), right.copy(), left.copy(), converged, it)


# ---------------------------------------------------------------------------
# Projections


def check_orthonormal_rows(basis, atol: float = 1e-8) -> np.ndarray:
    B = as_matrix(basis, "basis")
    gram = B @ B.T
    if not np.allclose(gram, np.eye(B.shape[0]), rtol=0.0, atol=atol):
        raise InputError("basis vectors are not orthonormal")
    return B


def project_rows(M, basis) -> np.ndarray:
    """Orthogonal projection of each row of ``M`` onto span(basis), in the original coordinates.

    ``basis`` holds one orthonormal d-vector per row.
    """
    M = as_matrix(M)
    B = check_orthonormal_rows(basis)
    if B.shape[1] != M.shape[1]:
        raise InputError(f"basis vectors have dimension {B.shape[1]}, rows have {M.shape[1]}")
    return (M @ B.T) @ B


def line_parameters(X, a, b) -> np.ndarray:
    """Parameter t of the foot of each row of X on the line a + t (b - a)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = b - a
    uu = float(u @ u)
    if np.sqrt(uu) <= 1e-12:
        raise DegenerateLineError("line endpoints coincide")
    return ((X - a) @ u) / uu


def project_points_onto_line(X, a, b) -> np.ndarray:
    """Row-wise version of :func:`project_point_onto_line`."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = line_parameters(X, a, b)
    return a + np.outer(t, b - a)


def project_point_onto_line(x, a, b) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InputError("non-finite input")
    return project_points_onto_line(x[None, :], a, b)[0]
