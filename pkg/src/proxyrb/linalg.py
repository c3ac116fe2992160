"""Dense factorization primitives with relative-threshold semantics.

Everything here operates on plain numpy float arrays.  The thresholds are
always relative to the first pivot / largest singular value of the input,
never absolute, so callers can keep a single accuracy knob.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CpqrSelection",
    "TruncatedBasis",
    "DegenerateMatrixError",
    "cpqr_select",
    "cpqr_select_absolute",
    "truncated_svd",
    "least_squares",
    "project_out",
]

# Rank cutoff for SVD-based least squares (relative to sigma_1).
LSTSQ_RCOND = 1e-12

# Downdated column norms smaller than this fraction of their original value
# are recomputed from scratch to avoid cancellation.
NORM_RECOMPUTE_FRAC = 1e-7


class DegenerateMatrixError(ValueError):
    """Raised when a factorization receives an all-zero matrix."""


@dataclass(frozen=True)
class CpqrSelection:
    """Result of a threshold-stopped column-pivoted QR factorization.

    ``permutation`` is a bijection on column indices with the pivot order
    first; ``kept`` counts the pivots whose magnitude stayed at or above the
    stopping threshold; ``diagonals`` holds those pivot magnitudes in order.
    ``q_factor`` (rows x kept, orthonormal) and ``r_factor`` (kept x cols, in
    permuted column order) reconstruct the processed part of the input.
    """

    permutation: np.ndarray
    kept: int
    diagonals: np.ndarray
    q_factor: np.ndarray
    r_factor: np.ndarray


@dataclass(frozen=True)
class TruncatedBasis:
    """Left singular vectors retained by a relative singular value cutoff."""

    basis: np.ndarray
    singular_values: np.ndarray

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


def _cpqr(a: np.ndarray, *, rel_eps: float | None, abs_tol: float | None) -> CpqrSelection:
    """Householder CPQR with max-column-norm pivoting and early stopping.

    The factorization halts as soon as the current pivot magnitude drops
    below the threshold (``rel_eps`` times the first pivot, or ``abs_tol``).
    Column norms are downdated and recomputed when cancellation makes the
    downdated value unreliable.
    """
    a = a.copy()
    rows, cols = a.shape
    norms2 = np.einsum("ij,ij->j", a, a)
    orig2 = norms2.copy()
    perm = np.arange(cols)
    pivots: list[float] = []
    reflectors: list[np.ndarray] = []
    threshold = abs_tol
    recompute2 = NORM_RECOMPUTE_FRAC**2

    k = 0
    limit = min(rows, cols)
    while k < limit:
        stale = norms2[k:] < recompute2 * orig2[k:]
        if np.any(stale):
            idx = k + np.nonzero(stale)[0]
            fresh = np.einsum("ij,ij->j", a[k:, idx], a[k:, idx])
            norms2[idx] = fresh
            orig2[idx] = np.maximum(fresh, np.finfo(float).tiny)
        # Tie-break on the lowest original column index.
        mx = norms2[k:].max()
        cand = k + np.nonzero(norms2[k:] == mx)[0]
        j = cand[np.argmin(perm[cand])]
        if j != k:
            a[:, [k, j]] = a[:, [j, k]]
            norms2[[k, j]] = norms2[[j, k]]
            orig2[[k, j]] = orig2[[j, k]]
            perm[[k, j]] = perm[[j, k]]

        x = a[k:, k].copy()
        pivot = float(np.linalg.norm(x))
        if k == 0:
            if pivot == 0.0:
                raise DegenerateMatrixError("degenerate input")
            if rel_eps is not None:
                threshold = rel_eps * pivot
        if pivot < threshold or pivot == 0.0:
            break
        pivots.append(pivot)

        v = x
        v[0] += np.copysign(pivot, x[0] if x[0] != 0.0 else 1.0)
        v /= np.linalg.norm(v)
        reflectors.append(v)
        a[k:, k:] -= 2.0 * np.outer(v, v @ a[k:, k:])
        a[k, k] = np.copysign(pivot, -x[0] if x[0] != 0.0 else -1.0)
        a[k + 1 :, k] = 0.0
        norms2[k + 1 :] -= a[k, k + 1 :] ** 2
        np.maximum(norms2, 0.0, out=norms2)
        k += 1

    kept = len(pivots)
    q = np.zeros((rows, kept))
    q[:kept, :kept] = np.eye(kept)
    for i in range(kept - 1, -1, -1):
        v = reflectors[i]
        q[i:, :] -= 2.0 * np.outer(v, v @ q[i:, :])
    return CpqrSelection(
        permutation=perm,
        kept=kept,
        diagonals=np.array(pivots),
        q_factor=q,
        r_factor=a[:kept, :],
    )


def cpqr_select(m, eps: float) -> CpqrSelection:
    """Select columns whose CPQR pivot magnitude is >= ``eps`` times the first.

    The factorization stops as soon as the pivot drops below the threshold,
    so only the kept columns are ever factored.
    """
    a = _as_matrix(m)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not np.any(a):
        raise DegenerateMatrixError("degenerate input")
    return _cpqr(a, rel_eps=eps, abs_tol=None)


def cpqr_select_absolute(m, threshold: float) -> CpqrSelection:
    """CPQR stopped at an absolute pivot-magnitude threshold.

    Unlike :func:`cpqr_select` this may keep zero columns; it is used for
    residual-driven skeleton enrichment where the threshold is tied to the
    norms of the unprojected samples.
    """
    a = _as_matrix(m)
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if not np.any(a):
        return CpqrSelection(
            permutation=np.arange(a.shape[1]),
            kept=0,
            diagonals=np.array([]),
            q_factor=np.zeros((a.shape[0], 0)),
            r_factor=np.zeros((0, a.shape[1])),
        )
    if float(np.max(np.linalg.norm(a, axis=0))) < threshold:
        return CpqrSelection(
            permutation=np.arange(a.shape[1]),
            kept=0,
            diagonals=np.array([]),
            q_factor=np.zeros((a.shape[0], 0)),
            r_factor=np.zeros((0, a.shape[1])),
        )
    sel = _cpqr(a, rel_eps=None, abs_tol=threshold)
    return sel


def truncated_svd(m, eps: float) -> TruncatedBasis:
    """Left singular vectors with singular values >= ``eps`` times the largest."""
    a = _as_matrix(m)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not np.any(a):
        raise DegenerateMatrixError("degenerate input")
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    keep = int(np.count_nonzero(s >= eps * s[0]))
    keep = max(keep, 1)
    return TruncatedBasis(basis=u[:, :keep].copy(), singular_values=s[:keep].copy())


def least_squares(a, b) -> np.ndarray:
    """Column-wise minimizer of ||a x - b||_F.

    Rank-deficient systems return the minimum-norm solution; singular values
    below ``LSTSQ_RCOND`` times the largest are treated as zero.
    """
    a = _as_matrix(a)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise ValueError(
            f"row count mismatch: a has {a.shape[0]} rows, b has {b.shape[0]}"
        )
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    x, _, _, _ = np.linalg.lstsq(a, b, rcond=LSTSQ_RCOND)
    return x[:, 0] if squeeze else x


def orthonormal_columns(m, rel_tol: float = 1e-12) -> np.ndarray:
    """Orthonormal basis for the column space via modified Gram-Schmidt.

    Runs a second orthogonalization pass per column; columns whose residual
    norm falls below ``rel_tol`` times the largest column norm are dropped.
    """
    a = _as_matrix(m)
    scale = float(np.max(np.linalg.norm(a, axis=0)))
    if scale == 0.0:
        return np.zeros((a.shape[0], 0))
    basis: list[np.ndarray] = []
    for j in range(a.shape[1]):
        v = a[:, j].copy()
        for _ in range(2):
            for u in basis:
                v -= u * (u @ v)
        nv = np.linalg.norm(v)
        if nv > rel_tol * scale:
            basis.append(v / nv)
    if not basis:
        return np.zeros((a.shape[0], 0))
    return np.column_stack(basis)


def project_out(samples, skeleton_cols) -> np.ndarray:
    """Remove the component of ``samples`` lying in span(``skeleton_cols``)."""
    s = _as_matrix(samples)
    c = _as_matrix(skeleton_cols)
    if s.shape[0] != c.shape[0]:
        raise ValueError(
            f"row count mismatch: samples has {s.shape[0]} rows, "
            f"skeleton columns have {c.shape[0]}"
        )
    u = orthonormal_columns(c)
    if u.shape[1] == 0:
        return s.copy()
    out = s - u @ (u.T @ s)
    # Second sweep tightens orthogonality to the skeleton columns.
    out -= u @ (u.T @ out)
    return out
