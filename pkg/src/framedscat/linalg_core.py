"""Dense Hermitian linear algebra shared by the rest of the package.

Eigendecompositions come back with descending eigenvalues and a fixed
column phase (largest-modulus entry real positive) so that every derived
quantity is reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

EPS_PSD_REL = 1e-10
RANK_REL_TOL = 1e-8


class NotPSDError(ValueError):
    """Raised when a matrix that should be positive semidefinite is not."""


@dataclass(frozen=True)
class EigenSystem:
    """Eigenvalues in descending order and matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


def _as_square(M) -> np.ndarray:
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def hermitize(M) -> np.ndarray:
    """Return (M + M*)/2 as a complex array."""
    A = _as_square(M).astype(complex)
    return 0.5 * (A + A.conj().T)


def fix_column_phases(V: np.ndarray) -> np.ndarray:
    """Rotate each column so that its largest-modulus entry is real positive."""
    V = np.array(V, dtype=complex, copy=True)
    if V.size == 0:
        return V
    idx = np.argmax(np.abs(V), axis=0)
    pivots = V[idx, np.arange(V.shape[1])]
    mags = np.abs(pivots)
    phases = np.where(mags > 0, pivots / np.where(mags > 0, mags, 1.0), 1.0)
    return V * phases.conj()[None, :]


def hermitian_eig(M) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix.

    Parameters
    ----------
    M : array_like
        Square matrix; it is symmetrized before diagonalization.

    Returns
    -------
    EigenSystem
        Values in descending order, orthonormal vectors with the column
        phase convention applied.
    """
    A = hermitize(M)
    w, V = np.linalg.eigh(A)
    order = np.argsort(w, kind="stable")[::-1]
    return EigenSystem(values=w[order], vectors=fix_column_phases(V[:, order]))


def op_norm(M) -> float:
    """Spectral norm (largest singular value)."""
    A = np.asarray(M)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def hs_norm(M) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(np.asarray(M), "fro")) if np.size(M) else 0.0


def trace_norm(M) -> float:
    """Trace norm, the sum of singular values."""
    A = np.asarray(M)
    if A.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(A, compute_uv=False)))


def max_abs(M) -> float:
    """Entrywise max-modulus, the norm used for residual reporting."""
    A = np.asarray(M)
    return float(np.max(np.abs(A))) if A.size else 0.0


def psd_sqrt(M, eps_rel: float = EPS_PSD_REL) -> np.ndarray:
    """Square root of a positive semidefinite matrix.

    Eigenvalues in ``[-eps_rel * ||M||, 0)`` are clipped to zero; anything
    more negative raises :class:`NotPSDError`.
    """
    es = hermitian_eig(M)
    if es.dim == 0:
        return np.zeros((0, 0), dtype=complex)
    scale = float(np.max(np.abs(es.values)))
    if es.values[-1] < -eps_rel * scale:
        raise NotPSDError(
            f"not PSD: min eigenvalue {es.values[-1]:.3e} below "
            f"-{eps_rel:.0e}*||M|| = {-eps_rel * scale:.3e}; boundary limit unreliable"
        )
    root = np.sqrt(np.clip(es.values, 0.0, None))
    V = es.vectors
    return hermitize((V * root[None, :]) @ V.conj().T)


def numerical_rank(values, rel_tol: float = RANK_REL_TOL) -> int:
    """Count of ``values`` at least ``rel_tol`` times the largest one.

    ``values`` must be sorted descending and non-negative.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0 or values[0] <= 0.0:
        return 0
    return int(np.count_nonzero(values >= rel_tol * values[0]))


def pinv_rank(M, rel_tol: float = RANK_REL_TOL) -> tuple[np.ndarray, int]:
    """Pseudoinverse of a PSD matrix restricted to its retained eigenspace.

    Returns
    -------
    pinv : ndarray
        Inverse on the span of eigenvectors with ``alpha_j >= rel_tol*alpha_1``,
        zero on the complement.
    rank : int
        Number of retained eigenvalues.
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    es = hermitian_eig(M)
    d = numerical_rank(es.values, rel_tol)
    V = es.vectors[:, :d]
    P = (V / es.values[:d][None, :]) @ V.conj().T
    return hermitize(P) if d else np.zeros_like(es.vectors), d


def fredholm_det(T) -> complex:
    """det(I + T) as the product of ``1 + eigenvalues(T)``."""
    A = _as_square(T)
    if A.shape[0] == 0:
        return 1.0 + 0.0j
    ev = sla.eigvals(A)
    return complex(np.prod(1.0 + ev))


def orthonormal_range(A, rel_tol: float = 1e-14) -> np.ndarray:
    """Orthonormal basis for the column space of ``A`` via thin SVD."""
    A = np.asarray(A)
    if A.size == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    return U[:, s > rel_tol * s[0]]


def sigma_min_identity_plus_lowrank(Q: np.ndarray, X: np.ndarray) -> float:
    """Smallest singular value of ``I_N + Q X`` with ``Q`` isometric (N x m).

    The update acts on at most ``2m`` dimensions, so the answer comes from a
    ``2m x 2m`` block matrix instead of an ``N x N`` SVD.
    """
    N, m = Q.shape
    if m == 0:
        return 1.0
    if 2 * m >= N:
        return float(np.linalg.svd(np.eye(N) + Q @ X, compute_uv=False)[-1])
    A = np.eye(m) + X @ Q
    C = X - (X @ Q) @ Q.conj().T
    # C = L Y with Y having orthonormal rows; only L matters for singular values.
    L = np.linalg.qr(C.conj().T, mode="r").conj().T
    block = np.block([[A, L], [np.zeros((m, m)), np.eye(m)]])
    s = np.linalg.svd(block, compute_uv=False)
    return float(min(1.0, s[-1]))
