"""Fiber data at a point: phi, eta, eigenpairs, fiber basis and evaluation."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .linalg_core import (
    RANK_REL_TOL,
    EigenSystem,
    fix_column_phases,
    hermitian_eig,
    hermitize,
    numerical_rank,
    op_norm,
)
from .models import IM_NOISE_REL, Frame, NotInLambdaError, SandwichedResolvent


@dataclass(frozen=True, eq=False)
class FiberData:
    """Fiber machinery at ``(lambda + iy, r)``.

    Attributes
    ----------
    lam, r, y : float
        Spectral point, coupling and regularization height (0 at the boundary).
    eigen : EigenSystem
        Nonzero eigenpairs ``(alpha_j, e_j)`` of ``eta``.
    rank : int
        Fiber dimension ``d = #{alpha_j >= rel_tol * alpha_1}``.
    n : int
        Ambient (frame) dimension.
    """

    lam: float
    r: float
    y: float
    eigen: EigenSystem
    rank: int
    n: int

    @property
    def basis(self) -> np.ndarray:
        """First ``d`` eigenvectors of ``eta`` (N x d)."""
        return self.eigen.vectors[:, : self.rank]

    @property
    def alphas(self) -> np.ndarray:
        return self.eigen.values[: self.rank]

    @property
    def embed(self) -> np.ndarray:
        """``eta B`` (N x d): the evaluation images of the fiber basis."""
        return self.basis * self.alphas[None, :]

    @property
    def pinv_embed(self) -> np.ndarray:
        """``pinv(eta) B`` (N x d)."""
        return self.basis / self.alphas[None, :]

    @cached_property
    def phi(self) -> np.ndarray:
        V, a = self.eigen.vectors, self.eigen.values
        return hermitize((V * a[None, :] ** 2) @ V.conj().T)

    @cached_property
    def eta(self) -> np.ndarray:
        V, a = self.eigen.vectors, self.eigen.values
        return hermitize((V * a[None, :]) @ V.conj().T)

    @property
    def projector(self) -> np.ndarray:
        B = self.basis
        return B @ B.conj().T


def _from_factor(U: np.ndarray, floor: float, rel_tol: float):
    if U.shape[1] == 0:
        return EigenSystem(np.zeros(0), np.zeros((U.shape[0], 0), complex)), 0
    W, s, _ = np.linalg.svd(U, full_matrices=False)
    keep = s * s > floor
    W, s = fix_column_phases(W[:, keep]), s[keep]
    return EigenSystem(s, W), numerical_rank(s, rel_tol)


def _from_dense(T: np.ndarray, floor: float, rel_tol: float):
    phi = hermitize((T - T.conj().T) / (2j * np.pi))
    es = hermitian_eig(phi)
    keep = es.values > floor
    alphas = np.sqrt(es.values[keep])
    return EigenSystem(alphas, es.vectors[:, keep]), numerical_rank(alphas, rel_tol)


def fiber_data(bdry: SandwichedResolvent, rel_tol: float = RANK_REL_TOL) -> FiberData:
    """Fiber data from a sandwiched resolvent.

    Uses the exact factor of ``(1/pi) Im T`` when the resolvent carries one,
    otherwise diagonalizes ``phi`` densely. Eigenvalues of ``phi`` below a
    noise floor set by the boundary-value error estimate are treated as zero.

    Raises
    ------
    NotInLambdaError
        If ``bdry`` is a boundary value without the membership flag.
    """
    if not bdry.member:
        raise NotInLambdaError(f"lambda={complex(bdry.z).real} not established in Lambda(H_r; F)")
    floor = max(10.0 * bdry.est_error, IM_NOISE_REL * max(1.0, op_norm(bdry.T))) / np.pi
    if bdry.im_factor is not None:
        eig, d = _from_factor(bdry.im_factor, floor, rel_tol)
    else:
        eig, d = _from_dense(bdry.T, floor, rel_tol)
    z = complex(bdry.z)
    return FiberData(z.real, bdry.r, z.imag, eig, d, bdry.T.shape[0])


def fiber_from_factor(U: np.ndarray, lam: float, r: float, rel_tol: float = RANK_REL_TOL,
                      floor: float = 0.0) -> FiberData:
    """Fiber data from a factor ``U`` with ``phi = U U*``."""
    eig, d = _from_factor(U, floor, rel_tol)
    return FiberData(float(lam), float(r), 0.0, eig, d, U.shape[0])


def evaluate(beta, fd: FiberData) -> np.ndarray:
    """Fiber coordinates ``B* eta beta`` of the evaluation of a level-1 vector."""
    beta = np.asarray(beta)
    if beta.shape[0] != fd.n:
        raise ValueError("coefficient vector length does not match the frame")
    return fd.embed.conj().T @ beta


def snumber_bound_check(fd: FiberData, frame: Frame) -> bool:
    """Whether ``s_n(phi(lambda+iy)) <= kappa_n^2 / y`` for every ``n``."""
    if not fd.y > 0:
        raise ValueError("the s-number bound applies to regularized data (y > 0)")
    s = np.zeros(fd.n)
    vals = np.sort(fd.eigen.values**2)[::-1]
    s[: vals.size] = vals
    bound = frame.weights**2 / fd.y
    return bool(np.all(s <= bound * (1.0 + 1e-12) + 1e-300))
