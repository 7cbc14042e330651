"""Left chronological exponential ``X' = (1/i) A(t) X``, ``X(a) = I``.

Each step uses the fourth-order two-term Magnus expansion with endpoint and
midpoint samples,

    Omega = h/6 (B_0 + 4 B_m + B_1) + h^2/12 [B_1, B_0],   B = A / i,

and advances by ``exp(Omega)``. For Hermitian ``A`` the exponent is
anti-Hermitian, so each step is evaluated through ``eigh`` and is unitary to
rounding. Grids are dyadic so that refinement reuses every earlier sample.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

EPS_ODE = 1e-8
MAX_LEVELS = 10


class PathTooRoughError(RuntimeError):
    """Step halving did not reach the requested tolerance."""


@dataclass(frozen=True)
class TexpResult:
    X: np.ndarray
    steps: int
    est_error: float
    levels: int


def _is_hermitian(M: np.ndarray) -> bool:
    return bool(np.allclose(M, M.conj().T, rtol=0.0, atol=1e-13 * max(1.0, np.max(np.abs(M)))))


def _expm_step(Omega: np.ndarray, hermitian: bool) -> np.ndarray:
    if hermitian:
        # Omega = -i H with H Hermitian.
        H = 0.5 * (1j * Omega + (1j * Omega).conj().T)
        w, V = np.linalg.eigh(H)
        return (V * np.exp(-1j * w)[None, :]) @ V.conj().T
    return sla.expm(Omega)


def magnus4_step(A0: np.ndarray, Am: np.ndarray, A1: np.ndarray, h: float, hermitian: bool) -> np.ndarray:
    """One fourth-order Magnus step from endpoint/midpoint samples of ``A``."""
    B0, Bm, B1 = A0 / 1j, Am / 1j, A1 / 1j
    Omega = (h / 6.0) * (B0 + 4.0 * Bm + B1) + (h * h / 12.0) * (B1 @ B0 - B0 @ B1)
    return _expm_step(Omega, hermitian)


class _Sampler:
    """Memoized samples of ``A`` on dyadic points of ``[a, b]``."""

    def __init__(self, A, a: float, b: float, depth: int):
        self.A, self.a, self.b = A, float(a), float(b)
        self.depth = depth
        self.cache: dict[int, np.ndarray] = {}
        self.hermitian = True

    def at(self, j: int, level: int) -> np.ndarray:
        key = j << (self.depth - level)
        if key not in self.cache:
            t = self.a + (self.b - self.a) * (key / float(1 << self.depth))
            M = np.atleast_2d(np.asarray(self.A(t), dtype=complex))
            if not np.all(np.isfinite(M)):
                raise ValueError(f"path sample at t={t!r} is not finite")
            if self.hermitian and not _is_hermitian(M):
                self.hermitian = False
            self.cache[key] = M
        return self.cache[key]


def _propagate(s: _Sampler, n: int, level: int) -> np.ndarray:
    h = (s.b - s.a) / n
    X = None
    for k in range(n):
        A0 = s.at(2 * k, level)
        Am = s.at(2 * k + 1, level)
        A1 = s.at(2 * k + 2, level)
        step = magnus4_step(A0, Am, A1, h, s.hermitian)
        X = step if X is None else step @ X
    return X


def texp(A, a: float, b: float, eps_ode: float = EPS_ODE, n0: int = 4,
         max_levels: int = MAX_LEVELS, richardson: bool = False) -> TexpResult:
    """Propagator ``X(b)`` of ``X' = (1/i) A(t) X`` with ``X(a) = I``.

    Parameters
    ----------
    A : callable
        ``t -> (d, d)`` matrix, piecewise continuous on ``[a, b]``.
    eps_ode : float
        Halving stops once successive propagators differ by less than this
        (max-modulus norm).
    n0 : int
        Initial number of steps.
    richardson : bool
        Return ``X_f + (X_f - X_c)/15`` instead of the finest propagator.
        The correction is not unitary, so it is off by default.

    Raises
    ------
    PathTooRoughError
        When ``max_levels`` halvings do not reach ``eps_ode``.
    """
    a, b = float(a), float(b)
    probe = np.atleast_2d(np.asarray(A(a), dtype=complex))
    dim = probe.shape[0]
    if a == b:
        return TexpResult(np.eye(dim, dtype=complex), 0, 0.0, 0)
    depth = int(np.ceil(np.log2(n0))) + max_levels + 2
    sampler = _Sampler(A, a, b, depth)
    sampler.cache[0] = probe
    sampler.hermitian = _is_hermitian(probe)
    n = n0
    # sample index j at level L means t = a + (b-a) * j / 2^L with 2^L = 2n
    level = int(np.log2(2 * n))
    if 1 << level != 2 * n:
        raise ValueError("n0 must be a power of two")
    prev = _propagate(sampler, n, level)
    err = np.inf
    for lev in range(1, max_levels + 1):
        n *= 2
        level += 1
        cur = _propagate(sampler, n, level)
        err = float(np.max(np.abs(cur - prev)))
        if err < eps_ode:
            X = cur + (cur - prev) / 15.0 if richardson else cur
            return TexpResult(X, n, err, lev)
        prev = cur
    raise PathTooRoughError(
        f"path too rough: step halving stalled at {err:.3e} after {max_levels} levels"
    )
