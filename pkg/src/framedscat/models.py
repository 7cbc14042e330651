"""Base operators, frames, perturbations and sandwiched resolvents.

Coordinates: the frame operator is ``F = diag(kappa)`` in the standard
basis, the perturbation is ``V = F J F`` and the sandwiched resolvent is
``T_r(z) = F (H_0 + r V - z)^{-1} F``.

Three base models are provided:

``FiniteHermitian``
    A Hermitian matrix. Boundary values come from a geometric ``y``-ladder
    with Richardson extrapolation.
``FreeJacobi``
    The discrete Laplacian ``(Hf)(n) = f(n+1) + f(n-1)`` on the integers.
    Frame index ``j`` sits on lattice site ``0, 1, -1, 2, -2, ...``.
``MultiplicationGrid``
    Multiplication by ``x`` on ``L^2([a, b], C^m)`` with polynomial channel
    amplitudes, plus optional point masses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Protocol

import numpy as np
from numpy.polynomial import legendre as npleg

from .linalg_core import (
    hermitian_eig,
    hermitize,
    max_abs,
    op_norm,
    sigma_min_identity_plus_lowrank,
)

EPS_RES = 1e-7
DELTA_EDGE = 0.05
Y0 = 1e-2
K_LADDER = 12
EXTRAP_TOL = 1e-8
# Im T below this (relative to max(1, ||T||)) is treated as exactly zero.
IM_NOISE_REL = 1e-13


class ResonanceError(ArithmeticError):
    """1 + rJT_0(lambda+i0) is numerically singular: lambda is not in Lambda(H_r)."""

    def __init__(self, lam: float, r: float, sigma_min: float):
        self.lam, self.r, self.sigma_min = lam, r, sigma_min
        super().__init__(
            f"resonance point: lambda={lam:.12g} not in Lambda(H_r;F) at r={r:.12g} "
            f"(sigma_min={sigma_min:.3e})"
        )


class NotInLambdaError(ValueError):
    """The boundary value at lambda could not be established."""


# --------------------------------------------------------------------------- frame


@dataclass(frozen=True, eq=False)
class Frame:
    """Weights ``kappa_1 >= kappa_2 >= ... > 0`` and a bound on the dropped tail.

    Attributes
    ----------
    weights : ndarray
        Truncated weight sequence of length ``N``.
    tail_bound : float
        Declared bound on ``sum_{j > N} kappa_j^2``.
    """

    weights: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("frame weights must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("frame weights must be finite and strictly positive")
        if np.any(np.diff(w) > 0):
            raise ValueError("frame weights must be non-increasing")
        if not (np.isfinite(self.tail_bound) and self.tail_bound >= 0):
            raise ValueError("tail_bound must be finite and non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def geometric(cls, n: int, ratio: float) -> "Frame":
        """``kappa_j = ratio**j`` for ``j = 1..n`` with the exact geometric tail."""
        if not 0 < ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        j = np.arange(1, n + 1)
        tail = ratio ** (2 * (n + 1)) / (1.0 - ratio**2)
        return cls(ratio**j, tail)

    @classmethod
    def constant(cls, n: int, value: float = 1.0) -> "Frame":
        """Flat weights; meaningful for finite-dimensional models (no tail)."""
        return cls(np.full(n, float(value)), 0.0)

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.weights)

    @property
    def hs_norm_sq(self) -> float:
        """``sum kappa_j^2`` over the retained weights."""
        return float(np.sum(self.weights**2))


def hilbert_scale_rescale(x, from_level: int, to_level: int, frame: Frame) -> np.ndarray:
    """Re-express coefficients of one vector between levels of the Hilbert scale.

    Level-``a`` coefficients refer to the orthonormal basis ``kappa_j^a e_j``
    of the level-``a`` space, so changing level multiplies componentwise by
    ``kappa_j ** (from_level - to_level)``.
    """
    for lev in (from_level, to_level):
        if lev not in (-1, 0, 1):
            raise ValueError("levels must be -1, 0 or 1")
    x = np.asarray(x)
    if x.shape[-1] != frame.n:
        raise ValueError("coefficient vector length does not match the frame")
    if from_level == to_level:
        return x.copy()
    return x * frame.weights ** (from_level - to_level)


def scale_norm(x, level: int, frame: Frame) -> float:
    """Level-``level`` norm of the vector whose level-0 coefficients are ``x``."""
    return float(np.linalg.norm(np.asarray(x) * frame.weights ** (-level)))


# --------------------------------------------------------------------------- perturbation


@dataclass(frozen=True, eq=False)
class Perturbation:
    """Hermitian coupling matrix ``J`` in frame coordinates (``V = F J F``)."""

    J: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.J, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("J must be square")
        if not np.all(np.isfinite(A)):
            raise ValueError("J has non-finite entries")
        if max_abs(A - A.conj().T) > 1e-12 * max(1.0, max_abs(A)):
            raise ValueError("J must be Hermitian")
        A = hermitize(A)
        A.setflags(write=False)
        object.__setattr__(self, "J", A)

    @property
    def n(self) -> int:
        return int(self.J.shape[0])

    @cached_property
    def factor(self) -> tuple[np.ndarray, np.ndarray]:
        """``(Q, D)`` with ``J = Q diag(D) Q*``, ``Q`` isometric, ``D`` nonzero."""
        es = hermitian_eig(self.J)
        scale = float(np.max(np.abs(es.values))) if es.dim else 0.0
        keep = np.abs(es.values) > 1e-14 * scale if scale > 0 else np.zeros(es.dim, bool)
        return es.vectors[:, keep], es.values[keep]

    @property
    def rank(self) -> int:
        return int(self.factor[1].size)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.factor[1]))) if self.rank else 0.0

    def potential(self, frame: Frame) -> np.ndarray:
        """``V = F J F`` as a dense matrix."""
        k = frame.weights
        return k[:, None] * self.J * k[None, :]

    def absolute_sum(self, frame: Frame) -> float:
        """``sum_jk kappa_j kappa_k |J_jk|`` (finite at any truncation)."""
        k = frame.weights
        return float(np.sum(k[:, None] * np.abs(self.J) * k[None, :]))

    @classmethod
    def zero(cls, n: int) -> "Perturbation":
        return cls(np.zeros((n, n)))

    @classmethod
    def from_potential(cls, V, frame: Frame) -> "Perturbation":
        """``J = F^{-1} V F^{-1}`` for a potential given in the standard basis."""
        k = frame.weights
        return cls(np.asarray(V) / k[:, None] / k[None, :])

    @classmethod
    def random_lowrank(
        cls,
        n: int,
        rank: int,
        seed: int,
        support: int | None = None,
        norm: float = 1.0,
        complex_entries: bool = True,
    ) -> "Perturbation":
        """Random Hermitian ``J`` of given rank and operator norm.

        The range is spanned by ``rank`` orthonormal vectors supported on the
        first ``support`` coordinates; eigenvalues are drawn with random signs
        and rescaled so that the largest modulus equals ``norm``.
        """
        support = n if support is None else min(int(support), n)
        if not 0 <= rank <= support:
            raise ValueError("rank must lie in [0, support]")
        rng = np.random.default_rng(seed)
        if rank == 0:
            return cls.zero(n)
        X = rng.standard_normal((support, rank))
        if complex_entries:
            X = X + 1j * rng.standard_normal((support, rank))
        Q, _ = np.linalg.qr(X)
        vals = rng.uniform(0.3, 1.0, rank) * rng.choice([-1.0, 1.0], rank)
        vals *= norm / np.max(np.abs(vals))
        J = np.zeros((n, n), dtype=complex)
        J[:support, :support] = (Q * vals[None, :]) @ Q.conj().T
        return cls(hermitize(J))


# --------------------------------------------------------------------------- models


@dataclass(frozen=True)
class BoundaryT0:
    """Boundary value ``T_0(lambda+i0)`` together with a factor of its imaginary part.

    ``im_factor`` is an ``N x p`` matrix ``U`` with ``(1/pi) Im T_0 = U U*``.
    """

    lam: float
    T: np.ndarray
    im_factor: np.ndarray
    method: str
    est_error: float
    converged: bool


class OperatorModel(Protocol):
    def t0(self, z: complex, frame: Frame) -> np.ndarray: ...

    def boundary_t0(self, lam: float, frame: Frame) -> BoundaryT0: ...

    def admissible(self, lam: float) -> bool: ...


def _factor_from_dense_im(T: np.ndarray, floor: float) -> np.ndarray:
    """Factor ``U`` with ``U U* = (1/pi) Im T`` keeping eigenvalues above ``floor``."""
    phi = hermitize((T - T.conj().T) / (2j * np.pi))
    es = hermitian_eig(phi)
    keep = es.values > floor
    return es.vectors[:, keep] * np.sqrt(es.values[keep])[None, :]


def richardson_to_zero(sample, y0: float, K: int):
    """Extrapolate ``sample(y)`` to ``y = 0`` from ``y_k = y0 * 2**-k``.

    Returns the diagonal entry with the smallest successive difference, that
    difference (the error estimate) and the sequence of differences.
    """
    rows = [sample(y0)]
    diag = [rows[0]]
    diffs = []
    for k in range(1, K + 1):
        new = [sample(y0 * 2.0**-k)]
        for j in range(1, k + 1):
            new.append(new[j - 1] + (new[j - 1] - rows[j - 1]) / (2.0**j - 1.0))
        rows = new
        diag.append(rows[-1])
        diffs.append(max_abs(diag[-1] - diag[-2]))
    best = int(np.argmin(diffs))
    return diag[best + 1], diffs[best], np.array(diffs)


@dataclass(frozen=True, eq=False)
class FiniteHermitian:
    """Hermitian matrix model; the frame must have the same dimension."""

    H: np.ndarray
    y0: float = Y0
    ladder: int = K_LADDER

    def __post_init__(self):
        A = np.asarray(self.H, dtype=complex)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("H must be square")
        if not np.all(np.isfinite(A)):
            raise ValueError("H has non-finite entries")
        if max_abs(A - A.conj().T) > 1e-12 * max(1.0, max_abs(A)):
            raise ValueError("H must be Hermitian")
        A = hermitize(A)
        A.setflags(write=False)
        object.__setattr__(self, "H", A)

    @property
    def n(self) -> int:
        return int(self.H.shape[0])

    @cached_property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.H)

    def _check(self, frame: Frame):
        if frame.n != self.n:
            raise ValueError(f"frame dimension {frame.n} does not match H ({self.n})")

    def admissible(self, lam: float) -> bool:
        return bool(np.isfinite(lam))

    def t0(self, z: complex, frame: Frame) -> np.ndarray:
        self._check(frame)
        k = frame.weights
        X = np.linalg.solve(self.H - z * np.eye(self.n), np.diag(k).astype(complex))
        return k[:, None] * X

    def tr_direct(self, z: complex, frame: Frame, pert: Perturbation, r: float) -> np.ndarray:
        """``F (H_0 + r F J F - z)^{-1} F`` by a direct solve."""
        self._check(frame)
        k = frame.weights
        Hr = self.H + r * pert.potential(frame)
        X = np.linalg.solve(Hr - z * np.eye(self.n), np.diag(k).astype(complex))
        return k[:, None] * X

    def t0_spectral(self, z: complex, frame: Frame) -> np.ndarray:
        """``T_0(z)`` from the eigendecomposition of ``H`` (valid for real ``z`` off the spectrum)."""
        self._check(frame)
        w, V = np.linalg.eigh(self.H)
        FV = frame.weights[:, None] * V
        return (FV / (w - z)[None, :]) @ FV.conj().T

    def boundary_t0(self, lam: float, frame: Frame) -> BoundaryT0:
        self._check(frame)
        y0 = self.y0
        T, err, conv = None, np.inf, False
        # A smaller starting height rescues points within ~y0 of an eigenvalue.
        for _ in range(3):
            T, err, diffs = richardson_to_zero(
                lambda y: self.t0(lam + 1j * y, frame), y0, self.ladder
            )
            scale = max(1.0, max_abs(T))
            conv = bool(err <= EXTRAP_TOL * scale and diffs.min() < diffs[0])
            if conv:
                break
            y0 /= 64.0
        floor = max(10.0 * err, IM_NOISE_REL * max(1.0, op_norm(T)))
        U = _factor_from_dense_im(T, floor)
        return BoundaryT0(float(lam), T, U, "y_extrapolated", float(err), conv)


def zigzag_sites(n: int) -> np.ndarray:
    """Lattice sites ``0, 1, -1, 2, -2, ...`` for frame indices ``1..n``."""
    j = np.arange(n)
    return np.where(j % 2 == 1, (j + 1) // 2, -(j // 2))


@dataclass(frozen=True, eq=False)
class FreeJacobi:
    """Free discrete Laplacian on the integers; spectrum ``[-2, 2]``."""

    edge_guard: float = DELTA_EDGE

    def admissible(self, lam: float) -> bool:
        return bool(abs(lam) < 2.0 - self.edge_guard or abs(lam) > 2.0 + self.edge_guard)

    @staticmethod
    def _w(z: complex) -> complex:
        s = np.sqrt(complex(z) ** 2 - 4.0)
        w1, w2 = (z + s) / 2.0, (z - s) / 2.0
        return w1 if abs(w1) < abs(w2) else w2

    @staticmethod
    def green(n, m, z: complex) -> np.ndarray:
        """``<delta_n, (H - z)^{-1} delta_m>`` for ``Im z > 0`` or real ``|z| > 2``."""
        w = FreeJacobi._w(z)
        d = np.abs(np.asarray(n) - np.asarray(m))
        return w ** (d + 1) / (w * w - 1.0)

    @staticmethod
    def boundary_green(n, m, lam: float) -> np.ndarray:
        """``G(n, m; lambda + i0)`` for ``|lambda| < 2``: ``i e^{-ik|n-m|} / (2 sin k)``."""
        k = np.arccos(lam / 2.0)
        d = np.abs(np.asarray(n) - np.asarray(m))
        return 1j * np.exp(-1j * k * d) / (2.0 * np.sin(k))

    @staticmethod
    def _distances(n: int) -> np.ndarray:
        s = zigzag_sites(n)
        return np.abs(s[:, None] - s[None, :])

    def t0(self, z: complex, frame: Frame) -> np.ndarray:
        if not complex(z).imag > 0 and abs(complex(z).real) <= 2.0:
            raise ValueError("z must satisfy Im z > 0 (or be real outside [-2, 2])")
        w = self._w(z)
        d = self._distances(frame.n)
        k = frame.weights
        G = w ** (d + 1) / (w * w - 1.0)
        return k[:, None] * G * k[None, :]

    def boundary_t0(self, lam: float, frame: Frame) -> BoundaryT0:
        if not self.admissible(lam):
            raise NotInLambdaError(f"lambda={lam} is within {self.edge_guard} of a band edge")
        k = frame.weights
        if abs(lam) < 2.0:
            kk = np.arccos(lam / 2.0)
            sites = zigzag_sites(frame.n)
            d = np.abs(sites[:, None] - sites[None, :])
            T = (k[:, None] * k[None, :]) * (1j * np.exp(-1j * kk * d) / (2.0 * np.sin(kk)))
            c = 1.0 / np.sqrt(2.0 * np.pi * np.sin(kk))
            U = np.column_stack([k * np.cos(kk * sites), k * np.sin(kk * sites)]) * c
        else:
            T = self.t0(complex(lam), frame)
            U = np.zeros((frame.n, 0), dtype=complex)
        return BoundaryT0(float(lam), T, U.astype(complex), "closed_form", 0.0, True)

    def truncated_matrix(self, window: int) -> tuple[np.ndarray, np.ndarray]:
        """Dense Jacobi matrix on sites ``-window..window`` and the site labels."""
        sites = np.arange(-window, window + 1)
        n = sites.size
        H = np.zeros((n, n))
        i = np.arange(n - 1)
        H[i, i + 1] = H[i + 1, i] = 1.0
        return H, sites


@dataclass(frozen=True, eq=False)
class MultiplicationGrid:
    """Multiplication by ``x`` on ``L^2([a, b], C^m)`` plus optional point masses.

    Frame vector ``j`` has channel amplitudes ``g_{c j}(x)``, given by their
    values at ``K`` Gauss-Legendre nodes and continued as the interpolating
    polynomial. The spectral density matrix is
    ``rho_ij(x) = sum_c conj(g_ci(x)) g_cj(x)``.

    Attributes
    ----------
    interval : tuple of float
        Support ``(a, b)`` of the absolutely continuous part.
    amplitudes : ndarray, shape (K, m, N)
        Channel amplitudes at the nodes.
    atoms : tuple of (float, ndarray)
        Eigenvalues of ``H_0`` with the frame-vector overlaps ``<phi_j, psi>``.
    """

    interval: tuple[float, float]
    amplitudes: np.ndarray
    atoms: tuple = field(default=())
    guard: float = 1e-6

    def __post_init__(self):
        a, b = map(float, self.interval)
        if not b > a:
            raise ValueError("interval must satisfy a < b")
        g = np.asarray(self.amplitudes, dtype=complex)
        if g.ndim != 3:
            raise ValueError("amplitudes must have shape (K, m, N)")
        if not np.all(np.isfinite(g)):
            raise ValueError("amplitudes have non-finite entries")
        atoms = tuple((float(e), np.asarray(v, dtype=complex)) for e, v in self.atoms)
        for e, v in atoms:
            if v.shape != (g.shape[2],):
                raise ValueError("atom vectors must have length N")
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "amplitudes", g)
        object.__setattr__(self, "atoms", atoms)

    @staticmethod
    def gauss_nodes(interval, K: int) -> tuple[np.ndarray, np.ndarray]:
        a, b = interval
        t, w = npleg.leggauss(K)
        return 0.5 * (b - a) * t + 0.5 * (a + b), 0.5 * (b - a) * w

    @classmethod
    def from_functions(cls, interval, K: int, amp, atoms=()) -> "MultiplicationGrid":
        """Sample ``amp(x) -> (m, N)`` at ``K`` Gauss-Legendre nodes."""
        x, _ = cls.gauss_nodes(interval, K)
        g = np.stack([np.asarray(amp(xk), dtype=complex) for xk in x])
        return cls(tuple(interval), g, tuple(atoms))

    @classmethod
    def random(cls, interval, n: int, channels: int, degree: int, seed: int, K: int | None = None):
        """Random smooth amplitudes: complex polynomials of the given degree."""
        rng = np.random.default_rng(seed)
        K = K or max(2 * degree + 2, 8)
        coef = rng.standard_normal((degree + 1, channels, n)) + 1j * rng.standard_normal(
            (degree + 1, channels, n)
        )
        coef /= (1.0 + np.arange(degree + 1))[:, None, None] ** 2
        a, b = interval

        def amp(x):
            t = (2.0 * x - a - b) / (b - a)
            return np.tensordot(npleg.legvander(np.array([t]), degree)[0], coef, axes=1)

        return cls.from_functions(interval, K, amp)

    @property
    def n(self) -> int:
        return int(self.amplitudes.shape[2])

    @property
    def channels(self) -> int:
        return int(self.amplitudes.shape[1])

    @cached_property
    def _nodes(self):
        return self.gauss_nodes(self.interval, self.amplitudes.shape[0])

    @cached_property
    def _coef(self) -> np.ndarray:
        """Legendre coefficients of each amplitude, shape (K, m, N)."""
        K = self.amplitudes.shape[0]
        t, w = npleg.leggauss(K)
        P = npleg.legvander(t, K - 1)  # (K nodes, K degrees)
        norm = (2 * np.arange(K) + 1) / 2.0
        return np.einsum("kn,k,kcj->ncj", P, w, self.amplitudes) * norm[:, None, None]

    def _t(self, z):
        a, b = self.interval
        return (2.0 * z - a - b) / (b - a)

    def amplitude(self, z: complex) -> tuple[np.ndarray, np.ndarray]:
        """Continuations of ``g`` and ``conj(g)`` to complex ``z``, each (m, N)."""
        P = npleg.legvander(np.array([self._t(complex(z))]), self._coef.shape[0] - 1)[0]
        g = np.tensordot(P, self._coef, axes=1)
        gbar = np.tensordot(P, self._coef.conj(), axes=1)
        return g, gbar

    def _amplitude_derivative(self, z: complex):
        a, b = self.interval
        c = npleg.legder(self._coef, axis=0) * (2.0 / (b - a))
        P = npleg.legvander(np.array([self._t(complex(z))]), c.shape[0] - 1)[0]
        return np.tensordot(P, c, axes=1), np.tensordot(P, c.conj(), axes=1)

    def density(self, x: complex) -> np.ndarray:
        """``rho(x)`` (continued analytically for complex ``x``)."""
        g, gbar = self.amplitude(x)
        return gbar.T @ g

    def admissible(self, lam: float) -> bool:
        a, b = self.interval
        pts = [a, b] + [e for e, _ in self.atoms]
        return bool(min(abs(lam - p) for p in pts) > self.guard)

    def _log_ratio(self, z: complex, boundary: bool) -> complex:
        """``int_a^b dx / (x - z)``, with the ``+i0`` branch when ``boundary``."""
        a, b = self.interval
        if boundary:
            lam = float(np.real(z))
            val = np.log(abs(b - lam)) - np.log(abs(a - lam))
            return complex(val, np.pi if a < lam < b else 0.0)
        return complex(np.log(b - z) - np.log(a - z))

    def _borel(self, z: complex, boundary: bool) -> np.ndarray:
        x, w = self._nodes
        g = self.amplitudes
        rho_nodes = np.einsum("kci,kcj->kij", g.conj(), g)
        rho_z = self.density(z)
        diff = x - z
        close = np.abs(diff) < 1e-12
        coeff = np.where(close, 0.0, w / np.where(close, 1.0, diff))
        out = np.einsum("k,kij->ij", coeff, rho_nodes) - np.sum(coeff) * rho_z
        if np.any(close):
            dg, dgbar = self._amplitude_derivative(z)
            g_z, gbar_z = self.amplitude(z)
            drho = dgbar.T @ g_z + gbar_z.T @ dg
            out = out + np.sum(w[close]) * drho
        out = out + rho_z * self._log_ratio(z, boundary)
        for e, v in self.atoms:
            out = out + np.outer(v.conj(), v) / (e - z)
        return out

    def t0(self, z: complex, frame: Frame) -> np.ndarray:
        if frame.n != self.n:
            raise ValueError("frame dimension does not match the amplitudes")
        if not complex(z).imag > 0:
            raise ValueError("Im z must be positive")
        k = frame.weights
        return k[:, None] * self._borel(complex(z), boundary=False) * k[None, :]

    def boundary_t0(self, lam: float, frame: Frame) -> BoundaryT0:
        if frame.n != self.n:
            raise ValueError("frame dimension does not match the amplitudes")
        if not self.admissible(lam):
            raise NotInLambdaError(f"lambda={lam} sits on an endpoint or atom")
        k = frame.weights
        T = k[:, None] * self._borel(complex(lam), boundary=True) * k[None, :]
        a, b = self.interval
        if a < lam < b:
            _, gbar = self.amplitude(lam)
            U = (k[:, None] * gbar.T).astype(complex)
        else:
            U = np.zeros((self.n, 0), dtype=complex)
        return BoundaryT0(float(lam), T, U, "closed_form", 0.0, True)


# --------------------------------------------------------------------------- resolvents


@dataclass(frozen=True, eq=False)
class SandwichedResolvent:
    """``T_r(z) = F R_z(H_r) F`` at one point.

    ``im_factor`` (boundary values only) satisfies ``U U* = (1/pi) Im T``.
    ``member`` is the declared membership of ``lambda`` in ``Lambda(H_r; F)``.
    """

    z: complex
    r: float
    T: np.ndarray
    method: str
    est_error: float
    member: bool = True
    sigma_min: float = 1.0
    im_factor: np.ndarray | None = None
    tail_bound: float = 0.0

    @property
    def is_boundary(self) -> bool:
        return complex(self.z).imag == 0.0

    @property
    def im(self) -> np.ndarray:
        return (self.T - self.T.conj().T) / 2j


def sandwiched_resolvent(model, frame: Frame, pert: Perturbation, r: float, z: complex) -> SandwichedResolvent:
    """``T_r(z)`` for ``Im z > 0``.

    Finite models use a direct solve with ``H_r``; the others assemble
    ``T_0(z)`` in closed form and apply ``T_r = T_0 (I + rJT_0)^{-1}``.
    """
    z = complex(z)
    if not z.imag > 0:
        raise ValueError("sandwiched_resolvent needs Im z > 0; use boundary_resolvent for y = 0")
    if isinstance(model, FiniteHermitian):
        T = model.tr_direct(z, frame, pert, r)
        method = "finite_inverse"
    else:
        T0 = model.t0(z, frame)
        M = np.eye(frame.n) + r * pert.J @ T0
        if np.linalg.cond(M) > 1e12:
            raise RuntimeError("I + rJT_0 singular at Im z > 0: model assembly is inconsistent")
        T = np.linalg.solve(M.T, T0.T).T
        method = "closed_form"
    return SandwichedResolvent(z, float(r), T, method, 0.0, tail_bound=frame.tail_bound)


class BoundaryFamily:
    """Boundary values ``T_r(lambda + i0)`` for all real couplings at a fixed ``lambda``.

    ``T_0(lambda+i0)`` and a factor of its imaginary part are computed once;
    every coupling is then reached through the low-rank form of
    ``T_r = T_0 (I + rJT_0)^{-1}`` with ``J = Q D Q*``.
    """

    def __init__(self, model, frame: Frame, pert: Perturbation, lam: float, eps_res: float = EPS_RES):
        if pert.n != frame.n:
            raise ValueError("perturbation and frame dimensions differ")
        self.model, self.frame, self.pert = model, frame, pert
        self.lam = float(lam)
        self.eps_res = eps_res
        b = model.boundary_t0(self.lam, frame)
        self.base = b
        self.T0 = b.T
        self.U0 = b.im_factor
        self.Q, self.D = pert.factor
        self.QT0 = self.Q.conj().T @ self.T0  # m x N
        self.T0Q = self.T0 @ self.Q  # N x m
        self.K0 = self.QT0 @ self.Q  # m x m
        self.QU0 = self.Q.conj().T @ self.U0  # m x p
        self._cache: dict = {}

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def m(self) -> int:
        return int(self.D.size)

    def sigma_min(self, r: float) -> float:
        """Smallest singular value of ``I + rJT_0(lambda + i0)``."""
        if self.m == 0 or r == 0.0:
            return 1.0
        return sigma_min_identity_plus_lowrank(self.Q, (r * self.D)[:, None] * self.QT0)

    def _G(self, r: float, adjoint: bool = False) -> np.ndarray:
        """``D (I + r K D)^{-1}`` with ``K = Q* T_0 Q`` (or ``Q* T_0* Q``)."""
        K = self.K0.conj().T if adjoint else self.K0
        A = np.eye(self.m) + r * K * self.D[None, :]
        return self.D[:, None] * np.linalg.inv(A)

    def check(self, r: float) -> float:
        """Raise :class:`ResonanceError` if ``r`` is resonant, else return ``sigma_min``."""
        if not self.base.converged:
            raise NotInLambdaError(
                f"boundary value at lambda={self.lam} did not converge "
                f"(est_error {self.base.est_error:.2e})"
            )
        s = self.sigma_min(r)
        if s < self.eps_res:
            raise ResonanceError(self.lam, r, s)
        return s

    def T(self, r: float, sign: int = +1) -> np.ndarray:
        """``T_r(lambda + i0)`` (``sign=+1``) or ``T_r(lambda - i0) = T_r(lambda+i0)*``."""
        key = ("T", float(r))
        if key not in self._cache:
            if self.m == 0 or r == 0.0:
                Tr = self.T0
            else:
                Tr = self.T0 - r * (self.T0Q @ self._G(r)) @ self.QT0
            self._cache[key] = Tr
        Tr = self._cache[key]
        return Tr if sign > 0 else Tr.conj().T

    def QT(self, r: float) -> np.ndarray:
        """``Q* T_r(lambda + i0)`` (m x N) without forming ``T_r``."""
        if self.m == 0 or r == 0.0:
            return self.QT0
        return self.QT0 - r * (self.K0 @ self._G(r)) @ self.QT0

    def im_factor(self, r: float) -> np.ndarray:
        """``U_r = (I + rT_0*J)^{-1} U_0`` so that ``(1/pi) Im T_r = U_r U_r*``."""
        key = ("U", float(r))
        if key not in self._cache:
            if self.m == 0 or r == 0.0 or self.U0.shape[1] == 0:
                Ur = self.U0
            else:
                Ur = self.U0 - r * self.QT0.conj().T @ (self._G(r, adjoint=True) @ self.QU0)
            self._cache[key] = Ur
        return self._cache[key]

    def resolvent(self, r: float) -> SandwichedResolvent:
        """Checked boundary value ``T_r(lambda + i0)``; raises on resonance."""
        s = self.check(r)
        return SandwichedResolvent(
            complex(self.lam, 0.0),
            float(r),
            self.T(r),
            self.base.method,
            self.base.est_error,
            member=True,
            sigma_min=s,
            im_factor=self.im_factor(r),
            tail_bound=self.frame.tail_bound,
        )

    def aronszajn_residual(self, r: float) -> float:
        """``||T_r (I + rJT_0) - T_0||`` relative to ``max(1, ||T_0||)``."""
        Tr = self.T(r)
        R = Tr + r * (Tr @ self.pert.J) @ self.T0 - self.T0
        return max_abs(R) / max(1.0, max_abs(self.T0))

    def clear(self):
        self._cache.clear()


def boundary_resolvent(model, frame: Frame, pert: Perturbation, r: float, lam: float) -> SandwichedResolvent:
    """``T_r(lambda + i0)`` with membership and resonance checks.

    Raises
    ------
    ResonanceError
        If ``sigma_min(I + rJT_0(lambda+i0)) < EPS_RES``.

    Notes
    -----
    A boundary value whose extrapolation did not converge is returned with
    ``member=False`` rather than raised; :func:`framedscat.boundary.fiber_data`
    refuses such input.
    """
    fam = BoundaryFamily(model, frame, pert, lam)
    if not fam.base.converged:
        return SandwichedResolvent(
            complex(lam, 0.0), float(r), fam.T(r), fam.base.method, fam.base.est_error,
            member=False, sigma_min=fam.sigma_min(r), im_factor=None, tail_bound=frame.tail_bound,
        )
    return fam.resolvent(r)
