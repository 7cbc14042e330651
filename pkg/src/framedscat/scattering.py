"""Wave matrices, scattering matrices by three routes, and resonance scans.

All functions take a :class:`~framedscat.models.BoundaryFamily`, which fixes
the model, frame, perturbation and spectral point ``lambda``. Fiber
coordinates at coupling ``r`` are those of the fiber basis of
``eta_r = sqrt((1/pi) Im T_r(lambda + i0))``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boundary import FiberData, fiber_from_factor
from .linalg_core import hermitize, max_abs, op_norm
from .models import IM_NOISE_REL, BoundaryFamily, ResonanceError
from .texp import EPS_ODE, texp

TOL_UNITARY = 1e-6
TOL_WAVE = 1e-6
TOL_TWO_FORM = 1e-9
BRIDGE_WIDTH = 1e-3


class WaveEquationError(RuntimeError):
    """The defining equation of a wave matrix is not satisfied."""


class BridgeError(RuntimeError):
    """Interpolation windows of two resonances overlap."""


@dataclass(frozen=True, eq=False)
class WaveMatrix:
    sign: int
    lam: float
    r0: float
    r1: float
    W: np.ndarray
    residual: float

    def unitarity(self) -> float:
        W = self.W
        a = max_abs(W.conj().T @ W - np.eye(W.shape[1]))
        b = max_abs(W @ W.conj().T - np.eye(W.shape[0]))
        return max(a, b)


@dataclass(frozen=True, eq=False)
class ScatteringMatrix:
    lam: float
    r: float
    S: np.ndarray
    route: str
    eigenphases: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def unitarity(self) -> float:
        S = self.S
        return max_abs(S.conj().T @ S - np.eye(S.shape[0]))

    def det(self) -> complex:
        return complex(np.linalg.det(self.S)) if self.S.size else 1.0 + 0.0j


@dataclass(frozen=True, eq=False)
class InfSM:
    lam: float
    s: float
    Pi: np.ndarray
    trace: float


@dataclass(frozen=True, eq=False)
class ResonanceScan:
    lam: float
    r_window: tuple[float, float]
    resonances: list
    sign_data: np.ndarray  # columns: r, sigma_min


def _make_sm(fam, r, S, route) -> ScatteringMatrix:
    ph = np.sort(np.angle(np.linalg.eigvals(S))) if S.size else np.zeros(0)
    return ScatteringMatrix(fam.lam, float(r), S, route, ph)


def fiber(fam: BoundaryFamily, r: float) -> FiberData:
    """Checked fiber data at coupling ``r`` (raises on resonance)."""
    key = ("F", float(r))
    if key not in fam._cache:
        fam.check(r)
        floor = IM_NOISE_REL * max(1.0, op_norm(fam.T0)) / np.pi if fam.base.method != "closed_form" else 0.0
        fam._cache[key] = fiber_from_factor(fam.im_factor(r), fam.lam, r, floor=floor)
    return fam._cache[key]


def _TQ(fam: BoundaryFamily, r: float, sign: int) -> np.ndarray:
    """``T_r(lambda + sign*i0) Q`` (N x m)."""
    if sign > 0:
        if fam.m == 0 or r == 0.0:
            return fam.T0Q
        return fam.T0Q - r * fam.T0Q @ (fam._G(r) @ fam.K0)
    return fam.QT(r).conj().T


def a_pm(fam: BoundaryFamily, r0: float, r1: float, sign: int, tol: float = TOL_TWO_FORM) -> np.ndarray:
    """Frame coordinates of the form ``a_pm`` between couplings ``r0`` and ``r1``.

    Computes ``[I - T_{r1}(lambda -/+ i0) dJ] (1/pi) Im T_{r0}`` and the second
    form ``(1/pi) Im T_{r1} [I + dJ T_{r0}(lambda +/- i0)]``, ``dJ = (r1 - r0) J``,
    and checks that they agree.
    """
    fam.check(r0)
    fam.check(r1)
    dr = r1 - r0
    Q, D = fam.Q, fam.D
    T0 = fam.T(r0)
    T1 = fam.T(r1)
    phi0 = hermitize((T0 - T0.conj().T) / (2j * np.pi))
    phi1 = hermitize((T1 - T1.conj().T) / (2j * np.pi))
    if fam.m == 0 or dr == 0.0:
        first = phi0
        second = phi1
    else:
        T1m = T1.conj().T if sign > 0 else T1
        T0p = T0 if sign > 0 else T0.conj().T
        first = phi0 - dr * ((T1m @ Q) * D[None, :]) @ (Q.conj().T @ phi0)
        second = phi1 + dr * ((phi1 @ Q) * D[None, :]) @ (Q.conj().T @ T0p)
    dev = max_abs(first - second)
    if dev > tol * max(1.0, max_abs(first)):
        raise WaveEquationError(f"the two forms of a_pm disagree by {dev:.3e}")
    return first


def _wave_core(fam: BoundaryFamily, r0: float, r1: float, sign: int):
    f0, f1 = fiber(fam, r0), fiber(fam, r1)
    dr = r1 - r0
    if dr == 0.0:
        return np.eye(f0.rank, dtype=complex), f0, f1
    E0 = f0.embed
    if fam.m == 0 or dr == 0.0:
        AP = E0
    else:
        # a_pm pinv(eta_0) B_0 = eta_0 B_0 - dr T_{r1}(lambda -/+ i0) Q D Q* eta_0 B_0
        TQ = _TQ(fam, r1, -sign)
        AP = E0 - dr * (TQ * fam.D[None, :]) @ (fam.Q.conj().T @ E0)
    W = f1.pinv_embed.conj().T @ AP
    return W, f0, f1


def wave_matrix(fam: BoundaryFamily, r0: float, r1: float, sign: int,
                with_residual: bool = True, tol_wave: float = TOL_WAVE) -> WaveMatrix:
    """Wave matrix ``w_pm(lambda; H_{r1}, H_{r0})`` in fiber coordinates.

    ``W = B_1* pinv(eta_1) a_pm pinv(eta_0) B_0``. The stored residual is
    ``||eta_1 B_1 W B_0* eta_0 - a_pm|| / ||a_pm||``, which vanishes only if
    ``a_pm`` lives entirely on the two fibers.
    """
    W, f0, f1 = _wave_core(fam, r0, r1, sign)
    res = 0.0
    if with_residual:
        A = a_pm(fam, r0, r1, sign)
        R = f1.embed @ W @ f0.embed.conj().T - A
        res = max_abs(R) / max(max_abs(A), 1e-300) if max_abs(A) > 0 else max_abs(R)
        if res > tol_wave:
            raise WaveEquationError(
                f"wave-matrix defining equation not satisfied (residual {res:.3e}); "
                "truncation too small or lambda near a resonance"
            )
    return WaveMatrix(int(np.sign(sign)), fam.lam, float(r0), float(r1), W, float(res))


def scattering_stationary(fam: BoundaryFamily, r: float) -> ScatteringMatrix:
    """``S = I - 2 pi i B_0* eta_0 rJ (I + T_0 rJ)^{-1} eta_0 B_0``."""
    fam.check(r)
    f0 = fiber(fam, 0.0)
    d = f0.rank
    if d == 0 or fam.m == 0 or r == 0.0:
        return _make_sm(fam, r, np.eye(d, dtype=complex), "stationary")
    QE = fam.Q.conj().T @ f0.embed  # m x d
    S = np.eye(d) - 2j * np.pi * r * QE.conj().T @ fam._G(r) @ QE
    return _make_sm(fam, r, S, "stationary")


def scattering_wave_product(fam: BoundaryFamily, r: float) -> ScatteringMatrix:
    """``S = w_+(r, 0)* w_-(r, 0)``."""
    wp = wave_matrix(fam, 0.0, r, +1, with_residual=False)
    wm = wave_matrix(fam, 0.0, r, -1, with_residual=False)
    return _make_sm(fam, r, wp.W.conj().T @ wm.W, "wave_product")


def inf_scattering_matrix(fam: BoundaryFamily, s: float) -> InfSM:
    """``Pi_s = B_s* eta_s J eta_s B_s`` on the fiber at coupling ``s``."""
    fs = fiber(fam, s)
    if fs.rank == 0 or fam.m == 0:
        Pi = np.zeros((fs.rank, fs.rank), dtype=complex)
    else:
        QE = fam.Q.conj().T @ fs.embed
        Pi = hermitize(QE.conj().T @ (QE * fam.D[:, None]))
    return InfSM(fam.lam, float(s), Pi, float(np.real(np.trace(Pi))))


def texp_integrand(fam: BoundaryFamily, s: float) -> np.ndarray:
    """``w_+(s, 0)* Pi_s w_+(s, 0)`` on fiber(0)."""
    W, _, _ = _wave_core(fam, 0.0, s, +1)
    Pi = inf_scattering_matrix(fam, s).Pi
    return hermitize(W.conj().T @ Pi @ W)


class Bridged:
    """Evaluate ``f`` with resonance points bridged by a local quadratic.

    Inside ``|s - r*| < width`` the value is the least-squares quadratic
    through ``f`` at ``r* +/- width`` and ``r* +/- 2 width`` (a five-point
    window with the resonant centre removed).
    """

    def __init__(self, f, resonances, width: float = BRIDGE_WIDTH):
        self.f = f
        self.res = sorted(float(r) for r in resonances)
        self.width = width
        for a, b in zip(self.res, self.res[1:]):
            if b - a < 4.0 * width:
                raise BridgeError(
                    f"resonances {a:.6g} and {b:.6g} closer than the interpolation window"
                )
        self._fits: dict = {}

    def _fit(self, rs):
        if rs not in self._fits:
            h = self.width
            xs = np.array([-2.0, -1.0, 1.0, 2.0]) * h
            ys = np.stack([np.asarray(self.f(rs + x)) for x in xs])
            V = np.vander(xs, 3)
            flat = ys.reshape(4, -1)
            coef, *_ = np.linalg.lstsq(V, flat, rcond=None)
            self._fits[rs] = (coef, ys.shape[1:])
        return self._fits[rs]

    def __call__(self, s):
        for rs in self.res:
            if abs(s - rs) < self.width:
                coef, shape = self._fit(rs)
                x = s - rs
                return (np.array([x * x, x, 1.0]) @ coef).reshape(shape)
        return self.f(s)

    def fit_residual(self, rs) -> float:
        """Max deviation of the quadratic at the four fitting points."""
        coef, shape = self._fit(rs)
        h = self.width
        xs = np.array([-2.0, -1.0, 1.0, 2.0]) * h
        ys = np.stack([np.asarray(self.f(rs + x)).reshape(-1) for x in xs])
        return float(np.max(np.abs(np.vander(xs, 3) @ coef - ys)))


def scattering_texp(fam: BoundaryFamily, r: float, s_steps: int = 4, eps_ode: float = EPS_ODE,
                    resonances=None, r_start: float = 0.0, S_start=None) -> ScatteringMatrix:
    """``S(r) = Texp(-2 pi i int_0^r w_+(s,0)* Pi_s w_+(s,0) ds)``.

    ``r_start`` and ``S_start`` continue an earlier result, so a ladder of
    couplings shares one ordered product.
    """
    if resonances is None:
        lo, hi = sorted((r_start, r))
        resonances = [x for x, _ in resonance_scan(fam, (lo, hi), 64).resonances] if hi > lo else []
    d = fiber(fam, 0.0).rank
    S0 = np.eye(d, dtype=complex) if S_start is None else S_start
    if d == 0 or r == r_start:
        return _make_sm(fam, r, S0, "texp")
    f = Bridged(lambda s: 2.0 * np.pi * texp_integrand(fam, s), resonances)
    res = texp(f, r_start, r, eps_ode=eps_ode, n0=s_steps)
    return _make_sm(fam, r, res.X @ S0, "texp")


def golden_section(f, a: float, b: float, tol: float) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]`` down to bracket width ``tol``."""
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    best = min((fc, c), (fd, d), (f(x), x))
    return float(best[1]), float(best[0])


def resonance_scan(fam: BoundaryFamily, r_window, n_samples: int = 200,
                   r_tol: float = 1e-10) -> ResonanceScan:
    """Locate couplings where ``1 + rJT_0(lambda + i0)`` is singular.

    ``sigma_min`` is sampled on a uniform grid; each interior local minimum
    is refined by golden-section search to ``r_tol`` and
    accepted when ``sigma_min`` falls below ``eps_res``.
    """
    lo, hi = map(float, r_window)
    rs = np.linspace(lo, hi, max(int(n_samples), 3))
    sig = np.array([fam.sigma_min(x) for x in rs])
    found = []
    step = rs[1] - rs[0]
    for i in range(len(rs)):
        left = sig[i - 1] if i > 0 else np.inf
        right = sig[i + 1] if i < len(rs) - 1 else np.inf
        if not (sig[i] <= left and sig[i] <= right):
            continue
        a, b = rs[max(i - 1, 0)], rs[min(i + 1, len(rs) - 1)]
        rstar, smin = golden_section(fam.sigma_min, a, b, r_tol)
        if smin < fam.eps_res:
            if not any(abs(rstar - q) <= step for q, _ in found):
                found.append((rstar, smin))
    return ResonanceScan(fam.lam, (lo, hi), found, np.column_stack([rs, sig]))


def tilde_s_full(T0z: np.ndarray, J: np.ndarray, r: float) -> np.ndarray:
    """``S~(z, r) = I - 2ir sqrt(Im T_0) J (I + rT_0 J)^{-1} sqrt(Im T_0)`` (N x N)."""
    from .linalg_core import psd_sqrt

    n = T0z.shape[0]
    eta = psd_sqrt((T0z - T0z.conj().T) / 2j)
    M = np.linalg.solve((np.eye(n) + r * T0z @ J).T, J.T).T  # J (I + r T0 J)^{-1}
    return np.eye(n) - 2j * r * eta @ M @ eta


def tilde_s_reduced(QT0Q: np.ndarray, QImQ: np.ndarray, D: np.ndarray, r: float) -> np.ndarray:
    """The ``m x m`` matrix carrying the nontrivial eigenvalues of ``S~(z, r)``.

    ``I - 2ir (Q* Im T_0 Q) D (I + r Q* T_0 Q D)^{-1}`` with ``J = Q D Q*``.
    """
    m = D.size
    G = D[:, None] * np.linalg.inv(np.eye(m) + r * QT0Q * D[None, :])
    return np.eye(m) - 2j * r * QImQ @ G
