"""Spectral shift function: absolutely continuous part, mu-invariants, total and singular parts.

Two independent routes give the absolutely continuous part:

* the coupling integral of ``Tr Pi_s`` (adaptive Simpson), and
* the continuous argument of ``det S(lambda; H_s, H_0)`` along an ``s``-ladder.

The total is read off the eigenphases of ``S~(lambda + i0, r)`` continued
from the upper half plane, where the eigenvalues of ``S~`` are all 1 at
``r = 0``. Their exact ``theta``-average gives ``xi``; the integer-valued
floor counts give ``mu`` and ``mu_a``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg_core import fredholm_det
from .models import BoundaryFamily, FiniteHermitian, Frame, Perturbation, ResonanceError
from .phases import PhaseTracker, TrackingError, eig_unitary_like, track_path, wrap
from .scattering import Bridged, inf_scattering_matrix, resonance_scan, scattering_stationary, tilde_s_reduced

TOL_ROUTE = 1e-4
SIMPSON_TOL = 1e-10
SIMPSON_DEPTH = 14
THETA_POINTS = 64
R_STEPS_LOGDET = 256
R_STEPS_MU = 512
Y_TRACK = 1.0
Y_FLOOR = 1e-11


@dataclass(frozen=True)
class QuadResult:
    value: float
    est_error: float
    converged: bool
    evaluations: int


def adaptive_simpson(f, a: float, b: float, tol: float = SIMPSON_TOL,
                     max_depth: int = SIMPSON_DEPTH, initial: int = 8) -> QuadResult:
    """Adaptive Simpson quadrature with local Richardson correction.

    The interval is first split into ``initial`` panels; each panel is
    bisected until the two-level difference drops below its share of
    ``tol`` or ``max_depth`` bisections have been spent.
    """
    if a == b:
        return QuadResult(0.0, 0.0, True, 0)
    cache: dict = {}

    def F(x):
        if x not in cache:
            cache[x] = float(f(x))
        return cache[x]

    ok = True

    def rec(a, fa, m, fm, b, fb, whole, tol, depth):
        nonlocal ok
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = F(lm), F(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0, abs(delta) / 15.0
        if depth >= max_depth:
            ok = False
            return left + right + delta / 15.0, abs(delta) / 15.0
        v1, e1 = rec(a, fa, lm, flm, m, fm, left, 0.5 * tol, depth + 1)
        v2, e2 = rec(m, fm, rm, frm, b, fb, right, 0.5 * tol, depth + 1)
        return v1 + v2, e1 + e2

    edges = np.linspace(a, b, initial + 1)
    total, err = 0.0, 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        flo, fmid, fhi = F(lo), F(mid), F(hi)
        whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
        v, e = rec(lo, flo, mid, fmid, hi, fhi, whole, tol / initial, 0)
        total += v
        err += e
    return QuadResult(float(total), float(err), ok, len(cache))


def _resonances(fam: BoundaryFamily, lo: float, hi: float) -> list[float]:
    if hi <= lo or fam.m == 0:
        return []
    return [r for r, _ in resonance_scan(fam, (lo, hi), 200).resonances]


def xi_ac_integral(fam: BoundaryFamily, r_end: float, r_start: float = 0.0,
                   tol: float = SIMPSON_TOL, resonances=None) -> QuadResult:
    """``int_{r_start}^{r_end} Tr Pi_s ds`` with resonances bridged."""
    if r_end == r_start or fam.m == 0:
        return QuadResult(0.0, 0.0, True, 0)
    lo, hi = sorted((r_start, r_end))
    if resonances is None:
        resonances = _resonances(fam, lo, hi)
    f = Bridged(lambda s: inf_scattering_matrix(fam, s).trace, resonances)
    q = adaptive_simpson(f, r_start, r_end, tol=tol)
    return q


def xi_ac_logdet(fam: BoundaryFamily, r_end: float, r_steps: int = R_STEPS_LOGDET,
                 min_step: float = 1e-9, r_start: float = 0.0) -> float:
    """``-(1/2 pi) * (continuous arg det S(lambda; H_s, H_0))`` from ``r_start`` to ``r_end``.

    Steps whose argument increment reaches ``pi/2`` are halved; a resonant
    ladder point is stepped over by a thousandth of a step.
    """
    if r_end == r_start or fam.m == 0:
        return 0.0

    def det_at(s):
        S = scattering_stationary(fam, s).S
        return fredholm_det(S - np.eye(S.shape[0]))

    nominal = (r_end - r_start) / r_steps
    s, arg = r_start, 0.0
    prev = det_at(s)
    for k in range(1, r_steps + 1):
        target = r_start + k * nominal if k < r_steps else r_end
        while s != target:
            h = target - s
            while True:
                cand = target if h == target - s else s + h
                try:
                    cur = det_at(cand)
                except ResonanceError:
                    if cand == target and k < r_steps:
                        target = target + 1e-3 * nominal
                    h *= 0.5
                    continue
                dphi = float(np.angle(cur / prev))
                if abs(dphi) < 0.5 * np.pi:
                    break
                h *= 0.5
                if abs(h) < min_step:
                    raise TrackingError(f"branch tracking failed near resonance s={s!r}")
            arg += dphi
            prev, s = cur, cand
    return -arg / (2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class MuProfile:
    """Eigenphase data and the integer invariants ``mu``, ``mu_a``, ``mu_s`` at one ``lambda``.

    ``theta_star`` holds the lifted eigenphases of ``S(lambda; H_r, H_0)`` along
    the ``r``-ladder and ``theta_tilde`` those of ``S~``: first along ``r`` at
    height ``y_track``, then down to ``y = 0`` at ``r_end``.
    """

    lam: float
    r_end: float
    theta_grid: np.ndarray
    mu: np.ndarray
    mu_a: np.ndarray
    mu_s: int
    mu_s_spread: int
    theta_star: tuple
    theta_tilde: tuple
    theta_final: np.ndarray
    theta_star_final: np.ndarray
    shifted_points: tuple = field(default=())

    @property
    def xi(self) -> float:
        """``-(1/2 pi) int mu dtheta``, integrated exactly (= ``-sum theta_j / 2 pi``)."""
        return float(-np.sum(self.theta_final) / (2.0 * np.pi))

    @property
    def xi_a(self) -> float:
        return float(-np.sum(self.theta_star_final) / (2.0 * np.pi))

    @property
    def xi_grid(self) -> float:
        """Midpoint-rule value ``-(1/M) sum_theta mu(theta)``."""
        return float(-np.mean(self.mu))


def floor_count(theta_grid: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """``-sum_j floor((theta - theta_j) / 2 pi)`` for each grid angle."""
    if phases.size == 0:
        return np.zeros(theta_grid.size, dtype=int)
    q = np.floor((theta_grid[:, None] - phases[None, :]) / (2.0 * np.pi))
    return -np.sum(q, axis=1).astype(int)


def default_theta_grid(M: int = THETA_POINTS) -> np.ndarray:
    """Cell midpoints ``2 pi (k + 1/2) / M``; keeps ``theta = 0`` off the grid."""
    return 2.0 * np.pi * (np.arange(M) + 0.5) / M


def _t0_at(fam: BoundaryFamily, y: float):
    """``(Q* T_0 Q, Q* Im T_0 Q)`` at ``lambda + iy`` (``y = 0``: boundary value)."""
    Q = fam.Q
    if y == 0.0:
        QU = fam.QU0
        return fam.K0, np.pi * (QU @ QU.conj().T)
    T = fam.model.t0(complex(fam.lam, y), fam.frame)
    K = Q.conj().T @ T @ Q
    return K, (K - K.conj().T) / 2j


def mu_invariants(fam: BoundaryFamily, r_end: float, theta_grid=None, r_steps: int = R_STEPS_MU,
                  y_track: float = Y_TRACK, max_jump: float = 0.5) -> MuProfile:
    """Eigenphase flows and the invariants ``mu``, ``mu_a``, ``mu_s``.

    The nontrivial eigenvalues of the ``N x N`` matrix ``S~`` are those of the
    ``m x m`` reduction :func:`~framedscat.scattering.tilde_s_reduced`; the
    remaining eigenvalues are exactly 1 and contribute nothing to the counts.
    """
    theta_grid = default_theta_grid() if theta_grid is None else np.asarray(theta_grid, float)
    m, D = fam.m, fam.D
    if m == 0 or r_end == 0.0:
        z = np.zeros(theta_grid.size, dtype=int)
        return MuProfile(fam.lam, float(r_end), theta_grid, z, z.copy(), 0, 0,
                         ((0.0,), (np.zeros(0),)), ((0.0,), (np.zeros(0),)),
                         np.zeros(m), np.zeros(0))
    fam.check(r_end)

    # theta*_j: eigenphases of S(lambda; H_r, H_0) along r at the boundary
    d0 = scattering_stationary(fam, 0.0).S.shape[0]
    skip = lambda r: fam.sigma_min(r) < fam.eps_res
    ts_star, p_star = track_path(lambda r: scattering_stationary(fam, r).S, 0.0, r_end, r_steps,
                                 np.zeros(d0), np.eye(d0, dtype=complex), max_jump, skip=skip)

    # theta_j: S~ along r at height y_track, then down to the real axis
    K, ImK = _t0_at(fam, y_track)
    ts_r, p_r = track_path(lambda r: tilde_s_reduced(K, ImK, D, r), 0.0, r_end, r_steps,
                           np.zeros(m), np.eye(m, dtype=complex), max_jump)
    w, V = eig_unitary_like(tilde_s_reduced(K, ImK, D, r_end))
    # re-synchronize eigenvectors with the lifted phases at the end of the r-leg
    lifted = p_r[-1]
    tr = PhaseTracker(lifted, _align_vectors(lifted, w, V), max_jump)
    ys = [y_track]
    py = [tr.phases.copy()]
    log_y, log_floor = np.log(y_track), np.log(Y_FLOOR)
    step = np.log(2.0)
    cur = log_y
    while True:
        nxt = cur - step
        final = nxt <= log_floor
        y = 0.0 if final else float(np.exp(nxt))
        Ky, ImKy = _t0_at(fam, y)
        w, V = eig_unitary_like(tilde_s_reduced(Ky, ImKy, D, r_end))
        prop = tr.propose(w, V)
        if prop is None:
            step *= 0.5
            if step < 1e-6:
                raise TrackingError(f"eigenphase descent failed at y={np.exp(cur):.3e}")
            continue
        tr.accept(prop)
        ys.append(y)
        py.append(tr.phases.copy())
        if final:
            break
        cur = nxt
        step = min(step * 1.5, np.log(2.0))

    theta = tr.phases
    theta_star = p_star[-1]
    grid = theta_grid.copy()
    shifted = []
    allph = np.concatenate([theta, theta_star])
    for i, t in enumerate(grid):
        dist = np.abs(wrap(t - allph))
        if dist.size and dist.min() < 1e-9:
            grid[i] = t + 1e-6
            shifted.append(i)
    mu = floor_count(grid, theta)
    mu_a = floor_count(grid, theta_star)
    mu_s = mu - mu_a
    return MuProfile(
        fam.lam, float(r_end), grid, mu, mu_a, int(mu_s[0]), int(mu_s.max() - mu_s.min()),
        (tuple(ts_star), tuple(p_star)), (tuple(ts_r + ys), tuple(p_r + py)),
        theta, theta_star, tuple(shifted),
    )


def _align_vectors(phases, w, V):
    """Order eigenvectors so that column ``j`` matches lifted phase ``j``."""
    C = np.abs(wrap(np.angle(w)[None, :] - phases[:, None]))
    rows, cols = linear_sum_assignment(C)
    out = np.empty_like(V)
    out[:, rows] = V[:, cols]
    return out


@dataclass(frozen=True)
class XiTotal:
    value: float
    est_error: float


def xi_total(profile: MuProfile) -> XiTotal:
    """``xi = -(1/2 pi) int_0^{2 pi} mu dtheta``.

    ``mu`` is a step function with jumps at the eigenphases, so the integral
    is evaluated exactly; the gap to the grid average is reported as the error
    estimate.
    """
    return XiTotal(profile.xi, abs(profile.xi - profile.xi_grid))


def xi_singular(xi: float, xi_a: float) -> tuple[float, float]:
    """``(xi_s, distance of xi_s to the nearest integer)``."""
    xs = xi - xi_a
    return xs, abs(xs - round(xs))


@dataclass(frozen=True)
class SSFPoint:
    lam: float
    xi_a: float
    xi_total: float
    xi_s: float
    xi_a_route2: float
    nearest_int_dist: float
    resonances_crossed: tuple
    est_error: float
    mu_s: int = 0
    mu_s_spread: int = 0


def ssf_point(fam: BoundaryFamily, r_end: float, r_steps: int = R_STEPS_MU,
              logdet_steps: int = R_STEPS_LOGDET, theta_points: int = THETA_POINTS) -> SSFPoint:
    """Every spectral-shift quantity at one ``lambda``."""
    res = _resonances(fam, *sorted((0.0, r_end)))
    q = xi_ac_integral(fam, r_end, resonances=res)
    xa2 = xi_ac_logdet(fam, r_end, logdet_steps)
    prof = mu_invariants(fam, r_end, default_theta_grid(theta_points), r_steps)
    xt = xi_total(prof)
    xs, dist = xi_singular(xt.value, q.value)
    return SSFPoint(fam.lam, q.value, xt.value, xs, xa2, dist, tuple(res),
                    max(q.est_error, xt.est_error), prof.mu_s, prof.mu_s_spread)


def counting_difference(H0: np.ndarray, H1: np.ndarray, lam: float) -> int:
    """``N(lambda; H_0) - N(lambda; H_1)`` by direct diagonalization."""
    return int(np.sum(np.linalg.eigvalsh(H0) < lam) - np.sum(np.linalg.eigvalsh(H1) < lam))


@dataclass(frozen=True)
class KreinCheck:
    lhs: float
    rhs: float
    residual: float
    points: int


def krein_trace_check(model: FiniteHermitian, frame: Frame, pert: Perturbation, f, lam_grid=None,
                      r_end: float = 1.0, r_steps: int = R_STEPS_MU) -> KreinCheck:
    """Residual of ``Tr(f(H_1) - f(H_0)) = int f'(lambda) xi(lambda) d lambda``.

    ``f`` acts on real arrays. Without ``lam_grid`` the right side uses that
    ``xi`` is constant between consecutive eigenvalues of ``H_0`` and ``H_1``:
    it sums ``xi(midpoint) * (f(b) - f(a))`` over those cells, with ``xi``
    from the mu route. With ``lam_grid`` it is the Riemann sum
    ``sum f(b)-f(a)`` weighted by ``xi`` at cell midpoints of that grid.
    """
    if not isinstance(model, FiniteHermitian):
        raise TypeError("the trace check needs a finite model")
    H0 = model.H
    H1 = H0 + r_end * pert.potential(frame)
    e0, e1 = np.linalg.eigvalsh(H0), np.linalg.eigvalsh(H1)
    lhs = float(np.sum(f(e1)) - np.sum(f(e0)))
    if lam_grid is None:
        edges = np.unique(np.concatenate([e0, e1]))
    else:
        edges = np.asarray(lam_grid, dtype=float)
    rhs = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b - a < 1e-13:
            continue
        mid = 0.5 * (a + b)
        fam = BoundaryFamily(model, frame, pert, mid)
        xi = mu_invariants(fam, r_end, r_steps=r_steps).xi
        rhs += xi * float(f(np.array([b]))[0] - f(np.array([a]))[0])
    return KreinCheck(lhs, rhs, abs(lhs - rhs), len(edges))
