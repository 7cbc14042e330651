import numpy as np
import pytest
import scipy.integrate as si

from conftest import scalar_grid
from framedscat import FiniteHermitian, Frame, Perturbation, ResonanceError
from framedscat.linalg_core import max_abs
from framedscat.models import BoundaryFamily, MultiplicationGrid
from framedscat.scattering import (
    BridgeError,
    Bridged,
    a_pm,
    fiber,
    inf_scattering_matrix,
    resonance_scan,
    scattering_stationary,
    scattering_texp,
    scattering_wave_product,
    texp_integrand,
    tilde_s_full,
    tilde_s_reduced,
    wave_matrix,
)

GRID = np.linspace(-1.9, 1.9, 21)


def dense_T(fam, r):
    T0 = fam.T0
    return np.linalg.solve((np.eye(fam.n) + r * fam.pert.J @ T0).T, T0.T).T


def embedded_atom():
    """Scalar a.c. channel plus an atom at -0.5 in a second frame vector."""
    mg = MultiplicationGrid.from_functions(
        (-1.0, 1.0), 24, lambda x: np.array([[1.0 + 0.3 * x, 0.0]]), ((-0.5, np.array([0.0, 1.0])),)
    )
    frame = Frame(np.array([1.0, 1.0]))
    pert = Perturbation(np.diag([0.4, 1.0]))
    # at lambda = 0.3 the atom block gives 1 + r / (-0.5 - 0.3) = 0 at r = 0.8
    return BoundaryFamily(mg, frame, pert, 0.3)


# --------------------------------------------------------------------------- a_pm and wave matrices


def test_a_pm_equal_couplings(family):
    fam = family(0.3)
    for r in (0.0, 0.6):
        T = fam.T(r)
        assert max_abs(a_pm(fam, r, r, +1) - (T - T.conj().T) / (2j * np.pi)) < 1e-15


@pytest.mark.parametrize("sign", [+1, -1])
def test_a_pm_two_forms_dense(family, sign):
    fam = family(0.3)
    T0, T1 = dense_T(fam, 0.0), dense_T(fam, 1.0)
    J = fam.pert.J
    phi0 = (T0 - T0.conj().T) / (2j * np.pi)
    phi1 = (T1 - T1.conj().T) / (2j * np.pi)
    T1m = T1.conj().T if sign > 0 else T1
    T0p = T0 if sign > 0 else T0.conj().T
    first = (np.eye(fam.n) - T1m @ J) @ phi0
    second = phi1 @ (np.eye(fam.n) + J @ T0p)
    assert max_abs(first - second) < 1e-12
    assert max_abs(a_pm(fam, 0.0, 1.0, sign) - first) < 1e-12


def test_a_pm_linear_term(family):
    fam = family(0.3)
    h = 1e-4
    phi = fiber(fam, 0.0).phi
    slope = (a_pm(fam, 0.0, h, +1) - phi) / h
    expected = -fam.T0.conj().T @ fam.pert.J @ phi
    assert max_abs(slope - expected) < 1e-3 * max_abs(expected)


def test_wave_identity_at_equal_couplings(family):
    fam = family(-0.7)
    for sign in (+1, -1):
        w = wave_matrix(fam, 0.4, 0.4, sign)
        assert max_abs(w.W - np.eye(w.W.shape[0])) < 1e-12
        assert w.residual < 1e-10


@pytest.mark.parametrize("lam", [-1.5, 0.3, 1.1])
def test_adjoint_relation(family, lam):
    fam = family(lam)
    for sign in (+1, -1):
        fwd = wave_matrix(fam, 0.2, 0.9, sign).W
        back = wave_matrix(fam, 0.9, 0.2, sign).W
        assert max_abs(back - fwd.conj().T) < 1e-8


def test_multiplicativity_on_grid(family):
    for lam in GRID:
        fam = family(lam)
        for sign in (+1, -1):
            W20 = wave_matrix(fam, 0.0, 1.0, sign).W
            W21 = wave_matrix(fam, 0.5, 1.0, sign).W
            W10 = wave_matrix(fam, 0.0, 0.5, sign).W
            assert max_abs(W20 - W21 @ W10) < 1e-6


def test_wave_unitarity_and_residual(family):
    for lam in GRID[::4]:
        w = wave_matrix(family(lam), 0.0, 1.0, +1)
        assert w.unitarity() < 1e-10
        assert w.residual < 1e-10


# --------------------------------------------------------------------------- scattering matrix


def test_stationary_trivial(family):
    S = scattering_stationary(family(0.5), 0.0)
    assert max_abs(S.S - np.eye(2)) == 0.0
    assert max_abs(scattering_wave_product(family(0.5), 0.0).S - np.eye(2)) < 1e-14


def test_unitarity_rank_one(rank1_reference):
    model, frame, pert = rank1_reference
    for lam in GRID:
        S = scattering_stationary(BoundaryFamily(model, frame, pert, lam), 0.7)
        assert S.unitarity() < 1e-6


@pytest.mark.parametrize("lam,r", [(-0.6, 0.5), (0.0, 1.3), (0.45, -2.0)])
def test_scalar_grid_oracle(lam, r):
    amp = lambda x: 1.0 + 0.3 * x
    mg = scalar_grid(amp)
    kappa, j = 0.8, 0.7
    fam = BoundaryFamily(mg, Frame(np.array([kappa])), Perturbation(np.array([[j]])), lam)
    pv = si.quad(lambda x: amp(x) ** 2, -1, 1, weight="cauchy", wvar=lam, epsabs=1e-13)[0]
    Fp = kappa**2 * (pv + 1j * np.pi * amp(lam) ** 2)
    Fm = np.conj(Fp)
    oracle = (1 + r * j * Fm) / (1 + r * j * Fp)
    S = scattering_stationary(fam, r).S
    assert S.shape == (1, 1)
    assert abs(S[0, 0] - oracle) < 1e-10
    assert abs(scattering_wave_product(fam, r).S[0, 0] - oracle) < 1e-10


def test_route_agreement_wave_stationary(family):
    for lam in GRID:
        fam = family(lam)
        for r in (0.3, 0.7, 1.0):
            assert max_abs(scattering_wave_product(fam, r).S - scattering_stationary(fam, r).S) < 1e-6


@pytest.mark.parametrize("lam", [-1.2, 0.3])
def test_conjugation_identity(family, lam):
    fam = family(lam)
    r, h = 0.4, 0.5
    S_total = scattering_stationary(fam, r + h).S
    wp = wave_matrix(fam, 0.0, r, +1).W
    wm = wave_matrix(fam, 0.0, r, -1).W
    w2p = wave_matrix(fam, r, r + h, +1).W
    w2m = wave_matrix(fam, r, r + h, -1).W
    S_step = w2p.conj().T @ w2m
    assert max_abs(S_total - wp.conj().T @ S_step @ wm) < 1e-6


def test_texp_route_at_one(family):
    for lam in (-1.5, 0.3, 1.7):
        fam = family(lam)
        assert max_abs(scattering_texp(fam, 1.0).S - scattering_stationary(fam, 1.0).S) < 1e-4


def test_inf_scattering_zero_perturbation(reference):
    model, frame, _ = reference
    fam = BoundaryFamily(model, frame, Perturbation.zero(frame.n), 0.2)
    inf = inf_scattering_matrix(fam, 0.5)
    assert max_abs(inf.Pi) == 0.0 and inf.trace == 0.0


@pytest.mark.parametrize("s", [0.0, 0.6])
def test_derivative_identity(family, s):
    fam = family(0.8)
    h = 1e-3
    def S_from(s0, s1):
        return wave_matrix(fam, s0, s1, +1).W.conj().T @ wave_matrix(fam, s0, s1, -1).W
    dS = (S_from(s, s + h) - S_from(s, s - h)) / (2 * h)
    target = -2j * np.pi * inf_scattering_matrix(fam, s).Pi
    assert max_abs(dS - target) < 1e-4 * max_abs(target)


def test_born_approximation(family):
    fam = family(-0.4)
    r = 1e-3
    Pi0 = inf_scattering_matrix(fam, 0.0).Pi
    born = np.eye(2) - 2j * np.pi * r * Pi0
    for S in (scattering_stationary(fam, r).S, scattering_texp(fam, r).S):
        assert max_abs(S - born) < 10 * r**2 * max(1.0, max_abs(2 * np.pi * Pi0)) ** 2


def test_texp_integrand_hermitian(family):
    A = texp_integrand(family(0.1), 0.7)
    assert max_abs(A - A.conj().T) == 0.0


# --------------------------------------------------------------------------- resonances


def test_no_resonances_without_perturbation(reference):
    model, frame, _ = reference
    fam = BoundaryFamily(model, frame, Perturbation.zero(frame.n), 0.2)
    assert resonance_scan(fam, (-5, 5), 50).resonances == []


def test_scalar_grid_resonance_off_support():
    amp = lambda x: 1.0 + 0.3 * x
    mg = scalar_grid(amp)
    lam = 1.4
    F = si.quad(lambda x: amp(x) ** 2 / (x - lam), -1, 1, epsabs=1e-13)[0]
    fam = BoundaryFamily(mg, Frame(np.array([1.0])), Perturbation(np.array([[1.0]])), lam)
    res = resonance_scan(fam, (-5.0, 5.0), 200).resonances
    assert len(res) == 1
    assert abs(res[0][0] - (-1.0 / F)) < 1e-9
    with pytest.raises(ResonanceError):
        fam.check(-1.0 / F)
    # on the support Im F > 0: 1 + rF never vanishes for real r
    fam_in = BoundaryFamily(mg, Frame(np.array([1.0])), Perturbation(np.array([[1.0]])), 0.2)
    assert resonance_scan(fam_in, (-5.0, 5.0), 200).resonances == []


def test_finite_eigenvalue_is_resonant():
    H = np.diag([0.0, 1.0, 2.0])
    v = np.ones(3) / np.sqrt(3)
    lam = 0.5
    r_star = -1.0 / float(v @ np.linalg.solve(H - lam * np.eye(3), v))
    fam = BoundaryFamily(FiniteHermitian(H), Frame.constant(3), Perturbation(np.outer(v, v)), lam)
    res = resonance_scan(fam, (-5.0, 5.0), 400).resonances
    assert any(abs(x - r_star) < 1e-8 for x, _ in res)


def test_tilde_s_reduction(family):
    fam = family(0.4)
    z = 0.4 + 0.3j
    T0z = fam.model.t0(z, fam.frame)
    Q, D = fam.Q, fam.D
    K = Q.conj().T @ T0z @ Q
    full = np.linalg.eigvals(tilde_s_full(T0z, fam.pert.J, 0.8))
    red = np.linalg.eigvals(tilde_s_reduced(K, (K - K.conj().T) / 2j, D, 0.8))
    nontrivial = full[np.abs(full - 1) > 1e-10]
    assert nontrivial.size == red.size
    for w in red:
        assert np.min(np.abs(nontrivial - w)) < 1e-10


# --------------------------------------------------------------------------- embedded eigenvalue


def test_embedded_atom_resonance_and_bridging():
    fam = embedded_atom()
    res = resonance_scan(fam, (0.0, 2.0), 200).resonances
    assert len(res) == 1 and abs(res[0][0] - 0.8) < 1e-9
    with pytest.raises(ResonanceError):
        scattering_stationary(fam, 0.8)
    f = Bridged(lambda s: texp_integrand(fam, s), [0.8])
    assert f.fit_residual(0.8) < 1e-5
    S = scattering_texp(fam, 1.5, resonances=[0.8]).S
    assert max_abs(S - scattering_stationary(fam, 1.5).S) < 1e-4


def test_bridge_rejects_close_resonances():
    with pytest.raises(BridgeError):
        Bridged(lambda s: s, [0.5, 0.502])
