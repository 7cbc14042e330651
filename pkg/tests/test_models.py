import numpy as np
import pytest
import scipy.integrate as si
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import finite_setup, scalar_grid
from framedscat import (
    FiniteHermitian,
    Frame,
    FreeJacobi,
    NotInLambdaError,
    Perturbation,
    ResonanceError,
    boundary_resolvent,
    hilbert_scale_rescale,
    sandwiched_resolvent,
)
from framedscat.linalg_core import max_abs, op_norm
from framedscat.models import BoundaryFamily, scale_norm, zigzag_sites


def tridiag_green(window, z, src_sites):
    """Columns of the truncated free Jacobi resolvent, by a banded solve."""
    n = 2 * window + 1
    ab = np.zeros((3, n), dtype=complex)
    ab[0, 1:] = 1.0
    ab[2, :-1] = 1.0
    ab[1, :] = -z
    rhs = np.zeros((n, len(src_sites)), dtype=complex)
    rhs[np.asarray(src_sites) + window, np.arange(len(src_sites))] = 1.0
    return sla.solve_banded((1, 1), ab, rhs)


# --------------------------------------------------------------------------- frame and scale


def test_frame_validation():
    with pytest.raises(ValueError):
        Frame(np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        Frame(np.array([0.5, 1.0]))
    with pytest.raises(ValueError):
        Frame(np.array([1.0]), tail_bound=-1.0)


def test_geometric_frame_tail():
    f = Frame.geometric(10, 0.5)
    np.testing.assert_allclose(f.weights, 0.5 ** np.arange(1, 11))
    assert abs(f.tail_bound - sum(0.25**j for j in range(11, 200))) < 1e-18


def test_rescale_examples():
    f = Frame(np.array([0.5, 0.25]))
    np.testing.assert_allclose(hilbert_scale_rescale([1.0, 1.0], 1, 0, f), [0.5, 0.25])
    x = np.array([0.3, -1.7])
    back = hilbert_scale_rescale(hilbert_scale_rescale(x, 1, -1, f), -1, 1, f)
    assert np.array_equal(back, x)
    with pytest.raises(ValueError):
        hilbert_scale_rescale(x, 2, 0, f)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), lev=st.sampled_from([-1, 0, 1]))
def test_rescale_norm_identity(seed, lev):
    rng = np.random.default_rng(seed)
    f = Frame.geometric(12, 0.8)
    x = rng.standard_normal(12)
    # the level-lev norm of a vector equals the plain norm of its level-lev coefficients
    assert abs(scale_norm(x, lev, f) - np.linalg.norm(hilbert_scale_rescale(x, 0, lev, f))) < 1e-12 * (
        1 + scale_norm(x, lev, f)
    )


def test_perturbation_validation_and_factor():
    with pytest.raises(ValueError):
        Perturbation(np.array([[0.0, 1.0], [0.0, 0.0]]))
    p = Perturbation.random_lowrank(20, 3, seed=1, support=5, norm=2.0)
    assert p.rank == 3
    assert abs(p.norm - 2.0) < 1e-12
    Q, D = p.factor
    assert max_abs(Q @ np.diag(D) @ Q.conj().T - p.J) < 1e-13
    assert max_abs(p.J[5:, :]) == 0.0
    assert Perturbation.zero(4).rank == 0


# --------------------------------------------------------------------------- sandwiched resolvent


def test_diagonal_resolvent_example():
    model = FiniteHermitian(np.diag([1.0, -1.0]))
    frame = Frame.constant(2)
    sr = sandwiched_resolvent(model, frame, Perturbation.zero(2), 0.0, 1j)
    np.testing.assert_allclose(sr.T, np.diag([1 / (1 - 1j), 1 / (-1 - 1j)]), atol=1e-15)


def test_requires_upper_half_plane():
    model = FiniteHermitian(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        sandwiched_resolvent(model, Frame.constant(2), Perturbation.zero(2), 0.0, 0.5)


def _models(reference):
    jac, frame, pert = reference
    fm, fframe, fpert, _ = finite_setup(12, 2, 3)
    mg = scalar_grid()
    mg_frame = Frame(np.array([0.8]))
    mg_pert = Perturbation(np.array([[0.7]]))
    return [(jac, frame, pert), (fm, fframe, fpert), (mg, mg_frame, mg_pert)]


@pytest.mark.parametrize("z", [0.3 + 1j, -1.2 + 0.05j, 2.5 + 0.5j])
@pytest.mark.parametrize("r", [0.0, 0.4, -1.3])
def test_aronszajn_identity(reference, z, r):
    for model, frame, pert in _models(reference):
        T0 = model.t0(z, frame)
        Tr = sandwiched_resolvent(model, frame, pert, r, z).T
        R = Tr @ (np.eye(frame.n) + r * pert.J @ T0) - T0
        assert max_abs(R) < 1e-10 * max(1.0, max_abs(T0))


@pytest.mark.parametrize("z", [0.4 + 0.2j, -1.0 + 2j])
def test_herglotz_and_norm_bound(reference, z):
    for model, frame, pert in _models(reference):
        sr = sandwiched_resolvent(model, frame, pert, 0.8, z)
        assert np.linalg.eigvalsh(sr.im).min() > -1e-12
        # the multiplication model's frame vectors have squared norm int rho, not 1
        gram = 1.0
        if hasattr(model, "amplitudes"):
            x, w = model.gauss_nodes(model.interval, model.amplitudes.shape[0])
            gram = float(np.sum(w * np.abs(model.amplitudes[:, 0, 0]) ** 2))
        assert op_norm(sr.T) <= gram * np.max(frame.weights) ** 2 / z.imag * (1 + 1e-12)


@pytest.mark.parametrize("r", [0.5, -0.9])
def test_im_sandwich_identity_off_axis(reference, r):
    z = 0.3 + 0.1j
    for model, frame, pert in _models(reference):
        T0 = model.t0(z, frame)
        Tr = sandwiched_resolvent(model, frame, pert, r, z).T
        L = np.eye(frame.n) + r * T0.conj().T @ pert.J
        rhs = np.linalg.solve(L, np.linalg.solve(L, (T0 - T0.conj().T) / 2j).conj().T).conj().T
        assert max_abs((Tr - Tr.conj().T) / 2j - rhs) < 1e-9


def test_free_jacobi_against_truncation():
    frame = Frame.geometric(40, 0.5)
    sites = zigzag_sites(40)
    G = tridiag_green(1000, 1j, sites)[sites + 1000, :]
    T_trunc = frame.weights[:, None] * G * frame.weights[None, :]
    T = FreeJacobi().t0(1j, frame)
    assert max_abs(T - T_trunc) < 1e-8


def test_free_jacobi_boundary_oracle_at_zero():
    # dense truncation (window 2000) at y in {0.08, ..., 0.01}, Richardson-extrapolated to y = 0
    ys = [0.08, 0.04, 0.02, 0.01]
    cols = np.array([tridiag_green(2000, 1j * y, [0])[2000:2004, 0] for y in ys])
    tab = cols
    for j in range(1, len(ys)):
        tab = tab[1:] + (tab[1:] - tab[:-1]) / (2.0**j - 1.0)
    oracle = tab[0]
    frame = Frame.geometric(8, 2.0**-0.5)
    bt = FreeJacobi().boundary_t0(0.0, frame)
    sites = zigzag_sites(8)
    # entries (0, s) for the frame vectors sitting at s = 0, 1, 2, 3
    for s in range(4):
        j = int(np.where(sites == s)[0][0])
        expected = frame.weights[0] * frame.weights[j] * oracle[s]
        assert abs(bt.T[0, j] - expected) < 1e-6
    assert abs(bt.T[0, 0].imag / frame.weights[0] ** 2 - 0.5) < 1e-6
    phi = (bt.T - bt.T.conj().T) / (2j * np.pi)
    assert max_abs(bt.im_factor @ bt.im_factor.conj().T - phi) < 1e-14


def test_free_jacobi_edges_and_outside(reference):
    _, frame, pert = reference
    with pytest.raises(NotInLambdaError):
        FreeJacobi().boundary_t0(1.97, frame)
    bt = FreeJacobi().boundary_t0(2.5, Frame.geometric(10, 0.7))
    assert bt.im_factor.shape[1] == 0
    assert max_abs(bt.T - bt.T.conj().T) < 1e-15


def test_finite_off_spectrum_real_symmetric():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((10, 10))
    H = (A + A.T) / 4
    model = FiniteHermitian(H)
    lam = float(np.linalg.eigvalsh(H).max() + 1.0)
    br = boundary_resolvent(model, Frame.constant(10), Perturbation.zero(10), 0.0, lam)
    assert max_abs(br.im) < 1e-9
    assert max_abs(br.T.imag) < 1e-9
    assert max_abs(br.T - br.T.T) < 1e-9


@pytest.mark.parametrize("k", [3, 9, 15])
def test_finite_extrapolation_matches_spectral(k):
    model, frame, _, _ = finite_setup(20, 2, 4)
    lam = float(0.5 * (model.spectrum[k] + model.spectrum[k + 1]))
    bt = model.boundary_t0(lam, frame)
    assert bt.converged
    assert max_abs(bt.T - model.t0_spectral(lam, frame)) < 1e-8
    assert bt.im_factor.shape[1] == 0


def test_finite_resonance_at_eigenvalue():
    H = np.diag([0.0, 1.0, 2.0])
    frame = Frame.constant(3)
    v = np.ones(3) / np.sqrt(3)
    pert = Perturbation(np.outer(v, v))
    lam = 0.5
    # find r with lam an eigenvalue of H + r vv*: 1 + r <v, (H - lam)^{-1} v> = 0
    r_star = -1.0 / float(v @ np.linalg.solve(H - lam * np.eye(3), v))
    assert abs(np.linalg.eigvalsh(H + r_star * np.outer(v, v)) - lam).min() < 1e-12
    model = FiniteHermitian(H)
    with pytest.raises(ResonanceError):
        boundary_resolvent(model, frame, pert, r_star, lam)
    br = boundary_resolvent(model, frame, pert, r_star + 0.1, lam)
    assert br.member


def test_boundary_family_woodbury_vs_direct(reference):
    model, frame, pert = reference
    fam = BoundaryFamily(model, frame, pert, 0.4)
    T0 = fam.T0
    for r in (0.3, -2.0):
        direct = np.linalg.solve((np.eye(frame.n) + r * pert.J @ T0).T, T0.T).T
        assert max_abs(fam.T(r) - direct) < 1e-13
        U = fam.im_factor(r)
        Tr = fam.T(r)
        assert max_abs(U @ U.conj().T - (Tr - Tr.conj().T) / (2j * np.pi)) < 1e-13
        assert fam.aronszajn_residual(r) < 1e-10


# --------------------------------------------------------------------------- multiplication model


def test_grid_t0_against_quadrature():
    amp = lambda x: 1.0 + 0.3 * x
    mg = scalar_grid(amp)
    frame = Frame(np.array([0.8]))
    z = 0.2 + 0.3j
    re = si.quad(lambda x: (amp(x) ** 2 / (x - z)).real, -1, 1, epsabs=1e-13)[0]
    im = si.quad(lambda x: (amp(x) ** 2 / (x - z)).imag, -1, 1, epsabs=1e-13)[0]
    assert abs(mg.t0(z, frame)[0, 0] - 0.64 * (re + 1j * im)) < 1e-10


@pytest.mark.parametrize("lam", [-0.6, 0.0, 0.45, 1.4])
def test_grid_boundary_plemelj(lam):
    amp = lambda x: 1.0 + 0.3 * x
    mg = scalar_grid(amp)
    frame = Frame(np.array([0.8]))
    if -1 < lam < 1:
        pv = si.quad(lambda x: amp(x) ** 2, -1, 1, weight="cauchy", wvar=lam, epsabs=1e-13)[0]
        F = pv + 1j * np.pi * amp(lam) ** 2
    else:
        F = si.quad(lambda x: amp(x) ** 2 / (x - lam), -1, 1, epsabs=1e-13)[0]
    bt = mg.boundary_t0(lam, frame)
    assert abs(bt.T[0, 0] - 0.64 * F) < 1e-10


def test_grid_atoms_and_admissibility():
    mg = scalar_grid(atoms=((-0.5, np.array([1.0])),))
    frame = Frame(np.array([1.0]))
    assert not mg.admissible(-0.5)
    with pytest.raises(NotInLambdaError):
        mg.boundary_t0(-0.5, frame)
    plain = scalar_grid()
    z = 0.1 + 0.2j
    assert abs(mg.t0(z, frame)[0, 0] - plain.t0(z, frame)[0, 0] - 1.0 / (-0.5 - z)) < 1e-14
