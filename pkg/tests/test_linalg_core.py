import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from framedscat.linalg_core import (
    NotPSDError,
    fredholm_det,
    hermitian_eig,
    max_abs,
    numerical_rank,
    pinv_rank,
    psd_sqrt,
    sigma_min_identity_plus_lowrank,
    trace_norm,
)


def random_psd(rng, n, k):
    A = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return A @ A.conj().T


def test_eig_identity():
    es = hermitian_eig(np.eye(3))
    np.testing.assert_allclose(es.values, [1, 1, 1])
    np.testing.assert_allclose(es.vectors.conj().T @ es.vectors, np.eye(3), atol=1e-14)


def test_eig_diag_order_and_phase():
    es = hermitian_eig(np.diag([-1.0, 2.0]))
    np.testing.assert_allclose(es.values, [2, -1])
    np.testing.assert_allclose(np.abs(es.vectors), [[0, 1], [1, 0]], atol=1e-15)
    # phase convention: largest-modulus entry real positive
    assert np.all(es.vectors[np.argmax(np.abs(es.vectors), axis=0), [0, 1]].real > 0)


def test_eig_rank_one_harmonic():
    u = 1.0 / np.arange(1, 51)
    es = hermitian_eig(np.outer(u, u))
    assert abs(es.values[0] - np.sum(u**2)) < 1e-12
    assert np.max(np.abs(es.values[1:])) < 1e-12


def test_eig_rejects_nonfinite():
    with pytest.raises(ValueError):
        hermitian_eig(np.array([[np.nan, 0], [0, 1]]))


def test_eig_deterministic_phases():
    rng = np.random.default_rng(0)
    M = random_psd(rng, 6, 6)
    a, b = hermitian_eig(M), hermitian_eig(M.copy())
    assert np.array_equal(a.vectors, b.vectors)


def test_psd_sqrt_examples():
    np.testing.assert_allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    assert max_abs(psd_sqrt(np.zeros((3, 3)))) == 0.0


def test_psd_sqrt_clips_and_rejects():
    M = np.diag([1.0, -1e-12])
    np.testing.assert_allclose(psd_sqrt(M), np.diag([1.0, 0.0]), atol=1e-15)
    with pytest.raises(NotPSDError):
        psd_sqrt(np.diag([1.0, -1e-6]))


@pytest.mark.parametrize("N", [10, 100, 400])
def test_psd_sqrt_rank_one_example(N):
    idx = np.concatenate([np.arange(1, N + 1), -np.arange(1, N + 1)]).astype(float)
    lam = 0.7
    phi = np.exp(1j * (idx[:, None] - idx[None, :]) * lam) / np.abs(np.outer(idx, idx))
    es = hermitian_eig(psd_sqrt(phi))
    target = np.sqrt(2.0 * np.sum(1.0 / np.arange(1, N + 1) ** 2))
    assert abs(es.values[0] - target) < 1e-10
    assert np.max(np.abs(es.values[1:])) < 1e-6


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 8), k=st.integers(1, 8), seed=st.integers(0, 2**31))
def test_psd_sqrt_squares_back(n, k, seed):
    M = random_psd(np.random.default_rng(seed), n, k)
    R = psd_sqrt(M)
    assert max_abs(R @ R - M) < 1e-9 * max(1.0, max_abs(M))
    assert max_abs(R - R.conj().T) == 0.0
    assert np.linalg.eigvalsh(R).min() > -1e-9 * max(1.0, max_abs(M))


def test_pinv_rank_examples():
    P, d = pinv_rank(np.diag([1.0, 0.0]), 1e-8)
    np.testing.assert_allclose(P, np.diag([1.0, 0.0]), atol=1e-15)
    assert d == 1
    assert pinv_rank(np.diag([1.0, 1e-12]), 1e-8)[1] == 1


def test_pinv_rank_known_rank():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((3, 10)) + 1j * rng.standard_normal((3, 10))
    M = A.conj().T @ A
    P, d = pinv_rank(M, 1e-8)
    assert d == 3
    assert max_abs(M @ P @ M - M) < 1e-10 * max_abs(M)


@pytest.mark.parametrize("tol", [0.0, 1.0, -1e-3])
def test_pinv_rank_validates_tolerance(tol):
    with pytest.raises(ValueError):
        pinv_rank(np.eye(2), tol)


def test_numerical_rank_edge():
    assert numerical_rank(np.array([])) == 0
    assert numerical_rank(np.array([0.0, 0.0])) == 0


def test_fredholm_det_examples():
    assert fredholm_det(np.zeros((3, 3))) == 1.0
    assert abs(fredholm_det(np.diag([1.0, -0.5])) - 1.0) < 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_fredholm_det_product(seed):
    rng = np.random.default_rng(seed)
    S = 0.3 * (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
    T = 0.3 * (rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8)))
    I = np.eye(8)
    lhs = fredholm_det((I + S) @ (I + T) - I)
    rhs = fredholm_det(S) * fredholm_det(T)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(rhs))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 2**31))
def test_bks_inequality(n, seed):
    rng = np.random.default_rng(seed)
    A, B = random_psd(rng, n, n), random_psd(rng, n, int(rng.integers(1, n + 1)))
    lhs = np.linalg.norm(psd_sqrt(A) - psd_sqrt(B), "fro") ** 2
    assert lhs <= trace_norm(A - B) * (1 + 1e-10) + 1e-12


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 7), seed=st.integers(0, 2**31))
def test_weyl_perturbation(n, seed):
    rng = np.random.default_rng(seed)
    A = random_psd(rng, n, n) - n
    E = 0.1 * random_psd(rng, n, 2)
    d = hermitian_eig(A + E).values - hermitian_eig(A).values
    assert np.max(np.abs(d)) <= np.linalg.norm(E, 2) * (1 + 1e-10) + 1e-12


@pytest.mark.parametrize("N,m", [(30, 2), (6, 3), (200, 1)])
def test_sigma_min_lowrank_matches_svd(N, m):
    rng = np.random.default_rng(N + m)
    Q, _ = np.linalg.qr(rng.standard_normal((N, m)) + 1j * rng.standard_normal((N, m)))
    X = rng.standard_normal((m, N)) + 1j * rng.standard_normal((m, N))
    direct = np.linalg.svd(np.eye(N) + Q @ X, compute_uv=False)[-1]
    assert abs(sigma_min_identity_plus_lowrank(Q, X) - direct) < 1e-12
