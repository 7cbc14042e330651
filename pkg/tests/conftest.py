import numpy as np
import pytest

from framedscat import Frame, FreeJacobi, Perturbation
from framedscat.models import BoundaryFamily, FiniteHermitian, MultiplicationGrid


@pytest.fixture(scope="session")
def reference():
    """Reference FreeJacobi setup: N = 200, kappa_j = 2^(-j/2), rank-2 J."""
    frame = Frame.geometric(200, 2.0**-0.5)
    pert = Perturbation.random_lowrank(200, 2, seed=7, support=8, norm=1.0)
    return FreeJacobi(), frame, pert


@pytest.fixture(scope="session")
def rank1_reference():
    frame = Frame.geometric(200, 2.0**-0.5)
    pert = Perturbation.random_lowrank(200, 1, seed=3, support=4, norm=1.0)
    return FreeJacobi(), frame, pert


@pytest.fixture
def family(reference):
    model, frame, pert = reference
    return lambda lam: BoundaryFamily(model, frame, pert, lam)


def scalar_grid(amp=lambda x: 1.0 + 0.3 * x, interval=(-1.0, 1.0), atoms=(), K=24):
    """One-channel, one-frame-vector multiplication model."""
    return MultiplicationGrid.from_functions(interval, K, lambda x: np.array([[amp(x)]]), atoms)


def finite_setup(dim=30, rank=3, seed=11):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    H = (A + A.conj().T) / np.sqrt(8.0 * dim)
    B, _ = np.linalg.qr(rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank)))
    vals = rng.uniform(0.3, 1.0, rank) * rng.choice([-1.0, 1.0], rank)
    V = (B * vals) @ B.conj().T
    frame = Frame.constant(dim)
    return FiniteHermitian(H), frame, Perturbation.from_potential(V, frame), V
