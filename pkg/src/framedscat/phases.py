"""Continuous tracking of eigenphases along a parameter path."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

OVERLAP_FLOOR = 0.7


class TrackingError(RuntimeError):
    """Eigenphase continuation failed even at the minimal step."""


def wrap(x):
    """Map angles into ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)


def eig_unitary_like(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unit-norm eigenvectors of a (nearly) unitary matrix."""
    if M.shape[0] == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex)
    w, V = np.linalg.eig(M)
    V = V / np.linalg.norm(V, axis=0)[None, :]
    return w, V


def match(prev_vecs: np.ndarray, new_vecs: np.ndarray) -> np.ndarray:
    """Permutation ``p`` pairing old column ``i`` with new column ``p[i]``.

    Greedy on ``|<v_old, v_new>|``; if any greedy pair has overlap below
    :data:`OVERLAP_FLOOR` the optimal assignment is used instead.
    """
    n = prev_vecs.shape[1]
    if n == 0:
        return np.zeros(0, int)
    O = np.abs(prev_vecs.conj().T @ new_vecs)
    perm = -np.ones(n, int)
    taken = np.zeros(n, bool)
    flat = np.argsort(O, axis=None)[::-1]
    done = np.zeros(n, bool)
    for f in flat:
        i, j = divmod(int(f), n)
        if done[i] or taken[j]:
            continue
        perm[i], done[i], taken[j] = j, True, True
    if np.min(O[np.arange(n), perm]) < OVERLAP_FLOOR:
        rows, cols = linear_sum_assignment(-O)
        perm[rows] = cols
    return perm


class PhaseTracker:
    """Lifts eigenphases of a unitary-valued path continuously.

    Parameters
    ----------
    phases : ndarray
        Starting lifts.
    vectors : ndarray
        Matching eigenvectors (columns).
    max_jump : float
        Largest accepted change of any phase in one step; larger changes
        make :meth:`propose` return ``None`` so the caller can halve the step.
    """

    def __init__(self, phases, vectors, max_jump: float = 0.5):
        self.phases = np.asarray(phases, dtype=float).copy()
        self.vectors = np.asarray(vectors, dtype=complex).copy()
        self.max_jump = max_jump

    def propose(self, values: np.ndarray, vectors: np.ndarray):
        """Lifted phases for the new eigenpairs, or ``None`` if the step is too large."""
        if self.phases.size == 0:
            return self.phases.copy(), vectors
        perm = match(self.vectors, vectors)
        ang = np.angle(values[perm])
        new = self.phases + wrap(ang - self.phases)
        if np.max(np.abs(new - self.phases)) > self.max_jump:
            return None
        return new, vectors[:, perm]

    def accept(self, proposal):
        self.phases, self.vectors = proposal[0], proposal[1]


def track_path(matrix_at, t_start: float, t_end: float, steps: int, phases0, vectors0,
               max_jump: float = 0.5, min_step: float = 1e-12, skip=None):
    """Follow eigenphases of ``matrix_at(t)`` from ``t_start`` to ``t_end``.

    The nominal ladder has ``steps`` equal steps; a step whose phase change
    exceeds ``max_jump`` is halved until it does not. ``skip(t)`` may return
    True for interior ladder points where the matrix is undefined; those
    points are nudged by a thousandth of a step.

    Returns
    -------
    ts : list of float
    paths : list of ndarray
        Phases at each accepted point.
    """
    tr = PhaseTracker(phases0, vectors0, max_jump)
    ts, paths = [t_start], [tr.phases.copy()]
    if steps <= 0 or t_start == t_end:
        return ts, paths
    nominal = (t_end - t_start) / steps
    targets = [t_start + k * nominal for k in range(1, steps)] + [t_end]
    if skip is not None:
        targets = [t + 1e-3 * nominal if (i < steps - 1 and skip(t)) else t
                   for i, t in enumerate(targets)]
    t = t_start
    for target in targets:
        while t != target:
            h = target - t
            while True:
                cand = target if h == target - t else t + h
                try:
                    w, V = eig_unitary_like(matrix_at(cand))
                    prop = tr.propose(w, V)
                except ArithmeticError:
                    prop = None
                if prop is not None:
                    break
                h *= 0.5
                if abs(h) < min_step:
                    raise TrackingError(f"eigenphase continuation failed near t={t!r}")
            tr.accept(prop)
            t = cand
            ts.append(t)
            paths.append(tr.phases.copy())
    return ts, paths
