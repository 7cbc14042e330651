"""Acceptance suite: every criterion as a named, thresholded check."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .boundary import fiber_data, snumber_bound_check
from .config import SweepConfig, random_hermitian
from .linalg_core import hermitian_eig, psd_sqrt
from .models import (
    BoundaryFamily,
    FiniteHermitian,
    Frame,
    FreeJacobi,
    Perturbation,
    sandwiched_resolvent,
)
from .spectral_shift import counting_difference, krein_trace_check, mu_invariants, xi_ac_integral
from .sweep import run_sweep
from .texp import texp


@dataclass(frozen=True)
class CriterionResult:
    key: str
    title: str
    value: float
    tol: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{self.key:<4} {verdict}  {self.title}: value={self.value:.3e} tol={self.tol:.1e}" + (
            f"  [{self.detail}]" if self.detail else ""
        )


@dataclass
class SuiteReport:
    results: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def table(self) -> str:
        return "\n".join(r.line() for r in self.results)

    def by_key(self, key: str) -> CriterionResult:
        return next(r for r in self.results if r.key == key)


def _max(summary, key) -> float:
    v = summary["residuals"][key]["max"]
    return 0.0 if v is None else float(v)


def _res(key, title, value, tol, detail="", extra_ok=True) -> CriterionResult:
    ok = bool(extra_ok and math.isfinite(value) and value < tol)
    return CriterionResult(key, title, float(value), float(tol), ok, detail)


def random_hermitian_path(dim: int, rng: np.random.Generator):
    """Smooth Hermitian path ``A(t) = sum_k C_k t^k`` with random coefficients."""
    C = []
    for _ in range(3):
        X = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        C.append((X + X.conj().T) / 2.0)
    return lambda t: C[0] + t * C[1] + np.sin(2.0 * t) * C[2]


def texp_paths(paths: int, dim: int, seed: int, eps_ode: float = 1e-10) -> list[dict]:
    """Per-path residuals: det identity, semigroup split at 0.4, constant-A exponential."""
    rng = np.random.default_rng(seed)
    x, w = np.polynomial.legendre.leggauss(40)
    out = []
    for _ in range(paths):
        A = random_hermitian_path(dim, rng)
        X = texp(A, 0.0, 1.0, eps_ode=eps_ode).X
        trint = 0.5 * sum(wi * np.trace(A(0.5 * xi + 0.5)).real for wi, xi in zip(w, x))
        X2 = texp(A, 0.4, 1.0, eps_ode=eps_ode).X @ texp(A, 0.0, 0.4, eps_ode=eps_ode).X
        C = A(0.3)
        out.append({
            "det_res": float(abs(np.linalg.det(X) - np.exp(-1j * trint))),
            "semigroup_res": float(np.max(np.abs(X - X2))),
            "constant_res": float(np.max(np.abs(texp(lambda t: C, 0.0, 1.0).X - sla.expm(-1j * C)))),
        })
    return out


def texp_suite(paths: int, dim: int, seed: int, eps_ode: float = 1e-10) -> tuple[float, float]:
    """Maximum det-identity and semigroup residuals over random Hermitian paths."""
    recs = texp_paths(paths, dim, seed, eps_ode)
    return max(r["det_res"] for r in recs), max(r["semigroup_res"] for r in recs)


def bks_pairs(count: int, dim: int, seed: int) -> tuple[int, float]:
    """Number of random PSD pairs violating ``||sqrt A - sqrt B||_2 <= ||sqrt|A - B|||_2``."""
    rng = np.random.default_rng(seed)
    bad, worst = 0, -np.inf
    for _ in range(count):
        k = int(rng.integers(1, dim + 1))
        X = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
        Y = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        A = X @ X.conj().T
        B = Y @ np.diag(rng.exponential(1.0, dim) ** 3) @ Y.conj().T / dim
        lhs = np.linalg.norm(psd_sqrt(A) - psd_sqrt(B), "fro")
        es = hermitian_eig(A - B)
        absAB = (es.vectors * np.abs(es.values)[None, :]) @ es.vectors.conj().T
        rhs = np.linalg.norm(psd_sqrt(absAB), "fro")
        worst = max(worst, lhs - rhs)
        bad += int(lhs > rhs * (1 + 1e-12))
    return bad, float(worst)


def example_phi(n: int, lam: float = 0.0) -> np.ndarray:
    """``phi_ij = e^{i(i-j) lam} / |ij|`` over indices ``+-1..+-n``."""
    idx = np.concatenate([np.arange(1, n + 1), -np.arange(1, n + 1)]).astype(float)
    return np.exp(1j * (idx[:, None] - idx[None, :]) * lam) / np.abs(np.outer(idx, idx))


def example_alpha1_sq(n: int) -> float:
    eta = psd_sqrt(example_phi(n))
    return float(hermitian_eig(eta).values[0] ** 2)


def _finite_setup(cfg: SweepConfig):
    fc = cfg.finite_check
    H = random_hermitian(fc.dim, fc.seed)
    rng = np.random.default_rng(fc.seed + 1)
    B = rng.standard_normal((fc.dim, fc.rank)) + 1j * rng.standard_normal((fc.dim, fc.rank))
    B, _ = np.linalg.qr(B) if fc.rank else (B, None)
    vals = rng.uniform(0.3, 1.0, fc.rank) * rng.choice([-1.0, 1.0], fc.rank)
    V = (B * vals[None, :]) @ B.conj().T if fc.rank else np.zeros((fc.dim, fc.dim))
    frame = Frame.constant(fc.dim)
    return FiniteHermitian(H), frame, Perturbation.from_potential(V, frame), V


def run_acceptance(cfg: SweepConfig, tol_factor: float = 1.0, log=None) -> SuiteReport:
    """Run all twelve criteria.

    ``tol_factor`` scales every tolerance (0.01 for the strict profile).
    """
    say = log or (lambda *_: None)
    tol = cfg.tolerances.scaled(tol_factor)
    rep = SuiteReport()
    R = rep.results

    say("sweep ...")
    t0 = time.perf_counter()
    rows, summary = run_sweep(cfg, threads=1)
    elapsed = time.perf_counter() - t0
    rep.rows, rep.summary = rows, summary
    nerr = sum(1 for r in rows if r["status"] not in ("ok", "resonant"))
    status = f"{len(rows)} rows, {nerr} failed, {elapsed:.1f}s"

    u = max(_max(summary, "unitarity_S"), _max(summary, "unitarity_w"))
    R.append(_res("C1", "unitarity of S and w_pm over the sweep", u, tol.unitary, status, nerr == 0))
    R.append(_res("C1t", "sweep runtime single-threaded [s]", elapsed, tol.runtime_s, f"{len(rows)} points"))

    R.append(_res("C2", "multiplicativity w(r2,r0) = w(r2,r1) w(r1,r0) at (0, r/2, r)",
                  _max(summary, "multiplicativity"), tol.multiplicativity))

    dev = max(_max(summary, k) for k in ("route_wave_stationary", "route_texp_stationary", "route_wave_texp"))
    R.append(_res("C3", "three-route S agreement", dev, tol.route))
    R.append(_res("C4", "|det S - exp(-2 pi i xi_a)|", _max(summary, "det_identity"), tol.det))
    R.append(_res("C5", "xi_a coupling integral vs log-det", _max(summary, "xi_route"), tol.xi_route))
    R.append(_res("C6", "nearest-integer distance of xi_s", _max(summary, "nearest_int_dist"), tol.int_dist,
                  f"mu r_steps={cfg.mu.r_steps}, theta={cfg.mu.theta_points}"))

    say("finite model ...")
    model, frame, pert, V = _finite_setup(cfg)
    fc = cfg.finite_check
    H0, H1 = model.H, model.H + V
    ev = np.concatenate([np.linalg.eigvalsh(H0), np.linalg.eigvalsh(H1)])
    lams = [x for x in np.linspace(ev.min() - 0.3, ev.max() + 0.3, fc.lambda_points)
            if np.min(np.abs(ev - x)) >= fc.margin]
    xi_err, xia_max = 0.0, 0.0
    for lam in lams:
        fam = BoundaryFamily(model, frame, pert, lam)
        prof = mu_invariants(fam, 1.0, r_steps=cfg.mu.r_steps)
        xi_err = max(xi_err, abs(prof.xi - counting_difference(H0, H1, lam)))
        xia_max = max(xia_max, abs(xi_ac_integral(fam, 1.0).value))
    R.append(_res("C7", "finite model: xi (mu route) vs eigenvalue counting", xi_err, tol.finite_xi,
                  f"{len(lams)} points >= {fc.margin} from eigenvalues"))
    R.append(_res("C7a", "finite model: |xi_a|", xia_max, tol.finite_xi_a))

    say("trace formula ...")
    kc = krein_trace_check(model, frame, pert, lambda x: np.exp(-np.asarray(x) ** 2),
                           r_steps=cfg.mu.r_steps)
    R.append(_res("C8", "trace formula residual, Gaussian f", kc.residual, tol.krein))

    say("texp suite ...")
    ts = cfg.texp_suite
    det_res, semi_res = texp_suite(ts.paths, ts.dim, ts.seed)
    R.append(_res("C9", "det Texp = exp((1/i) int Tr A)", det_res, tol.texp_det, f"{ts.paths} paths"))
    R.append(_res("C9s", "Texp semigroup", semi_res, tol.texp_semigroup))

    say("structural invariants ...")
    R.append(_res("C10a", "Aronszajn residual", _max(summary, "aronszajn"), tol.aronszajn))
    R.append(_res("C10b", "Im-sandwich identity", _max(summary, "im_sandwich"), tol.im_sandwich))
    R.append(_res("C10c", "Gram identity eta* eta = (1/pi) Im T", _max(summary, "gram"), tol.gram))
    bad, worst = bks_pairs(100, 8, cfg.seed + 17)
    R.append(CriterionResult("C10d", "BKS inequality on 100 random PSD pairs", float(bad), 1.0, bad == 0,
                             f"max(lhs - rhs) = {worst:.3e}"))
    sn_bad = _snumber_violations(cfg, model, frame, pert)
    R.append(CriterionResult("C10e", "s-number bound s_n(phi(lambda+iy)) <= kappa_n^2 / y", float(sn_bad), 1.0,
                             sn_bad == 0, "sampled y in {1e-3, 1e-2, 0.1, 1, 10}"))

    spread = max((int(r["mu_s_spread"]) for r in rows if r["mu_s_spread"] != ""), default=0)
    n_mu = sum(1 for r in rows if r["mu_s_spread"] != "")
    R.append(CriterionResult("C11", "mu_s theta-independence (max - min)", float(spread), 1.0,
                             spread == 0 and n_mu == sum(1 for r in rows if r["status"] == "ok"),
                             f"{n_mu} points"))

    say("example reproduction ...")
    N = cfg.example_n
    a2 = example_alpha1_sq(N)
    finite_sum = 2.0 * float(np.sum(1.0 / np.arange(1, N + 1) ** 2))
    gap = np.pi**2 / 3.0 - a2
    in_bracket = 2.0 / (N + 1) <= gap <= 2.0 / N
    R.append(_res("C12a", f"alpha_1(0)^2 = 2 sum_(n<={N}) n^-2", abs(a2 - finite_sum), 1e-10))
    R.append(CriterionResult("C12b", "pi^2/3 - alpha_1^2 inside analytic tail bracket [2/(N+1), 2/N]",
                             float(gap), 2.0 / N, bool(in_bracket), f"N={N}"))
    R.append(_res("C12", f"|alpha_1(0)^2 - pi^2/3| at N={N}", abs(gap), tol.example_pi,
                  "2 sum_(n>N) n^-2 ~ 2/N exceeds 1e-3 for N < 2000"))
    return rep


def _snumber_violations(cfg, fmodel, fframe, fpert) -> int:
    model, frame, pert = cfg.build()
    bad = 0
    ys = [1e-3, 1e-2, 0.1, 1.0, 10.0]
    lams = cfg.lambda_grid.points()[:: max(1, cfg.lambda_grid.count // 5)]
    for mdl, frm, prt, pts in ((model, frame, pert, lams), (fmodel, fframe, fpert, [-1.0, 0.0, 0.7])):
        for lam in pts:
            for y in ys:
                for r in (0.0, 1.0):
                    sr = sandwiched_resolvent(mdl, frm, prt, r, complex(lam, y))
                    bad += int(not snumber_bound_check(fiber_data(sr), frm))
    return bad
