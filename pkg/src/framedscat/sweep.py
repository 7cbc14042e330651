"""Sweep over (lambda, r) points with per-row residuals and tolerance pairs."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import SPEC_VERSION
from .config import SweepConfig, parse_config
from .linalg_core import max_abs
from .models import BoundaryFamily
from .scattering import (
    a_pm,
    fiber,
    resonance_scan,
    scattering_stationary,
    scattering_texp,
    scattering_wave_product,
    wave_matrix,
)
from .spectral_shift import (
    default_theta_grid,
    mu_invariants,
    xi_ac_integral,
    xi_ac_logdet,
    xi_singular,
    xi_total,
)

# residual column -> tolerance field
CHECKS = {
    "unitarity_S": "unitary",
    "unitarity_w": "unitary",
    "route_wave_stationary": "route",
    "route_texp_stationary": "route",
    "route_wave_texp": "route",
    "wave_residual": "wave",
    "multiplicativity": "multiplicativity",
    "adjoint_relation": "multiplicativity",
    "aronszajn": "aronszajn",
    "im_sandwich": "im_sandwich",
    "gram": "gram",
    "xi_route": "xi_route",
    "det_identity": "det",
    "nearest_int_dist": "int_dist",
}

VALUE_COLUMNS = [
    "fiber_dim", "sigma_min", "tail_bound", "boundary_est_error",
    "xi_a", "xi_a_logdet", "xi_a_est_error", "xi_total", "xi_total_est_error", "xi_s",
    "mu_s", "mu_s_spread", "theta_points_shifted",
]

COLUMNS = ["lambda", "r", "status"] + VALUE_COLUMNS + [
    c for k in CHECKS for c in (f"{k}_res", f"{k}_tol")
] + ["resonances", "routes"]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _im_sandwich_residual(fam: BoundaryFamily, r: float) -> float:
    """Dense check of ``Im T_r = (I + T_0* rJ)^{-1} Im T_0 (I + rJT_0)^{-1}``."""
    T0, Tr, J = fam.T0, fam.T(r), fam.pert.J
    n = T0.shape[0]
    L = np.eye(n) + r * T0.conj().T @ J
    im0 = (T0 - T0.conj().T) / 2j
    X = np.linalg.solve(L, im0)
    rhs = np.linalg.solve(L, X.conj().T).conj().T
    lhs = (Tr - Tr.conj().T) / 2j
    return max_abs(lhs - rhs) / max(1.0, max_abs(im0))


def _gram_residual(fam: BoundaryFamily, r: float) -> float:
    fd = fiber(fam, r)
    Tr = fam.T(r)
    phi = (Tr - Tr.conj().T) / (2j * np.pi)
    eta = fd.eta
    return max_abs(eta.conj().T @ eta - phi)


def sweep_lambda(cfg: SweepConfig, lam: float) -> list[dict]:
    """All records at one ``lambda`` (sequential in ``r``)."""
    tol = cfg.tolerances
    model, frame, pert = cfg.build()
    rows = []
    base = {"lambda": float(lam), "tail_bound": frame.tail_bound}
    try:
        fam = BoundaryFamily(model, frame, pert, lam, eps_res=tol.eps_res)
    except Exception as exc:  # point-level failure is recorded, never raised
        return [dict(base, r=float(r), status=f"error:{type(exc).__name__}:{exc}") for r in cfg.r_values]
    rmax = max(max(cfg.r_values), 0.0)
    rmin = min(min(cfg.r_values), 0.0)
    res_all = []
    if fam.m and rmax > rmin:
        res_all = [x for x, _ in resonance_scan(fam, (rmin, rmax), cfg.resonance_samples).resonances]
    S_texp, r_prev = None, 0.0
    for r in cfg.r_values:
        row = dict(base, r=float(r), routes=";".join(cfg.routes))
        crossed = [x for x in res_all if min(0.0, r) < x < max(0.0, r)]
        row["resonances"] = ";".join(f"{x:.12g}" for x in crossed)
        try:
            row["sigma_min"] = fam.sigma_min(r)
            row["boundary_est_error"] = fam.base.est_error
            if not fam.base.converged:
                raise ValueError("boundary value did not converge")
            if row["sigma_min"] < tol.eps_res:
                row["status"] = "resonant"
                rows.append(row)
                continue
            row["fiber_dim"] = fiber(fam, r).rank
            Ss = scattering_stationary(fam, r)
            row["unitarity_S_res"] = Ss.unitarity()
            wp = wave_matrix(fam, 0.0, r, +1, tol_wave=np.inf)
            wm = wave_matrix(fam, 0.0, r, -1, tol_wave=np.inf)
            row["unitarity_w_res"] = max(wp.unitarity(), wm.unitarity())
            row["wave_residual_res"] = max(wp.residual, wm.residual)
            Sw = scattering_wave_product(fam, r).S
            row["route_wave_stationary_res"] = max_abs(Sw - Ss.S)
            if "texp" in cfg.routes and r >= 0:
                seg = [x for x in res_all if r_prev < x < r]
                S_texp = scattering_texp(fam, r, eps_ode=tol.eps_ode, resonances=seg,
                                         r_start=r_prev, S_start=S_texp).S
                r_prev = r
                row["route_texp_stationary_res"] = max_abs(S_texp - Ss.S)
                row["route_wave_texp_res"] = max_abs(S_texp - Sw)
            # multiplicativity over (0, r/2, r) and the adjoint relation
            h = 0.5 * r
            if fam.sigma_min(h) >= tol.eps_res:
                mult = 0.0
                for sgn in (+1, -1):
                    W20 = wave_matrix(fam, 0.0, r, sgn, with_residual=False).W
                    W21 = wave_matrix(fam, h, r, sgn, with_residual=False).W
                    W10 = wave_matrix(fam, 0.0, h, sgn, with_residual=False).W
                    mult = max(mult, max_abs(W20 - W21 @ W10))
                row["multiplicativity_res"] = mult
            back = wave_matrix(fam, r, 0.0, +1, with_residual=False).W
            row["adjoint_relation_res"] = max_abs(back - wp.W.conj().T)
            a_pm(fam, 0.0, r, +1)  # raises if the two forms disagree
            row["aronszajn_res"] = fam.aronszajn_residual(r)
            row["im_sandwich_res"] = _im_sandwich_residual(fam, r)
            row["gram_res"] = _gram_residual(fam, r)
            q = xi_ac_integral(fam, r, resonances=crossed)
            xi_a = q.value
            row["xi_a"], row["xi_a_est_error"] = xi_a, q.est_error
            row["xi_a_logdet"] = xi_ac_logdet(fam, r, cfg.mu.logdet_steps)
            row["xi_route_res"] = abs(xi_a - row["xi_a_logdet"])
            row["det_identity_res"] = abs(Ss.det() - np.exp(-2j * np.pi * xi_a))
            prof = mu_invariants(fam, r, default_theta_grid(cfg.mu.theta_points), cfg.mu.r_steps)
            xt = xi_total(prof)
            xs, dist = xi_singular(xt.value, xi_a)
            row.update(xi_total=xt.value, xi_total_est_error=xt.est_error, xi_s=xs,
                       nearest_int_dist=dist, mu_s=prof.mu_s, mu_s_spread=prof.mu_s_spread,
                       theta_points_shifted=len(prof.shifted_points))
            row["nearest_int_dist_res"] = dist
            row["status"] = "ok"
        except Exception as exc:
            row["status"] = f"error:{type(exc).__name__}:{exc}"
        rows.append(row)
    return rows


def _finalize(row: dict, tol) -> dict:
    out = {}
    bad = []
    for c in COLUMNS:
        if c.endswith("_tol"):
            out[c] = _fmt(getattr(tol, CHECKS[c[:-4]]))
            continue
        v = row.get(c)
        if v is None:
            out[c] = ""
        elif isinstance(v, str):
            out[c] = v
        else:
            if not math.isfinite(float(v)):
                bad.append(c)
                out[c] = ""
            else:
                out[c] = _fmt(v)
    status = row.get("status", "error:missing")
    if bad:
        status = f"nonfinite:{'|'.join(bad)}" if status == "ok" else status + f";nonfinite:{'|'.join(bad)}"
    out["status"] = status
    return out


def _worker(args):
    data, lam = args
    return sweep_lambda(parse_config(data), lam)


def run_sweep(cfg: SweepConfig, threads: int | None = None):
    """Evaluate every ``(lambda, r)`` point.

    Returns
    -------
    rows : list of dict
        Formatted CSV rows in ``lambda`` then ``r`` order.
    summary : dict
        Suite-level statistics.
    """
    threads = threads or cfg.threads
    lams = cfg.lambda_grid.points()
    t0 = time.perf_counter()
    if threads > 1 and len(lams) > 1:
        data = cfg.normalized()
        with ProcessPoolExecutor(max_workers=threads) as ex:
            per = list(ex.map(_worker, [(data, float(x)) for x in lams]))
    else:
        per = [sweep_lambda(cfg, float(x)) for x in lams]
    elapsed = time.perf_counter() - t0
    raw = [row for block in per for row in block]
    rows = [_finalize(r, cfg.tolerances) for r in raw]
    return rows, summarize(cfg, raw, rows, elapsed)


def summarize(cfg: SweepConfig, raw: list[dict], rows: list[dict], elapsed: float) -> dict:
    tol = cfg.tolerances
    stats = {}
    for k, tname in CHECKS.items():
        vals = [r[f"{k}_res"] for r in raw if isinstance(r.get(f"{k}_res"), float) and math.isfinite(r[f"{k}_res"])]
        t = getattr(tol, tname)
        stats[k] = {"max": max(vals) if vals else None, "tol": t, "count": len(vals),
                    "pass": bool(max(vals) < t) if vals else None}
    inventory = [{"lambda": r["lambda"], "r": float(x)}
                 for r in raw if r.get("resonances") for x in r["resonances"].split(";")]
    # one record per (lambda, r*) pair
    seen, inv = set(), []
    for item in inventory:
        key = (item["lambda"], round(item["r"], 9))
        if key not in seen:
            seen.add(key)
            inv.append(item)
    statuses = {}
    for r in rows:
        s = r["status"].split(":")[0]
        statuses[s] = statuses.get(s, 0) + 1
    nid = [r["nearest_int_dist"] for r in raw if isinstance(r.get("nearest_int_dist"), float)]
    return {
        "spec_version": SPEC_VERSION,
        "points": len(rows),
        "status_counts": statuses,
        "residuals": stats,
        "max_nearest_int_dist": max(nid) if nid else None,
        "mu_s_spread_max": max((r.get("mu_s_spread", 0) for r in raw), default=0),
        "resonance_inventory": inv,
        "runtime_s": elapsed,
        "config": cfg.normalized(),
    }


def write_csv(rows: list[dict], path, columns=None) -> None:
    columns = columns or COLUMNS
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in columns})
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_summary(summary: dict, path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n",
                          encoding="utf-8")
