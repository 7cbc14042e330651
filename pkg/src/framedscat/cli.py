"""Command-line interface: sweeps, tables and the acceptance suite."""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, SweepConfig, load_config, parse_config
from .models import BoundaryFamily
from .scattering import (
    resonance_scan,
    scattering_stationary,
    scattering_texp,
    scattering_wave_product,
)
from .sweep import _fmt, run_sweep, write_csv, write_summary
from . import SPEC_VERSION

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SCATTERING_COLUMNS = ["lambda", "r", "route", "status", "fiber_dim", "det_re", "det_im",
                      "unitarity_res", "eigenphases"]
RESONANCE_COLUMNS = ["lambda", "r_star", "sigma_min"]
TEXP_COLUMNS = ["path", "det_res", "semigroup_res", "constant_res"]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file (defaults apply when omitted)")
    common.add_argument("--out", type=Path, help="output directory (default: config output.dir)")
    common.add_argument("--threads", type=int, help="worker processes over lambda points")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--tolerance-profile", choices=["default", "strict"], default="default",
                        help="'strict' divides every tolerance by 100")
    p = argparse.ArgumentParser(prog="framedscat", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("scan", parents=[common], help="spectral shift sweep over (lambda, r)")
    sub.add_parser("scattering", parents=[common], help="S-matrix tables for each route")
    sub.add_parser("resonances", parents=[common], help="resonance scans over the coupling window")
    sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    sub.add_parser("texp-bench", parents=[common], help="time-ordered exponential checks")
    return p


def _resolve(args) -> SweepConfig:
    cfg = load_config(args.config) if args.config else parse_config({})
    data = cfg.normalized()
    if args.seed is not None:
        data["seed"] = args.seed
    if args.threads is not None:
        data["threads"] = args.threads
    if args.tolerance_profile == "strict":
        data["tolerances"] = cfg.tolerances.scaled(0.01).model_dump()
    return parse_config(data) if data != cfg.normalized() else cfg


def _outdir(args, cfg) -> Path:
    out = args.out if args.out is not None else Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_scan(cfg, out) -> int:
    rows, summary = run_sweep(cfg)
    write_csv(rows, out / "results.csv")
    write_summary(summary, out / "summary.json")
    print(f"{summary['points']} points in {summary['runtime_s']:.1f}s; status {summary['status_counts']}")
    print(f"wrote {out / 'results.csv'} and {out / 'summary.json'}")
    return EXIT_OK


def cmd_scattering(cfg, out) -> int:
    model, frame, pert = cfg.build()
    rows = []
    t0 = time.perf_counter()
    for lam in cfg.lambda_grid.points():
        fam = BoundaryFamily(model, frame, pert, float(lam), eps_res=cfg.tolerances.eps_res)
        S_texp, r_prev = None, 0.0
        for r in cfg.r_values:
            for route in cfg.routes:
                row = {"lambda": _fmt(lam), "r": _fmt(r), "route": route}
                try:
                    if route == "stationary":
                        sm = scattering_stationary(fam, r)
                    elif route == "wave_product":
                        sm = scattering_wave_product(fam, r)
                    else:
                        if r < 0:
                            raise ValueError("texp route runs over r >= 0")
                        sm = scattering_texp(fam, r, eps_ode=cfg.tolerances.eps_ode,
                                             r_start=r_prev, S_start=S_texp)
                        S_texp, r_prev = sm.S, r
                    d = sm.det()
                    row.update(status="ok", fiber_dim=str(sm.S.shape[0]), det_re=_fmt(d.real),
                               det_im=_fmt(d.imag), unitarity_res=_fmt(sm.unitarity()),
                               eigenphases=";".join(_fmt(x) for x in sm.eigenphases))
                except Exception as exc:
                    row["status"] = f"error:{type(exc).__name__}:{exc}"
                rows.append(row)
    write_csv(rows, out / "results.csv", SCATTERING_COLUMNS)
    unit = [float(r["unitarity_res"]) for r in rows if r.get("unitarity_res")]
    summary = {"spec_version": SPEC_VERSION, "points": len(rows),
               "errors": sum(1 for r in rows if r["status"] != "ok"),
               "max_unitarity_res": max(unit) if unit else None,
               "runtime_s": time.perf_counter() - t0, "config": cfg.normalized()}
    write_summary(summary, out / "summary.json")
    print(f"{len(rows)} rows, {summary['errors']} errors, max unitarity residual {summary['max_unitarity_res']}")
    return EXIT_OK


def cmd_resonances(cfg, out) -> int:
    model, frame, pert = cfg.build()
    rows, t0 = [], time.perf_counter()
    for lam in cfg.lambda_grid.points():
        fam = BoundaryFamily(model, frame, pert, float(lam), eps_res=cfg.tolerances.eps_res)
        if fam.m == 0:
            continue
        scan = resonance_scan(fam, cfg.r_window, cfg.resonance_samples)
        rows += [{"lambda": _fmt(lam), "r_star": _fmt(x), "sigma_min": _fmt(s)} for x, s in scan.resonances]
    write_csv(rows, out / "results.csv", RESONANCE_COLUMNS)
    summary = {"spec_version": SPEC_VERSION, "resonances": len(rows), "r_window": list(cfg.r_window),
               "runtime_s": time.perf_counter() - t0, "config": cfg.normalized()}
    write_summary(summary, out / "summary.json")
    print(f"{len(rows)} resonances in r-window {tuple(cfg.r_window)}")
    return EXIT_OK


def cmd_texp_bench(cfg, out) -> int:
    from .verify import texp_paths

    ts, tol = cfg.texp_suite, cfg.tolerances
    recs = texp_paths(ts.paths, ts.dim, ts.seed)
    rows = [{"path": str(k), **{c: _fmt(v) for c, v in r.items()}} for k, r in enumerate(recs)]
    write_csv(rows, out / "results.csv", TEXP_COLUMNS)
    worst = {c: max(r[c] for r in recs) for c in TEXP_COLUMNS[1:]}
    ok = worst["det_res"] < tol.texp_det and worst["semigroup_res"] < tol.texp_semigroup
    write_summary({"spec_version": SPEC_VERSION, "paths": ts.paths, "dim": ts.dim, "max": worst,
                   "pass": ok, "config": cfg.normalized()}, out / "summary.json")
    for key, v in worst.items():
        print(f"max {key}: {v:.3e}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(cfg, out) -> int:
    from .verify import run_acceptance

    rep = run_acceptance(cfg, log=lambda s: print(s, file=sys.stderr))
    print(rep.table())
    write_csv(rep.rows, out / "results.csv")
    summary = dict(rep.summary)
    summary["acceptance"] = [
        {"id": r.key, "name": r.title, "value": r.value, "tol": r.tol, "pass": r.passed, "detail": r.detail}
        for r in rep.results
    ]
    write_summary(summary, out / "summary.json")
    failed = [r.key for r in rep.results if not r.passed]
    print("all criteria passed" if not failed else f"failed: {', '.join(failed)}")
    return EXIT_OK if not failed else EXIT_FAIL


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        cfg = _resolve(args)
        out = _outdir(args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "scan":
        return cmd_scan(cfg, out)
    if args.command == "scattering":
        return cmd_scattering(cfg, out)
    if args.command == "resonances":
        return cmd_resonances(cfg, out)
    if args.command == "texp-bench":
        return cmd_texp_bench(cfg, out)
    return cmd_verify(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
