"""Command-line front end: config parsing, run orchestration, report files.

Configs are flat ``key = value`` text files (see ``config-schema.txt`` at the
repository root).  Outputs are plain CSV/JSON so that re-running an identical
config reproduces them bit for bit.

Exit codes: 0 success, 1 usage or config error, 2 acceptance failure,
3 numerical abort.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from . import acceptance
from .evolve import (
    NegativityAbort,
    NonFiniteAbort,
    MonotonicityViolation,
    TimeMesh,
    barrier_check,
    evolve,
)
from .kernel import dirac_approx, gamma_radial, kernel_profile
from .params import ModelParams
from .selfsim import flat_profile_value, flatness_gap, rescale_profile, tail_fit
from .spectral import build_grid


class ConfigError(Exception):
    pass


# key -> (type, default); None default means required for the kinds using it
SCHEMA = {
    "alpha": (float, 0.5),
    "beta": (float, 0.0),
    "p": (float, 1.5),
    "dim": (int, 1),
    "box_size": (float, None),
    "points": (int, None),
    "t0": (float, None),
    "t_end": (float, 1.0),
    "steps": (int, 128),
    "grading": (float, 1.0),
    "mass": (float, 1.0),
    "mass_list": (str, ""),
    "fit_window": (str, "5,18"),
    "seed": (int, 0),
}

DESK = {1: (200.0, 4096, 0.1), 2: (60.0, 512, 0.25)}  # box_size, points, t0


def parse_config(path):
    """Read a flat key=value file; unknown keys and bad values are fatal."""
    cfg = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in SCHEMA:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        typ, _ = SCHEMA[key]
        try:
            cfg[key] = typ(val)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: key {key!r}: cannot parse {val!r} as {typ.__name__}")
    return cfg


def resolve(cfg):
    """Fill defaults, including dimension-dependent desk-scale values."""
    out = {}
    for key, (_, default) in SCHEMA.items():
        out[key] = cfg.get(key, default)
    dim = out["dim"]
    if dim not in DESK:
        raise ConfigError(f"dim must be 1 or 2, got {dim}")
    box, points, t0 = DESK[dim]
    if out["box_size"] is None:
        out["box_size"] = box
    if out["points"] is None:
        out["points"] = points
    if out["t0"] is None:
        out["t0"] = t0
    if out["t0"] <= 0 or out["t_end"] <= out["t0"]:
        raise ConfigError("need 0 < t0 < t_end")
    if out["steps"] <= 0:
        raise ConfigError("steps must be positive")
    return out


def _mass_list(cfg):
    text = cfg["mass_list"].strip()
    if not text:
        return [cfg["mass"] * 4.0**j for j in range(4)]
    try:
        return [float(s) for s in text.split(",")]
    except ValueError:
        raise ConfigError(f"mass_list: cannot parse {cfg['mass_list']!r} as floats")


def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(header + "\n")
        for row in rows:
            f.write(",".join(f"{v:.12g}" for v in row) + "\n")


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _setup(cfg, quick):
    points = cfg["points"] // 2 if quick and cfg["points"] > 1024 else cfg["points"]
    grid = build_grid(cfg["dim"], cfg["box_size"], points)
    prof = kernel_profile(cfg["alpha"], cfg["dim"])
    params = ModelParams(cfg["alpha"], cfg["beta"], cfg["p"], cfg["dim"])
    return grid, prof, params


def _approx_kw(quick):
    # quick is a coarse smoke run; the discrete datum cannot meet the
    # full-resolution mass and tail gates there
    return {"mass_rtol": 1e-2, "tail_tol": 1e-4} if quick else {}


def run_kernel(cfg, out_dir, quick):
    prof = kernel_profile(cfg["alpha"], cfg["dim"])
    rows = [(r, v, e) for r, v, e in zip(prof.radii, prof.values, prof.errors)]
    _write_csv(os.path.join(out_dir, "kernel_profile.csv"), "r,value,quad_error", rows)
    report = {
        "kind": "kernel", "seed": cfg["seed"], "alpha": cfg["alpha"], "dim": cfg["dim"],
        "center_value": prof.center_value, "tail_exponent_fit": prof.tail_exponent_fit,
    }
    checks = {}
    if cfg["alpha"] == 0.5:
        closed = (lambda r: 1.0 / (np.pi * (1.0 + r * r))) if cfg["dim"] == 1 else (
            lambda r: (1.0 + r * r) ** -1.5 / (2.0 * np.pi))
        errs = [abs(prof.evaluate(r) / closed(r) - 1.0) for r in (0.0, 1.0, 5.0, 20.0)]
        checks["closed_form_max_rel_err"] = {"value": max(errs), "tolerance": 1e-5,
                                             "passed": max(errs) <= 1e-5,
                                             "oracle": "closed-form kernel"}
    if cfg["alpha"] == 1.0:
        errs = [abs(gamma_radial(1.0, cfg["dim"], r)[0]
                    / ((4 * np.pi) ** (-cfg["dim"] / 2) * np.exp(-r * r / 4)) - 1.0)
                for r in (0.0, 1.0, 2.0)]
        checks["gaussian_max_rel_err"] = {"value": max(errs), "tolerance": 1e-6,
                                          "passed": max(errs) <= 1e-6,
                                          "oracle": "Gaussian closed form"}
    report["checks"] = checks
    _write_json(os.path.join(out_dir, "kernel_report.json"), report)
    return all(c["passed"] for c in checks.values())


def run_evolve(cfg, out_dir, quick):
    grid, prof, params = _setup(cfg, quick)
    mesh = TimeMesh(cfg["t0"], cfg["t_end"], cfg["steps"], cfg["grading"])
    init = dirac_approx(grid, cfg["mass"], cfg["t0"], prof, **_approx_kw(quick))
    traj = evolve(init, mesh, params, max_snapshots=65)
    kernel_margin = barrier_check(traj, "kernel", profile=prof, k=cfg["mass"])
    flat_margin = barrier_check(traj, "flat")
    rows = [(t, f.mass, float(f.values.max()), kernel_margin, flat_margin)
            for t, f in zip(traj.snapshot_times, traj.snapshots)]
    _write_csv(os.path.join(out_dir, "trajectory.csv"), "t,mass,max,kernel_margin,flat_margin", rows)
    _write_json(os.path.join(out_dir, "evolve_report.json"), {
        "kind": "evolve", "seed": cfg["seed"], "regime": params.regime.name, "absorbed_mass": traj.absorbed_mass,
        "kernel_margin": {"value": kernel_margin, "tolerance": 1e-3,
                          "passed": kernel_margin <= 1e-3, "oracle": "periodized kernel bound"},
        "flat_margin": {"value": flat_margin, "tolerance": 1e-3,
                        "passed": flat_margin <= 1e-3, "oracle": "maximal flat solution"},
    })
    return kernel_margin <= 1e-3 and flat_margin <= 1e-3


def run_dirac_limit(cfg, out_dir, quick):
    grid, prof, params = _setup(cfg, quick)
    mesh = TimeMesh(cfg["t0"], cfg["t_end"], cfg["steps"], cfg["grading"])
    rows, gaps, centers = [], [], []
    center = tuple(g // 2 for g in grid.shape)
    for k in _mass_list(cfg):
        traj = evolve(dirac_approx(grid, k, cfg["t0"], prof, **{"tail_tol": 1e-5, **_approx_kw(quick)}),
                      mesh, params, max_snapshots=2)
        prof_v = rescale_profile(traj.final, cfg["t_end"], params, grid)
        gap = flatness_gap(prof_v)
        centers.append(float(traj.final.values[center]))
        gaps.append(gap)
        rows.append((k, centers[-1], gap))
    _write_csv(os.path.join(out_dir, "dirac_limit.csv"), "mass,center_value,flatness_gap", rows)
    flat_regime = params.regime.name == "FlatAbsorption"
    trend_ok = (all(b < a for a, b in zip(gaps, gaps[1:])) if flat_regime
                else all(c2 > c1 for c1, c2 in zip(centers, centers[1:])))
    _write_json(os.path.join(out_dir, "dirac_limit_report.json"), {
        "kind": "dirac-limit", "seed": cfg["seed"], "regime": params.regime.name,
        "trend": {"value": gaps if flat_regime else centers,
                  "passed": trend_ok,
                  "oracle": "mass-monotone family"},
    })
    return trend_ok


def run_selfsim(cfg, out_dir, quick):
    grid, prof, params = _setup(cfg, quick)
    mesh = TimeMesh(cfg["t0"], cfg["t_end"], cfg["steps"], cfg["grading"])
    traj = evolve(dirac_approx(grid, cfg["mass"], cfg["t0"], prof, **{"tail_tol": 1e-5, **_approx_kw(quick)}),
                  mesh, params, max_snapshots=2)
    eta_grid = build_grid(grid.dim, grid.L / cfg["t_end"] ** (1 / (2 * params.alpha)), grid.M)
    prof_v = rescale_profile(traj.final, cfg["t_end"], params, eta_grid)
    try:
        window = tuple(float(s) for s in cfg["fit_window"].split(","))
    except ValueError:
        raise ConfigError(f"fit_window: cannot parse {cfg['fit_window']!r}")
    slope, log_score = tail_fit(prof_v, window)
    eta = (np.abs(eta_grid.axis_coords) if grid.dim == 1 else eta_grid.radius()).ravel()
    v = prof_v.field.values.ravel()
    order = np.argsort(eta)
    eta, v = eta[order], v[order]
    in_win = (eta >= window[0]) & (eta <= window[1]) & (v > 0)
    m, logc = np.polyfit(np.log(eta[in_win]), np.log(v[in_win]), 1)
    stride = max(1, eta.size // 4096)
    rows = [(e, val, np.exp(logc) * e**m if e > 0 else np.nan)
            for e, val in zip(eta[::stride], v[::stride])]
    _write_csv(os.path.join(out_dir, "profile.csv"), "eta,v,fit", rows)
    expected = -(params.dim + 2.0 * params.alpha)
    _write_json(os.path.join(out_dir, "selfsim_report.json"), {
        "kind": "selfsim", "seed": cfg["seed"], "regime": params.regime.name,
        "tail_slope": {"value": slope, "expected": expected, "tolerance": 0.15,
                       "passed": abs(slope - expected) <= 0.15,
                       "oracle": "kernel tail exponent"},
        "log_correction_score": log_score,
        "flatness_gap": flatness_gap(prof_v),
    })
    return abs(slope - expected) <= 0.15


def run_verify(cfg, out_dir, quick, workers):
    results = acceptance.run_suite(quick=quick, workers=workers)
    payload = {"kind": "verify", "seed": cfg["seed"], "quick": quick, "criteria": []}
    for r in results:
        print(r.summary(), flush=True)
        payload["criteria"].append({
            "number": r.number, "name": r.name, "passed": r.passed, "runtime_s": round(r.runtime, 2),
            "checks": [{"label": c.label, "measured": c.measured, "tolerance": c.tolerance,
                        "passed": c.passed, "oracle": c.oracle} for c in r.checks],
        })
    _write_json(os.path.join(out_dir, "verify_report.json"), payload)
    return all(r.passed for r in results)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fracheat",
        description="Simulator and verification harness for fractional diffusion "
                    "with time-weighted absorption.",
    )
    parser.add_argument("kind", choices=["kernel", "evolve", "dirac-limit", "selfsim", "verify"])
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--workers", type=int, default=1, help="concurrent runs for verify")
    parser.add_argument("--quick", action="store_true", help="reduced resolutions for CI")
    args = parser.parse_args(argv)

    try:
        cfg = resolve(parse_config(args.config) if args.config else {})
        os.makedirs(args.out, exist_ok=True)
        if not os.access(args.out, os.W_OK):
            raise ConfigError(f"output directory {args.out!r} is not writable")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    start = time.perf_counter()
    try:
        if args.kind == "verify":
            ok = run_verify(cfg, args.out, args.quick, max(1, args.workers))
        else:
            runner = {"kernel": run_kernel, "evolve": run_evolve,
                      "dirac-limit": run_dirac_limit, "selfsim": run_selfsim}[args.kind]
            ok = runner(cfg, args.out, args.quick)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (NegativityAbort, NonFiniteAbort, MonotonicityViolation) as exc:
        print(f"numerical abort ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError) as exc:
        print(f"numerical abort ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    elapsed = time.perf_counter() - start
    print(f"{args.kind}: {'pass' if ok else 'FAIL'} ({elapsed:.1f}s, outputs in {args.out})")
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
