"""Command-line entry points.

Subcommands: integrate, search, scan, selfsim, experiment, catalog.
Results land in a content-addressed catalog (--catalog flag, else
KHEP_CATALOG env var, else ./catalog). Exit codes: 0 success, 1 runtime
failure, 2 usage error. Option precedence: flags > --config file
(plain "key = value" lines) > built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import experiments, io, selfsim
from .dynamics import PhaseState, conserved
from .errors import KeplerHeisenbergError, StepFailureError
from .integrator import IntegratorConfig, Trajectory, integrate
from .search import (OrbitRecord, RefineFailure, SearchConfig, farey_scan,
                     monte_carlo_refine, seed_from_ptheta)

CONFIG_KEYS = {"step_size": float, "method": str, "tmax": float,
               "catalog": str, "rng_seed": int, "update_steps": int,
               "threshold": float}


def _load_config_file(path: str) -> dict:
    out = {}
    for num, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{num}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ValueError(f"{path}:{num}: unknown key {key!r}")
        out[key] = CONFIG_KEYS[key](val)
    return out


def _parse_state(text: str) -> PhaseState:
    parts = text.split(",")
    if len(parts) != 6:
        raise argparse.ArgumentTypeError(
            "state needs 6 comma-separated numbers x,y,z,px,py,pz")
    return PhaseState(*(float(p) for p in parts))


def _seed_state(args, parser) -> PhaseState:
    given = [name for name in ("state", "ptheta", "planar", "zaxis_j")
             if getattr(args, name, None) is not None]
    if len(given) != 1:
        parser.error("exactly one seed is required: "
                     "--state | --ptheta | --planar | --zaxis-j")
    if args.state is not None:
        return args.state
    if args.ptheta is not None:
        return seed_from_ptheta(args.ptheta)
    if getattr(args, "planar", None) is not None:
        return experiments.PLANAR_SEEDS[args.planar]
    return experiments.z_axis_seed(args.zaxis_j)


def _integrator_config(args) -> IntegratorConfig:
    return IntegratorConfig(
        step_size=args.step_size, method=args.method, max_time=args.tmax,
        dilational_step=getattr(args, "dilational", False),
        record_stride=getattr(args, "record_stride", 1),
        collision_rho=getattr(args, "collision_rho", 1e-6))


def _drift_lines(traj: Trajectory) -> list[str]:
    return [
        f"termination        {traj.termination}",
        f"samples            {len(traj.times)}",
        f"z crossings        {len(traj.z_crossings)}",
        f"collision time     {traj.collision_time}",
        f"max |dH|           {traj.drift.max_dH:.3e}",
        f"max |dptheta|      {traj.drift.max_dptheta:.3e}",
        f"max |J - J0 - 2Ht| {traj.drift.max_J_residual:.3e}",
    ]


def _save_trajectory(cat: io.Catalog, traj: Trajectory, params: dict,
                     note: str = "") -> io.CatalogEntry:
    seed = PhaseState.from_array(traj.states[0])
    cons = conserved(seed)
    summary = "\n".join([
        "trajectory",
        f"seed               {list(seed.as_array())}",
        f"H                  {cons.H:.17g}",
        f"ptheta             {cons.ptheta:.17g}",
        f"J                  {cons.J:.17g}",
        *_drift_lines(traj),
    ] + ([note] if note else [])) + "\n"
    entry = cat.put("trajectory", params, {
        "trajectory.csv": io.trajectory_csv(traj),
        "trajectory.bin": io.trajectory_binary(traj),
    }, summary)
    return entry


def cmd_integrate(args, parser) -> int:
    cat = io.Catalog(args.catalog)
    state = _seed_state(args, parser)
    cfg = _integrator_config(args)
    params = {"command": "integrate", "seed": list(state.as_array()),
              "step_size": cfg.step_size, "method": cfg.method,
              "tmax": cfg.max_time, "dilational": cfg.dilational_step,
              "record_stride": cfg.record_stride,
              "collision_rho": cfg.collision_rho}
    try:
        traj = integrate(state, cfg)
    except StepFailureError as exc:
        if exc.trajectory is not None:
            entry = _save_trajectory(cat, exc.trajectory, params,
                                     note=f"PARTIAL: {exc}")
            print(f"integration failed: {exc}", file=sys.stderr)
            print(f"partial trajectory saved: {entry.path}")
        else:
            print(f"integration failed before the first step: {exc}",
                  file=sys.stderr)
        return 1
    entry = _save_trajectory(cat, traj, params)
    for line in _drift_lines(traj):
        print(line)
    print(f"saved: {entry.path}")
    return 0


def _orbit_files(record: OrbitRecord, step_size: float) -> dict:
    cfg = IntegratorConfig(step_size=step_size, method="gauss2",
                           max_time=record.period + 4 * step_size)
    traj = integrate(record.initial_state, cfg)
    return {"record.json": io.orbit_record_json(record),
            "trajectory.csv": io.trajectory_csv(traj)}


def cmd_search(args, parser) -> int:
    cat = io.Catalog(args.catalog)
    state = _seed_state(args, parser)
    cfg = SearchConfig(
        update_steps=args.update_steps,
        acceptance_threshold=args.threshold,
        rng_seed=args.rng_seed,
        integrator=IntegratorConfig(step_size=args.step_size,
                                    method=args.method, max_time=args.tmax))
    params = {"command": "search", "seed": list(state.as_array()),
              "rng_seed": args.rng_seed, "update_steps": args.update_steps,
              "threshold": args.threshold, "step_size": args.step_size,
              "method": args.method, "tmax": args.tmax}
    result = monte_carlo_refine(state, cfg)
    if isinstance(result, RefineFailure):
        print(f"search failed: {result.reason}", file=sys.stderr)
        print(f"best objective {result.best_objective:.3e} after "
              f"{result.evaluations} evaluations", file=sys.stderr)
        return 1
    entry = cat.put("orbit", params,
                    _orbit_files(result, args.step_size),
                    result.summary() + "\n")
    print(result.summary())
    print(f"saved: {entry.path}")
    return 0


def cmd_scan(args, parser) -> int:
    cat = io.Catalog(args.catalog)
    grid = np.linspace(args.ptheta_min, args.ptheta_max, args.steps)
    cfg = SearchConfig(
        update_steps=args.update_steps,
        acceptance_threshold=args.threshold,
        rng_seed=args.rng_seed,
        integrator=IntegratorConfig(step_size=args.step_size,
                                    method=args.method, max_time=args.tmax))
    rows = farey_scan(grid, cfg)
    lines = ["ptheta_seed,converged,j,k,rotation,ptheta,period,H,J,objective"]
    for r in rows:
        if r.converged:
            lines.append(",".join([
                f"{r.ptheta_seed:.17g}", "1",
                str(r.rotation.j), str(r.rotation.k),
                f"{r.rotation.value:.17g}", f"{r.ptheta:.17g}",
                f"{r.period:.17g}", f"{r.H:.17g}", f"{r.J:.17g}",
                f"{r.objective_value:.17g}"]))
        else:
            lines.append(f"{r.ptheta_seed:.17g},0,,,,,,,,")
    table = "\n".join(lines) + "\n"
    n_ok = sum(r.converged for r in rows)
    found = [f"{r.rotation}" for r in rows if r.converged]
    summary = (f"farey scan over [{args.ptheta_min}, {args.ptheta_max}] "
               f"({args.steps} points)\nconverged: {n_ok}/{len(rows)}\n"
               f"rotation numbers: {' '.join(found)}\n")
    params = {"command": "scan", "ptheta_min": args.ptheta_min,
              "ptheta_max": args.ptheta_max, "steps": args.steps,
              "rng_seed": args.rng_seed, "step_size": args.step_size,
              "method": args.method, "tmax": args.tmax,
              "update_steps": args.update_steps, "threshold": args.threshold}
    entry = cat.put("report", params, {"farey.csv": table}, summary)
    print(summary, end="")
    print(f"saved: {entry.path}")
    return 0


def _overlay_csv(traj: Trajectory, dom, t_lo: float, t_hi: float,
                 n: int = 600) -> str:
    ts = np.linspace(t_lo, t_hi, n)
    lines = ["t,x,y,z,px,py,pz,rx,ry,rz,rpx,rpy,rpz"]
    for t in ts:
        direct = traj.state_at(float(t))
        rec = selfsim.extend(dom, float(t)).as_array()
        vals = [t, *direct, *rec]
        lines.append(",".join(f"{v:.17g}" for v in vals))
    return "\n".join(lines) + "\n"


def cmd_selfsim(args, parser) -> int:
    cat = io.Catalog(args.catalog)
    if args.from_orbit:
        entry = cat.get("orbit", args.from_orbit)
        record = io.parse_orbit_record_json(
            entry.read_file("record.json").decode())
        state = record.initial_state
    elif args.j_dil is not None:
        jd = args.j_dil
        cap = 1.0 / (2.0 * math.sqrt(math.pi))
        if abs(jd) >= cap:
            parser.error(f"--j-dil must lie in (-{cap:.6f}, {cap:.6f}) "
                         "for the x=1 gauge seed")
        state = PhaseState(1, 0, 0, jd, math.sqrt(cap * cap - jd * jd), 0)
    else:
        state = _seed_state(args, parser)
    cfg = _integrator_config(args)
    traj = integrate(state, cfg)
    dom = selfsim.fundamental_domain(traj)
    lam, phi = dom.lam, dom.phi
    t_col = selfsim.collision_time(dom)
    stratum = selfsim.classify_domain(dom)
    # extension window: the next args.domains fundamental domains
    t_hi = dom.t2
    for n in range(1, args.domains + 1):
        t_hi = (selfsim.domain_start(n + 1, dom.t0, dom.t2, lam)
                if lam != 1.0 else dom.t2 + n * dom.duration)
    t_hi = min(t_hi, traj.times[-1])
    overlay = _overlay_csv(traj, dom, dom.t2, t_hi)
    ts = np.linspace(dom.t2, t_hi, 400)
    err = 0.0
    for t in ts:
        direct = traj.state_at(float(t))
        rec = selfsim.extend(dom, float(t)).as_array()
        err = max(err, float(np.linalg.norm(direct - rec)
                             / np.linalg.norm(direct)))
    dom_json = io.dumps_json({
        "t0": dom.t0, "t1": dom.t1, "t2": dom.t2, "lambda": lam, "phi": phi,
        "H": dom.H, "J": dom.J, "collision_time": t_col,
        "stratum": stratum.label, "max_relative_extension_error": err,
        "z_crossings": list(traj.z_crossings),
    })
    seg = Trajectory(times=dom.times.copy(), states=dom.states.copy(),
                     z_crossings=np.array([dom.t0, dom.t1, dom.t2]),
                     collision_time=None, termination="max_time", drift=traj.drift,
                     config=cfg)
    summary = "\n".join([
        "fundamental domain",
        f"zeros        t0={dom.t0:.12g} t1={dom.t1:.12g} t2={dom.t2:.12g}",
        f"lambda       {lam:.12g}",
        f"phi          {phi:.12g}",
        f"J            {dom.J:.12g}",
        f"stratum      {stratum.label}",
        f"t_col        {t_col}",
        f"extension    max rel error {err:.3e} over [{dom.t2:.6g}, {t_hi:.6g}]",
    ]) + "\n"
    params = {"command": "selfsim", "seed": list(state.as_array()),
              "domains": args.domains, "step_size": cfg.step_size,
              "method": cfg.method, "tmax": cfg.max_time}
    entry = cat.put("domain", params, {
        "overlay.csv": overlay,
        "segment.csv": io.trajectory_csv(seg),
        "domain.json": dom_json,
    }, summary)
    print(summary, end="")
    print(f"saved: {entry.path}")
    return 0


def cmd_experiment(args, parser) -> int:
    cat = io.Catalog(args.catalog)
    name = args.name
    if name == "kepler3":
        if not args.orbit:
            parser.error("experiment kepler3 needs --orbit HASH")
        entry = cat.get("orbit", args.orbit)
        record = io.parse_orbit_record_json(
            entry.read_file("record.json").decode())
        lambdas = tuple(float(v) for v in args.lambdas.split(","))
        fit = experiments.kepler3_check(record.initial_state, record.period,
                                        lambdas)
        report = experiments.ExperimentReport(
            experiment_id="kepler3",
            parameters={"orbit": entry.hash, "lambdas": list(lambdas)},
            samples=[{"lambda": lam, "period": t, "size": a}
                     for lam, t, a in fit.entries],
            fit={"k": fit.k_fitted,
                 "max_rel_deviation": fit.max_rel_deviation},
            verdict="consistent" if fit.max_rel_deviation <= 1e-6
            else "inconsistent")
    elif name == "conics":
        report = experiments.planar_conic_check(args.sign)
    elif name == "zaxis-family":
        report = experiments.z_axis_family_check(args.z0, args.duration)
    elif name == "oscillation":
        report = experiments.oscillation_probe(args.samples, args.rng_seed,
                                               args.horizon)
    elif name == "bifurcation":
        j_values = ([float(v) for v in args.j_values.split(",")]
                    if args.j_values else None)
        report = experiments.z_axis_bifurcation_probe(
            j_values, args.rng_seed, args.horizon)
    elif name == "bounded":
        report = experiments.bounded_energy_probe(args.samples, args.rng_seed,
                                                  args.horizon)
    else:  # pragma: no cover - argparse restricts choices
        parser.error(f"unknown experiment {name}")
    params = {"command": "experiment", "name": name,
              **{k: v for k, v in vars(args).items()
                 if k in ("orbit", "lambdas", "sign", "z0", "duration",
                          "samples", "rng_seed", "horizon", "j_values")
                 and v is not None}}
    entry = cat.put("report", params,
                    {"report.json": io.dumps_json(report.to_dict())},
                    report.summary() + "\n")
    print(report.summary())
    print(f"saved: {entry.path}")
    return 0


def cmd_catalog(args, parser) -> int:
    cat = io.Catalog(args.catalog)
    count = 0
    for entry in cat.entries():
        brief = entry.params.get("command", "?")
        print(f"{entry.kind:10s} {entry.hash}  {brief}")
        count += 1
    if count == 0:
        print(f"(catalog at {cat.root} is empty)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="khep",
        description="Numerical laboratory for the Kepler problem "
                    "on the Heisenberg group")
    parser.add_argument("--config", help="key = value defaults file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tmax):
        p.add_argument("--catalog", default=None,
                       help="catalog root (default $KHEP_CATALOG or ./catalog)")
        p.add_argument("--step-size", type=float, default=1e-3)
        p.add_argument("--method", choices=("midpoint", "gauss2"),
                       default="midpoint")
        p.add_argument("--tmax", type=float, default=tmax)

    def seed_opts(p):
        p.add_argument("--state", type=_parse_state,
                       help="explicit x,y,z,px,py,pz")
        p.add_argument("--ptheta", type=float,
                       help="zero-energy seed family parameter")
        p.add_argument("--planar", choices=("negative", "zero", "positive"),
                       help="planar conic seed by energy sign")
        p.add_argument("--zaxis-j", type=float,
                       help="z-axis zero-energy seed with this J")

    p = sub.add_parser("integrate", help="integrate one trajectory")
    common(p, tmax=50.0)
    seed_opts(p)
    p.add_argument("--dilational", action="store_true",
                   help="contract steps near the singularity")
    p.add_argument("--record-stride", type=int, default=1)
    p.add_argument("--collision-rho", type=float, default=1e-6)
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("search", help="refine a seed into a periodic orbit")
    common(p, tmax=140.0)
    seed_opts(p)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--update-steps", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=1e-8)
    p.set_defaults(func=cmd_search, method="gauss2", step_size=4e-3)

    p = sub.add_parser("scan", help="rotation numbers across the seed family")
    common(p, tmax=260.0)
    p.add_argument("--ptheta-min", type=float, default=0.002)
    p.add_argument("--ptheta-max", type=float, default=0.345)
    p.add_argument("--steps", type=int, default=24)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--update-steps", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=1e-8)
    p.set_defaults(func=cmd_scan, method="gauss2", step_size=4e-3)

    p = sub.add_parser("selfsim",
                       help="fundamental domain and self-similar extension")
    common(p, tmax=60.0)
    seed_opts(p)
    p.add_argument("--from-orbit", help="orbit catalog hash")
    p.add_argument("--j-dil", type=float,
                   help="zero-energy seed with this dilational momentum")
    p.add_argument("--domains", type=int, default=2,
                   help="fundamental domains to reconstruct")
    p.set_defaults(func=cmd_selfsim)

    p = sub.add_parser("experiment", help="run a law/conjecture probe")
    p.add_argument("name", choices=("kepler3", "conics", "zaxis-family",
                                    "oscillation", "bifurcation", "bounded"))
    p.add_argument("--catalog", default=None)
    p.add_argument("--orbit", help="orbit hash (kepler3)")
    p.add_argument("--lambdas", default="0.5,1,2,4")
    p.add_argument("--sign", choices=("negative", "zero", "positive"),
                   default="negative")
    p.add_argument("--z0", type=float, default=1.0)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--j-values", default=None)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("catalog", help="list catalog entries")
    p.add_argument("--catalog", default=None)
    p.set_defaults(func=cmd_catalog)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, _ = parser.parse_known_args(argv)
    if args.config:
        try:
            defaults = _load_config_file(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        remapped = {"tmax" if k == "tmax" else k: v
                    for k, v in defaults.items()}
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                sp.set_defaults(**{k: v for k, v in remapped.items()
                                   if any(a.dest == k
                                          for a in sp._actions)})
    args = parser.parse_args(argv)
    if getattr(args, "horizon", "missing") is None:
        defaults = {"oscillation": 150.0, "bifurcation": 400.0,
                    "bounded": 60.0}
        args.horizon = defaults.get(getattr(args, "name", ""), 150.0)
    try:
        return args.func(args, parser)
    except KeplerHeisenbergError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
