"""Command line interface: ``cdfchaos <command> ...``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .experiments import EXPERIMENTS, ExperimentConfig, emit, initial_positions, max_threads, run_experiment
from .flux import drift_coefficients, parse_flux
from .laws import parse_law
from .rng import NoiseSource
from .pde import (GridProfile, cole_hopf_cdf, default_domain, density_from_cdf, evolve_pde,
                  max_stable_dt)
from .sde import ParticleEnsemble
from .spectral import verify_lambda_bound, verify_matrix_identities
from .stationary import InvariantSampler, sample_invariant_reordered, solve_stationary_ode


def _write_rows(path, header, rows) -> None:
    fh = sys.stdout if path in (None, "-") else open(path, "w", newline="")
    try:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    finally:
        if fh is not sys.stdout:
            fh.close()


def _profile_rows(x, f, h):
    p = density_from_cdf(f, h)
    return zip(x, f, p)


def _add_flux(p: argparse.ArgumentParser) -> None:
    p.add_argument("--flux", default="burgers", help="burgers, cubic or poly:c0,c1,... (A(u) = sum c_k u^k)")
    p.add_argument("--sigma", type=float, default=1.0)


def _grid_spec(text: str):
    a, b, h = (float(v) for v in text.split(":"))
    return a, b, h


def cmd_simulate(args) -> int:
    flux = parse_flux(args.flux)
    law = parse_law(args.init)
    reps = range(args.replications)
    x0 = initial_positions(law, args.seed, reps, args.n)
    ens = ParticleEnsemble(x0, args.sigma, drift_coefficients(flux, args.n), NoiseSource(args.seed, args.n, reps))
    steps = int(round(args.t_end / args.dt))
    snap = _summary_row if args.summary else _position_rows
    rows = []
    if args.every:
        rows.extend(snap(ens))
    for k in range(steps):
        ens.step(args.dt)
        if args.every and (k + 1) % args.every == 0:
            rows.extend(snap(ens))
    if not args.every or steps % args.every:
        rows.extend(snap(ens))
    if args.summary:
        header = ["time", "mean", "var", "min", "max"]
    elif args.replications > 1:
        header = ["replication", "time", "particle_index", "position"]
    else:
        header = ["time", "particle_index", "position"]
    _write_rows(args.out, header, rows)
    return 0


def _position_rows(ens):
    multi = ens.positions.shape[0] > 1
    for r in range(ens.positions.shape[0]):
        for i in range(ens.n):
            row = (float(ens.time), i, float(ens.positions[r, i]))
            yield (r,) + row if multi else row


def _summary_row(ens):
    x = ens.positions
    yield float(ens.time), float(x.mean()), float(x.var()), float(x.min()), float(x.max())


def cmd_solve_pde(args) -> int:
    flux = parse_flux(args.flux)
    law = parse_law(args.init)
    lo, hi = default_domain(law, args.sigma)
    lo = lo if args.x_min is None else args.x_min
    hi = hi if args.x_max is None else args.x_max
    prof = GridProfile.from_law(law, lo, hi, args.h)
    dt_max = max_stable_dt(args.h, flux, args.sigma)
    dt = 0.9 * dt_max if args.dt is None else args.dt
    steps = max(1, int(np.ceil(args.t_end / dt - 1e-9)))
    out = evolve_pde(prof, flux, args.sigma, args.t_end / steps, steps)
    _write_rows(args.out, ["x", "F", "p"], _profile_rows(out.x, out.values, out.h))
    return 0


def cmd_cole_hopf(args) -> int:
    law = parse_law(args.init)
    if args.x_grid:
        a, b, h = _grid_spec(args.x_grid)
    else:
        a, b = default_domain(law, args.sigma)
        h = args.h
    x = a + h * np.arange(int(round((b - a) / h)) + 1)
    f = cole_hopf_cdf(law, args.sigma, args.t, x)
    _write_rows(args.out, ["x", "F", "p"], _profile_rows(x, f, h))
    return 0


def cmd_stationary(args) -> int:
    flux = parse_flux(args.flux)
    grid = _grid_spec(args.x_grid) if args.x_grid else None
    prof = solve_stationary_ode(flux, args.sigma, args.mean, grid)
    if not prof.spectral_gap_guarantee:
        print("warning: A'(0) or A'(1) vanishes; no spectral-gap guarantee for this profile", file=sys.stderr)
    _write_rows(args.out, ["x", "F", "p"], zip(prof.x, prof.cdf.values, prof.density))
    return 0


def cmd_sample_invariant(args) -> int:
    flux = parse_flux(args.flux)
    sampler = InvariantSampler.from_flux(flux, args.n, args.mean)
    draws = sample_invariant_reordered(sampler, args.sigma, args.seed, args.count)
    _write_rows(args.out, None, draws.tolist())
    return 0


def cmd_spectral(args) -> int:
    if args.action == "identities":
        checks = verify_matrix_identities(args.n)
        _write_rows(args.out, ["identity", "ok"], [(k, int(v)) for k, v in checks.items()])
        return 0 if all(checks.values()) else 1
    reports = verify_lambda_bound(range(2, args.n_max + 1), tol=args.tol)
    _write_rows(args.out, ["n", "lambda_tilde", "bound_ok"],
                [(r.n, r.lambda_tilde, int(r.bound_ok)) for r in reports])
    worst = min(reports, key=lambda r: r.lambda_tilde)
    print(f"min lambda_tilde = {worst.lambda_tilde:.12g} at n = {worst.n}", file=sys.stderr)
    return 0 if all(r.bound_ok for r in reports) else 1


def cmd_experiment(args) -> int:
    overrides = {"seed": args.seed, "threads": args.threads, "replications": args.replications}
    if args.threads == 0:
        overrides["threads"] = max_threads()
    if args.config:
        cfg = ExperimentConfig.load(args.config, experiment=args.name, **overrides)
    else:
        cfg = ExperimentConfig.from_mapping({"experiment": args.name,
                                             **{k: v for k, v in overrides.items() if v is not None}})
    table = run_experiment(cfg)
    out = Path(args.out or cfg.output or ".")
    path = emit(table, out)
    bad = [k for k, v in table.checks.items() if not v]
    print(f"{cfg.experiment}: {len(table.rows)} rows -> {path}" + (f"; FAILED: {', '.join(bad)}" if bad else ""),
          file=sys.stderr)
    return 0 if table.ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cdfchaos", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate the rank-based particle system")
    _add_flux(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--init", default="gaussian:0,1")
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--every", type=int, default=0, help="write a snapshot every k steps (0: final only)")
    p.add_argument("--summary", action="store_true", help="write time,mean,var,min,max instead of positions")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve-pde", help="explicit solver for the CDF equation")
    _add_flux(p)
    p.add_argument("--init", default="gaussian:0,1")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--dt", type=float)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve_pde)

    p = sub.add_parser("cole-hopf", help="exact Burgers CDF")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--init", default="gaussian:0,1")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--x-grid", help="start:stop:step")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cole_hopf)

    p = sub.add_parser("stationary", help="stationary profile by RK4")
    _add_flux(p)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--x-grid", help="start:stop:step (default: the integration grid)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("sample-invariant", help="exact draws of the reordered invariant law")
    _add_flux(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean", type=float, default=0.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample_invariant)

    p = sub.add_parser("spectral", help="smallest eigenvalues of Q^n, or dense identity checks")
    p.add_argument("action", nargs="?", choices=["sweep", "identities"], default="sweep")
    p.add_argument("--n-max", type=int, default=5000)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--out")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("experiment", help="run an experiment and write CSV + JSON sidecar")
    p.add_argument("name", choices=EXPERIMENTS)
    p.add_argument("--config", help="TOML file with ExperimentConfig keys")
    p.add_argument("--out", help="output directory or .csv path")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker threads (0: all cores)")
    p.add_argument("--replications", type=int)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
