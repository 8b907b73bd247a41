"""``homog2d`` command line: one entry point, five subcommands.

Exit codes: 0 success, 1 output could not be written, 2 configuration
error, 3 numerical failure, 4 failed acceptance check (only with ``--check``).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

import numpy as np

from . import report as rep
from .bogovskii import BogovskiiError, bogovskii_full, uniformity_probe
from .config import ConfigError, parse_config, resolve_out_dir
from .cutoff import WHICH, CutoffError, CutoffSpec, cutoff_norm_report
from .grid import DomainSpec, QuadratureError, make_grid
from .solver import CFLError, SolverError, energy_inequality_check, init_state, run
from .testfn import NAMED_FIELDS, ExponentError, named_field, rate_probe

log = logging.getLogger("homog2d")

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

CLOSED_FORM_TOL = 1e-8
DIV_RESIDUAL_TOL = 1e-8
UNIFORMITY_SPREAD = 3.0
MASS_DRIFT_TOL = 1e-12


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from None


def _flat(values) -> list[float]:
    out: list[float] = []
    for v in values:
        out += v if isinstance(v, list) else [v]
    return out


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs[:-1], xs[1:]))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_cutoff_norms(args):
    eps_list = _flat(args.eps)
    alphas = _flat(args.alpha) if args.alpha else [None]
    reports = []
    for eps in eps_list:
        for alpha in alphas:
            spec = CutoffSpec(eps, alpha) if alpha is not None else CutoffSpec.with_default_alpha(eps)
            for q in _flat(args.q):
                reports.append(cutoff_norm_report(spec, q, args.which))
    files = rep.emit(rep.norm_table(reports), args.format, args.out_dir)
    failures = []
    for r in reports:
        if r.rel_err is not None and r.rel_err > CLOSED_FORM_TOL:
            failures.append(f"eps={r.eps} alpha={r.alpha} q={r.q}: rel_err {r.rel_err:.3e} > {CLOSED_FORM_TOL}")
    return files, failures


def cmd_testfn_rates(args):
    table = rate_probe(named_field(args.phi), args.p, args.q, _flat(args.eps_list), args.L)
    files = rep.emit(table, args.format, args.out_dir)
    failures = []
    for col in ("value", "gradient", "divergence"):
        if not _strictly_decreasing(list(table.column(col))):
            failures.append(f"{col} discrepancy is not strictly decreasing in eps")
    return files, failures


def cmd_bogovskii_check(args):
    rows = uniformity_probe(_flat(args.eps_list), args.p, args.q, n=args.n, L=args.L, tol=args.tol)
    files = rep.emit(rows, args.format, args.out_dir)
    grid = make_grid(DomainSpec(args.L, 0.0), args.n)
    X, Y = grid.cell_centers()
    full = {}
    for name, f in (
        ("x1", X),
        ("cos_cos", np.cos(2 * np.pi * X) * np.cos(2 * np.pi * Y)),
        ("gauss", np.exp(-((X - 0.1) ** 2 + Y**2) / 0.01)),
    ):
        s = bogovskii_full(f - f.mean(), args.tol, grid)
        full[name] = {"residual": s.residual, "iterations": s.iterations}
    payload = {
        "n": args.n,
        "L": args.L,
        "tol": args.tol,
        "full_domain": full,
        "perforated": [{"eps": r.eps, "residual": r.residual} for r in rows],
    }
    files.append(rep.write_json(payload, "bogovskii_residuals", "bogovskii", args.out_dir))
    failures = []
    ratios = [r.w1p_ratio for r in rows]
    if ratios and max(ratios) / min(ratios) >= UNIFORMITY_SPREAD:
        failures.append(f"W^(1,p) ratio spread {max(ratios) / min(ratios):.3f} >= {UNIFORMITY_SPREAD}")
    worst = max([v["residual"] for v in full.values()] + [r.residual for r in rows])
    if worst > DIV_RESIDUAL_TOL:
        failures.append(f"divergence residual {worst:.3e} > {DIV_RESIDUAL_TOL}")
    return files, failures


def cmd_solve(args):
    cfg = parse_config(args.config, "solve")
    out = resolve_out_dir(args.out_dir, cfg)
    grid = make_grid(DomainSpec(cfg.L, cfg.eps), cfg.n)
    state = init_state(grid, cfg.phys, cfg.ic)
    t0 = time.perf_counter()
    traj = run(state, cfg.phys, cfg.T, cfg.checkpoints, cfg.cfl, eps=cfg.eps)
    elapsed = time.perf_counter() - t0
    files = rep.emit(rep.monitor_table(traj.series), "csv", out)
    for k, s in enumerate(traj.snapshots):
        files.append(rep.write_snapshot(out / "snapshots" / f"snap_{k:04d}.bin", cfg.n, cfg.L, cfg.eps, s.t, s.rho, s.mx, s.my))
    mass = np.asarray(traj.series.mass)
    drift = float(np.max(np.abs(mass - mass[0])) / mass[0])
    energy = energy_inequality_check(traj.series)
    summary = {
        "config": cfg.raw,
        "seed": cfg.seed,
        "steps": traj.n_steps,
        "final_time": traj.snapshots[-1].t,
        "mass_drift": drift,
        "energy_violation": energy.max_violation,
        "energy_monotone": energy.monotone,
        "rho_min": min(traj.series.rho_min),
    }
    files.append(rep.write_json(summary, "run", "cns_solver", out))
    files.append(rep.write_json({"solve_seconds": elapsed}, "timing", "cli_reporting", out))
    failures = []
    if drift > MASS_DRIFT_TOL:
        failures.append(f"mass drift {drift:.3e} > {MASS_DRIFT_TOL}")
    if not energy.ok:
        failures.append(f"energy inequality violated by {energy.max_violation:.3e}")
    return files, failures


def cmd_homogenize(args):
    from .experiment import SweepConfigError, run_sweep, validate_sweep

    cfg = parse_config(args.config, "homogenize")
    out = resolve_out_dir(args.out_dir, cfg)
    sweep = cfg.sweep()
    problems = validate_sweep(sweep)
    if problems:
        raise SweepConfigError("; ".join(problems))
    report = run_sweep(sweep)
    files = rep.emit(report, "csv", out)
    files.append(rep.write_json(report.runtimes, "timing", "cli_reporting", out))
    failures = [f"eps={r.eps}: {r.error}" for r in report.rows if r.error]
    rows = [r for r in report.perforated() if r.error is None]
    for name in ("metric_a", "metric_b", "metric_c"):
        col = [getattr(r, name) for r in rows]
        if not _strictly_decreasing(col):
            failures.append(f"{name} is not strictly decreasing in eps: {col}")
    b = [r.metric_b for r in rows]
    if b and not b[-1] / b[0] < 0.5:
        failures.append(f"metric_b final/first ratio {b[-1] / b[0]:.3f} >= 0.5")
    pf = [r.pressure_functional for r in rows]
    if pf and not max(pf) / min(pf) < 2:
        failures.append(f"pressure functional spread {max(pf) / min(pf):.3f} >= 2")
    for r in rows:
        for j, (a, n) in enumerate(zip(r.pressure_adhoc, r.pressure_naive)):
            if not a < n:
                failures.append(f"eps={r.eps} phi[{j}]: ad hoc discrepancy {a:.3e} >= naive {n:.3e}")
    return files, failures


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="homog2d", description="Perforated-domain compressible flow experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=True):
        sp.add_argument("--out-dir", "--out", dest="out_dir", default=None, help="output directory (env HOMOG2D_OUT_DIR)")
        sp.add_argument("--check", action="store_true", help="exit 4 if the acceptance check fails")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("cutoff-norms", help="L^q norms of the cutoff against closed forms")
    sp.add_argument("--eps", type=_floats, nargs="+", default=[0.01])
    sp.add_argument("--alpha", type=_floats, nargs="+", default=[10.0], help="outer/inner radius ratio")
    sp.add_argument("--q", type=_floats, nargs="+", default=[1.0, 1.5, 2.0, 3.0, 4.0])
    sp.add_argument("--which", choices=WHICH, default="grad_tilde")
    common(sp)
    sp.set_defaults(func=cmd_cutoff_norms)

    sp = sub.add_parser("testfn-rates", help="discrepancy norms of the ad hoc test function")
    sp.add_argument("--phi", choices=tuple(NAMED_FIELDS), default="linear")
    sp.add_argument("--p", type=float, default=1.5)
    sp.add_argument("--q", type=float, default=4.0)
    sp.add_argument("--eps-list", type=_floats, nargs="+", default=[0.04, 0.02, 0.01, 0.005])
    sp.add_argument("--L", type=float, default=0.5)
    common(sp)
    sp.set_defaults(func=cmd_testfn_rates)

    sp = sub.add_parser("bogovskii-check", help="residuals and eps-uniformity of the divergence solver")
    sp.add_argument("--eps-list", type=_floats, nargs="+", default=[0.16, 0.08, 0.04, 0.02])
    sp.add_argument("--p", type=float, default=1.5)
    sp.add_argument("--q", type=float, default=4.0)
    sp.add_argument("--n", type=int, default=128)
    sp.add_argument("--L", type=float, default=0.5)
    sp.add_argument("--tol", type=float, default=1e-8)
    common(sp)
    sp.set_defaults(func=cmd_bogovskii_check)

    sp = sub.add_parser("solve", help="one compressible Navier-Stokes run from a TOML config")
    sp.add_argument("--config", required=True)
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("homogenize", help="eps sweep against the hole-free reference")
    sp.add_argument("--config", required=True)
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_homogenize)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command in ("cutoff-norms", "testfn-rates", "bogovskii-check"):
        args.out_dir = resolve_out_dir(args.out_dir)
    from .experiment import SweepConfigError

    try:
        files, failures = args.func(args)
    except (ConfigError, SweepConfigError, CutoffError, ExponentError, CFLError) as exc:
        print(f"homog2d: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SolverError, BogovskiiError, QuadratureError, rep.NonFiniteError) as exc:
        print(f"homog2d: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except rep.EmitError as exc:
        print(f"homog2d: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"homog2d: invalid argument: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in rep.files_listing(files):
        print(f)
    if failures:
        for msg in failures:
            print(f"check: {msg}", file=sys.stderr)
        if args.check:
            return EXIT_CHECK
    elif args.check:
        print("check: ok", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
