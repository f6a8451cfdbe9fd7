"""Command-line entry point: ``perronhjb {perron,floquet,geometry,hjb,hypotheses}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import floquet as fq
from .config import ExperimentConfig
from .controls import ControlSignal
from .ergodic import attractiveness_probe, build_ergodic_set, stability_check
from .errors import CFLError, GeometryError, NumericsError, PerronHJBError, ValidationError
from .hypotheses import h_checks, monotonicity_sanity
from .io import to_jsonable, write_json, write_polyline, write_table
from .perron import (classify_monotonicity, d2lambda_P, dlambda_P, lambda_P, optimize_perron,
                     perron_curve, spectrum)
from .simplex import trace_phi0

log = logging.getLogger("perronhjb")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICS, EXIT_GEOMETRY, EXIT_CFL = 0, 2, 3, 4, 5


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from exc


# --------------------------------------------------------------------------
# commands


def cmd_perron(cfg: ExperimentConfig, args, out: Path, fmt: str) -> dict:
    p = cfg.params
    opt = optimize_perron(p)
    alpha_max = args.alpha_max if args.alpha_max is not None else 10 * p.A
    if not alpha_max > 0:
        raise ValidationError("--alpha-max must be positive")
    curve = perron_curve(p, np.linspace(0.0, alpha_max, args.n), optimum=opt)
    write_table(out / "perron_curve", ["alpha", "lambda", "dlambda"],
                zip(curve.alphas, curve.values, curve.derivs), fmt)
    summary = opt.as_dict()
    summary.update(alpha_max=alpha_max, lambda_at_alpha_max=float(curve.values[-1]),
                   bounds=[p.a, p.A])
    if p.rates is not None:
        summary["family"] = classify_monotonicity(p.rates[0], p.rates[1])
        summary["tau1"] = p.rates[0]
    write_json(out / "perron_optimum.json", summary)
    return summary


def _gamma(args) -> ControlSignal:
    if args.gamma == "square":
        return ControlSignal.square_wave(-1.0, 1.0, args.theta)
    if args.gamma == "sine":
        return ControlSignal.sine(0.0, 1.0, args.theta)
    if args.gamma == "ones":
        return ControlSignal.constant(1.0)
    if args.samples is None:
        raise ValidationError("--gamma samples needs --samples v1,v2,...")
    return ControlSignal.periodic(_floats(args.samples), args.theta)


def cmd_floquet(cfg: ExperimentConfig, args, out: Path, fmt: str) -> dict:
    p = cfg.params
    alpha = args.alpha if args.alpha is not None else optimize_perron(p).alpha_star
    gamma = _gamma(args)
    theta = args.theta
    const = fq.lambda_F(p, ControlSignal.constant(alpha), theta=theta)
    lam_p = lambda_P(p, alpha)
    res = {"alpha": alpha, "gamma": args.gamma, "theta": theta, "lambda_P": lam_p,
           "lambda_F_constant": const.lambda_F,
           "constant_gap": abs(const.lambda_F - lam_p),
           "dlambda_P": dlambda_P(p, alpha), "d2lambda_P": d2lambda_P(p, alpha),
           "first_directional": fq.first_directional(p, alpha, gamma),
           "second_directional": fq.second_directional(p, alpha, gamma),
           "second_directional_ones": fq.second_directional(p, alpha, ControlSignal.constant(1.0))}
    if gamma.kind == "periodic":
        res["fd_first"] = fq.fd_first(p, alpha, gamma)
        res["fd_second"] = fq.fd_second(p, alpha, gamma)
        res["second_rel_gap"] = abs(res["second_directional"] - res["fd_second"]) / abs(res["fd_second"])
        eps = _floats(args.eps)
        rows = fq.epsilon_sweep(p, alpha, gamma, eps)
        write_table(out / "floquet_sweep", ["eps", "lambda_F"], rows.tolist(), fmt)
    write_json(out / "floquet.json", res)
    return res


def cmd_geometry(cfg: ExperimentConfig, args, out: Path, fmt: str) -> dict:
    from .hjb.analysis import contour_lines, rectangle_points
    from .hjb.grid import SimplexGrid
    from .simplex import phi_cubic
    p = cfg.params
    delta = args.delta if args.delta is not None else cfg.numerics["delta"]
    alphas, pts = trace_phi0(p)
    write_table(out / "phi0", ["alpha", "y1", "y2", "y3"],
                [[a, *y] for a, y in zip(alphas, pts)], fmt)
    grid = SimplexGrid(p, cfg.numerics["dy"])
    phi_img = phi_cubic(p, rectangle_points(grid))
    for k, line in enumerate(contour_lines(grid, None, image=phi_img)):
        write_polyline(out / f"phi0_contour_{k}", line, fmt, columns=("y1", "y2"))
    report = h_checks(p)
    write_json(out / "hypotheses.json",
               {k: {"passed": r.passed, "details": r.details} for k, r in report.results.items()})
    summary = {"hypotheses": report.summary(), "delta": delta}
    try:
        z = build_ergodic_set(p, delta, ds=args.ds)
    except (GeometryError, NumericsError) as exc:
        summary["error"] = f"{type(exc).__name__}: {exc}"
        write_json(out / "geometry.json", summary)
        raise GeometryError(f"ergodic set construction failed: {exc}") from exc
    sets = {"Z0": z, "Z_minus": z.z_minus, "Z_plus2": z.z_plus2}
    for name, s in sets.items():
        write_polyline(out / f"{name}_gamma_lo", s.gamma_lo, fmt)
        write_polyline(out / f"{name}_gamma_hi", s.gamma_hi, fmt)
    stab = stability_check(p, z)
    summary.update(endpoint_errors=z.endpoint_errors(),
                   stability={"ok": stab.ok, "worst": stab.worst, "n": stab.n_checked},
                   bounds={name: [s.lo, s.hi] for name, s in sets.items()})
    if args.probe and delta > 0:
        rep = attractiveness_probe(p, delta, n_trials=args.probe, seed=cfg.numerics["seed"])
        summary["attractiveness"] = {"ok": rep.ok, "max_entry": rep.max_entry,
                                     "mean_entry": rep.mean_entry, "n_trials": args.probe}
    write_json(out / "geometry.json", summary)
    return summary


def cmd_hjb(cfg: ExperimentConfig, args, out: Path, fmt: str) -> dict:
    from .hjb import (extract_eigenvector, optimal_trajectory, run_discounted,
                      run_time_dependent, verify_particular_solution)
    from .hjb.solve import COLLAPSE_PROBES
    p = cfg.params
    n = cfg.numerics
    dy = args.dy or n["dy"]
    dt = args.dt or n["dt"]
    T = args.T or n["T"]
    opt = optimize_perron(p)
    summary = {"lambda_P_star": opt.lambda_star, "alpha_star": opt.alpha_star}
    run = run_time_dependent(p, dy=dy, dt=dt, T=T, substeps=args.substeps)
    summary["time_dependent"] = run.summary()
    summary["lambda_hj_gap"] = abs(run.lambda_ratio - opt.lambda_star)
    if args.lambda_f is not None:
        summary["sup_lambda_F"] = args.lambda_f
    meta = {"dy": dy, "dt": dt, "T": T, "lambda_ratio": run.lambda_ratio,
            "lambda_slope": run.lambda_slope, "substeps": run.substeps, "cfl": run.cfl}
    _write_field(out / "u_T", run.field, meta, fmt)
    write_table(out / "probes", ["t", *[f"u{k}" for k in range(len(COLLAPSE_PROBES))]],
                [[t, *v] for t, v in zip(run.times, run.probe_values)][:: max(1, int(0.1 / dt))],
                fmt)
    ev = extract_eigenvector(run)
    _write_field(out / "ubar", ev.field, dict(meta, stationarity=ev.stationarity), fmt)
    for k, line in enumerate(ev.separation):
        write_polyline(out / f"separation_{k}", line, fmt, columns=("y1", "y2"))
    y0 = np.array(_floats(args.start)) if args.start else np.array([0.0, 1.0 / p.m[1], 0.0])
    traj = optimal_trajectory(p, ev, y0, T=args.traj_T, dt=dt)
    rec = traj.record
    write_table(out / "trajectory", ["t", "y1", "y2", "y3", "alpha", "alpha_avg", "phi"],
                [[t, *y, a, ma, ph] for t, y, a, ma, ph in
                 zip(rec.times, rec.points, rec.alphas, traj.moving_average, rec.phi)], fmt)
    e_star = spectrum(p, opt.alpha_star).e1
    summary["trajectory"] = {"start": y0, "end": rec.end,
                             "end_distance": float(np.linalg.norm(rec.end - e_star)),
                             "tail_control": traj.tail_control(),
                             "average_reward": float(rec.average_reward(p)[-1])}
    if args.discounted:
        rows = []
        for eps in _floats(args.discounted):
            d = run_discounted(p, eps, dy=dy)
            rows.append(d.diagnostics | {"eps": eps})
            _write_field(out / f"discounted_{eps:g}", d.field, {"eps": eps, "dy": dy}, fmt)
        summary["discounted"] = rows
    if args.particular_solution:
        try:
            summary["particular_solution"] = verify_particular_solution(p, dy=dy).summary()
        except ValidationError as exc:
            summary["particular_solution"] = {"applicable": False, "reason": str(exc)}
    write_json(out / "hjb_summary.json", summary)
    return summary


def _write_field(stem: Path, fld, meta: dict, fmt: str) -> None:
    g = fld.grid
    write_table(stem, ["i", "j", "y1", "y2", "y3", "u"],
                [[int(i), int(j), *y, u] for i, j, y, u in zip(g.i, g.j, g.points, fld.values)],
                fmt)
    write_json(stem.parent / (stem.name + ".meta.json"), meta)


def cmd_hypotheses(cfg: ExperimentConfig, args, out: Path, fmt: str) -> dict:
    p = cfg.params
    rep = h_checks(p)
    res = {k: {"passed": r.passed, "details": r.details} for k, r in rep.results.items()}
    res["all_passed"] = rep.passed
    if not args.skip_monotonicity:
        res["monotonicity"] = monotonicity_sanity(p, seed=cfg.numerics["seed"])
    write_json(out / "hypotheses.json", res)
    return {"hypotheses": rep.summary(), "all_passed": rep.passed}


COMMANDS = {"perron": cmd_perron, "floquet": cmd_floquet, "geometry": cmd_geometry,
            "hjb": cmd_hjb, "hypotheses": cmd_hypotheses}


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON config (defaults: reference parameters)")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="RNG seed")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="perronhjb", parents=[common],
                                 description="Perron/Floquet eigenvalues, ergodic set and HJB "
                                             "solver for a controlled growth-fragmentation model.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("perron", parents=[common], help="Perron curve and its maximizer")
    sp.add_argument("--alpha-max", type=float, help="right end of the sampled curve (default 10 A)")
    sp.add_argument("--n", type=int, default=601, help="number of curve samples")

    sp = sub.add_parser("floquet", parents=[common], help="Floquet eigenvalue around a constant control")
    sp.add_argument("--alpha", type=float, help="base control (default alpha*)")
    sp.add_argument("--gamma", choices=("square", "sine", "samples", "ones"), default="square")
    sp.add_argument("--theta", type=float, default=1.0, help="period")
    sp.add_argument("--samples", help="comma-separated samples for --gamma samples")
    sp.add_argument("--eps", default="0.001,0.002,0.005,0.01,0.02,0.05",
                    help="comma-separated perturbation sizes for the sweep")

    sp = sub.add_parser("geometry", parents=[common], help="eigenvector curve, ergodic set, hypotheses")
    sp.add_argument("--delta", type=float, help="offset of the inner and outer sets")
    sp.add_argument("--ds", type=float, default=1e-3, help="curve sampling step")
    sp.add_argument("--probe", type=int, default=0, help="attractiveness trials (0 to skip)")

    sp = sub.add_parser("hjb", parents=[common], help="HJB solver runs and exports")
    sp.add_argument("--dy", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--T", type=float)
    sp.add_argument("--substeps", type=int, help="fixed sub-steps per dt (default: CFL-driven)")
    sp.add_argument("--discounted", help="comma-separated discount rates")
    sp.add_argument("--particular-solution", action="store_true")
    sp.add_argument("--start", help="trajectory start y1,y2,y3 (default: corner (0, 1/m2, 0))")
    sp.add_argument("--traj-T", type=float, default=10.0)
    sp.add_argument("--lambda-f", type=float, help="sup of Floquet eigenvalues to report alongside")

    sp = sub.add_parser("hypotheses", parents=[common], help="structural hypothesis report")
    sp.add_argument("--skip-monotonicity", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig.from_dict()
        if args.seed is not None:
            if args.seed < 0:
                raise ValidationError("--seed must be nonnegative")
            cfg.numerics["seed"] = args.seed
        fmt = args.format or cfg.outputs["format"]
        out = args.out or Path(cfg.outputs["dir"])
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cfg, args, out, fmt)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CFLError as exc:
        print(f"CFL violation: {exc}", file=sys.stderr)
        return EXIT_CFL
    except GeometryError as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (PerronHJBError, FloatingPointError, np.linalg.LinAlgError) as exc:
        # numerics and spectral failures
        print(f"numerics error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS
    print(json.dumps(to_jsonable(result), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
