"""Command-line entry point.

Subcommands: simulate, riemann-check, blowup, propagation, scenario <name>,
sweep. Configuration is a JSON file mirroring ScenarioConfig; common flags
override individual fields.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .core import make_grid
from .propagation import ConeSpec, compute_A, verify_cone
from .riemann import InvariantMap, InvariantPoint, PhasePoint
from .scenarios import (SCENARIOS, ScenarioConfig, config_to_dict, load_config,
                        run_scenario)


def _apply_overrides(config: ScenarioConfig, args) -> ScenarioConfig:
    if args.grid_n is not None:
        g = config.grid
        config.grid = make_grid(g.dim, args.grid_n, g.L, g.boundary)
    if args.cfl is not None:
        config.solver.cfl = args.cfl
    if args.epsilon is not None:
        config.solver.epsilon = args.epsilon
        config.params.epsilon = args.epsilon
    if args.target_interval is not None:
        lo, hi = (float(v) for v in args.target_interval.split(","))
        config.target_interval = (lo, hi)
    return config


def _load(args) -> ScenarioConfig:
    config = load_config(args.config) if args.config else ScenarioConfig()
    return _apply_overrides(config, args)


def _add_common(sub):
    sub.add_argument("--config", help="JSON config path")
    sub.add_argument("--out", help="output directory for reports")
    sub.add_argument("--grid-n", type=int, dest="grid_n",
                     help="override cells per axis")
    sub.add_argument("--cfl", type=float, help="override CFL number")
    sub.add_argument("--epsilon", type=float, help="override viscosity")
    sub.add_argument("--target-interval", dest="target_interval",
                     help="lo,hi for the rescaled blow-up target")


def _cmd_simulate(args) -> int:
    config = _load(args)
    report = run_scenario(config, out_dir=args.out)
    print(f"{config.scenario}: verdict={report.verdict} t={report.t_final:.6g}")
    return 0


def _cmd_scenario(args) -> int:
    config = _load(args)
    config.scenario = args.name
    report = run_scenario(config, out_dir=args.out)
    line = f"{args.name}: verdict={report.verdict} t={report.t_final:.6g}"
    if report.blowup is not None:
        line += f" classification={report.blowup.classification}"
    print(line)
    return 0


def _cmd_blowup(args) -> int:
    config = _load(args)
    if config.scenario == "constant":
        config.scenario = "remark11"
    report = run_scenario(config, out_dir=args.out)
    b = report.blowup
    print(f"verdict={report.verdict} t_abort={report.t_final:.6g}")
    if b is not None:
        print(f"classification={b.classification} "
              f"riccati_T_upper={b.riccati_T_upper:.6g} "
              f"resolution_limited={b.resolution_limited}")
    if report.t_estimate is not None:
        print(f"t_estimate={report.t_estimate:.6g}")
    return 0


def _cmd_riemann_check(args) -> int:
    """Quick self-test of the invariant map at random phase points."""
    rng = np.random.default_rng(args.seed)
    imap = InvariantMap()
    worst_det = np.inf
    worst_round = 0.0
    for _ in range(args.points):
        z2 = rng.uniform(-1.5, 1.5)
        z1 = rng.uniform(0.75 * z2 * z2 + 0.3, 0.75 * z2 * z2 + 3.0)
        p = PhasePoint(z1, z2)
        det = imap.det_grad_w(p)
        worst_det = min(worst_det, det)
        w = imap.w_eval(p)
        pr = imap.invert_w(w)
        worst_round = max(worst_round, abs(pr.z1 - z1), abs(pr.z2 - z2))
    w0 = imap.w_eval(PhasePoint(1.0, 0.0))
    print(f"w(1,0) = ({w0.w1:.9f}, {w0.w2:.9f}) [expect (e, -e)]")
    print(f"min det(grad w) over {args.points} points: {worst_det:.6g} (must be > 0)")
    print(f"max inversion roundtrip error: {worst_round:.3e}")
    return 0 if worst_det > 0 and worst_round < 1e-8 else 1


def _cmd_propagation(args) -> int:
    config = _load(args)
    config.scenario = "remark11"
    bump_report = run_scenario(config, out_dir=None)
    const_config = ScenarioConfig(
        scenario="constant", rho_bar=config.rho_bar, c_bar=config.c_bar,
        params=config.params, grid=config.grid, solver=config.solver,
        t_end=bump_report.t_final)
    const_report = run_scenario(const_config)
    run_b = bump_report.extras["result"]
    run_c = const_report.extras["result"]
    A = compute_A(run_b, run_c)
    T_star = bump_report.t_final * 1.05
    cone = ConeSpec(center=0.0, A=A, T_star=T_star)
    tol = 10.0 * 2.0 * config.grid.h  # Lipschitz constant of the unit bump ~ 2
    rep = verify_cone(run_b, run_c, cone, tol)
    print(f"A={A:.4f} cone_violation={rep.cone_violation} "
          f"front_speed={rep.empirical_front_speed:.4f} "
          f"lambda_max={rep.lambda_max_observed:.4f} "
          f"6Ad={cone.speed(config.grid.dim):.4f}")
    return 0 if not rep.cone_violation else 1


def _cmd_sweep(args) -> int:
    """Run a scenario across grid resolutions and report the trend."""
    base = _load(args)
    results = []
    for n in args.resolutions:
        config = load_config(args.config) if args.config else ScenarioConfig()
        config = _apply_overrides(config, args)
        g = config.grid
        config.grid = make_grid(g.dim, n, g.L, g.boundary)
        if args.scenario:
            config.scenario = args.scenario
        out = f"{args.out}/n{n}" if args.out else None
        rep = run_scenario(config, out_dir=out)
        entry = {"n": n, "verdict": rep.verdict, "t_final": rep.t_final,
                 "t_estimate": rep.t_estimate}
        results.append(entry)
        print(json.dumps(entry))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hkslab",
        description="Numerical experiments for a hyperbolic "
                    "consumption-chemotaxis system")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="run the configured scenario")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = subs.add_parser("scenario", help="run a named scenario")
    p.add_argument("name", choices=SCENARIOS)
    _add_common(p)
    p.set_defaults(func=_cmd_scenario)

    p = subs.add_parser("blowup", help="blow-up experiment with tracing")
    _add_common(p)
    p.set_defaults(func=_cmd_blowup)

    p = subs.add_parser("riemann-check", help="invariant-map self-test")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _add_common(p)
    p.set_defaults(func=_cmd_riemann_check)

    p = subs.add_parser("propagation", help="paired finite-speed experiment")
    _add_common(p)
    p.set_defaults(func=_cmd_propagation)

    p = subs.add_parser("sweep", help="resolution sweep of one scenario")
    p.add_argument("--resolutions", type=int, nargs="+",
                   default=[256, 512, 1024])
    p.add_argument("--scenario", choices=SCENARIOS)
    _add_common(p)
    p.set_defaults(func=_cmd_sweep)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
