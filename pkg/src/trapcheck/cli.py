"""Command line entry point ``trapcheck``.

Exit codes: 0 all checks pass, 1 at least one check fails, 2 input error.
"""

import argparse
import json
import logging
import os
import sys

from . import hamiltonian_flow as hf
from . import report as rp
from . import sds_metric as sm
from .errors import InputError, TrapcheckError

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def build_parser():
    # argparse exits with status 2 on usage errors, matching the input-error code
    parser = argparse.ArgumentParser(prog="trapcheck", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every check and write report.json plus trajectory CSVs")
    run.add_argument("--config", required=True, help="JSON run configuration")
    run.add_argument("--out", help="output directory (TRAPCHECK_OUT overrides)")
    run.add_argument("--seed", type=int, help="override the configured random seed")
    run.add_argument("--quick", action="store_true", help=f"cap trajectory length at T={rp.QUICK_T:g}")

    geo = sub.add_parser("geometry", help="print horizon and photon-sphere data as JSON")
    geo.add_argument("--n", type=int, required=True, help="spacetime dimension")
    geo.add_argument("--mass", type=float, required=True)
    geo.add_argument("--lambda-cosmo", type=float, required=True, help="cosmological constant Λ")

    traj = sub.add_parser("trajectory", help="integrate one orbit and emit CSV")
    traj.add_argument("--config", required=True)
    start = traj.add_mutually_exclusive_group(required=True)
    start.add_argument("--gamma", action="store_true", help="start on the trapped set")
    start.add_argument("--perturbed", type=float, metavar="DELTA", help="start at r_p with xi = DELTA")
    traj.add_argument("--output", help="CSV path (default: stdout)")
    return parser


def _cmd_run(args):
    cfg = rp.parse_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise InputError("--seed must be nonnegative")
        cfg.seed = args.seed
    out = os.environ.get("TRAPCHECK_OUT") or args.out or cfg.out_dir
    report = rp.run_full_report(cfg, out_dir=out, quick=args.quick)
    for item in report.data["verdicts"]:
        print(f"[{item['verdict'].upper():4}] {item['item']:>2} {item['name']}")
    print(f"report written to {os.path.join(out, 'report.json')}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_geometry(args):
    p = sm.SdsParams(args.n, args.mass, args.lambda_cosmo)
    json.dump(rp.geometry_block(p), sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def _cmd_trajectory(args):
    cfg = rp.parse_config(args.config)
    p = cfg.params
    x0 = rp.gamma_start(p) if args.gamma else rp.perturbed_start(p, args.perturbed)
    traj = hf.integrate(p, x0, cfg.T, cfg.dt)
    if args.output:
        rp.dump_trajectory_csv(traj, args.output)
    else:
        rp.dump_trajectory_csv(traj, sys.stdout)
    if traj.exited:
        print(f"trajectory exited at t={traj.exit_time:g} ({traj.exit_side} side)", file=sys.stderr)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"run": _cmd_run, "geometry": _cmd_geometry, "trajectory": _cmd_trajectory}
    try:
        return handlers[args.command](args)
    except (InputError, TrapcheckError) as exc:
        print(f"trapcheck: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"trapcheck: I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
