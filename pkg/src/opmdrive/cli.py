"""Command-line entry point.

Exit codes: 0 success, 1 usage or bad input, 2 infeasible request,
3 file I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from opmdrive.compliance import TrajectoryLog, compliance_report, sample_flags
from opmdrive.errors import (
    InfeasibleError,
    InsufficientDataError,
    OffPathError,
    OPMDriveError,
    PreconditionError,
)
from opmdrive.lanechange import LaneChangeRequest, check_feasibility, generate_lane_change_path, write_plan_csv
from opmdrive.opm import parse_opm
from opmdrive.planner import BoundaryConditions, plan_velocity, write_profile_csv
from opmdrive.sim import load_route, load_scenario, simulate

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("opmdrive")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.prog}: {message}")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_plan(args) -> int:
    opm = parse_opm(args.opm)
    bc = BoundaryConditions(args.v_start, args.v_end, args.v_max)
    path = load_route(args.route, closed=True if args.closed else None, ds=args.ds)
    profile = plan_velocity(path, opm, bc)
    dest = _out_dir(args) / "profile.csv"
    write_profile_csv(profile, dest)
    print(f"total_time={profile.total_time!r}")
    print(f"profile={dest}")
    return EXIT_OK


def _write_outputs(result, opm, out: Path, stem: str) -> str:
    result.log.to_csv(out / f"{stem}_log.csv")
    report = compliance_report(result.log, opm, result.path)
    text = report.to_text() + f"stop_reason={result.reason}\n"
    (out / f"{stem}_report.txt").write_text(text)
    flags = sample_flags(result.log, opm)
    flags.to_csv(out / f"{stem}_flags.csv")
    flags.gg_csv(out / f"{stem}_gg.csv")
    return text


def _run_one(config: str, out: str) -> str:
    scenario = load_scenario(config)
    result = simulate(scenario)
    return _write_outputs(result, scenario.opm, Path(out), scenario.name)


def _cmd_simulate(args) -> int:
    configs = list(args.config or []) + list(args.batch or [])
    if not configs:
        raise UsageError("simulate: --config or --batch is required")
    out = _out_dir(args)
    if len(configs) == 1:
        print(_run_one(configs[0], str(out)), end="")
        return EXIT_OK
    # scenarios share nothing, so they run in separate processes
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_run_one, c, str(out)) for c in configs]
        for cfg, fut in zip(configs, futures):
            print(f"# {cfg}")
            print(fut.result(), end="")
    return EXIT_OK


def _cmd_lanechange(args) -> int:
    opm = parse_opm(args.opm)
    req = LaneChangeRequest(args.v, args.offset, args.gap)
    feas = check_feasibility(req, opm)
    if not feas:
        print(f"infeasible: {feas.reason}", file=sys.stderr)
        return EXIT_INFEASIBLE
    plan = generate_lane_change_path(req, opm, ds=args.ds)
    dest = _out_dir(args) / "lanechange.csv"
    write_plan_csv(plan, dest)
    print(f"length={plan.length!r}")
    print(f"max_ay={plan.max_ay!r}")
    print(f"max_jy={plan.max_jy!r}")
    print(f"plan={dest}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    opm = parse_opm(args.opm)
    trajectory = TrajectoryLog.from_csv(args.log)
    path = load_route(args.route, closed=True if args.closed else None, ds=args.ds)
    report = compliance_report(trajectory, opm, path)
    text = report.to_text()
    if args.out:
        out = _out_dir(args)
        (out / "report.txt").write_text(text)
        flags = sample_flags(trajectory, opm)
        flags.to_csv(out / "flags.csv")
        flags.gg_csv(out / "gg.csv")
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="opmdrive", description="Comfort-constrained speed planning and tracking.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def route_opts(sp, required=True):
        sp.add_argument("--route", required=required, help="CSV with an x,y header")
        sp.add_argument("--closed", action="store_true", help="treat the route as a loop")
        sp.add_argument("--ds", type=float, default=1.0, help="station spacing [m]")

    sp = sub.add_parser("plan", help="plan a speed profile")
    route_opts(sp)
    sp.add_argument("--opm", required=True, help="preset name, opm1/opm2, or five numbers")
    sp.add_argument("--v-start", type=float, default=0.0)
    sp.add_argument("--v-end", type=float, default=0.0)
    sp.add_argument("--v-max", type=float, default=30.0)
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=_cmd_plan)

    sp = sub.add_parser("simulate", help="run closed-loop scenarios")
    sp.add_argument("--config", action="append", help="TOML scenario file")
    sp.add_argument("--batch", nargs="+", help="several scenario files, run concurrently")
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("lanechange", help="generate a lane-change path")
    sp.add_argument("--v", type=float, required=True, help="speed [m/s]")
    sp.add_argument("--offset", type=float, required=True, help="lateral offset [m], left positive")
    sp.add_argument("--gap", type=float, required=True, help="free corridor length [m]")
    sp.add_argument("--opm", required=True)
    sp.add_argument("--ds", type=float, default=0.5)
    sp.add_argument("--out", default=".")
    sp.set_defaults(func=_cmd_lanechange)

    sp = sub.add_parser("analyze", help="audit a log against a metric")
    sp.add_argument("--log", required=True)
    sp.add_argument("--opm", required=True)
    route_opts(sp)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_analyze)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (plan, simulate, lanechange, analyze)")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, PreconditionError, OffPathError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OPMDriveError, InsufficientDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
