"""Command line entry point ``pairwell``.

Exit status: 0 success, 1 invalid input, 2 failure during computation.
"""

from __future__ import annotations

import argparse
import os
import sys

from .analytic import find_bound_states, find_resonances, fit_all_levels, extrapolate_level
from .dirac_core import WellParams
from .runner import ConfigError, load_scenario, run_loaded

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE = 0, 1, 2


def _threads(arg: int | None) -> int | None:
    if arg is not None:
        return arg
    env = os.environ.get("PAIRWELL_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError([f"PAIRWELL_THREADS: not an integer: {env!r}"])
    return None


def _cmd_run(args) -> int:
    try:
        threads = _threads(args.threads)
        scenario = load_scenario(args.config, args.out)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_INVALID
    try:
        with open(args.config, "rb") as fh:
            raw = fh.read()
        manifest = run_loaded(scenario, raw, threads)
    except Exception as exc:  # noqa: BLE001 - report any compute failure with its own status
        print(f"error: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    for entry in manifest["outputs"]:
        print(scenario.output / entry["path"])
    print(scenario.output / "manifest.json")
    return EXIT_OK


def _cmd_levels(args) -> int:
    try:
        params = WellParams(args.v1, args.v2, 0.0, args.d)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        if params.step_supercritical:
            levels = find_resonances(params)
        else:
            levels = find_bound_states(params)
        fits = {}
        if params.step_supercritical and not params.symmetric:
            fits = {f.level_index: extrapolate_level(f, params.v1) for f in fit_all_levels(params)}
    except Exception as exc:  # noqa: BLE001
        print(f"error: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    header = "level  Re(E)/c2      Im(E)/c2" + ("      E_fit/c2" if fits else "")
    print(header)
    for s in sorted(levels, key=lambda s: s.level_index):
        line = f"{s.level_index:5d}  {s.energy.real:11.6f}  {s.energy.imag:11.6f}"
        if fits:
            line += f"  {fits.get(s.level_index, float('nan')):11.6f}"
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairwell", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (overrides the config)")
    run.add_argument("--threads", type=int, default=None,
                     help="worker threads (default: $PAIRWELL_THREADS or 1)")
    run.set_defaults(func=_cmd_run)

    lv = sub.add_parser("levels", help="sharp-well levels for quick inspection")
    lv.add_argument("--v1", type=float, required=True, help="step height, units of c^2")
    lv.add_argument("--v2", type=float, required=True, help="well depth, units of c^2")
    lv.add_argument("--d", type=float, required=True, help="well width, atomic units")
    lv.set_defaults(func=_cmd_levels)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
