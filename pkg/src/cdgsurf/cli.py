"""Command-line driver: ``cdgsurf solve | convergence | geomcheck``."""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import json
import logging
import os
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from .exceptions import CDGError
from .mesh import write_off
from .plotting import convergence_svg
from .problems import get_problem
from .solver import RunConfig, build_mesh, convergence_study, run_level
from .verify import ConvergenceReport, geometry_rates

logger = logging.getLogger("cdgsurf")

CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


class UsageError(Exception):
    pass


def parse_levels(text) -> tuple:
    """``"1-4"``, ``"1,2,3"`` or a JSON list of integers."""
    if isinstance(text, (list, tuple)):
        return tuple(int(k) for k in text)
    text = str(text).strip()
    try:
        if "-" in text[1:]:
            lo, hi = text.split("-", 1)
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(k) for k in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid level range {text!r}") from None


def positive_float(text) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def non_negative_int(text) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _add_common(p: argparse.ArgumentParser, single_level: bool) -> None:
    # defaults are None so that --config values are only overridden by explicit flags
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--problem", choices=("sphere", "torus"))
    if single_level:
        p.add_argument("--level", type=non_negative_int, help="refinement level (0 = coarsest)")
    else:
        p.add_argument("--levels", type=parse_levels, help='ascending levels, e.g. "1-4" or "1,2,3"')
    p.add_argument("--mesh", choices=("structured", "perturbed"))
    p.add_argument("--seed", type=int)
    p.add_argument("--amplitude", type=float, help="perturbation amplitude relative to local h")
    p.add_argument("--out", help="CSV output path (default: stdout)")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=positive_float, help="jump penalty (default 10)")
    p.add_argument("--load-source", dest="load_source", choices=("oracle", "paper"))
    p.add_argument("--h-mode", dest="h_mode", choices=("global", "per-edge"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdgsurf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve on one refinement level")
    _add_common(p, single_level=True)
    _add_solver_flags(p)
    p.add_argument("--off", help="write the mesh in OFF format")
    p.add_argument("--solution", help="write P2 coefficients, one per line")
    p.add_argument("--dump-matrix", dest="dump_matrix", help="write A as 'i j value' lines")

    p = sub.add_parser("convergence", help="run a refinement study")
    _add_common(p, single_level=False)
    _add_solver_flags(p)
    p.add_argument("--svg", help="write a log-log error plot")

    p = sub.add_parser("geomcheck", help="geometric approximation rates")
    _add_common(p, single_level=False)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        with open(args.config) as fh:
            values = json.load(fh)
        if not isinstance(values, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        unknown = set(values) - CONFIG_FIELDS
        if unknown:
            raise UsageError(f"{args.config}: unknown fields {sorted(unknown)}")
        if "levels" in values:
            values["levels"] = parse_levels(values["levels"])
    for name in CONFIG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    if getattr(args, "level", None) is not None:
        values["levels"] = (args.level,)
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _thread_limit():
    raw = os.environ.get("CDG_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise UsageError(f"CDG_THREADS must be a positive integer, got {raw!r}") from None
    return threadpool_limits(limits=n)


def write_matrix(A, path) -> None:
    coo = A.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")


def cmd_solve(config: RunConfig, args) -> int:
    if len(config.levels) != 1:
        raise UsageError(f"solve takes a single level, got {config.levels}")
    est, row = run_level(config, config.levels[0])
    report = ConvergenceReport()
    report.add(row)
    with _output(config.out) as fh:
        fh.write(report.to_csv())
    if args.off:
        write_off(est.discretization_.mesh, args.off)
    if args.solution:
        np.savetxt(args.solution, est.coef_, fmt="%.17g")
    if args.dump_matrix:
        write_matrix(est.system_.A, args.dump_matrix)
    return 0


def cmd_convergence(config: RunConfig, args) -> int:
    if len(config.levels) < 2:
        raise UsageError("convergence needs at least 2 levels")
    report = convergence_study(config)
    with _output(config.out) as fh:
        fh.write(report.to_csv())
    if args.svg:
        with open(args.svg, "w") as fh:
            fh.write(convergence_svg(report))
    return 0


def cmd_geomcheck(config: RunConfig, args) -> int:
    surface = get_problem(config.problem).surface
    meshes = [build_mesh(config, surface, k) for k in config.levels]
    rates = geometry_rates(meshes)
    if rates.slopes is None:
        print("cdgsurf: warning: a single level gives no slopes", file=sys.stderr)
    with _output(config.out) as fh:
        fh.write(rates.to_csv())
    return 0


COMMANDS = {"solve": cmd_solve, "convergence": cmd_convergence, "geomcheck": cmd_geomcheck}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        config = load_config(args)
        with _thread_limit():
            return COMMANDS[args.command](config, args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with status 2
    except CDGError as exc:
        print(f"cdgsurf: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"cdgsurf: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
