"""Command-line entry point: analyze, simulate, validate, relevance.

Exit status: 0 on success, 1 when the mission log is invalid (violations are
printed), 2 on usage errors and unreadable inputs.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .analysis import AnalysisOptions, InvalidLogError, analyze_mission
from .geometry import DEFAULT_CELL_SIZE, DEFAULT_MAX_DT
from .kpi_precision import AREA_SOURCES, DEFAULT_MATCH_RADIUS
from .report import FORMATS, KPI_IDS, relevance_lookup, render
from .simulator import PRESETS, InfeasibleConfig, generate, load_config, preset, with_seed, write_bundle
from .telemetry import LogFormatError, load_mission, parse_log, validate_log

log = logging.getLogger("fieldkpi")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    pass


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fieldkpi", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"fieldkpi {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="compute the KPI report for a mission")
    a.add_argument("--mission", required=True, type=Path, help="mission.json manifest or a bare .jsonl event log")
    a.add_argument("--scenario", choices=("s1", "s2", "s3", "custom"))
    a.add_argument("--phase", choices=("p1", "p2", "full"))
    a.add_argument("--out", type=Path, help="output file (default: stdout)")
    a.add_argument("--format", choices=FORMATS, default="json")
    a.add_argument("--only-relevant", action="store_true", help="drop KPIs marked not relevant for scenario/phase")
    a.add_argument("--cell-size", type=_positive, default=DEFAULT_CELL_SIZE, help="coverage grid cell (m)")
    a.add_argument("--match-radius", type=_positive, default=DEFAULT_MATCH_RADIUS, help="resource match radius (m)")
    a.add_argument("--max-dt", type=_positive, default=DEFAULT_MAX_DT, help="pose association tolerance (s)")
    a.add_argument("--ate-align", choices=("none", "translation", "rigid"), default="rigid")
    a.add_argument("--area-source", choices=AREA_SOURCES, default="mapped_area",
                   help="study area for the Clark-Evans ratio")

    s = sub.add_parser("simulate", help="generate a synthetic mission bundle")
    src = s.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=PRESETS, default=None)
    src.add_argument("--config", type=Path, help="scenario config JSON")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", type=Path, required=True, help="output directory")

    v = sub.add_parser("validate", help="check a mission log for structural violations")
    v.add_argument("--mission", required=True, type=Path, help="mission.json manifest or a bare .jsonl event log")

    r = sub.add_parser("relevance", help="print the relevance matrix slice")
    r.add_argument("--scenario", required=True, choices=("s1", "s2", "s3"))
    r.add_argument("--phase", required=True, choices=("p1", "p2", "full"))
    r.add_argument("--kpi", help="single KPI id, e.g. P7 or P.7")
    return p


def _load(path: Path):
    if not path.exists():
        raise UsageError(f"no such file: {path}")
    return load_mission(path) if path.suffix == ".json" else parse_log(path)


def _print_violations(violations, stream) -> None:
    for v in violations:
        print(str(v), file=stream)


def cmd_analyze(args) -> int:
    if not args.mission.exists():
        raise UsageError(f"no such file: {args.mission}")
    opts = AnalysisOptions(cell_size=args.cell_size, match_radius=args.match_radius, max_dt=args.max_dt,
                           ate_align=args.ate_align, area_source=args.area_source)
    try:
        report = analyze_mission(args.mission, opts, scenario=args.scenario, phase=args.phase)
    except InvalidLogError as exc:
        print(f"{args.mission}: {exc}", file=sys.stderr)
        _print_violations(exc.violations, sys.stderr)
        return 1
    try:
        text = render(report, fmt=args.format, only_relevant=args.only_relevant)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.out:
        write_atomic(args.out, text)
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    if args.config is not None:
        if not args.config.exists():
            raise UsageError(f"no such file: {args.config}")
        cfg = load_config(args.config)
    else:
        cfg = preset(args.preset or "s1")
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    bundle = generate(cfg)
    manifest = write_bundle(bundle, args.out)
    print(manifest)
    return 0


def cmd_validate(args) -> int:
    mission = _load(args.mission)
    violations = validate_log(mission)
    if violations:
        _print_violations(violations, sys.stdout)
        return 1
    print(f"{args.mission}: valid ({len(mission.events)} events)")
    return 0


def cmd_relevance(args) -> int:
    ids = [args.kpi] if args.kpi else KPI_IDS
    try:
        for k in ids:
            print(f"{k}\t{relevance_lookup(args.scenario, args.phase, k)}")
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    return 0


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "validate": cmd_validate, "relevance": cmd_relevance}


def run(argv=None) -> int:
    level = os.environ.get("FIELDKPI_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"fieldkpi {args.command}: {exc}", file=sys.stderr)
        return 2
    except LogFormatError as exc:
        print(f"fieldkpi {args.command}: {exc}", file=sys.stderr)
        return 1
    except (InfeasibleConfig, ValueError) as exc:
        print(f"fieldkpi {args.command}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
