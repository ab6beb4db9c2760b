"""Command line front end for the experiment runners.

Each subcommand reads a JSON config, runs the matching experiment, and
writes ``<prefix>_<kind>.csv`` plus ``<prefix>_summary.json`` into the
output directory.  Exit status encodes the outcome: 0 when every check
passed, 1 when the run completed but found violations, 2 for unusable
configs or arguments.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__, experiments
from .experiments import EXPERIMENT_KINDS, ExperimentConfig, config_from_dict
from .operators import constants_for

SEED_ENV_VAR = "HYPERKERNEL_SEED"

_CONSTANT_FIELDS = (
    ("lambda0", "scale base of the dyadic decomposition"),
    ("C1", "lower normalizer constant"),
    ("C2", "upper normalizer constant"),
    ("A_tilde", "doubling constant of the tuple diagonal"),
    ("C_domination", "maximal function domination constant"),
    ("prop33_bound", "product bound for indicator kernels"),
)


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def parse_config(raw: bytes | str, base_dir: str | os.PathLike | None = None
                 ) -> ExperimentConfig:
    """Decode a JSON config, reporting parse failures with line and column."""
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as err:
        raise ValueError(
            f"config parse error at line {err.lineno} column {err.colno}: "
            f"{err.msg}") from err
    if not isinstance(data, dict):
        raise ValueError(
            f"config root must be an object, got {type(data).__name__}")
    return config_from_dict(data, base_dir=base_dir)


def emit_config(cfg: ExperimentConfig) -> str:
    """Serialize a config so that ``parse_config`` recovers it exactly."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


def _load_config(path: str) -> ExperimentConfig:
    p = Path(path)
    return parse_config(p.read_bytes(), base_dir=p.parent)


def _resolve_seed(args: argparse.Namespace, cfg: ExperimentConfig) -> int:
    if args.seed is not None:
        return args.seed
    if cfg.seed is not None:
        return cfg.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env!r}")
        if not 0 <= seed < 2**64:
            raise ValueError(f"{SEED_ENV_VAR} out of range: {seed}")
        return seed
    raise ValueError(
        f"no seed: pass --seed, set one in the config, or export "
        f"{SEED_ENV_VAR}")


# ---------------------------------------------------------------------------
# Argument parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperkernel",
        description="Sampling experiments for multilinear kernel averages.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True,
                       help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="override the run seed")

    for kind in EXPERIMENT_KINDS:
        p = sub.add_parser(kind, help=f"run a {kind} experiment")
        add_common(p)
        p.add_argument("--out", default=".",
                       help="directory for the CSV and summary (default .)")
        p.add_argument("--jobs", type=int, default=1,
                       help="worker processes (default 1)")
        p.add_argument("--verbose", action="store_true",
                       help="print every output row")

    p = sub.add_parser("constants",
                       help="print the derived constants for a config")
    add_common(p)
    return parser


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------

def _cmd_experiment(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    if cfg.kind != args.command:
        raise ValueError(
            f"config kind {cfg.kind!r} does not match subcommand "
            f"{args.command!r}")
    if args.jobs < 1:
        raise ValueError(f"--jobs must be at least 1, got {args.jobs}")
    seed = _resolve_seed(args, cfg)

    report = experiments.run(cfg, seed=seed, jobs=args.jobs)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.prefix}_{cfg.kind}.csv"
    json_path = out_dir / f"{cfg.prefix}_summary.json"
    experiments.write_csv(report, csv_path)
    experiments.write_summary(report, json_path)

    if args.verbose:
        print(",".join(report.columns))
        for row in report.rows:
            print(",".join(experiments._format_cell(c) for c in row))
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    violations = report.summary["violations"]
    if report.passed:
        print(f"{cfg.kind}: {len(report.rows)} rows, all checks passed")
        return 0
    print(f"{cfg.kind}: {len(report.rows)} rows, {violations} violations")
    return 1


def _cmd_constants(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    space = cfg.build_space()
    consts = constants_for(space, cfg.k)
    print(f"space: {space.kind}  k: {cfg.k}")
    for name, note in _CONSTANT_FIELDS:
        print(f"{name:<13} = {getattr(consts, name)!r}  # {note}")
    return 0


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "constants":
            return _cmd_constants(args)
        return _cmd_experiment(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def run() -> None:
    raise SystemExit(main())
