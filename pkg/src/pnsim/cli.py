"""Command-line interface.

Three subcommands: `analytic` evaluates the closed forms for a
configuration, `simulate` runs a Monte Carlo session, and
`reproduce-paper` rebuilds the published leak-fraction table.  Exit codes:
0 on success, 2 for configuration problems, 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from . import __version__
from .config import DEFAULT_PULSES, RunConfig, load_config
from .errors import ConfigError, PnsimError
from .reports import (
    build_reference_table,
    render_analytic_csv,
    render_analytic_json,
    render_analytic_table,
    render_intensity_csv,
    render_json,
    render_reference_csv,
    render_reference_json,
    render_reference_table,
    render_table,
    write_text,
)

_REPRODUCE_SEED = 7


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnsim",
        description=(
            "Photon-number-splitting attack analytics and simulation for "
            "decoy-state BB84."
        ),
    )
    parser.add_argument("--version", action="version", version=f"pnsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_output_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument(
            "--format",
            choices=("json", "csv", "table"),
            default="table",
            help="output format (default: table)",
        )
        p.add_argument("--out", type=Path, help="write output to this file")
        p.add_argument(
            "--no-figures",
            action="store_true",
            help="skip PNG figures when writing with --out",
        )

    def add_run_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, help="override the random seed")
        p.add_argument("--trials", type=int, help="override the pulse count")
        p.add_argument("--workers", type=int, help="simulate chunks concurrently")

    p_analytic = sub.add_parser(
        "analytic", help="evaluate the closed-form leak quantities"
    )
    p_analytic.add_argument("--config", type=Path, required=True)
    add_output_flags(p_analytic)
    p_analytic.set_defaults(func=cmd_analytic)

    p_simulate = sub.add_parser("simulate", help="run a Monte Carlo session")
    p_simulate.add_argument("--config", type=Path, required=True)
    add_run_flags(p_simulate)
    add_output_flags(p_simulate)
    p_simulate.set_defaults(func=cmd_simulate)

    p_repro = sub.add_parser(
        "reproduce-paper",
        help="recompute the published leak fractions and confirm by simulation",
    )
    add_run_flags(p_repro)
    add_output_flags(p_repro)
    p_repro.set_defaults(func=cmd_reproduce_paper)

    return parser


def _emit(
    text_by_format: dict[str, Any],
    args: argparse.Namespace,
    figures: Any = None,
) -> int:
    """Render in the requested format, then print or write with figures."""
    rendered = text_by_format[args.format]
    if not isinstance(rendered, str):
        rendered = json.dumps(rendered, indent=2) + "\n"
    if args.out is None:
        sys.stdout.write(rendered)
        return 0
    write_text(rendered, args.out)
    if figures is not None and not args.no_figures:
        for path in figures(args.out.with_suffix("")):
            print(f"wrote {path}")
    print(f"wrote {args.out}")
    return 0


def _overridden(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    changes: dict[str, int] = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError(f"--seed must be >= 0, got {args.seed}")
        changes["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError(f"--trials must be >= 1, got {args.trials}")
        changes["pulses"] = args.trials
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError(f"--workers must be >= 1, got {args.workers}")
        changes["workers"] = args.workers
    return config.override(**changes) if changes else config


def cmd_analytic(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    from .figures import render_analytic_figures

    return _emit(
        {
            "table": render_analytic_table(config),
            "csv": render_analytic_csv(config),
            "json": render_analytic_json(config),
        },
        args,
        figures=lambda stem: render_analytic_figures(config, stem),
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    from .figures import render_report_figures
    from .session import run_session

    config = _overridden(load_config(args.config), args)
    report = run_session(config.session_config())
    return _emit(
        {
            "table": render_table(report),
            "csv": render_intensity_csv(report),
            "json": render_json(report),
        },
        args,
        figures=lambda stem: render_report_figures(report, stem),
    )


def cmd_reproduce_paper(args: argparse.Namespace) -> int:
    from .figures import render_reference_figures

    trials = args.trials if args.trials is not None else DEFAULT_PULSES
    if trials < 1:
        raise ConfigError(f"--trials must be >= 1, got {trials}")
    seed = args.seed if args.seed is not None else _REPRODUCE_SEED
    if seed < 0:
        raise ConfigError(f"--seed must be >= 0, got {seed}")
    workers = args.workers if args.workers is not None else 1
    if workers < 1:
        raise ConfigError(f"--workers must be >= 1, got {workers}")
    rows = build_reference_table(trials=trials, seed=seed, workers=workers)
    return _emit(
        {
            "table": render_reference_table(rows),
            "csv": render_reference_csv(rows),
            "json": render_reference_json(rows),
        },
        args,
        figures=lambda stem: render_reference_figures(rows, stem),
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (PnsimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
