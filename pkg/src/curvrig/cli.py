"""Command line entry point.

    curvrig run        --config FILE --out DIR   run every scenario
    curvrig certificate --config FILE --out DIR  only certificate scenarios
    curvrig bvp / scan / quotient / lapse        the other kind filters

Outputs under --out: report.csv (one row per scenario, deterministic),
certificates.csv when certificate scenarios ran, per-scenario profile CSVs,
and figures/<id>.png unless --no-figures.  Exit codes: 0 success, 1 a solve
failed or produced non-finite quantities or output could not be written,
2 configuration or validation error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError, CurvrigError, SolverError, AssemblyError
from .report import ReportRow, has_nan, render_report, write_report
from .rigidity import write_certificates_csv
from .runner import run_scenario
from .scenario import apply_overrides, parse_config
from . import figures as figmod

__all__ = ["main", "build_parser"]

_KIND_FILTERS = {
    "run": None,
    "certificate": "certificate",
    "bvp": "bvp",
    "scan": "annulus-scan",
    "quotient": "quotient",
    "lapse": "lapse-check",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvrig",
        description="curvature rigidity certificates, quotient estimates, "
        "and prescribed-curvature boundary value runs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _KIND_FILTERS:
        p = sub.add_parser(
            name,
            help="run all scenarios" if name == "run" else f"run only {name} scenarios",
        )
        p.add_argument("--config", required=True, help="scenario config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="run seed recorded for the log")
        p.add_argument("--jobs", type=int, default=1, help="parallel scenario workers")
        p.add_argument(
            "--no-figures", action="store_true", help="skip figure rendering"
        )
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="[ID.]KEY=VALUE",
            help="override a config value (repeatable)",
        )
    return parser


def _execute(scenario, out_dir):
    start = time.perf_counter()
    try:
        outcome = run_scenario(scenario, out_dir, figures=True)
        err = None
    except (SolverError, AssemblyError) as exc:
        outcome, err = None, exc
    elapsed = time.perf_counter() - start
    return scenario, outcome, err, elapsed


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    kind = _KIND_FILTERS[args.command]

    try:
        scenarios = parse_config(args.config)
        if kind is not None:
            scenarios = [s for s in scenarios if s.kind == kind]
            if not scenarios:
                raise ConfigError(0, f"config defines no scenarios of kind {kind!r}")
        apply_overrides(scenarios, args.overrides)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    out_dir = args.out
    figures_dir = os.path.join(out_dir, "figures")
    try:
        os.makedirs(out_dir, exist_ok=True)
        if not args.no_figures:
            os.makedirs(figures_dir, exist_ok=True)
    except OSError as err:
        print(f"cannot create output directory: {err}", file=sys.stderr)
        return 1

    try:
        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(lambda s: _execute(s, out_dir), scenarios))
        else:
            results = [_execute(s, out_dir) for s in scenarios]
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except CurvrigError as err:
        if isinstance(err, (SolverError, AssemblyError)):
            print(f"solve error: {err}", file=sys.stderr)
            return 1
        print(f"validation error: {err}", file=sys.stderr)
        return 2

    rows = []
    certificates = []
    failed = False
    for scenario, outcome, err, elapsed in results:
        if err is not None:
            failed = True
            print(
                f"[{scenario.ident}] {scenario.kind} FAILED after {elapsed:.2f}s: {err}",
                file=sys.stderr,
            )
            rows.append(
                ReportRow(
                    scenario=scenario.ident,
                    verdict="failed",
                    quantities={"error": float("nan")},
                )
            )
            continue
        print(
            f"[{scenario.ident}] {scenario.kind} done in {elapsed:.2f}s "
            f"(seed {args.seed})",
            file=sys.stderr,
        )
        rows.append(outcome.row)
        if outcome.certificate is not None:
            certificates.append((scenario.ident, outcome.certificate))
        if not args.no_figures and outcome.figure_payload is not None:
            figmod.render_figure(
                scenario.kind,
                scenario.ident,
                outcome.figure_payload,
                os.path.join(figures_dir, f"{scenario.ident}.png"),
            )

    try:
        write_report(rows, os.path.join(out_dir, "report.csv"))
        if certificates:
            certificates.sort(key=lambda item: item[0])
            write_certificates_csv(
                [c for _, c in certificates], os.path.join(out_dir, "certificates.csv")
            )
    except OSError as err:
        print(f"cannot write report: {err}", file=sys.stderr)
        return 1

    sys.stdout.write(render_report(rows))
    if failed or has_nan(rows):
        return 1
    return 0
