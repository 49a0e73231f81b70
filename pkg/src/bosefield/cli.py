"""Command line entry point ``verify``."""

from __future__ import annotations

import argparse
import os
import sys
import time

from .config import ConfigError, parse_config
from .report import VerificationReport
from .suites import UnknownSuiteError, emit_convergence_table, resolve_selection, run_suites

__all__ = ["main", "build_parser", "apply_env_overrides"]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ENV_SEED = "BOSEFIELD_SEED"
ENV_WORKERS = "BOSEFIELD_WORKERS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="verify", description="Run the Fock-space verification suites.")
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--suite", default="all", help="suite name, comma separated list or 'all'")
    p.add_argument("--report", help="write the JSON report to this path")
    p.add_argument("--study", choices=["dyson_order", "quad_steps"],
                   help="emit a convergence table instead of running suites")
    p.add_argument("--list", action="store_true", help="list the suites and exit")
    p.add_argument("--quiet", action="store_true", help="print only the summary line")
    return p


def apply_env_overrides(cfg, environ=os.environ):
    """Seed and worker count from the environment take precedence over the file."""
    over = {}
    for var, key in ((ENV_SEED, "seed"), (ENV_WORKERS, "workers")):
        raw = environ.get(var)
        if raw is None or raw == "":
            continue
        try:
            val = int(raw)
        except ValueError as exc:
            raise ConfigError([f"{var}: expected an integer, got {raw!r}"]) from exc
        if val < (0 if key == "seed" else 1):
            raise ConfigError([f"{var}: out of range: {val}"])
        over[key] = val
    return cfg.with_overrides(**over) if over else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list:
        from .suites import SUITES
        for s in SUITES.values():
            print(f"{s.name:26s} {s.description}")
        return EXIT_OK
    try:
        cfg = apply_env_overrides(parse_config(args.config))
    except ConfigError as exc:
        for issue in exc.issues:
            print(f"config error: {issue}", file=sys.stderr)
        return EXIT_USAGE
    if args.study:
        table = emit_convergence_table(cfg, args.study)
        print(table.to_text())
        report = VerificationReport(cfg.to_dict(), tables=[table])
        if args.report:
            report.write(args.report)
        return EXIT_OK
    try:
        selection = resolve_selection(args.suite)
    except UnknownSuiteError as exc:
        print(f"unknown suite(s): {', '.join(exc.names)}", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    report = run_suites(cfg, selection)
    lines = report.format_lines()
    print("\n".join(lines[-1:] if args.quiet else lines))
    print(f"elapsed {time.perf_counter() - start:.1f} s")
    if args.report:
        report.write(args.report)
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
