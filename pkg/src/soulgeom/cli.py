"""Command-line front end: ``soulgeom <command> [options]``.

Exit status: 0 when every check passes (indeterminate checks within the
configured allowance), 1 on failing checks, 2 on configuration errors, 3 on
I/O errors.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace

from .config import BACKENDS, ConfigError, default_config_text, load_config
from .report import emit
from .verification import COMMANDS, run_command

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="soulgeom", description="Curvature and holonomy checks for metrics on S^2 x R^3.")
    ap.add_argument("command", nargs="?", choices=sorted(COMMANDS), help="suite to run")
    ap.add_argument("--config", metavar="PATH", help="YAML configuration (defaults when omitted)")
    ap.add_argument("--seed", type=int, help="seed for all sampled points, loops and directions")
    ap.add_argument("--backend", choices=BACKENDS, help="derivative backend for curvature checks")
    ap.add_argument("--out", metavar="DIR", default="reports", help="output directory (default: reports)")
    ap.add_argument("--format", choices=("json", "csv", "both"), default="json", help="report files to write")
    ap.add_argument("--workers", type=int, default=1, help="worker processes (output does not depend on it)")
    ap.add_argument("--print-config", action="store_true", help="print the commented default configuration and exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.print_config:
        sys.stdout.write(default_config_text())
        return EXIT_OK
    if args.command is None:
        build_parser().print_usage(sys.stderr)
        print("soulgeom: error: a command is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.backend is not None:
        cfg = replace(cfg, backend=args.backend)
    if cfg.seed is None:
        print(f"config error: '{args.command}' needs a seed (set 'seed' in the config or pass --seed)", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers < 1:
        print("config error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG

    start = time.perf_counter()
    report = run_command(args.command, cfg, workers=args.workers)
    if cfg.report.record_time:
        report.seconds = round(time.perf_counter() - start, 3)
    try:
        paths = emit(report, args.out, args.format)
    except OSError as exc:
        print(f"I/O error: cannot write reports to {args.out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO

    s = report.summary
    print(f"{args.command}: {s['pass']} passed, {s['fail']} failed, {s['indeterminate']} indeterminate")
    for path in paths:
        print(f"wrote {path}")
    if report.ok(cfg.report.indeterminate_allowance):
        return EXIT_OK
    failing = report.failing()
    if failing:
        print("failing checks: " + ", ".join(failing), file=sys.stderr)
    if s["indeterminate"] > cfg.report.indeterminate_allowance:
        print(f"indeterminate checks exceed the allowance of {cfg.report.indeterminate_allowance}", file=sys.stderr)
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
