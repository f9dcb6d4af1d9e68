"""Command line entry point ``gkl``.

Errors are reported on stderr as one JSON line ``{"error": kind, "message": ...}``.
Exit codes: 0 success, 1 failed check, 2 bad config or arguments, 3 I/O or
corrupt input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .experiment import (EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_OK, ConfigError,
                         load_config, run_experiment, summarize, verify, verify_traces)
from .plotting import NoPlottablePoints, emit_plot
from .trace import TraceFormatError, read_trace_csv

log = logging.getLogger("gkl")


def _error(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _window(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        if not sep:
            raise ValueError
        return float(lo), float(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must look like lo:hi, got {text!r}") from None


def _cmd_run(args) -> int:
    config = load_config(args.config)
    results, written = run_experiment(config)
    lines, failed = summarize(results)
    for line in lines:
        print(line)
    for path in written:
        print(f"wrote {path}")
    if failed:
        log.warning("%d checks failed; run `gkl verify` for the exit status", failed)
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.trace:
        code, lines = verify_traces(args.trace)
    elif args.config:
        code, lines = verify(load_config(args.config))
    else:
        return _error("usage", "verify needs a config file or --trace files", EXIT_CONFIG)
    for line in lines:
        print(line)
    print("verify: " + ("all checks passed" if code == EXIT_OK else "checks FAILED"))
    return code


def _series_from(path: str, column: str):
    trace = read_trace_csv(path)
    label = str(trace.meta.get("label", Path(path).stem))
    if column in ("nu_window", "sigma_window"):
        ns, values = analysis.geometric_mean_series(getattr(trace, column[:-7]))
    else:
        values = trace.column(column)
        ns = trace.n.astype(float) + 1
    return label, ns, values


def _cmd_plot(args) -> int:
    try:
        series = [_series_from(p, args.column) for p in args.traces]
    except KeyError as exc:
        return _error("usage", str(exc), EXIT_CONFIG)
    try:
        text, dropped = emit_plot(series, args.ref, title=args.title or "", ylabel=args.column)
    except NoPlottablePoints as exc:
        log.warning("%s; no file written", exc)
        return EXIT_OK
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(text)
    if dropped:
        print(f"dropped {dropped} nonpositive points")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_rates(args) -> int:
    trace = read_trace_csv(args.trace)
    try:
        values = trace.column(args.column)
    except KeyError as exc:
        return _error("usage", str(exc), EXIT_CONFIG)
    try:
        fit = analysis.fit_loglog_slope(trace.n[1:], values[1:], args.window)
    except ValueError as exc:
        return _error("data", str(exc), EXIT_CONFIG)
    out = {"column": args.column, "slope": fit.slope, "intercept": fit.intercept,
           "n_used": fit.n_used, "n_skipped": fit.n_skipped}
    if args.window:
        out["window"] = list(args.window)
    print(json.dumps(out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gkl", description="Greedy kernel interpolation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config and write its outputs")
    p.add_argument("config")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="check the inequality suite on fresh or saved traces")
    p.add_argument("config", nargs="?")
    p.add_argument("--trace", nargs="+", metavar="CSV", help="verify saved trace files instead")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("plot", help="log-log SVG of one trace column")
    p.add_argument("traces", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--ref", type=float, action="append", default=[], metavar="SLOPE")
    p.add_argument("--column", default="max_residual")
    p.add_argument("--title")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("rates", help="fit a log-log slope to a trace column")
    p.add_argument("trace")
    p.add_argument("--column", default="max_residual")
    p.add_argument("--window", type=_window)
    p.set_defaults(func=_cmd_rates)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_CONFIG)
    except TraceFormatError as exc:
        return _error("corrupt_trace", str(exc), EXIT_IO)
    except OSError as exc:
        return _error("io", str(exc), EXIT_IO)


if __name__ == "__main__":
    sys.exit(main())
