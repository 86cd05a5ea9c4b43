"""Command-line front end.

Subcommands write CSV (grids) or JSON (reports) to ``--out`` or stdout. When
writing to a file, a ``<out>.manifest.json`` sidecar records the command,
parameters, seed, version and output checksum.

Exit codes: 0 success, 1 usage error, 2 numeric or accuracy failure.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from . import __version__, metrics
from .errors import AccuracyError, ContractError, UndefinedMetricError
from .eve import MONTE_CARLO, REDUCED_QUADRATURE, attack_profile
from .keyrate import (EVE_TAPS, REFERENCE_AMPLITUDE, REFERENCE_THRESHOLD, TABLE_LOSSES,
                      SearchSpec, apply_loss, eve_amplitude, loss_to_distance, optimize_gain)
from .sim import SessionConfig, analytic_comparison, run_session, write_trace

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2

METRICS_HEADER = ["N", "a", "e0", "eta", "T", "pe", "iqber", "pe_attacked", "qber_attacked"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_values(text, kind=float):
    """Parse ``"x"``, ``"x,y,z"`` or an inclusive ``"start:stop:step"`` range."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
        if step <= 0:
            raise UsageError("range step must be positive")
        if stop < start:
            return []
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [kind(round(start + i * step, 12)) for i in range(n)]
    if not text:
        return []
    return [kind(v) for v in text.split(",") if v.strip()]


def _fmt(value):
    if value is None:
        return ""
    return f"{value:.12g}"


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment. Keys use flag names."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = value
    return values


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def emit(args, payload, extra_files=()):
    """Write ``payload`` (str) to --out or stdout, plus a manifest for files."""
    if args.out in (None, "-"):
        sys.stdout.write(payload)
        return
    with open(args.out, "w", newline="") as fh:
        fh.write(payload)
    checksums = {}
    for path in (args.out, *extra_files):
        with open(path, "rb") as fh:
            checksums[os.path.basename(path)] = hashlib.sha256(fh.read()).hexdigest()
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "config")}
    manifest = {"command": args.command, "parameters": params, "seed": getattr(args, "seed", None),
                "version": __version__, "timestamp": _timestamp(), "outputs": checksums}
    with open(args.out + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _transmittance(loss):
    if not 0.0 <= loss < 1.0:
        raise UsageError("--loss must lie in [0, 1)")
    return 1.0 - loss


# --- metrics ----------------------------------------------------------------

def _metrics_rows(job):
    n, a, thresholds, eta, t, eve_tap, method = job
    a_bob = float(apply_loss(a, t))
    profile = None
    if eta > 0:
        profile = attack_profile([eve_amplitude(a, t, eve_tap)] * n, method=method)
    rows = []
    for e0 in thresholds:
        rep = metrics.evaluate([e0] * n, [a_bob] * n, profile)
        rows.append([n, _fmt(a), _fmt(e0), _fmt(eta), _fmt(t), _fmt(rep.pe), _fmt(rep.iqber),
                     _fmt(rep.pe_attacked), _fmt(rep.qber_attacked)])
    return rows


def cmd_metrics(args):
    modes = parse_values(args.modes, int)
    amps = parse_values(args.amplitude)
    thresholds = parse_values(args.threshold)
    etas = parse_values(args.eta)
    losses = parse_values(args.loss)
    if not (modes and amps and thresholds and etas and losses):
        raise UsageError("empty parameter grid")
    if any(n < 1 for n in modes) or any(not 0 <= e <= 1 for e in etas):
        raise UsageError("modes must be positive and eta in [0, 1]")
    jobs = [(n, a, thresholds, eta, _transmittance(loss), args.eve_tap, args.method)
            for n in modes for loss in losses for eta in etas for a in amps]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            chunks = list(pool.map(_metrics_rows, jobs))
    else:
        chunks = [_metrics_rows(j) for j in jobs]
    emit(args, _csv_text(METRICS_HEADER, [r for c in chunks for r in c]))
    return EXIT_OK


# --- table1 -----------------------------------------------------------------

def table1_rows(eta, losses, modes, search, eve_tap="source", workers=1):
    header = ["loss", "distance_km"] + [f"G{n}" for n in modes]
    for n in modes:
        header += [f"e0_{n}", f"a_{n}"]
    rows = []
    for loss in losses:
        t = _transmittance(loss)
        cells = [optimize_gain(n, t, eta, search, eve_tap, workers) for n in modes]
        row = [f"{loss:.2f}", f"{loss_to_distance(loss):.2f}"]
        row += [f"{c.gain:.6f}" if c.raw_gain > 0 else "-" for c in cells]
        for c in cells:
            row += [f"{c.threshold:.6f}", f"{c.amplitude:.6f}"]
        rows.append(row)
    return header, rows


def cmd_table1(args):
    if not 0.0 <= args.eta <= 1.0:
        raise UsageError("--eta must lie in [0, 1]")
    losses = parse_values(args.loss) if args.loss is not None else list(TABLE_LOSSES)
    modes = parse_values(args.modes, int)
    if not losses or not modes:
        raise UsageError("empty loss or mode list")
    if args.optimize:
        search = SearchSpec(step=args.search_step)
    else:
        search = SearchSpec.fixed(args.threshold, args.amplitude)
    header, rows = table1_rows(args.eta, losses, modes, search, args.eve_tap, args.workers)
    emit(args, _csv_text(header, rows))
    return EXIT_OK


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args):
    trace_len = args.trace_length if args.trace else 0
    try:
        config = SessionConfig.uniform(args.modes, args.amplitude, args.threshold, eta=args.eta,
                                       transmittance=_transmittance(args.loss),
                                       n_pulses=args.pulses, seed=args.seed,
                                       eve_tap=args.eve_tap, trace_length=trace_len)
    except ContractError as exc:
        raise UsageError(str(exc)) from exc
    report = run_session(config, workers=args.workers)
    method = REDUCED_QUADRATURE if args.method == "quadrature" else MONTE_CARLO
    payload = {"report": report.to_dict(),
               "analytic": analytic_comparison(report, method=method)}
    extra = ()
    if args.trace:
        write_trace(report.trace, args.trace)
        extra = (args.trace,)
    emit(args, json.dumps(payload, indent=2) + "\n", extra)
    return EXIT_OK


# --- attack-profile ---------------------------------------------------------

def cmd_attack_profile(args):
    if args.modes < 1 or args.amplitude < 0:
        raise UsageError("--modes must be positive and --amplitude non-negative")
    a_eve = eve_amplitude(args.amplitude, _transmittance(args.loss), args.eve_tap)
    amps = [a_eve] * args.modes
    methods = ["quadrature", "mc"] if args.method == "both" else [args.method]
    out = {"n_modes": args.modes, "amplitude": args.amplitude, "eve_amplitude": a_eve,
           "status": "ok", "profiles": {}}
    status = EXIT_OK
    for m in methods:
        try:
            prof = attack_profile(amps, method=m, samples=args.samples, seed=args.seed,
                                  workers=args.workers)
        except AccuracyError as exc:
            prof = exc.estimate
            out["status"] = "accuracy_failure"
            out["message"] = str(exc)
            status = EXIT_NUMERIC
        out["profiles"][prof.method] = {
            "entries": [{"label": lab, "p": p, "stderr": se} for lab, p, se in prof.entries()],
            "normalization_residual": prof.normalization_residual(),
            "samples": prof.samples,
        }
    if len(out["profiles"]) == 2:
        quad = out["profiles"][REDUCED_QUADRATURE]["entries"]
        mc = out["profiles"][MONTE_CARLO]["entries"]
        out["comparison"] = [
            {"label": q["label"], "difference": m_["p"] - q["p"],
             "z": (m_["p"] - q["p"]) / m_["stderr"] if m_["stderr"] else None}
            for q, m_ in zip(quad, mc)]
    emit(args, json.dumps(out, indent=2) + "\n")
    return status


# --- optimize ---------------------------------------------------------------

def cmd_optimize(args):
    search = SearchSpec(threshold=tuple(parse_values(args.threshold_range)),
                        amplitude=tuple(parse_values(args.amplitude_range)),
                        step=args.search_step)
    if len(search.threshold) != 2 or len(search.amplitude) != 2:
        raise UsageError("ranges are given as lo,hi")
    point = optimize_gain(args.modes, _transmittance(args.loss), args.eta, search,
                          args.eve_tap, args.workers)
    emit(args, json.dumps(point.as_dict(), indent=2) + "\n")
    return EXIT_OK


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--config", default=None, help="flat key = value file of flag values")
    common.add_argument("--eve-tap", choices=EVE_TAPS, default="source")

    parser = _Parser(prog="hdqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("metrics", parents=[common], help="P, q, P', q' over a parameter grid (CSV)")
    p.add_argument("--modes", default="1,2,3")
    p.add_argument("--amplitude", default="0:3:0.05")
    p.add_argument("--threshold", default="0.75")
    p.add_argument("--eta", default="0")
    p.add_argument("--loss", default="0")
    p.add_argument("--method", choices=["quadrature", "mc"], default="quadrature")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("table1", parents=[common], help="secure key gain versus loss (CSV)")
    p.add_argument("--eta", type=float, default=0.6)
    p.add_argument("--loss", default=None, help="loss list or range (default: reference list)")
    p.add_argument("--modes", default="1,2,3")
    p.add_argument("--threshold", type=float, default=REFERENCE_THRESHOLD)
    p.add_argument("--amplitude", type=float, default=REFERENCE_AMPLITUDE)
    p.add_argument("--optimize", action="store_true",
                   help="search (threshold, amplitude) per cell instead of the fixed operating point")
    p.add_argument("--search-step", type=float, default=0.05)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo protocol session (JSON)")
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--pulses", type=int, default=1_000_000)
    p.add_argument("--method", choices=["quadrature", "mc"], default="quadrature")
    p.add_argument("--trace", default=None, help="write the last --trace-length pulses as CSV here")
    p.add_argument("--trace-length", type=int, default=1000)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("attack-profile", parents=[common], help="Eve's outcome probabilities (JSON)")
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--method", choices=["quadrature", "mc", "both"], default="quadrature")
    p.add_argument("--samples", type=int, default=None)
    p.set_defaults(func=cmd_attack_profile)

    p = sub.add_parser("optimize", parents=[common], help="maximise the gain over (threshold, amplitude)")
    p.add_argument("--modes", type=int, default=1)
    p.add_argument("--eta", type=float, default=0.6)
    p.add_argument("--loss", type=float, default=0.0)
    p.add_argument("--threshold-range", default="0,2.5")
    p.add_argument("--amplitude-range", default="0.05,3")
    p.add_argument("--search-step", type=float, default=0.05)
    p.set_defaults(func=cmd_optimize)
    return parser


def _apply_config(parser, argv):
    # first pass only locates --config; its values become subparser defaults
    args = parser.parse_args(argv)
    if not args.config:
        return args
    values = read_config(args.config)
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, value in values.items():
        if key not in known or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = known[key]
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            defaults[key] = action.type(value)
        else:
            defaults[key] = value
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.func(args)
    except (UsageError, ContractError, ValueError) as exc:
        print(f"hdqkd: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UndefinedMetricError, AccuracyError, ArithmeticError) as exc:
        print(f"hdqkd: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"hdqkd: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
