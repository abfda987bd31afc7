"""Command-line front end.

Exit status: 0 clean run, 1 when rules fired, 2 for usage errors, 3 when an
input file cannot be read or parsed.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import Sequence

import numpy as np

from .capture import CaptureError, iter_decoded
from .dynamics import (
    InsufficientDataError,
    autocorrelation_delay,
    embed,
    estimate_dimension,
    fit_occupancy,
    fnn_curve,
    load_occupancy,
    project,
    read_points_csv,
    save_occupancy,
    score_series,
    write_fnn_csv,
    write_points_csv,
)
from .monitor import ConfigError, load_config, run_monitor, write_report
from .params import ParamId, extract_params, read_samples_csv, write_samples_csv
from .rules import RuleEngine, RuleError, default_rules, parse_rules
from .series import EmptyInputError, boxcar_average, bin_series, read_series_csv, write_series_csv

EXIT_OK, EXIT_ALERTS, EXIT_USAGE, EXIT_INPUT = 0, 1, 2, 3


def _axes(text: str) -> tuple[int, ...]:
    try:
        axes = tuple(int(a) for a in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"axes must be comma-separated integers, got {text!r}") from None
    if len(axes) not in (2, 3):
        raise argparse.ArgumentTypeError("give 2 or 3 axes")
    return axes


def _delay(text: str) -> int | None:
    if text == "auto":
        return None
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"delay must be an integer or 'auto', got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("delay must be >= 1")
    return v


def _speed(text: str) -> float | str:
    if text == "unlimited":
        return text
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"speed must be a number or 'unlimited', got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("speed must be positive")
    return v


def _load_rules(path: str | None, ack_scan: bool = True):
    if path is None:
        rules = default_rules()
        return rules if ack_scan else [r for r in rules if r.name != "ack-scan"]
    with open(path) as f:
        return parse_rules(f.read())


def _series_values(path: str) -> np.ndarray:
    return read_series_csv(path).values


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_extract(args) -> int:
    wanted = set(args.params) if args.params else None
    samples = []
    for i, _rec, pkt, err in iter_decoded(args.pcap):
        if err is not None:
            print(f"packet {i}: {err}", file=sys.stderr)
            continue
        samples.extend(s for s in extract_params(pkt) if wanted is None or s.param in wanted)
    write_samples_csv(args.output or sys.stdout, samples)
    return EXIT_OK


def cmd_bin(args) -> int:
    samples = [s for s in read_samples_csv(args.samples) if s.param == args.param]
    series = bin_series(samples, args.tau, args.aggregation, args.gap_policy)
    if args.boxcar > 1:
        series = boxcar_average(series, args.boxcar)
    if series.leading_gap:
        print("warning: first bin was empty and was filled with 0", file=sys.stderr)
    write_series_csv(args.output or sys.stdout, series)
    return EXIT_OK


def cmd_fnn(args) -> int:
    s = _series_values(args.series)
    delay = args.delay if args.delay is not None else autocorrelation_delay(s)
    curve = fnn_curve(s, args.d_max, delay, args.r_tol, args.a_tol)
    write_fnn_csv(args.output or sys.stdout, curve)
    dim = estimate_dimension(curve, args.threshold) if curve.points else None
    print(f"delay: {delay}", file=sys.stderr)
    print(f"dimension: {'none' if dim is None else dim}", file=sys.stderr)
    return EXIT_OK


def cmd_embed(args) -> int:
    s = _series_values(args.series)
    delay = args.delay if args.delay is not None else autocorrelation_delay(s)
    write_points_csv(args.output or sys.stdout, embed(s, args.dim, delay))
    return EXIT_OK


def cmd_project(args) -> int:
    pts = read_points_csv(args.vectors)
    write_points_csv(args.output or sys.stdout, project(pts, args.axes))
    return EXIT_OK


def cmd_baseline_fit(args) -> int:
    s = _series_values(args.series)
    delay = args.delay if args.delay is not None else autocorrelation_delay(s)
    model = fit_occupancy(embed(s, args.dim, delay), args.axes, args.resolution)
    save_occupancy(model, args.output)
    if args.cells_csv:
        with open(args.cells_csv, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow([f"c{i}" for i in range(len(model.axes))] + ["count"])
            for idx in zip(*np.nonzero(model.counts)):
                w.writerow([int(i) for i in idx] + [int(model.counts[idx])])
    print(f"occupied fraction: {model.occupied_fraction:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_baseline_score(args) -> int:
    model = load_occupancy(args.model)
    scores = score_series(model, _series_values(args.series))
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        out.write("index,score\n")
        for i, v in enumerate(scores):
            out.write(f"{i},{int(v)}\n")
    finally:
        if args.output:
            out.close()
    print(f"max score: {int(scores.max()) if len(scores) else 0}", file=sys.stderr)
    return EXIT_OK


def cmd_scan(args) -> int:
    engine = RuleEngine(_load_rules(args.rules, not args.no_ack_scan))
    alerts = []
    for i, _rec, pkt, err in iter_decoded(args.pcap):
        if err is not None:
            print(f"packet {i}: {err}", file=sys.stderr)
            continue
        alerts.extend(engine.process(pkt))
    for a in sorted(alerts, key=lambda a: (a.time, a.rule)):
        print(a.line())
    return EXIT_ALERTS if alerts else EXIT_OK


def cmd_monitor(args) -> int:
    config = load_config(args.config)
    report = run_monitor(args.pcap, _load_rules(args.rules, not args.no_ack_scan), config, speed=args.speed)
    write_report(report, args.output)
    for w in report.windows:
        for e in w.errors:
            print(f"window {w.name}: {e}", file=sys.stderr)
    print(f"{report.counters['packets_in']} packets, {len(report.alerts)} alerts", file=sys.stderr)
    return EXIT_ALERTS if report.alerts else EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netphase", description="Header time series, phase-space analysis and signature scanning for pcap captures.")
    sub = p.add_subparsers(dest="command", required=True)

    def param_id(text):
        try:
            return ParamId(int(text))
        except ValueError:
            raise argparse.ArgumentTypeError(f"unknown parameter id {text!r}") from None

    e = sub.add_parser("extract", help="pcap -> parameter samples CSV")
    e.add_argument("pcap")
    e.add_argument("-o", "--output")
    e.add_argument("--params", type=param_id, nargs="+", help="keep only these parameter ids")
    e.set_defaults(func=cmd_extract)

    b = sub.add_parser("bin", help="samples CSV -> uniformly sampled series CSV")
    b.add_argument("samples")
    b.add_argument("--param", type=param_id, required=True)
    b.add_argument("--tau", type=float, default=5.0)
    b.add_argument("--aggregation", choices=("last", "mean", "mode", "count"), default="last")
    b.add_argument("--gap-policy", choices=("hold_last", "zero"), default="hold_last")
    b.add_argument("--boxcar", type=int, default=1)
    b.add_argument("-o", "--output")
    b.set_defaults(func=cmd_bin)

    f = sub.add_parser("fnn", help="series CSV -> false-neighbour curve CSV and dimension estimate")
    f.add_argument("series")
    f.add_argument("--d-max", type=int, default=10)
    f.add_argument("--delay", type=_delay, default=None, help="delay in samples or 'auto'")
    f.add_argument("--r-tol", type=float, default=15.0)
    f.add_argument("--a-tol", type=float, default=2.0)
    f.add_argument("--threshold", type=float, default=0.05)
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_fnn)

    m = sub.add_parser("embed", help="series CSV -> delay vectors CSV")
    m.add_argument("series")
    m.add_argument("-d", "--dim", type=int, required=True)
    m.add_argument("--delay", type=_delay, default=None)
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_embed)

    pr = sub.add_parser("project", help="delay vectors CSV -> 2-D/3-D points CSV")
    pr.add_argument("vectors")
    pr.add_argument("--axes", type=_axes, default=(0, 1))
    pr.add_argument("-o", "--output")
    pr.set_defaults(func=cmd_project)

    bl = sub.add_parser("baseline", help="occupancy model of normal behaviour")
    bsub = bl.add_subparsers(dest="baseline_command", required=True)
    bf = bsub.add_parser("fit")
    bf.add_argument("series")
    bf.add_argument("-d", "--dim", type=int, default=3)
    bf.add_argument("--delay", type=_delay, default=None)
    bf.add_argument("--axes", type=_axes, default=(0, 1))
    bf.add_argument("--resolution", type=int, default=32)
    bf.add_argument("-o", "--output", required=True, help="model file (.npz)")
    bf.add_argument("--cells-csv", help="also dump occupied cells as CSV")
    bf.set_defaults(func=cmd_baseline_fit)
    bs = bsub.add_parser("score")
    bs.add_argument("series")
    bs.add_argument("--model", required=True)
    bs.add_argument("-o", "--output")
    bs.set_defaults(func=cmd_baseline_score)

    for name, fn, helptext in (("scan", cmd_scan, "pcap + rules -> alert lines"),
                               ("monitor", cmd_monitor, "pcap + rules + window config -> report directory")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("pcap")
        s.add_argument("--rules", help="rule file (default: builtin catalog plus ack-scan)")
        s.add_argument("--no-ack-scan", action="store_true", help="leave the ack-scan rule out of the defaults")
        if name == "monitor":
            s.add_argument("--config", required=True)
            s.add_argument("-o", "--output", required=True, help="report directory")
            s.add_argument("--speed", type=_speed, default="unlimited")
        s.set_defaults(func=fn)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (OSError, CaptureError, RuleError, ConfigError, EmptyInputError, InsufficientDataError,
            ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
