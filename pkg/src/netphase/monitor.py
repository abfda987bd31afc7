"""Multi-window monitor: one decode pass feeding the rule engine and every
time window's binner, with per-window averaging, FNN and novelty scoring.

Everything runs on one thread.  Each window worker owns its buffers, sees
packets in capture order, and alerts are merged by ``(time, rule)``, so a
report depends only on the capture, the rules and the window config.
"""

from __future__ import annotations

import configparser
import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .capture import (
    LINKTYPE_ETHERNET,
    CaptureError,
    CaptureRecord,
    DecodeError,
    PcapReader,
    Source,
    UnsupportedLinkTypeError,
    decode_packet,
)
from .dynamics import (
    DegenerateSeriesError,
    FnnCurve,
    InsufficientDataError,
    OccupancyModel,
    autocorrelation_delay,
    estimate_dimension,
    fnn_curve,
    load_occupancy,
    score_series,
)
from .params import ParamId, extract_params
from .rules import Alert, RuleEngine, SignatureRule, sort_alerts
from .series import AGGREGATIONS, GAP_POLICIES, TimeSeries, bin_values, boxcar_average, downsample, write_series_csv

PathLike = Union[str, "os.PathLike[str]"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FnnSettings:
    param: ParamId | None = None  # defaults to the window's first parameter
    d_max: int = 10
    delay: int | None = None  # None: first autocorrelation minimum
    r_tol: float = 15.0
    a_tol: float = 2.0
    threshold: float = 0.05


@dataclass(frozen=True)
class WindowSpec:
    """One averaging scale.

    A window with ``source`` set does not bin packets; it takes the averaged
    series of the named shorter window and keeps every ``tau / source.tau``-th
    value before applying its own boxcar.
    """

    name: str
    tau: float
    params: tuple[ParamId, ...] = (ParamId.IP_PROTO,)
    aggregation: str = "last"
    gap_policy: str = "hold_last"
    boxcar: int = 1
    fnn: FnnSettings | None = None
    model: str | None = None  # occupancy model scored against the first parameter
    source: str | None = None

    @property
    def primary(self) -> ParamId:
        return self.params[0]


@dataclass(frozen=True)
class WindowConfig:
    windows: tuple[WindowSpec, ...]

    def __post_init__(self):
        wins = tuple(sorted(self.windows, key=lambda w: w.tau))
        object.__setattr__(self, "windows", wins)
        if not wins:
            raise ConfigError("at least one window is required")
        names = [w.name for w in wins]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate window names in {names}")
        taus = [w.tau for w in wins]
        if any(not (t > 0 and math.isfinite(t)) for t in taus):
            raise ConfigError(f"window scales must be positive, got {taus}")
        if len(set(taus)) != len(taus):
            raise ConfigError(f"window scales must be distinct, got {taus}")
        by_name = {w.name: w for w in wins}
        for w in wins:
            if not w.params:
                raise ConfigError(f"window {w.name!r} tracks no parameters")
            if w.aggregation not in AGGREGATIONS:
                raise ConfigError(f"window {w.name!r}: unknown aggregation {w.aggregation!r}")
            if w.gap_policy not in GAP_POLICIES:
                raise ConfigError(f"window {w.name!r}: unknown gap policy {w.gap_policy!r}")
            if w.boxcar < 1:
                raise ConfigError(f"window {w.name!r}: boxcar must be >= 1")
            if w.fnn is not None and w.fnn.param is not None and w.fnn.param not in w.params:
                raise ConfigError(f"window {w.name!r}: FNN parameter {int(w.fnn.param)} is not tracked")
            if w.source is None:
                continue
            src = by_name.get(w.source)
            if src is None:
                raise ConfigError(f"window {w.name!r}: unknown source window {w.source!r}")
            if src.tau >= w.tau:
                raise ConfigError(f"window {w.name!r}: source {w.source!r} must have a shorter scale")
            if abs(w.tau / src.tau - round(w.tau / src.tau)) > 1e-9:
                raise ConfigError(f"window {w.name!r}: scale {w.tau} is not a multiple of {src.tau}")
            missing = set(w.params) - set(src.params)
            if missing:
                raise ConfigError(f"window {w.name!r}: parameters {sorted(map(int, missing))} not in source")

    @property
    def names(self) -> list[str]:
        return [w.name for w in self.windows]

    def without(self, name: str) -> "WindowConfig":
        return WindowConfig(tuple(w for w in self.windows if w.name != name))


# --------------------------------------------------------------------------
# config file
# --------------------------------------------------------------------------


def _param_list(text: str) -> tuple[ParamId, ...]:
    try:
        return tuple(ParamId(int(p)) for p in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad parameter list {text!r}: {exc}") from None


def parse_config(text: str) -> WindowConfig:
    """Read windows from INI text; each ``[window NAME]`` section is one scale.

    Keys: ``tau`` (seconds, required), ``params``, ``aggregation``,
    ``gap_policy``, ``boxcar``, ``source``, ``model``, ``fnn`` (yes/no) and
    the FNN knobs ``fnn_param``, ``fnn_d_max``, ``fnn_delay`` (integer or
    ``auto``), ``r_tol``, ``a_tol``, ``threshold``.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    windows = []
    for section in cp.sections():
        kind, _, name = section.partition(" ")
        if kind != "window" or not name.strip():
            raise ConfigError(f"unexpected section [{section}]; expected [window NAME]")
        sec = cp[section]
        try:
            fnn = None
            if sec.getboolean("fnn", fallback=False):
                delay = sec.get("fnn_delay", "auto")
                fnn = FnnSettings(
                    param=ParamId(sec.getint("fnn_param")) if "fnn_param" in sec else None,
                    d_max=sec.getint("fnn_d_max", 10),
                    delay=None if delay == "auto" else int(delay),
                    r_tol=sec.getfloat("r_tol", 15.0),
                    a_tol=sec.getfloat("a_tol", 2.0),
                    threshold=sec.getfloat("threshold", 0.05),
                )
            if "tau" not in sec:
                raise ConfigError(f"window {name!r} has no tau")
            windows.append(WindowSpec(
                name=name.strip(),
                tau=sec.getfloat("tau"),
                params=_param_list(sec.get("params", str(int(ParamId.IP_PROTO)))),
                aggregation=sec.get("aggregation", "last"),
                gap_policy=sec.get("gap_policy", "hold_last"),
                boxcar=sec.getint("boxcar", 1),
                fnn=fnn,
                model=sec.get("model"),
                source=sec.get("source"),
            ))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"window {name!r}: {exc}") from None
    return WindowConfig(tuple(windows))


def load_config(path: PathLike) -> WindowConfig:
    with open(path) as f:
        return parse_config(f.read())


def format_config(config: WindowConfig) -> str:
    lines = []
    for w in config.windows:
        lines.append(f"[window {w.name}]")
        lines.append(f"tau = {w.tau!r}")
        lines.append("params = " + ", ".join(str(int(p)) for p in w.params))
        lines.append(f"aggregation = {w.aggregation}")
        lines.append(f"gap_policy = {w.gap_policy}")
        lines.append(f"boxcar = {w.boxcar}")
        if w.source:
            lines.append(f"source = {w.source}")
        if w.model:
            lines.append(f"model = {w.model}")
        if w.fnn:
            f = w.fnn
            lines.append("fnn = yes")
            if f.param is not None:
                lines.append(f"fnn_param = {int(f.param)}")
            lines.append(f"fnn_d_max = {f.d_max}")
            lines.append(f"fnn_delay = {'auto' if f.delay is None else f.delay}")
            lines.append(f"r_tol = {f.r_tol!r}")
            lines.append(f"a_tol = {f.a_tol!r}")
            lines.append(f"threshold = {f.threshold!r}")
        lines.append("")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# replay
# --------------------------------------------------------------------------


def replay(source: Source, speed: float | str = "unlimited", clock=time.monotonic, sleep=time.sleep
           ) -> Iterator[CaptureRecord]:
    """Yield records in file order, paced so capture gaps shrink by ``speed``.

    ``"unlimited"`` (or ``None``) yields as fast as the consumer pulls.
    """
    pace = _check_speed(speed)
    reader = PcapReader(source)
    yield from _paced(reader, pace, clock, sleep)


def _check_speed(speed: float | str | None) -> float | None:
    if speed is None or speed == "unlimited":
        return None
    if isinstance(speed, str) or not speed > 0:
        raise ValueError(f"speed must be a positive number or 'unlimited', got {speed!r}")
    return float(speed)


def _paced(records: Iterable[CaptureRecord], speed: float | None, clock, sleep) -> Iterator[CaptureRecord]:
    base = None
    for rec in records:
        if speed is not None:
            if base is None:
                base = (clock(), rec.timestamp)
            due = base[0] + (rec.timestamp - base[1]) / speed
            wait = due - clock()
            if wait > 0:
                sleep(wait)
        yield rec


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


@dataclass
class WindowReport:
    spec: WindowSpec
    series: dict[ParamId, TimeSeries] = field(default_factory=dict)
    fnn: FnnCurve | None = None
    dimension: int | None = None
    novelty: np.ndarray | None = None
    errors: list[str] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.spec.name

    def summary(self) -> dict:
        out: dict = {"tau": self.spec.tau, "boxcar": self.spec.boxcar, "aggregation": self.spec.aggregation,
                     "source": self.spec.source, "errors": list(self.errors), "series": {}}
        for pid, s in sorted(self.series.items()):
            v = s.values
            out["series"][str(int(pid))] = {
                "samples": len(s),
                "start_time": s.start_time,
                "tau": s.tau,
                "leading_gap": s.leading_gap,
                "mean": float(v.mean()),
                "std": float(v.std()),
                "min": float(v.min()),
                "max": float(v.max()),
            }
        if self.fnn is not None:
            out["fnn"] = {
                "param": int(self.spec.fnn.param or self.spec.primary),
                "delay": self.fnn.T,
                "dimensions": self.fnn.dimensions,
                "fractions": self.fnn.fractions,
                "skipped": [d for d, _ in self.fnn.skipped],
                "estimate": self.dimension,
            }
        if self.novelty is not None:
            out["novelty"] = {
                "points": int(len(self.novelty)),
                "max": int(self.novelty.max()) if len(self.novelty) else 0,
                "nonzero": int(np.count_nonzero(self.novelty)),
            }
        return out


@dataclass
class MonitorReport:
    windows: list[WindowReport]
    alerts: list[Alert]
    counters: dict[str, int]
    t0: float | None = None
    t_end: float | None = None

    def window(self, name: str) -> WindowReport:
        for w in self.windows:
            if w.name == name:
                return w
        raise KeyError(name)

    def summary(self) -> dict:
        by_rule: dict[str, int] = {}
        for a in self.alerts:
            by_rule[a.rule] = by_rule.get(a.rule, 0) + 1
        return {
            "counters": dict(self.counters),
            "t0": self.t0,
            "t_end": self.t_end,
            "alerts": {"total": len(self.alerts), "by_rule": by_rule},
            "windows": {w.name: w.summary() for w in self.windows},
        }


def write_report(report: MonitorReport, directory: PathLike) -> Path:
    """Write ``summary.json``, ``alerts.tsv`` and one folder of CSVs per window."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "summary.json", "w") as f:
        json.dump(report.summary(), f, indent=2, sort_keys=True)
        f.write("\n")
    with open(root / "alerts.tsv", "w") as f:
        for a in report.alerts:
            f.write(a.line() + "\n")
    for w in report.windows:
        wdir = root / "windows" / w.name
        wdir.mkdir(parents=True, exist_ok=True)
        for pid, s in sorted(w.series.items()):
            write_series_csv(wdir / f"param_{int(pid):02d}.csv", s)
        if w.fnn is not None:
            with open(wdir / "fnn.csv", "w") as f:
                f.write("d,fraction,neighbors\n")
                for p in w.fnn.points:
                    f.write(f"{p.d},{p.fraction!r},{p.neighbors}\n")
        if w.novelty is not None:
            with open(wdir / "novelty.csv", "w") as f:
                f.write("index,score\n")
                for i, v in enumerate(w.novelty):
                    f.write(f"{i},{int(v)}\n")
    return root


# --------------------------------------------------------------------------
# pipeline
# --------------------------------------------------------------------------


class _Binner:
    """Sample buffers for one raw window."""

    def __init__(self, spec: WindowSpec):
        self.spec = spec
        self.wanted = frozenset(spec.params)
        self.times: dict[ParamId, list[float]] = {p: [] for p in spec.params}
        self.values: dict[ParamId, list[int]] = {p: [] for p in spec.params}

    def feed(self, samples) -> None:
        for s in samples:
            if s.param in self.wanted:
                self.times[s.param].append(s.time)
                self.values[s.param].append(s.value)


def _analyse(report: WindowReport, models: dict[str, OccupancyModel]) -> None:
    spec = report.spec
    if spec.fnn is not None:
        pid = spec.fnn.param or spec.primary
        s = report.series.get(pid)
        if s is None:
            report.errors.append(f"fnn: no series for parameter {int(pid)}")
        else:
            try:
                delay = spec.fnn.delay or autocorrelation_delay(s.values)
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    report.fnn = fnn_curve(s.values, spec.fnn.d_max, delay, spec.fnn.r_tol, spec.fnn.a_tol)
                for d, why in report.fnn.skipped:
                    report.errors.append(f"fnn: d={d} skipped: {why}")
                if report.fnn.points:
                    report.dimension = estimate_dimension(report.fnn, spec.fnn.threshold)
            except (InsufficientDataError, DegenerateSeriesError, ValueError) as exc:
                report.fnn = None
                report.errors.append(f"fnn: {exc}")
    if spec.model is not None:
        s = report.series.get(spec.primary)
        if s is None:
            report.errors.append(f"novelty: no series for parameter {int(spec.primary)}")
        else:
            try:
                report.novelty = score_series(models[spec.model], s.values)
            except (InsufficientDataError, ValueError) as exc:
                report.errors.append(f"novelty: {exc}")


def run_monitor(
    source: Source | Iterable[CaptureRecord],
    rules: Sequence[SignatureRule],
    config: WindowConfig,
    speed: float | str = "unlimited",
    link_type: int | None = None,
) -> MonitorReport:
    """Decode ``source`` once and run the rules and every window over it.

    ``source`` is a pcap path, bytes or stream, or an iterable of records
    (then ``link_type`` defaults to Ethernet).  Read errors are re-raised
    with the index of the packet being read attached as ``packet_index``.
    """
    models = {w.model: load_occupancy(w.model) for w in config.windows if w.model is not None}

    pace = _check_speed(speed)
    if isinstance(source, (str, bytes, bytearray, os.PathLike)) or hasattr(source, "read"):
        reader = PcapReader(source)
        link = reader.link_type
        records: Iterable[CaptureRecord] = reader
    else:
        link = LINKTYPE_ETHERNET if link_type is None else link_type
        records = source
    if link != LINKTYPE_ETHERNET:
        raise UnsupportedLinkTypeError(f"link type {link} is not Ethernet")
    if pace is not None:
        records = _paced(records, pace, time.monotonic, time.sleep)

    engine = RuleEngine(rules)
    binners = [_Binner(w) for w in config.windows if w.source is None]
    counters = {"packets_in": 0, "decoded": 0, "decode_errors": 0, "non_ip_skipped": 0, "bytes": 0}
    alerts: list[Alert] = []
    t0 = t_end = None

    index = 0
    it = iter(records)
    while True:
        try:
            rec = next(it)
        except StopIteration:
            break
        except CaptureError as exc:
            exc.packet_index = index
            raise
        index += 1
        counters["packets_in"] += 1
        counters["bytes"] += rec.captured_length
        try:
            pkt = decode_packet(rec, link)
        except DecodeError:
            counters["decode_errors"] += 1
            continue
        t = pkt.timestamp
        if t0 is None:
            t0 = t_end = t
        t0, t_end = min(t0, t), max(t_end, t)
        alerts.extend(engine.process(pkt))
        if pkt.ip is None:
            counters["non_ip_skipped"] += 1
            continue
        counters["decoded"] += 1
        samples = extract_params(pkt)
        for b in binners:
            b.feed(samples)

    reports: dict[str, WindowReport] = {}
    for spec in config.windows:
        rep = WindowReport(spec)
        reports[spec.name] = rep
        if spec.source is None:
            b = next(b for b in binners if b.spec is spec)
            if t0 is None:
                rep.errors.append("no packets")
                continue
            n_bins = int(math.floor((t_end - t0) / spec.tau)) + 1
            for pid in spec.params:
                if not b.times[pid]:
                    rep.errors.append(f"no samples for parameter {int(pid)}")
                    continue
                s = bin_values(b.times[pid], b.values[pid], spec.tau, spec.aggregation, spec.gap_policy, t0, n_bins)
                rep.series[pid] = s
        else:
            upstream = reports[spec.source]
            factor = int(round(spec.tau / upstream.spec.tau))
            for pid in spec.params:
                s = upstream.series.get(pid)
                if s is None:
                    rep.errors.append(f"no upstream series for parameter {int(pid)}")
                    continue
                rep.series[pid] = downsample(s, factor)
        if spec.boxcar > 1:
            for pid, s in list(rep.series.items()):
                if len(s) < spec.boxcar:
                    rep.errors.append(f"boxcar {spec.boxcar} exceeds {len(s)} samples of parameter {int(pid)}")
                    del rep.series[pid]
                else:
                    rep.series[pid] = boxcar_average(s, spec.boxcar)
        _analyse(rep, models)

    return MonitorReport(
        windows=[reports[w.name] for w in config.windows],
        alerts=sort_alerts(alerts),
        counters=counters,
        t0=t0,
        t_end=t_end,
    )
