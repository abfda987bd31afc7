import json

import numpy as np
import pytest

from netphase.capture import CaptureRecord, TruncatedFileError, UnsupportedLinkTypeError, write_capture
from netphase.craft import arp_frame, tcp_frame, udp_frame
from netphase.monitor import (
    ConfigError,
    FnnSettings,
    WindowConfig,
    WindowSpec,
    format_config,
    parse_config,
    replay,
    run_monitor,
    write_report,
)
from netphase.params import ParamId
from netphase.rules import default_rules
from netphase.series import bin_values
from netphase.traffic import benign_frames, land, to_records

from conftest import pcap_bytes

T0 = 1_000_000.0


@pytest.fixture(scope="module")
def ten_minutes():
    """Ten minutes of benign traffic with a land packet, covering [T0, T0 + 599.9]."""
    frames = benign_frames(6000, start=T0 + 1.0, duration=598.0, seed=4)
    frames.append((T0, udp_frame("10.0.1.5", "10.0.2.5", 5000, 53, b"x")))
    frames.append((T0 + 599.9, udp_frame("10.0.1.5", "10.0.2.5", 5000, 53, b"y")))
    frames += land(T0 + 300.0, np.random.default_rng(1))
    return to_records(frames)


def two_windows(**a_kw):
    return WindowConfig((
        WindowSpec("fast", 5.0, params=(ParamId.IP_PROTO, ParamId.IP_LENGTH), **a_kw),
        WindowSpec("slow", 60.0, params=(ParamId.IP_PROTO, ParamId.IP_LENGTH)),
    ))


def test_two_window_sample_counts(ten_minutes):
    rep = run_monitor(ten_minutes, default_rules(), two_windows())
    assert [w.name for w in rep.windows] == ["fast", "slow"]
    assert len(rep.window("fast").series[ParamId.IP_LENGTH]) == 120
    assert len(rep.window("slow").series[ParamId.IP_LENGTH]) == 10
    assert rep.window("slow").series[ParamId.IP_LENGTH].start_time == T0


def test_land_alert_same_across_configs(ten_minutes):
    one = run_monitor(ten_minutes, default_rules(), WindowConfig((WindowSpec("w", 1.0),)))
    two = run_monitor(ten_minutes, default_rules(), two_windows(boxcar=3))
    assert [a.rule for a in one.alerts] == ["land"]
    assert one.alerts == two.alerts
    assert one.alerts[0].time == T0 + 300.0


def _boxcar(x, w):
    return np.array([x[i:i + w].mean() for i in range(len(x) - w + 1)])


def test_chained_window_is_downsampled_boxcar(ten_minutes):
    cfg = WindowConfig((
        WindowSpec("a", 5.0, params=(ParamId.IP_LENGTH,), aggregation="mean", boxcar=12),
        WindowSpec("b", 60.0, params=(ParamId.IP_LENGTH,), source="a"),
        WindowSpec("raw", 2.5, params=(ParamId.IP_LENGTH,), aggregation="mean"),
    ))
    rep = run_monitor(ten_minutes, [], cfg)
    # offline path: bin by hand at 5 s, average, keep every 12th
    times = [r.timestamp for r in ten_minutes]
    from netphase.capture import decode_packet
    lens = [decode_packet(r).ip.total_length for r in ten_minutes]
    raw = bin_values(times, lens, 5.0, "mean", "hold_last", T0, 120).values
    expected = _boxcar(raw, 12)[::12]
    b = rep.window("b").series[ParamId.IP_LENGTH]
    np.testing.assert_allclose(b.values, expected, rtol=1e-12)
    assert b.tau == 60.0
    assert b.start_time == pytest.approx(T0 + 11 * 5.0 / 2)


def _outputs(rep, name):
    w = rep.window(name)
    return w.summary(), {p: s.values.tolist() for p, s in w.series.items()}


def test_window_isolation(ten_minutes):
    cfg = WindowConfig((
        WindowSpec("a", 5.0, params=(ParamId.IP_LENGTH,), boxcar=4, fnn=FnnSettings(d_max=4)),
        WindowSpec("b", 20.0, params=(ParamId.IP_LENGTH, ParamId.IP_PROTO), aggregation="mode"),
        WindowSpec("c", 60.0, params=(ParamId.IP_LENGTH,), aggregation="count"),
    ))
    full = run_monitor(ten_minutes, default_rules(), cfg)
    for drop in cfg.names:
        part = run_monitor(ten_minutes, default_rules(), cfg.without(drop))
        for keep in cfg.names:
            if keep != drop:
                assert _outputs(part, keep) == _outputs(full, keep)
        assert part.alerts == full.alerts


def test_report_is_deterministic(tmp_path, ten_minutes):
    blob = pcap_bytes(ten_minutes)
    cfg = two_windows(fnn=FnnSettings(d_max=4))
    trees = []
    for k in range(2):
        root = write_report(run_monitor(blob, default_rules(), cfg), tmp_path / str(k))
        trees.append({p.relative_to(root): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()})
    assert trees[0] == trees[1]
    assert {"summary.json", "alerts.tsv"} <= {str(p) for p in trees[0]}
    summary = json.loads(trees[0][next(p for p in trees[0] if str(p) == "summary.json")])
    assert summary["alerts"]["by_rule"] == {"land": 1}


def test_no_loss_counters():
    recs = to_records(benign_frames(200, start=T0, duration=20.0, seed=2))
    recs.append(CaptureRecord.from_frame(T0 + 20.5, arp_frame("10.0.1.1", "10.0.1.2")))
    recs.append(CaptureRecord.from_frame(T0 + 20.6, tcp_frame("10.0.1.1", "10.0.2.2", 1, 2, 2)[:40]))
    rep = run_monitor(recs, default_rules(), WindowConfig((WindowSpec("w", 1.0),)))
    c = rep.counters
    assert c["packets_in"] == len(recs)
    assert c["packets_in"] == c["decoded"] + c["decode_errors"] + c["non_ip_skipped"]
    assert c["non_ip_skipped"] == 1 and c["decode_errors"] == 1
    assert c["bytes"] == sum(r.captured_length for r in recs)


def test_capture_error_carries_packet_index():
    recs = to_records(benign_frames(30, start=T0, duration=3.0))
    with pytest.raises(TruncatedFileError) as info:
        run_monitor(pcap_bytes(recs)[:-5], [], WindowConfig((WindowSpec("w", 1.0),)))
    assert info.value.packet_index == len(recs) - 1


def test_non_ethernet_rejected():
    recs = to_records(benign_frames(5, start=T0, duration=1.0))
    with pytest.raises(UnsupportedLinkTypeError):
        run_monitor(pcap_bytes(recs, link_type=101), [], WindowConfig((WindowSpec("w", 1.0),)))


def test_fnn_failure_is_recorded_not_raised():
    recs = to_records(benign_frames(40, start=T0, duration=10.0))
    cfg = WindowConfig((WindowSpec("w", 1.0, params=(ParamId.IP_LENGTH,), fnn=FnnSettings(d_max=10)),))
    rep = run_monitor(recs, [], cfg)
    w = rep.window("w")
    assert w.dimension is None and w.errors
    assert all(e.startswith("fnn:") for e in w.errors)
    assert len(w.series[ParamId.IP_LENGTH]) == int(rep.t_end - rep.t0) + 1


def test_empty_capture():
    rep = run_monitor(pcap_bytes([]), [], WindowConfig((WindowSpec("w", 1.0),)))
    assert rep.counters["packets_in"] == 0 and rep.window("w").errors == ["no packets"]


# ---------------------------------------------------------------- config

CONFIG_TEXT = """
[window fast]
tau = 5
params = 18, 3
aggregation = mean
boxcar = 12
fnn = yes
fnn_delay = 3

[window slow]
tau = 60
params = 3
source = fast
"""


def test_parse_config():
    cfg = parse_config(CONFIG_TEXT)
    fast, slow = cfg.windows
    assert fast.params == (ParamId.IP_PROTO, ParamId.IP_LENGTH) and fast.boxcar == 12
    assert fast.fnn == FnnSettings(delay=3)
    assert slow.source == "fast" and slow.aggregation == "last"
    assert parse_config(format_config(cfg)) == cfg


@pytest.mark.parametrize("text", [
    "",
    "[window a]\nparams = 3\n",
    "[window a]\ntau = 5\n[window b]\ntau = 5\n",
    "[window a]\ntau = -1\n",
    "[window a]\ntau = 5\naggregation = median\n",
    "[window a]\ntau = 5\nparams = 99\n",
    "[window a]\ntau = 5\nboxcar = 0\n",
    "[window a]\ntau = 5\n[window b]\ntau = 7\nsource = a\n",
    "[window a]\ntau = 5\nparams = 3\n[window b]\ntau = 10\nparams = 4\nsource = a\n",
    "[window a]\ntau = 10\n[window b]\ntau = 5\nsource = a\n",
    "[stuff]\ntau = 5\n",
    "[window a]\ntau = five\n",
    "[window a]\ntau = 5\nfnn = yes\nfnn_param = 4\n",
])
def test_bad_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# ---------------------------------------------------------------- replay


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def __call__(self):
        return self.now

    def sleep(self, dt):
        self.sleeps.append(dt)
        self.now += dt


def _two_packets(gap=1.0):
    return pcap_bytes([CaptureRecord.from_frame(T0, udp_frame("1.1.1.1", "2.2.2.2", 1, 2)),
                       CaptureRecord.from_frame(T0 + gap, udp_frame("1.1.1.1", "2.2.2.2", 1, 3))])


def test_replay_speed_two_fake_clock():
    clock = FakeClock()
    seen = []
    for rec in replay(_two_packets(), 2, clock=clock, sleep=clock.sleep):
        seen.append(clock.now)
    assert seen[1] - seen[0] == pytest.approx(0.5, rel=0.1)


def test_replay_speed_two_wall_clock():
    import time
    seen = [time.monotonic() for _ in replay(_two_packets(), 2)]
    assert seen[1] - seen[0] == pytest.approx(0.5, rel=0.1)


def test_replay_unlimited_preserves_order():
    recs = [CaptureRecord.from_frame(T0 + (7 * i) % 5, udp_frame("1.1.1.1", "2.2.2.2", 1, 100 + i))
            for i in range(20)]
    clock = FakeClock()
    out = list(replay(pcap_bytes(recs), "unlimited", clock=clock, sleep=clock.sleep))
    assert [r.payload for r in out] == [r.payload for r in recs]
    assert clock.sleeps == []


@pytest.mark.parametrize("speed", [0, -1, "fast"])
def test_replay_bad_speed(speed):
    with pytest.raises(ValueError):
        list(replay(_two_packets(), speed))


def test_monitor_bad_speed():
    with pytest.raises(ValueError):
        run_monitor(_two_packets(), [], WindowConfig((WindowSpec("w", 1.0),)), speed=0)
