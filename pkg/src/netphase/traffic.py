"""Synthetic captures: benign background, one flow per builtin attack, and a
long Lorenz-modulated multi-protocol trace.

All generators are seeded and return records sorted by time, ready for
:func:`netphase.capture.write_capture`.  Background traffic is shaped to stay
clear of every builtin signature: hosts never end in ``.255``, ephemeral
ports never coincide with the server port, TCP carries DF and a non-zero
acknowledgement number after the SYN, and SYN/RST/pure-ACK rates stay far
below the windowed thresholds.
"""

from __future__ import annotations

import struct
from typing import Callable

import numpy as np

from .capture import PROTO_ICMP, PROTO_UDP, CaptureRecord
from .craft import icmp_frame, icmp_segment, ipv4_frame, tcp_flags, tcp_frame, udp_frame, udp_segment
from .dynamics.generators import lorenz

SYN, ACK, PSH, FIN, RST, URG = (tcp_flags(n) for n in ("syn", "ack", "psh", "fin", "rst", "urg"))

CLIENT_NET = "10.0.1."
SERVER_NET = "10.0.2."
BROADCAST = "10.0.3.255"
SERVICES = (22, 25, 80, 443, 8080)

Frames = list[tuple[float, bytes]]


def _host(net: str, rng: np.random.Generator) -> str:
    return net + str(int(rng.integers(2, 250)))


def _eph(rng: np.random.Generator) -> int:
    return int(rng.integers(20000, 60000))


def _isn(rng: np.random.Generator) -> int:
    return int(rng.integers(1, 2**31))


def to_records(frames: Frames) -> list[CaptureRecord]:
    frames = sorted(frames, key=lambda f: f[0])
    return [CaptureRecord.from_frame(t, frame) for t, frame in frames]


# --------------------------------------------------------------------------
# benign conversations
# --------------------------------------------------------------------------


def tcp_session(t: float, client: str, server: str, sport: int, dport: int, rng: np.random.Generator,
                exchanges: int = 2, gap: float = 0.02) -> Frames:
    """Handshake, request/response exchanges with delayed ACKs, and a FIN teardown."""
    c_seq, s_seq = _isn(rng), _isn(rng)
    out: Frames = []

    def c2s(flags, payload=b""):
        nonlocal t, c_seq
        out.append((t, tcp_frame(client, server, sport, dport, flags, seq=c_seq, ack=s_seq if flags != SYN else 0,
                                 payload=payload, df=True)))
        c_seq += len(payload) + (1 if flags & (SYN | FIN) else 0)
        t += gap

    def s2c(flags, payload=b""):
        nonlocal t, s_seq
        out.append((t, tcp_frame(server, client, dport, sport, flags, seq=s_seq, ack=c_seq, payload=payload, df=True)))
        s_seq += len(payload) + (1 if flags & (SYN | FIN) else 0)
        t += gap

    c2s(SYN)
    s2c(SYN | ACK)
    c2s(ACK)
    for _ in range(exchanges):
        c2s(PSH | ACK, b"q" * int(rng.integers(20, 300)))
        s2c(PSH | ACK, b"r" * int(rng.integers(100, 1400)))
        c2s(ACK)
    c2s(FIN | ACK)
    s2c(FIN | ACK)
    c2s(ACK)
    return out


def dns_exchange(t: float, client: str, server: str, rng: np.random.Generator) -> Frames:
    sport = _eph(rng)
    q = b"\x12\x34\x01\x00" + b"x" * int(rng.integers(12, 40))
    return [
        (t, udp_frame(client, server, sport, 53, q)),
        (t + 0.005, udp_frame(server, client, 53, sport, q + b"a" * int(rng.integers(16, 200)))),
    ]


def ping_exchange(t: float, client: str, server: str, rng: np.random.Generator, seqno: int = 1) -> Frames:
    ident = int(rng.integers(1, 65535))
    data = b"p" * 56
    return [
        (t, icmp_frame(client, server, 8, 0, ident=ident, seqno=seqno, payload=data)),
        (t + 0.003, icmp_frame(server, client, 0, 0, ident=ident, seqno=seqno, payload=data)),
    ]


def benign_frames(n_packets: int = 1200, start: float = 1_000_000.0, duration: float = 120.0, seed: int = 0) -> Frames:
    """Mixed TCP/DNS/ICMP conversations with roughly ``n_packets`` frames (never fewer)."""
    rng = np.random.default_rng(seed)
    out: Frames = []
    while len(out) < n_packets:
        t = start + float(rng.uniform(0, duration))
        client, server = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
        kind = rng.random()
        if kind < 0.7:
            out += tcp_session(t, client, server, _eph(rng), int(rng.choice(SERVICES)), rng,
                               exchanges=int(rng.integers(1, 5)))
        elif kind < 0.9:
            out += dns_exchange(t, client, server, rng)
        else:
            out += ping_exchange(t, client, server, rng)
    return out


def benign_capture(n_packets: int = 1200, start: float = 1_000_000.0, duration: float = 120.0,
                   seed: int = 0) -> list[CaptureRecord]:
    return to_records(benign_frames(n_packets, start, duration, seed))


# --------------------------------------------------------------------------
# attack flows
# --------------------------------------------------------------------------


def land(t: float, rng: np.random.Generator) -> Frames:
    victim = _host(SERVER_NET, rng)
    return [(t, tcp_frame(victim, victim, 139, 139, SYN, seq=_isn(rng)))]


def smurf(t: float, rng: np.random.Generator) -> Frames:
    victim = _host(SERVER_NET, rng)
    return [(t, icmp_frame(victim, BROADCAST, 8, 0, ident=1, seqno=1, payload=b"s" * 56))]


def fraggle(t: float, rng: np.random.Generator) -> Frames:
    victim = _host(SERVER_NET, rng)
    return [(t, udp_frame(victim, BROADCAST, _eph(rng), 7, b"f" * 32))]


def pingpong(t: float, rng: np.random.Generator) -> Frames:
    a, b = _host(SERVER_NET, rng), _host(CLIENT_NET, rng)
    return [(t, udp_frame(a, b, 19, 7, b"c" * 64))]


def ping_of_death(t: float, rng: np.random.Generator) -> Frames:
    """An oversized echo request split into fragments; only the last one ends past 65535 bytes."""
    src, dst = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    body = icmp_segment(8, 0, struct.pack("!HH", 7, 1), b"\x00" * 65600)
    chunk = 1480
    out: Frames = []
    ident = int(rng.integers(1, 65535))
    for k, off in enumerate(range(0, len(body), chunk)):
        piece = body[off:off + chunk]
        last = off + chunk >= len(body)
        out.append((t + 0.0005 * k, ipv4_frame(src, dst, PROTO_ICMP, piece, mf=not last, offset=off // 8, ident=ident)))
    return out


def teardrop(t: float, rng: np.random.Generator) -> Frames:
    """Two UDP fragments, the second starting inside the first."""
    src, dst = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    seg = udp_segment(src, dst, _eph(rng), 53, b"t" * 28)
    ident = int(rng.integers(1, 65535))
    return [
        (t, ipv4_frame(src, dst, PROTO_UDP, seg, mf=True, ident=ident)),
        (t + 0.001, ipv4_frame(src, dst, PROTO_UDP, b"t" * 16, offset=3, ident=ident)),
    ]


def bonk(t: float, rng: np.random.Generator) -> Frames:
    """Fragment pair whose trailing piece also claims don't-fragment."""
    src, dst = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    seg = udp_segment(src, dst, _eph(rng), 53, b"b" * 32)
    ident = int(rng.integers(1, 65535))
    return [
        (t, ipv4_frame(src, dst, PROTO_UDP, seg, mf=True, ident=ident)),
        (t + 0.001, ipv4_frame(src, dst, PROTO_UDP, b"b" * 40, df=True, offset=20, ident=ident)),
    ]


def brkill(t: float, rng: np.random.Generator, n: int = 100, span: float = 0.5) -> Frames:
    victim, attacker = _host(SERVER_NET, rng), _host(CLIENT_NET, rng)
    sport, dport = _eph(rng), 139
    base = _isn(rng)
    return [(t + span * k / n, tcp_frame(attacker, victim, sport, dport, RST, seq=base + 64 * k, df=True))
            for k in range(n)]


def syn_flood(t: float, rng: np.random.Generator, n: int = 500, span: float = 5.0) -> Frames:
    victim = _host(SERVER_NET, rng)
    out: Frames = []
    for k in range(n):
        src = f"172.16.{int(rng.integers(0, 256))}.{int(rng.integers(1, 255))}"
        out.append((t + span * k / n, tcp_frame(src, victim, _eph(rng), 80, SYN, seq=_isn(rng))))
    return out


def session_hijack(t: float, rng: np.random.Generator, n: int = 450, span: float = 1.0) -> Frames:
    """ACK storm between two desynchronised endpoints."""
    a, b = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    sport = _eph(rng)
    sa, sb = _isn(rng), _isn(rng)
    out: Frames = []
    for k in range(n):
        ts = t + span * k / n
        if k % 2:
            out.append((ts, tcp_frame(b, a, 23, sport, ACK, seq=sb, ack=sa + 999, df=True)))
        else:
            out.append((ts, tcp_frame(a, b, sport, 23, ACK, seq=sa, ack=sb + 999, df=True)))
    return out


def winnuke(t: float, rng: np.random.Generator) -> Frames:
    src, dst = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    return [(t, tcp_frame(src, dst, _eph(rng), 139, URG | PSH | ACK, seq=_isn(rng), ack=_isn(rng),
                          payload=b"nuke", urgent_pointer=4, df=True))]


def unaligned_timestamp(t: float, rng: np.random.Generator) -> Frames:
    """Timestamp option whose declared length leaves the option area misaligned."""
    src, dst = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    option = bytes([68, 10, 5, 0]) + b"\x00" * 6
    return [(t, icmp_frame(src, dst, 8, 0, ident=3, seqno=1, payload=b"o" * 32, options=option))]


def oob_data_barf(t: float, rng: np.random.Generator) -> Frames:
    src, dst = _host(SERVER_NET, rng), _host(CLIENT_NET, rng)
    return [(t, tcp_frame(src, dst, 139, _eph(rng), PSH | ACK, seq=_isn(rng), ack=_isn(rng),
                          payload=b"x" * 10, urgent_pointer=3, df=True))]


def syn_fin_scan(t: float, rng: np.random.Generator) -> Frames:
    src, dst = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    return [(t, tcp_frame(src, dst, _eph(rng), 22, SYN | FIN, seq=_isn(rng)))]


def ack_scan(t: float, rng: np.random.Generator, port: int = 80) -> Frames:
    src, dst = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
    return [(t, tcp_frame(src, dst, port, port, ACK, seq=_isn(rng), ack=_isn(rng)))]


ATTACKS: dict[str, Callable[[float, np.random.Generator], Frames]] = {
    "land": land,
    "smurf": smurf,
    "fraggle": fraggle,
    "pingpong": pingpong,
    "ping-of-death": ping_of_death,
    "ip-fragment-overlap": teardrop,
    "brkill": brkill,
    "syn-flood": syn_flood,
    "tcp-session-hijacking": session_hijack,
    "out-of-band-bug": winnuke,
    "ip-unaligned-timestamp": unaligned_timestamp,
    "bonk": bonk,
    "oob-data-barf": oob_data_barf,
    "vulnerability-scan": syn_fin_scan,
    "ack-scan": ack_scan,
}


def attack_capture(name: str, n_benign: int = 1200, start: float = 1_000_000.0, duration: float = 120.0,
                   seed: int = 0) -> list[CaptureRecord]:
    """Benign background with one flow of the named attack injected mid-trace."""
    frames = benign_frames(n_benign, start, duration, seed)
    rng = np.random.default_rng(seed + 7919)
    frames += ATTACKS[name](start + duration / 2, rng)
    return to_records(frames)


# --------------------------------------------------------------------------
# long modulated trace
# --------------------------------------------------------------------------


def lorenz_capture(duration: float = 2400.0, mean_rate: float = 30.0, start: float = 1_000_000.0,
                   seed: int = 0, state_period: float = 1.0) -> list[CaptureRecord]:
    """Multi-protocol traffic whose rate, protocol mix and packet sizes follow a Lorenz state.

    One Lorenz sample is consumed every ``state_period`` seconds and linearly
    interpolated in between.  ``z`` sets the packet rate, ``y`` the TCP/UDP/ICMP
    mix and ``x`` the payload size.
    """
    rng = np.random.default_rng(seed)
    n_states = int(np.ceil(duration / state_period)) + 2
    xyz = lorenz(n_states)
    grid = np.arange(n_states) * state_period
    x, y, z = (xyz[:, i] for i in range(3))

    rate_max = mean_rate * 2.0
    # thinning: candidate arrivals at rate_max, kept with probability rate(t)/rate_max
    n_cand = rng.poisson(rate_max * duration)
    cand = np.sort(rng.uniform(0, duration, n_cand))
    zi = np.interp(cand, grid, z)
    rate = mean_rate * (zi / z.mean())
    keep = rng.random(n_cand) < np.clip(rate / rate_max, 0, 1)
    times = cand[keep]
    xi = np.interp(times, grid, x)
    yi = np.interp(times, grid, y)
    p_tcp = 1 / (1 + np.exp(-yi / 8))
    u = rng.random(len(times))
    size = np.clip(600 + 25 * xi + rng.normal(0, 20, len(times)), 0, 1400).astype(int)

    frames: Frames = []
    for t, pt, ui, n in zip(times, p_tcp, u, size):
        ts = start + float(t)
        c, s = _host(CLIENT_NET, rng), _host(SERVER_NET, rng)
        if ui < pt:
            frames.append((ts, tcp_frame(c, s, _eph(rng), 443, PSH | ACK, seq=_isn(rng), ack=_isn(rng),
                                         payload=bytes(int(n)), df=True)))
        elif ui < pt + (1 - pt) * 0.8:
            frames.append((ts, udp_frame(c, s, _eph(rng), 53, bytes(int(n) // 4))))
        else:
            frames.append((ts, icmp_frame(c, s, 8, 0, ident=1, seqno=1, payload=bytes(int(n) // 8))))
    return to_records(frames)
