"""Regenerate the reference capture with dpkt and freeze dpkt's own dump of it.

Run from the repository root: python3 tests/data/make_fixtures.py
"""

import json
import socket
from pathlib import Path

import dpkt

HERE = Path(__file__).parent


def eth(ip_pkt, ethertype=dpkt.ethernet.ETH_TYPE_IP):
    return dpkt.ethernet.Ethernet(dst=b"\x00\x11\x22\x33\x44\x55", src=b"\x66\x77\x88\x99\xaa\xbb",
                                  type=ethertype, data=ip_pkt)


def ip(src, dst, proto, payload, **kw):
    pkt = dpkt.ip.IP(src=socket.inet_aton(src), dst=socket.inet_aton(dst), p=proto, data=payload, **kw)
    pkt.len = len(bytes(pkt))
    return pkt


def frames():
    tcp = dpkt.tcp.TCP(sport=1234, dport=80, seq=1000, ack=0, flags=dpkt.tcp.TH_SYN, win=8192)
    tcp.off = 5
    udp = dpkt.udp.UDP(sport=5353, dport=53, data=b"\x12\x34\x01\x00" + b"q" * 20)
    udp.ulen = 8 + len(udp.data)
    icmp = dpkt.icmp.ICMP(type=8, code=0, data=dpkt.icmp.ICMP.Echo(id=7, seq=1, data=b"p" * 32))
    opt_ip = ip("192.168.1.20", "192.168.1.1", dpkt.ip.IP_PROTO_ICMP, icmp,
                opts=bytes([68, 12, 5, 0]) + b"\x00" * 8)
    opt_ip.hl = 8
    opt_ip.len = len(bytes(opt_ip))
    return [
        (1_600_000_000.000001, eth(ip("10.0.0.1", "10.0.0.2", dpkt.ip.IP_PROTO_TCP, tcp, df=1))),
        (1_600_000_000.250000, eth(ip("10.0.0.3", "8.8.8.8", dpkt.ip.IP_PROTO_UDP, udp))),
        (1_600_000_001.500000, eth(opt_ip)),
    ]


def dump(path):
    rows = []
    with open(path, "rb") as f:
        for ts, buf in dpkt.pcap.Reader(f):
            e = dpkt.ethernet.Ethernet(buf)
            p = e.data
            row = {
                "ts_usec": round(ts * 1e6),
                "caplen": len(buf),
                "ethertype": e.type,
                "src": socket.inet_ntoa(p.src),
                "dst": socket.inet_ntoa(p.dst),
                "len": p.len,
                "proto": p.p,
                "df": bool(p.df),
                "mf": bool(p.mf),
                "offset": p.offset,
                "opts": p.opts.hex(),
            }
            t = p.data
            if isinstance(t, dpkt.tcp.TCP):
                row.update(sport=t.sport, dport=t.dport, seq=t.seq, ack=t.ack, flags=t.flags)
            elif isinstance(t, dpkt.udp.UDP):
                row.update(sport=t.sport, dport=t.dport, ulen=t.ulen)
            elif isinstance(t, dpkt.icmp.ICMP):
                row.update(type=t.type, code=t.code)
            rows.append(row)
    return rows


def main():
    path = HERE / "three_packets.pcap"
    with open(path, "wb") as f:
        w = dpkt.pcap.Writer(f)
        for ts, frame in frames():
            w.writepkt(bytes(frame), ts=ts)
    (HERE / "three_packets.json").write_text(json.dumps(dump(path), indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
