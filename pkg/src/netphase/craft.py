"""Build well-formed Ethernet frames from header fields.

Lengths and checksums are filled in unless given explicitly, so crafted
attack packets can still carry deliberately inconsistent values.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import replace

from .capture import (
    ETHERTYPE_ARP,
    ETHERTYPE_IPV4,
    PROTO_ICMP,
    PROTO_TCP,
    PROTO_UDP,
    EthernetHeader,
    ICMPHeader,
    IPv4Header,
    TCPHeader,
    UDPHeader,
)

DEFAULT_SRC_MAC = bytes.fromhex("020000000001")
DEFAULT_DST_MAC = bytes.fromhex("020000000002")

FLAG_BITS = {"fin": 0x01, "syn": 0x02, "rst": 0x04, "psh": 0x08, "ack": 0x10, "urg": 0x20}


def ip_to_int(addr: str | int) -> int:
    return int(ipaddress.IPv4Address(addr))


def int_to_ip(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


def tcp_flags(*names: str) -> int:
    """``tcp_flags("syn", "ack") == 0x12``."""
    bits = 0
    for n in names:
        bits |= FLAG_BITS[n.lower()]
    return bits


def internet_checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _pseudo_header(ip: IPv4Header, seg_len: int) -> bytes:
    return struct.pack("!IIBBH", ip.src_addr, ip.dst_addr, 0, ip.protocol_id, seg_len)


def ipv4_frame(
    src: str | int,
    dst: str | int,
    protocol: int,
    segment: bytes,
    *,
    df: bool = False,
    mf: bool = False,
    offset: int = 0,
    options: bytes = b"",
    ttl: int = 64,
    ident: int = 0,
    total_length: int | None = None,
    src_mac: bytes = DEFAULT_SRC_MAC,
    dst_mac: bytes = DEFAULT_DST_MAC,
) -> bytes:
    """Wrap an already-encoded transport segment in IPv4 and Ethernet headers."""
    if len(options) % 4:
        options = options + b"\x00" * (4 - len(options) % 4)
    ip = IPv4Header(
        src_addr=ip_to_int(src),
        dst_addr=ip_to_int(dst),
        total_length=0,
        protocol_id=protocol,
        df_flag=df,
        mf_flag=mf,
        fragment_offset=offset,
        options_bytes=options,
        ttl=ttl,
        identification=ident,
    )
    length = ip.header_length + len(segment) if total_length is None else total_length
    ip = replace(ip, total_length=length)
    ip = replace(ip, checksum=internet_checksum(ip.pack()))
    eth = EthernetHeader(dst_mac, src_mac, ETHERTYPE_IPV4)
    return eth.pack() + ip.pack() + segment


def tcp_segment(
    src: str | int,
    dst: str | int,
    sport: int,
    dport: int,
    flags: int,
    *,
    seq: int = 0,
    ack: int = 0,
    payload: bytes = b"",
    window: int = 65535,
    urgent_pointer: int = 0,
    options: bytes = b"",
) -> bytes:
    tcp = TCPHeader(sport, dport, seq, ack, flags, window, 0, urgent_pointer, options)
    raw = tcp.pack() + payload
    pseudo_ip = IPv4Header(ip_to_int(src), ip_to_int(dst), 0, PROTO_TCP)
    csum = internet_checksum(_pseudo_header(pseudo_ip, len(raw)) + raw)
    return replace(tcp, checksum=csum).pack() + payload


def tcp_frame(src, dst, sport, dport, flags, *, seq=0, ack=0, payload=b"", urgent_pointer=0, window=65535, **ip_kw) -> bytes:
    seg = tcp_segment(src, dst, sport, dport, flags, seq=seq, ack=ack, payload=payload,
                      urgent_pointer=urgent_pointer, window=window)
    return ipv4_frame(src, dst, PROTO_TCP, seg, **ip_kw)


def udp_segment(src, dst, sport: int, dport: int, payload: bytes = b"") -> bytes:
    udp = UDPHeader(sport, dport, 8 + len(payload), 0)
    pseudo_ip = IPv4Header(ip_to_int(src), ip_to_int(dst), 0, PROTO_UDP)
    csum = internet_checksum(_pseudo_header(pseudo_ip, udp.length) + udp.pack() + payload) or 0xFFFF
    return replace(udp, checksum=csum).pack() + payload


def udp_frame(src, dst, sport, dport, payload=b"", **ip_kw) -> bytes:
    return ipv4_frame(src, dst, PROTO_UDP, udp_segment(src, dst, sport, dport, payload), **ip_kw)


def icmp_segment(type_: int, code: int, rest: bytes = b"\x00\x00\x00\x00", payload: bytes = b"") -> bytes:
    hdr = ICMPHeader(type_, code, 0, rest)
    csum = internet_checksum(hdr.pack() + payload)
    return replace(hdr, checksum=csum).pack() + payload


def icmp_frame(src, dst, type_, code, *, ident=0, seqno=0, payload=b"", **ip_kw) -> bytes:
    seg = icmp_segment(type_, code, struct.pack("!HH", ident, seqno), payload)
    return ipv4_frame(src, dst, PROTO_ICMP, seg, **ip_kw)


def arp_frame(sender: str, target: str, src_mac: bytes = DEFAULT_SRC_MAC) -> bytes:
    eth = EthernetHeader(b"\xff" * 6, src_mac, ETHERTYPE_ARP)
    body = struct.pack("!HHBBH6sI6sI", 1, ETHERTYPE_IPV4, 6, 4, 1, src_mac, ip_to_int(sender), b"\x00" * 6, ip_to_int(target))
    return eth.pack() + body
