"""Static header parameters as timestamped numeric samples.

Ids 1-17 follow the table of parameters used by intrusion signatures; id 18
is the IP protocol-type field, whose time series is the usual starting point
for phase-space reconstruction.  Routing-mutable fields (MAC addresses, TTL,
checksums) are deliberately absent.
"""

from __future__ import annotations

import csv
import enum
import os
from typing import Iterable, NamedTuple, TextIO, Union

from .capture import DecodedPacket


class ParamId(enum.IntEnum):
    IP_DST = 1
    IP_SRC = 2
    IP_LENGTH = 3
    IP_MF = 4
    IP_DF = 5
    IP_OPTIONS = 6
    TCP_SPORT = 7
    TCP_DPORT = 8
    TCP_URG = 9
    TCP_RST = 10
    TCP_ACK = 11
    TCP_SYN = 12
    TCP_FIN = 13
    UDP_DPORT = 14
    UDP_SPORT = 15
    ICMP_TYPE = 16
    ICMP_CODE = 17
    IP_PROTO = 18


class CatalogEntry(NamedTuple):
    id: ParamId
    protocol: str
    name: str
    field: str  # rule-language field name
    width: int  # bit width of the numeric value


_CATALOG = (
    CatalogEntry(ParamId.IP_DST, "IP", "Destination IP Address", "ip.dst", 32),
    CatalogEntry(ParamId.IP_SRC, "IP", "Source IP Address", "ip.src", 32),
    CatalogEntry(ParamId.IP_LENGTH, "IP", "Length", "ip.len", 16),
    CatalogEntry(ParamId.IP_MF, "IP", "More Fragment Flag", "ip.mf", 1),
    CatalogEntry(ParamId.IP_DF, "IP", "Don't Fragment Flag", "ip.df", 1),
    CatalogEntry(ParamId.IP_OPTIONS, "IP", "Options", "ip.options_len", 6),
    CatalogEntry(ParamId.TCP_SPORT, "TCP", "Source Port", "tcp.sport", 16),
    CatalogEntry(ParamId.TCP_DPORT, "TCP", "Destination Port", "tcp.dport", 16),
    CatalogEntry(ParamId.TCP_URG, "TCP", "Urgent Flag", "tcp.urg", 1),
    CatalogEntry(ParamId.TCP_RST, "TCP", "RST Flag", "tcp.rst", 1),
    CatalogEntry(ParamId.TCP_ACK, "TCP", "ACK Flag", "tcp.ack", 1),
    CatalogEntry(ParamId.TCP_SYN, "TCP", "SYN Flag", "tcp.syn", 1),
    CatalogEntry(ParamId.TCP_FIN, "TCP", "FIN Flag", "tcp.fin", 1),
    CatalogEntry(ParamId.UDP_DPORT, "UDP", "Destination Port", "udp.dport", 16),
    CatalogEntry(ParamId.UDP_SPORT, "UDP", "Source Port", "udp.sport", 16),
    CatalogEntry(ParamId.ICMP_TYPE, "ICMP", "Type", "icmp.type", 8),
    CatalogEntry(ParamId.ICMP_CODE, "ICMP", "Code", "icmp.code", 8),
    CatalogEntry(ParamId.IP_PROTO, "IP", "Protocol type ID", "ip.proto", 8),
)

FIELD_TO_PARAM = {e.field: e.id for e in _CATALOG}


def param_catalog() -> list[CatalogEntry]:
    return list(_CATALOG)


class ParamSample(NamedTuple):
    time: float
    param: ParamId
    value: int


def extract_params(packet: DecodedPacket) -> list[ParamSample]:
    """One sample per parameter the packet carries; empty for non-IP frames."""
    ip = packet.ip
    if ip is None:
        return []
    t = packet.timestamp
    out = [
        ParamSample(t, ParamId.IP_DST, ip.dst_addr),
        ParamSample(t, ParamId.IP_SRC, ip.src_addr),
        ParamSample(t, ParamId.IP_LENGTH, ip.total_length),
        ParamSample(t, ParamId.IP_MF, int(ip.mf_flag)),
        ParamSample(t, ParamId.IP_DF, int(ip.df_flag)),
        ParamSample(t, ParamId.IP_OPTIONS, ip.options_len),
    ]
    tcp, udp, icmp = packet.tcp, packet.udp, packet.icmp
    if tcp is not None:
        out += [
            ParamSample(t, ParamId.TCP_SPORT, tcp.src_port),
            ParamSample(t, ParamId.TCP_DPORT, tcp.dst_port),
            ParamSample(t, ParamId.TCP_URG, int(tcp.urg)),
            ParamSample(t, ParamId.TCP_RST, int(tcp.rst)),
            ParamSample(t, ParamId.TCP_ACK, int(tcp.ack)),
            ParamSample(t, ParamId.TCP_SYN, int(tcp.syn)),
            ParamSample(t, ParamId.TCP_FIN, int(tcp.fin)),
        ]
    elif udp is not None:
        out += [
            ParamSample(t, ParamId.UDP_DPORT, udp.dst_port),
            ParamSample(t, ParamId.UDP_SPORT, udp.src_port),
        ]
    elif icmp is not None:
        out += [
            ParamSample(t, ParamId.ICMP_TYPE, icmp.type),
            ParamSample(t, ParamId.ICMP_CODE, icmp.code),
        ]
    out.append(ParamSample(t, ParamId.IP_PROTO, ip.protocol_id))
    return out


def write_samples_csv(target: Union[str, "os.PathLike[str]", TextIO], samples: Iterable[ParamSample]) -> None:
    owned = isinstance(target, (str, os.PathLike))
    f = open(target, "w", newline="") if owned else target
    try:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time", "param_id", "value"])
        for s in samples:
            w.writerow([repr(float(s.time)), int(s.param), int(s.value)])
    finally:
        if owned:
            f.close()


def read_samples_csv(source: Union[str, "os.PathLike[str]", TextIO]) -> list[ParamSample]:
    owned = isinstance(source, (str, os.PathLike))
    f = open(source, newline="") if owned else source
    try:
        rows = csv.DictReader(f)
        if rows.fieldnames != ["time", "param_id", "value"]:
            raise ValueError(f"expected header time,param_id,value, got {rows.fieldnames}")
        return [ParamSample(float(r["time"]), ParamId(int(r["param_id"])), int(r["value"])) for r in rows]
    finally:
        if owned:
            f.close()
