"""Classic pcap reading/writing and Ethernet/IPv4/TCP/UDP/ICMP header decoding.

Only the tcpdump on-disk format is handled (no pcapng).  Every multi-byte
header field is read in network byte order; record headers follow the byte
order announced by the file's magic number.
"""

from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Iterator, Union

LINKTYPE_ETHERNET = 1

ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806
ETHERTYPE_IPV6 = 0x86DD

PROTO_ICMP = 1
PROTO_TCP = 6
PROTO_UDP = 17

TCP_FIN = 0x01
TCP_SYN = 0x02
TCP_RST = 0x04
TCP_PSH = 0x08
TCP_ACK = 0x10
TCP_URG = 0x20

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D

GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16
ETH_HEADER_LEN = 14

Source = Union[bytes, bytearray, memoryview, str, "os.PathLike[str]", BinaryIO]


class CaptureError(Exception):
    """Base class for everything raised while reading or decoding captures."""


class UnsupportedFormatError(CaptureError):
    pass


class TruncatedFileError(CaptureError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class DecodeError(CaptureError):
    pass


class MalformedHeaderError(DecodeError):
    pass


class UnsupportedLinkTypeError(DecodeError):
    pass


# ---------------------------------------------------------------------------
# pcap container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CaptureRecord:
    ts_sec: int
    ts_usec: int
    captured_length: int
    original_length: int
    payload: bytes

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec * 1e-6

    @property
    def truncated_inconsistent(self) -> bool:
        """True when the record claims more captured bytes than the original packet had."""
        return self.captured_length > self.original_length

    @classmethod
    def from_frame(cls, timestamp: float, frame: bytes, original_length: int | None = None) -> "CaptureRecord":
        usec_total = int(round(timestamp * 1e6))
        sec, usec = divmod(usec_total, 1_000_000)
        orig = len(frame) if original_length is None else original_length
        return cls(sec, usec, len(frame), orig, bytes(frame))


@dataclass(frozen=True)
class GlobalHeader:
    byte_order: str  # "<" or ">"
    nanosecond: bool
    version_major: int
    version_minor: int
    thiszone: int
    sigfigs: int
    snaplen: int
    link_type: int


def _open_source(source: Source) -> tuple[BinaryIO, bool]:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return io.BytesIO(bytes(source)), True
    if isinstance(source, (str, os.PathLike)):
        return open(source, "rb"), True
    return source, False


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def parse_global_header(raw: bytes) -> GlobalHeader:
    if len(raw) < GLOBAL_HEADER_LEN:
        raise UnsupportedFormatError(f"missing pcap global header ({len(raw)} of 24 bytes)")
    for order in ("<", ">"):
        (magic,) = struct.unpack(order + "I", raw[:4])
        if magic in (MAGIC_USEC, MAGIC_NSEC):
            break
    else:
        raise UnsupportedFormatError(f"unknown magic number {raw[:4].hex()}")
    _, vmaj, vmin, zone, sigfigs, snaplen, linktype = struct.unpack(order + "IHHiIII", raw[:24])
    return GlobalHeader(order, magic == MAGIC_NSEC, vmaj, vmin, zone, sigfigs, snaplen, linktype)


class PcapReader:
    """Iterate over the records of a classic pcap stream.

    The global header is consumed on construction so ``link_type`` is known
    before iteration starts. Nanosecond timestamps are truncated to
    microseconds.
    """

    def __init__(self, source: Source):
        self._stream, self._owned = _open_source(source)
        self.header = parse_global_header(_read_exact(self._stream, GLOBAL_HEADER_LEN))
        self._offset = GLOBAL_HEADER_LEN
        self._rec = struct.Struct(self.header.byte_order + "IIII")

    @property
    def link_type(self) -> int:
        return self.header.link_type

    def __iter__(self) -> Iterator[CaptureRecord]:
        try:
            while True:
                start = self._offset
                raw = _read_exact(self._stream, RECORD_HEADER_LEN)
                if not raw:
                    return
                if len(raw) < RECORD_HEADER_LEN:
                    raise TruncatedFileError("truncated record header", start)
                ts_sec, ts_frac, incl_len, orig_len = self._rec.unpack(raw)
                body = _read_exact(self._stream, incl_len)
                if len(body) < incl_len:
                    raise TruncatedFileError(
                        f"truncated record body ({len(body)} of {incl_len} bytes)",
                        start + RECORD_HEADER_LEN,
                    )
                self._offset = start + RECORD_HEADER_LEN + incl_len
                if self.header.nanosecond:
                    ts_frac //= 1000
                yield CaptureRecord(ts_sec, ts_frac, incl_len, orig_len, body)
        finally:
            self.close()

    def close(self) -> None:
        if self._owned:
            self._stream.close()

    def __enter__(self) -> "PcapReader":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_capture(source: Source) -> tuple[list[CaptureRecord], int]:
    """Read a whole pcap file; returns ``(records, link_type)``."""
    reader = PcapReader(source)
    return list(reader), reader.link_type


def write_capture(
    target: Union[str, "os.PathLike[str]", BinaryIO],
    records: Iterable[CaptureRecord],
    link_type: int = LINKTYPE_ETHERNET,
    byte_order: str = "<",
    nanosecond: bool = False,
    snaplen: int = 65535,
) -> None:
    if byte_order not in ("<", ">"):
        raise ValueError("byte_order must be '<' or '>'")
    magic = MAGIC_NSEC if nanosecond else MAGIC_USEC
    rec = struct.Struct(byte_order + "IIII")
    owned = isinstance(target, (str, os.PathLike))
    stream = open(target, "wb") if owned else target
    try:
        stream.write(struct.pack(byte_order + "IHHiIII", magic, 2, 4, 0, 0, snaplen, link_type))
        for r in records:
            frac = r.ts_usec * 1000 if nanosecond else r.ts_usec
            stream.write(rec.pack(r.ts_sec, frac, len(r.payload), r.original_length))
            stream.write(r.payload)
    finally:
        if owned:
            stream.close()


# ---------------------------------------------------------------------------
# header views
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EthernetHeader:
    dst: bytes
    src: bytes
    ethertype: int

    def pack(self) -> bytes:
        return self.dst + self.src + struct.pack("!H", self.ethertype)


def _options_in_use(options: bytes) -> int:
    # Bytes up to the End-of-Option-List marker; malformed TLVs count in full.
    i = 0
    while i < len(options):
        kind = options[i]
        if kind == 0:
            return i
        if kind == 1:
            i += 1
            continue
        if i + 1 >= len(options) or options[i + 1] < 2:
            return len(options)
        i += options[i + 1]
    return min(i, len(options))


@dataclass(frozen=True)
class IPv4Header:
    src_addr: int
    dst_addr: int
    total_length: int
    protocol_id: int
    df_flag: bool = False
    mf_flag: bool = False
    fragment_offset: int = 0
    options_bytes: bytes = b""
    ttl: int = 64
    identification: int = 0
    tos: int = 0
    reserved_flag: bool = False
    checksum: int = 0
    version: int = 4
    ihl: int | None = None

    @property
    def header_length(self) -> int:
        return 4 * (self.ihl if self.ihl is not None else 5 + (len(self.options_bytes) + 3) // 4)

    @property
    def has_options(self) -> bool:
        return len(self.options_bytes) > 0

    @property
    def options_len(self) -> int:
        """Option bytes actually in use (everything before End-of-Option-List)."""
        return _options_in_use(self.options_bytes)

    def pack(self) -> bytes:
        hl = self.header_length
        opts = self.options_bytes.ljust(hl - 20, b"\x00")
        flags = (self.reserved_flag << 15) | (self.df_flag << 14) | (self.mf_flag << 13)
        return struct.pack(
            "!BBHHHBBHII",
            (self.version << 4) | (hl // 4),
            self.tos,
            self.total_length,
            self.identification,
            flags | (self.fragment_offset & 0x1FFF),
            self.ttl,
            self.protocol_id,
            self.checksum,
            self.src_addr,
            self.dst_addr,
        ) + opts


@dataclass(frozen=True)
class TCPHeader:
    src_port: int
    dst_port: int
    seq: int = 0
    ack_num: int = 0
    flags: int = 0
    window: int = 65535
    checksum: int = 0
    urgent_pointer: int = 0
    options_bytes: bytes = b""
    data_offset: int | None = None

    @property
    def header_length(self) -> int:
        return 4 * (self.data_offset if self.data_offset is not None else 5 + (len(self.options_bytes) + 3) // 4)

    urg = property(lambda self: bool(self.flags & TCP_URG))
    ack = property(lambda self: bool(self.flags & TCP_ACK))
    psh = property(lambda self: bool(self.flags & TCP_PSH))
    rst = property(lambda self: bool(self.flags & TCP_RST))
    syn = property(lambda self: bool(self.flags & TCP_SYN))
    fin = property(lambda self: bool(self.flags & TCP_FIN))

    def flag_dict(self) -> dict[str, bool]:
        return {name: getattr(self, name) for name in ("urg", "ack", "psh", "rst", "syn", "fin")}

    def pack(self) -> bytes:
        hl = self.header_length
        opts = self.options_bytes.ljust(hl - 20, b"\x00")
        return struct.pack(
            "!HHIIHHHH",
            self.src_port,
            self.dst_port,
            self.seq,
            self.ack_num,
            ((hl // 4) << 12) | (self.flags & 0x0FFF),
            self.window,
            self.checksum,
            self.urgent_pointer,
        ) + opts


@dataclass(frozen=True)
class UDPHeader:
    src_port: int
    dst_port: int
    length: int = 8
    checksum: int = 0

    header_length = 8

    def pack(self) -> bytes:
        return struct.pack("!HHHH", self.src_port, self.dst_port, self.length, self.checksum)


@dataclass(frozen=True)
class ICMPHeader:
    type: int
    code: int
    checksum: int = 0
    rest: bytes = b"\x00\x00\x00\x00"

    header_length = 8

    def pack(self) -> bytes:
        return struct.pack("!BBH", self.type, self.code, self.checksum) + self.rest


Transport = Union[TCPHeader, UDPHeader, ICMPHeader]


@dataclass(frozen=True)
class DecodedPacket:
    timestamp: float
    ethertype: int
    eth: EthernetHeader
    ip: IPv4Header | None = None
    transport: Transport | None = None
    notes: tuple[str, ...] = field(default=())

    @property
    def tcp(self) -> TCPHeader | None:
        return self.transport if isinstance(self.transport, TCPHeader) else None

    @property
    def udp(self) -> UDPHeader | None:
        return self.transport if isinstance(self.transport, UDPHeader) else None

    @property
    def icmp(self) -> ICMPHeader | None:
        return self.transport if isinstance(self.transport, ICMPHeader) else None

    def header_bytes(self) -> bytes:
        """Re-encode every parsed header, link layer first."""
        out = self.eth.pack()
        if self.ip is not None:
            out += self.ip.pack()
            if self.transport is not None:
                out += self.transport.pack()
        return out


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


def _decode_ipv4(frame: bytes) -> IPv4Header:
    avail = len(frame) - ETH_HEADER_LEN
    if avail < 20:
        raise DecodeError(f"IPv4 header needs 20 bytes, frame carries {avail}")
    vihl, tos, total, ident, frag, ttl, proto, csum, src, dst = struct.unpack_from("!BBHHHBBHII", frame, ETH_HEADER_LEN)
    version, ihl = vihl >> 4, vihl & 0x0F
    if version != 4:
        raise MalformedHeaderError(f"IP version {version} under ethertype 0x0800")
    if ihl < 5:
        raise MalformedHeaderError(f"IPv4 IHL {ihl} < 5")
    if avail < ihl * 4:
        raise DecodeError(f"IPv4 header declares {ihl * 4} bytes, frame carries {avail}")
    return IPv4Header(
        src_addr=src,
        dst_addr=dst,
        total_length=total,
        protocol_id=proto,
        df_flag=bool(frag & 0x4000),
        mf_flag=bool(frag & 0x2000),
        fragment_offset=frag & 0x1FFF,
        options_bytes=bytes(frame[ETH_HEADER_LEN + 20 : ETH_HEADER_LEN + ihl * 4]),
        ttl=ttl,
        identification=ident,
        tos=tos,
        reserved_flag=bool(frag & 0x8000),
        checksum=csum,
        version=version,
        ihl=ihl,
    )


def _decode_transport(ip: IPv4Header, seg: bytes) -> Transport | None:
    proto = ip.protocol_id
    if proto == PROTO_TCP:
        if len(seg) < 20:
            raise DecodeError(f"TCP header needs 20 bytes, segment carries {len(seg)}")
        sport, dport, seq, ack, offflags, win, csum, urp = struct.unpack_from("!HHIIHHHH", seg)
        off = offflags >> 12
        if off < 5:
            raise MalformedHeaderError(f"TCP data offset {off} < 5")
        if len(seg) < off * 4:
            raise DecodeError(f"TCP header declares {off * 4} bytes, segment carries {len(seg)}")
        return TCPHeader(sport, dport, seq, ack, offflags & 0x0FFF, win, csum, urp, bytes(seg[20 : off * 4]), off)
    if proto in (PROTO_UDP, PROTO_ICMP) and len(seg) < 8:
        name = "UDP" if proto == PROTO_UDP else "ICMP"
        raise DecodeError(f"{name} header needs 8 bytes, segment carries {len(seg)}")
    if proto == PROTO_UDP:
        return UDPHeader(*struct.unpack_from("!HHHH", seg))
    if proto == PROTO_ICMP:
        typ, code, csum = struct.unpack_from("!BBH", seg)
        return ICMPHeader(typ, code, csum, bytes(seg[4:8]))
    return None


def decode_frame(frame: bytes, timestamp: float = 0.0, link_type: int = LINKTYPE_ETHERNET) -> DecodedPacket:
    if link_type != LINKTYPE_ETHERNET:
        raise UnsupportedLinkTypeError(f"link type {link_type} is not Ethernet")
    if len(frame) < ETH_HEADER_LEN:
        raise DecodeError(f"frame of {len(frame)} bytes is shorter than an Ethernet header")
    eth = EthernetHeader(bytes(frame[0:6]), bytes(frame[6:12]), struct.unpack_from("!H", frame, 12)[0])
    if eth.ethertype != ETHERTYPE_IPV4:
        note = ("ipv6",) if eth.ethertype == ETHERTYPE_IPV6 else ("non-ip",)
        return DecodedPacket(timestamp, eth.ethertype, eth, notes=note)

    ip = _decode_ipv4(frame)
    notes: list[str] = []
    hl = ip.header_length
    # Ethernet padding lies beyond total_length; never read past either bound.
    end = min(len(frame), ETH_HEADER_LEN + max(ip.total_length, hl))
    if ip.total_length < hl:
        notes.append("ip-length-short")
    transport = None
    if ip.fragment_offset:
        notes.append("fragment")
    else:
        transport = _decode_transport(ip, frame[ETH_HEADER_LEN + hl : end])
    return DecodedPacket(timestamp, eth.ethertype, eth, ip, transport, tuple(notes))


def decode_packet(record: CaptureRecord, link_type: int = LINKTYPE_ETHERNET) -> DecodedPacket:
    """Decode one pcap record captured on ``link_type``."""
    return decode_frame(record.payload, record.timestamp, link_type)


def iter_decoded(source: Source) -> Iterator[tuple[int, CaptureRecord, DecodedPacket | None, CaptureError | None]]:
    """Yield ``(index, record, packet, error)`` for every record; decode errors are not raised."""
    reader = PcapReader(source)
    for i, rec in enumerate(reader):
        try:
            yield i, rec, decode_packet(rec, reader.link_type), None
        except DecodeError as exc:
            yield i, rec, None, exc
