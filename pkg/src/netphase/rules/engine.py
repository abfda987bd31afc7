"""Evaluate signature rules against decoded packets."""

from __future__ import annotations

import operator
from collections import defaultdict, deque
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from ..capture import DecodedPacket
from ..craft import int_to_ip
from .dsl import (
    Addr,
    And,
    Arith,
    Cidr,
    Compare,
    Expr,
    Field,
    Flag,
    Int,
    Not,
    Operand,
    Or,
    SignatureRule,
    ValueList,
)

ORDER_TOLERANCE = 1.0  # seconds a timestamp may run backwards before it is an error

Fields = Mapping[str, int]


class OrderingError(ValueError):
    pass


def packet_fields(packet: DecodedPacket) -> dict[str, int]:
    """Rule-language view of a packet; fields of absent layers are missing."""
    ip = packet.ip
    if ip is None:
        return {}
    f = {
        "ip.src": ip.src_addr,
        "ip.dst": ip.dst_addr,
        "ip.len": ip.total_length,
        "ip.mf": int(ip.mf_flag),
        "ip.df": int(ip.df_flag),
        "ip.offset": ip.fragment_offset,
        "ip.options_len": ip.options_len,
        "ip.proto": ip.protocol_id,
    }
    tcp, udp, icmp = packet.tcp, packet.udp, packet.icmp
    if tcp is not None:
        f.update({
            "tcp.sport": tcp.src_port,
            "tcp.dport": tcp.dst_port,
            "tcp.seq": tcp.seq,
            "tcp.ack_num": tcp.ack_num,
            "tcp.urp": tcp.urgent_pointer,
            "tcp.urg": int(tcp.urg),
            "tcp.ack": int(tcp.ack),
            "tcp.psh": int(tcp.psh),
            "tcp.rst": int(tcp.rst),
            "tcp.syn": int(tcp.syn),
            "tcp.fin": int(tcp.fin),
        })
    elif udp is not None:
        f.update({"udp.sport": udp.src_port, "udp.dport": udp.dst_port, "udp.len": udp.length})
    elif icmp is not None:
        f.update({"icmp.type": icmp.type, "icmp.code": icmp.code})
    return f


# --------------------------------------------------------------------------
# compilation to closures
# --------------------------------------------------------------------------

_ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul, "%": operator.mod}
_CMP = {
    "==": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


def _compile_operand(node: Operand) -> Callable[[Fields], int | None]:
    if isinstance(node, Field):
        name = node.name
        return lambda f: f.get(name)
    if isinstance(node, (Int, Addr)):
        v = node.value
        return lambda f: v
    if isinstance(node, Arith):
        op = _ARITH[node.op]
        left, right = _compile_operand(node.left), _compile_operand(node.right)

        def arith(f):
            a, b = left(f), right(f)
            if a is None or b is None:
                return None
            if node.op == "%" and b == 0:
                return None
            return op(a, b)

        return arith
    raise TypeError(f"{type(node).__name__} cannot be evaluated as a scalar")


def _membership(items: Sequence[Operand]) -> Callable[[int], bool]:
    exact = {it.value for it in items if isinstance(it, (Int, Addr))}
    nets = [(it.network, it.mask) for it in items if isinstance(it, Cidr)]
    return lambda v: v in exact or any((v & m) == n for n, m in nets)


def compile_expr(expr: Expr) -> Callable[[Fields], bool]:
    """Turn a predicate into ``fields -> bool``; comparisons on absent fields are false."""
    if isinstance(expr, And):
        a, b = compile_expr(expr.left), compile_expr(expr.right)
        return lambda f: a(f) and b(f)
    if isinstance(expr, Or):
        a, b = compile_expr(expr.left), compile_expr(expr.right)
        return lambda f: a(f) or b(f)
    if isinstance(expr, Not):
        a = compile_expr(expr.expr)
        return lambda f: not a(f)
    if isinstance(expr, Flag):
        name = expr.field.name
        return lambda f: f.get(name) == 1
    if isinstance(expr, Compare):
        left = _compile_operand(expr.left)
        right = expr.right
        if expr.op == "in" or isinstance(right, Cidr):
            items = right.items if isinstance(right, ValueList) else (right,)
            member = _membership(items)
            negate = expr.op == "!="

            def contains(f):
                v = left(f)
                if v is None:
                    return False
                return member(v) != negate

            return contains
        rfun = _compile_operand(right)
        op = _CMP[expr.op]

        def compare(f):
            a = left(f)
            if a is None:
                return False
            b = rfun(f)
            return b is not None and op(a, b)

        return compare
    raise TypeError(f"cannot compile {type(expr).__name__}")


_compiled: dict[Expr, Callable[[Fields], bool]] = {}


def _predicate(rule: SignatureRule) -> Callable[[Fields], bool]:
    fn = _compiled.get(rule.predicate)
    if fn is None:
        fn = _compiled[rule.predicate] = compile_expr(rule.predicate)
    return fn


def eval_rule(rule: SignatureRule, packet: DecodedPacket | Fields) -> bool:
    """Evaluate a per-packet rule (or the inner predicate of a windowed one)."""
    fields = packet_fields(packet) if isinstance(packet, DecodedPacket) else packet
    return bool(_predicate(rule)(fields))


# --------------------------------------------------------------------------
# alerts
# --------------------------------------------------------------------------

_FLAG_LETTERS = (("urg", "U"), ("ack", "A"), ("psh", "P"), ("rst", "R"), ("syn", "S"), ("fin", "F"))


@dataclass(frozen=True)
class Alert:
    time: float
    rule: str
    severity: str
    src: str
    dst: str
    protocol: int | None = None
    sport: int | None = None
    dport: int | None = None
    flags: str = ""
    count: int | None = None
    window: float | None = None
    group: str | None = None

    @property
    def detail(self) -> str:
        parts = []
        if self.protocol is not None:
            parts.append(f"proto={self.protocol}")
        if self.sport is not None:
            parts.append(f"sport={self.sport}")
        if self.dport is not None:
            parts.append(f"dport={self.dport}")
        if self.flags:
            parts.append(f"flags={self.flags}")
        if self.count is not None:
            parts.append(f"count={self.count}")
            parts.append(f"window={self.window:g}s")
            parts.append(f"group={self.group}")
        return " ".join(parts)

    def line(self) -> str:
        ts = datetime.fromtimestamp(self.time, tz=timezone.utc).isoformat(timespec="microseconds")
        return "\t".join((ts, self.rule, self.severity, self.src, self.dst, self.detail))


def make_alert(rule: SignatureRule, packet: DecodedPacket, count: int | None = None, group: str | None = None) -> Alert:
    ip = packet.ip
    src = int_to_ip(ip.src_addr) if ip else "-"
    dst = int_to_ip(ip.dst_addr) if ip else "-"
    sport = dport = None
    flags = ""
    t = packet.transport
    if t is not None and hasattr(t, "src_port"):
        sport, dport = t.src_port, t.dst_port
    if packet.tcp is not None:
        flags = "".join(letter for name, letter in _FLAG_LETTERS if getattr(packet.tcp, name))
    elif packet.icmp is not None:
        flags = f"type{packet.icmp.type}/code{packet.icmp.code}"
    return Alert(
        time=packet.timestamp,
        rule=rule.name,
        severity=rule.severity,
        src=src,
        dst=dst,
        protocol=ip.protocol_id if ip else None,
        sport=sport,
        dport=dport,
        flags=flags,
        count=count,
        window=rule.window_seconds if count is not None else None,
        group=group,
    )


def _format_group(field: str, value: int) -> str:
    return int_to_ip(value) if field in ("ip.src", "ip.dst") else str(value)


# --------------------------------------------------------------------------
# windowed counting
# --------------------------------------------------------------------------


class WindowedCounter:
    """Sliding-window count of matching packets per group key.

    The window ending at ``t`` is ``(t - W, t]``.  An alert fires on the
    event that lifts the count strictly above the threshold; the key then
    stays silent until a later event sees the count back below threshold.
    Timestamps may run backwards by up to ``ORDER_TOLERANCE`` seconds and
    are clamped to the latest time seen; larger regressions raise.
    """

    def __init__(self, rule: SignatureRule):
        if rule.kind != "windowed_count":
            raise ValueError(f"rule {rule.name!r} is not a windowed rule")
        self.rule = rule
        self._match = _predicate(rule)
        self._group = rule.group_by.name
        self._window = rule.window_seconds
        self._events: dict[int, deque] = defaultdict(deque)
        self._armed: dict[int, bool] = defaultdict(lambda: True)
        self._last = float("-inf")

    def feed(self, packet: DecodedPacket, fields: Fields | None = None) -> Alert | None:
        t = packet.timestamp
        if t < self._last - ORDER_TOLERANCE:
            raise OrderingError(f"timestamp {t} is {self._last - t:.3f}s earlier than the previous packet")
        t = max(t, self._last)
        self._last = t
        if fields is None:
            fields = packet_fields(packet)
        key = fields.get(self._group)
        if key is None or not self._match(fields):
            return None
        return self._count(key, t, packet)

    def feed_event(self, key: int, t: float) -> bool:
        """Count a bare matching event; returns whether it fires."""
        if t < self._last - ORDER_TOLERANCE:
            raise OrderingError(f"timestamp {t} is {self._last - t:.3f}s earlier than the previous event")
        t = max(t, self._last)
        self._last = t
        return self._count(key, t, None) is not None

    def _count(self, key: int, t: float, packet: DecodedPacket | None):
        q = self._events[key]
        q.append(t)
        horizon = t - self._window
        while q[0] <= horizon:
            q.popleft()
        n = len(q)
        thr = self.rule.threshold
        if self._armed[key]:
            if n > thr:
                self._armed[key] = False
                if packet is None:
                    return True
                return make_alert(self.rule, packet, count=n, group=_format_group(self._group, key))
        elif n < thr:
            self._armed[key] = True
        return None


def eval_windowed(rule: SignatureRule, packets: Iterable[DecodedPacket]) -> Iterator[Alert]:
    counter = WindowedCounter(rule)
    for p in packets:
        alert = counter.feed(p)
        if alert is not None:
            yield alert


class RuleEngine:
    """Run a rule set over a packet stream, one packet at a time."""

    def __init__(self, rules: Iterable[SignatureRule]):
        self.rules = list(rules)
        self._per_packet = [(r, _predicate(r)) for r in self.rules if r.kind == "per_packet"]
        self._windowed = [WindowedCounter(r) for r in self.rules if r.kind == "windowed_count"]

    def process(self, packet: DecodedPacket) -> list[Alert]:
        fields = packet_fields(packet)
        out = [make_alert(r, packet) for r, pred in self._per_packet if fields and pred(fields)]
        for counter in self._windowed:
            a = counter.feed(packet, fields)
            if a is not None:
                out.append(a)
        out.sort(key=lambda a: a.rule)
        return out

    def run(self, packets: Iterable[DecodedPacket]) -> list[Alert]:
        alerts: list[Alert] = []
        for p in packets:
            alerts.extend(self.process(p))
        return sort_alerts(alerts)


def sort_alerts(alerts: Iterable[Alert]) -> list[Alert]:
    return sorted(alerts, key=lambda a: (a.time, a.rule))
