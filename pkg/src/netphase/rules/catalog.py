"""Builtin signatures for the classic header-level attacks.

Only header parameters are used.  Each rule lists, in its comment, the
table parameters its predicate touches; the catalog as a whole is tuned so
those per-parameter counts hit the target usage frequencies
(destination address 3, source address 1, IP length 1, MF 2, DF 2,
options 1, TCP ports 1+1, URG/RST/FIN 1, ACK/SYN 2, UDP dport 2, UDP sport
1, ICMP type/code 2).  Fields outside that table (``ip.proto``,
``ip.offset``, ``tcp.ack_num``, ``tcp.psh``, ``tcp.urp``) and ``group by``
keys are free.
"""

from __future__ import annotations

from typing import Iterable

from ..params import FIELD_TO_PARAM, ParamId
from .dsl import SignatureRule, fields_referenced, parse_rules

BUILTIN_RULES = r"""
# land: source and destination address coincide.
#   params: ip.dst, ip.src
rule "land" high when ip.src == ip.dst

# smurf: ICMP echo request sent to a directed broadcast (x.x.x.255).
#   params: icmp.type, icmp.code, ip.dst
rule "smurf" high when icmp.type == 8 and icmp.code == 0 and ip.dst % 256 == 255

# fraggle: UDP echo/chargen traffic sent to a directed broadcast.
#   params: udp.dport, ip.dst
rule "fraggle" high when udp.dport in [7, 19] and ip.dst % 256 == 255

# pingpong: spoofed datagram wiring the echo and chargen services together.
#   params: udp.sport, udp.dport
rule "pingpong" medium when udp.sport in [7, 19] and udp.dport in [7, 19]

# ping of death: an echo request near the IP size limit, or an ICMP
# fragment whose end lies past 65535 bytes (offset*8 + length is the
# reassembled datagram size).  Later fragments carry no ICMP header, hence
# the ip.proto test.
#   params: icmp.type, icmp.code, ip.len
rule "ping-of-death" high when (icmp.type == 8 and icmp.code == 0 and ip.len > 65500) or (ip.proto == 1 and ip.offset * 8 + ip.len > 65535)

# IP fragment overlap (teardrop): a final, fragmentable fragment that starts
# inside the first 64 bytes, i.e. within any realistic first fragment.
#   params: ip.mf, ip.df
rule "ip-fragment-overlap" high when not ip.mf and not ip.df and ip.offset > 0 and ip.offset < 8

# BrKill: burst of forged resets aimed at one host.
#   params: tcp.rst
rule "brkill" high when count(tcp.rst, group by ip.dst, window 1s) > 20

# SYN flood: half-open connection requests piling up on one destination.
#   params: tcp.syn, tcp.ack
rule "syn-flood" high when count(tcp.syn and not tcp.ack, group by ip.dst, window 10s) > 100

# TCP session hijacking: the ACK storm that follows desynchronised
# sequence numbers, counted over the whole link.
#   params: tcp.ack
rule "tcp-session-hijacking" high when count(tcp.ack and not tcp.psh, group by ip.proto, window 1s) > 300

# out of band bug (WinNuke): urgent data to the NetBIOS session service.
#   params: tcp.urg, tcp.dport
rule "out-of-band-bug" high when tcp.urg and tcp.dport == 139

# IP unaligned timestamp: in-use option bytes not a multiple of four.
#   params: ip.options_len
rule "ip-unaligned-timestamp" medium when ip.options_len % 4 != 0

# bonk: a fragment that simultaneously claims don't-fragment.
#   params: ip.df, ip.mf
rule "bonk" high when ip.df and (ip.mf or ip.offset > 0)

# OOB data barf: urgent pointer on segments leaving the NetBIOS session port.
#   params: tcp.sport
rule "oob-data-barf" medium when tcp.sport == 139 and tcp.urp > 0

# vulnerability scans, FIN and SYN+FIN: FIN with SYN, or FIN without any
# acknowledgement number.
#   params: tcp.fin, tcp.syn
rule "vulnerability-scan" medium when tcp.fin and (tcp.syn or tcp.ack_num == 0)
"""

ACK_SCAN_RULE = (
    'rule "ack-scan" medium when tcp.ack and not tcp.syn and not tcp.fin and not tcp.rst '
    "and not tcp.urg and not tcp.psh and tcp.sport == tcp.dport"
)


def builtin_catalog() -> list[SignatureRule]:
    return parse_rules(BUILTIN_RULES)


def ack_scan_rule() -> SignatureRule:
    """Lone ACK flag with identical source and destination ports."""
    return parse_rules(ACK_SCAN_RULE)[0]


def default_rules() -> list[SignatureRule]:
    return builtin_catalog() + [ack_scan_rule()]


def param_usage_histogram(rules: Iterable[SignatureRule]) -> dict[ParamId, int]:
    """Number of rules whose predicate reads each catalog parameter."""
    hist = {p: 0 for p in ParamId}
    for rule in rules:
        for name in fields_referenced(rule.predicate):
            pid = FIELD_TO_PARAM.get(name)
            if pid is not None:
                hist[pid] += 1
    return hist
