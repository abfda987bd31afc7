"""Scan a capture for the builtin attack signatures.

Injects each attack into benign background traffic and shows the alert
lines the engine emits, then prints how often each header parameter is
used across the catalog.
"""

from netphase import decode_packet
from netphase.params import ParamId
from netphase.rules import RuleEngine, builtin_catalog, default_rules, format_rule, param_usage_histogram
from netphase.traffic import ATTACKS, attack_capture

print("catalog:")
for rule in default_rules():
    print("  " + format_rule(rule))

print("\nalerts, one capture per attack:")
for name in sorted(ATTACKS):
    engine = RuleEngine(default_rules())
    alerts = engine.run(decode_packet(r) for r in attack_capture(name))
    for a in alerts:
        print("  " + a.line())

print("\nrules reading each parameter:")
for pid, n in param_usage_histogram(builtin_catalog()).items():
    if pid != ParamId.IP_PROTO:
        print(f"  {pid.name:<10} {'#' * n}")
