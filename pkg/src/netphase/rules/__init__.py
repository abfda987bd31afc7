"""Signature rules over header parameters."""

from .catalog import ACK_SCAN_RULE, BUILTIN_RULES, ack_scan_rule, builtin_catalog, default_rules, param_usage_histogram
from .dsl import (
    FIELDS,
    RuleError,
    RuleSyntaxError,
    SignatureRule,
    TypeMismatchError,
    UnknownFieldError,
    fields_referenced,
    format_rule,
    parse_rule,
    parse_rules,
)
from .engine import (
    Alert,
    OrderingError,
    RuleEngine,
    WindowedCounter,
    eval_rule,
    eval_windowed,
    packet_fields,
    sort_alerts,
)

__all__ = [
    "ACK_SCAN_RULE",
    "BUILTIN_RULES",
    "FIELDS",
    "Alert",
    "OrderingError",
    "RuleEngine",
    "RuleError",
    "RuleSyntaxError",
    "SignatureRule",
    "TypeMismatchError",
    "UnknownFieldError",
    "WindowedCounter",
    "ack_scan_rule",
    "builtin_catalog",
    "default_rules",
    "eval_rule",
    "eval_windowed",
    "fields_referenced",
    "format_rule",
    "packet_fields",
    "param_usage_histogram",
    "parse_rule",
    "parse_rules",
    "sort_alerts",
]
