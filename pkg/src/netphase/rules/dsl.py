"""Line-oriented signature language.

::

    rule "land" high when ip.src == ip.dst
    rule "syn-flood" high when count(tcp.syn and not tcp.ack, group by ip.dst, window 10s) > 100

One rule per line, ``#`` starts a comment.  Operands may be fields,
integers, dotted IPv4 addresses, CIDR blocks, bracketed lists, or integer
arithmetic (``+ - * %``) over fields and integers.  A bare flag field means
``field == 1``.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass
from typing import Union

SEVERITIES = ("low", "medium", "high")

# field name -> value kind
FIELDS: dict[str, str] = {
    "ip.src": "addr",
    "ip.dst": "addr",
    "ip.len": "int",
    "ip.mf": "flag",
    "ip.df": "flag",
    "ip.offset": "int",
    "ip.options_len": "int",
    "ip.proto": "int",
    "tcp.sport": "int",
    "tcp.dport": "int",
    "tcp.seq": "int",
    "tcp.ack_num": "int",
    "tcp.urp": "int",
    "tcp.urg": "flag",
    "tcp.ack": "flag",
    "tcp.psh": "flag",
    "tcp.rst": "flag",
    "tcp.syn": "flag",
    "tcp.fin": "flag",
    "udp.sport": "int",
    "udp.dport": "int",
    "udp.len": "int",
    "icmp.type": "int",
    "icmp.code": "int",
}

COMPARISONS = ("==", "!=", "<=", ">=", "<", ">", "in")
DURATION_UNITS = {"s": 1, "m": 60, "h": 3600}


class RuleError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


class RuleSyntaxError(RuleError):
    pass


class UnknownFieldError(RuleError):
    pass


class TypeMismatchError(RuleError):
    pass


# --------------------------------------------------------------------------
# syntax tree
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    name: str


@dataclass(frozen=True)
class Int:
    value: int


@dataclass(frozen=True)
class Addr:
    value: int

    def __str__(self) -> str:
        return str(ipaddress.IPv4Address(self.value))


@dataclass(frozen=True)
class Cidr:
    network: int
    prefix: int

    @property
    def mask(self) -> int:
        return (0xFFFFFFFF << (32 - self.prefix)) & 0xFFFFFFFF if self.prefix else 0

    def __str__(self) -> str:
        return f"{ipaddress.IPv4Address(self.network)}/{self.prefix}"


@dataclass(frozen=True)
class ValueList:
    items: tuple


@dataclass(frozen=True)
class Arith:
    op: str
    left: "Operand"
    right: "Operand"


Operand = Union[Field, Int, Addr, Cidr, ValueList, Arith]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Operand
    right: Operand


@dataclass(frozen=True)
class Flag:
    field: Field


@dataclass(frozen=True)
class Not:
    expr: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Or:
    left: "Expr"
    right: "Expr"


Expr = Union[Compare, Flag, Not, And, Or]


@dataclass(frozen=True)
class Duration:
    value: int
    unit: str

    @property
    def seconds(self) -> float:
        return float(self.value * DURATION_UNITS[self.unit])

    def __str__(self) -> str:
        return f"{self.value}{self.unit}"


@dataclass(frozen=True)
class SignatureRule:
    name: str
    severity: str
    kind: str  # "per_packet" or "windowed_count"
    predicate: Expr
    group_by: Field | None = None
    window: Duration | None = None
    threshold: int | None = None  # alert when the count strictly exceeds this

    @property
    def window_seconds(self) -> float | None:
        return self.window.seconds if self.window else None


# --------------------------------------------------------------------------
# lexer
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#.*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<cidr>\d+\.\d+\.\d+\.\d+/\d+)
  | (?P<addr>\d+\.\d+\.\d+\.\d+)
  | (?P<duration>\d+[smh])(?![A-Za-z0-9_.])
  | (?P<hex>0[xX][0-9A-Fa-f]+)
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<op>==|!=|<=|>=|<|>|\(|\)|\[|\]|,|\+|-|\*|%)
    """,
    re.VERBOSE,
)

KEYWORDS = {"rule", "when", "and", "or", "not", "in", "count", "group", "by", "window"} | set(SEVERITIES)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int


def tokenize(line: str, lineno: int = 1) -> list[Token]:
    pos = 0
    out = []
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if not m:
            raise RuleSyntaxError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            if kind == "name" and text in KEYWORDS:
                kind = "kw"
            out.append(Token(kind, text, lineno, pos + 1))
        pos = m.end()
    out.append(Token("eof", "", lineno, len(line) + 1))
    return out


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Token | None = None, cls=RuleSyntaxError) -> RuleError:
        tok = tok or self.tok
        return cls(msg, tok.line, tok.column)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            self.i += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            want = repr(text) if text else kind
            got = repr(self.tok.text) if self.tok.text else "end of line"
            raise self.error(f"expected {want}, found {got}")
        return t

    # rule := 'rule' STRING severity? 'when' expr
    def rule(self) -> SignatureRule:
        self.expect("kw", "rule")
        name_tok = self.expect("string")
        name = re.sub(r"\\(.)", r"\1", name_tok.text[1:-1])
        if not name:
            raise self.error("rule name is empty", name_tok)
        severity = "medium"
        if self.tok.kind == "kw" and self.tok.text in SEVERITIES:
            severity = self.tok.text
            self.i += 1
        self.expect("kw", "when")
        if self.tok.kind == "kw" and self.tok.text == "count":
            rule = self.count_rule(name, severity)
        else:
            expr = self.expr()
            rule = SignatureRule(name, severity, "per_packet", expr)
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r} after rule body")
        return rule

    # countexpr := 'count(' expr ', group by' FIELD ', window' DURATION ')' CMP INT
    def count_rule(self, name: str, severity: str) -> SignatureRule:
        self.expect("kw", "count")
        self.expect("op", "(")
        inner = self.expr()
        self.expect("op", ",")
        self.expect("kw", "group")
        self.expect("kw", "by")
        group = self.field()
        self.expect("op", ",")
        self.expect("kw", "window")
        dur_tok = self.expect("duration")
        window = Duration(int(dur_tok.text[:-1]), dur_tok.text[-1])
        if window.value <= 0:
            raise self.error("window must be positive", dur_tok)
        self.expect("op", ")")
        op_tok = self.tok
        if not self.accept("op", ">") and not self.accept("op", ">="):
            raise self.error("count() must be compared with '>' or '>='", op_tok)
        n_tok = self.expect("int")
        threshold = int(n_tok.text) - (1 if op_tok.text == ">=" else 0)
        if threshold < 1:
            raise self.error("count threshold must be at least 1", n_tok)
        return SignatureRule(name, severity, "windowed_count", inner, group, window, threshold)

    def expr(self) -> Expr:
        left = self.conj()
        while self.accept("kw", "or"):
            left = Or(left, self.conj())
        return left

    def conj(self) -> Expr:
        left = self.neg()
        while self.accept("kw", "and"):
            left = And(left, self.neg())
        return left

    def neg(self) -> Expr:
        if self.accept("kw", "not"):
            return Not(self.neg())
        return self.atom()

    def atom(self) -> Expr:
        start = self.tok
        if start.kind == "kw" and start.text == "count":
            raise self.error("count() must be the whole rule predicate")
        if start.kind == "op" and start.text == "(":
            # parenthesised boolean expression, or arithmetic on the left of a comparison
            save = self.i
            self.i += 1
            try:
                inner = self.expr()
                self.expect("op", ")")
                if not (self.tok.kind == "op" and self.tok.text in COMPARISONS + ("+", "-", "*", "%")):
                    return inner
            except RuleSyntaxError:
                pass
            self.i = save
        left = self.operand()
        op = self.tok
        if op.text in COMPARISONS and op.kind in ("op", "kw"):
            self.i += 1
            right = self.list_value() if op.text == "in" else self.operand()
            node = Compare(op.text, left, right)
            check_types(node, op)
            return node
        if isinstance(left, Field):
            check_types(Flag(left), start)
            return Flag(left)
        raise self.error("expected a comparison operator", op)

    def field(self) -> Field:
        t = self.tok
        if t.kind != "name":
            raise self.error(f"expected a field name, found {t.text or 'end of line'!r}")
        if t.text not in FIELDS:
            raise self.error(f"unknown field {t.text!r}", t, UnknownFieldError)
        self.i += 1
        return Field(t.text)

    def operand(self) -> Operand:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = Arith(op, left, self.term())
        return left

    def term(self) -> Operand:
        left = self.primary()
        while self.tok.kind == "op" and self.tok.text in ("*", "%"):
            op = self.tok.text
            self.i += 1
            left = Arith(op, left, self.primary())
        return left

    def primary(self) -> Operand:
        t = self.tok
        if t.kind == "name":
            return self.field()
        if t.kind == "op" and t.text == "(":
            self.i += 1
            inner = self.operand()
            self.expect("op", ")")
            return inner
        if t.kind == "op" and t.text == "[":
            return self.list_value()
        return self.scalar()

    def scalar(self) -> Operand:
        t = self.tok
        self.i += 1
        if t.kind == "int":
            return Int(int(t.text))
        if t.kind == "hex":
            return Int(int(t.text, 16))
        if t.kind == "addr":
            try:
                return Addr(int(ipaddress.IPv4Address(t.text)))
            except ipaddress.AddressValueError:
                raise self.error(f"invalid IPv4 address {t.text!r}", t) from None
        if t.kind == "cidr":
            try:
                net = ipaddress.IPv4Network(t.text, strict=False)
            except ValueError:
                raise self.error(f"invalid CIDR block {t.text!r}", t) from None
            return Cidr(int(net.network_address), net.prefixlen)
        self.i -= 1
        raise self.error(f"expected a value, found {t.text or 'end of line'!r}")

    def list_value(self) -> Operand:
        if not self.accept("op", "["):
            return self.scalar()
        items = [self.scalar()]
        while self.accept("op", ","):
            items.append(self.scalar())
        self.expect("op", "]")
        return ValueList(tuple(items))


# --------------------------------------------------------------------------
# type checking
# --------------------------------------------------------------------------


def _operand_kind(node: Operand, tok: Token) -> str:
    if isinstance(node, Field):
        return FIELDS[node.name]
    if isinstance(node, Int):
        return "int"
    if isinstance(node, Addr):
        return "addr"
    if isinstance(node, Cidr):
        return "cidr"
    if isinstance(node, ValueList):
        kinds = {_operand_kind(it, tok) for it in node.items}
        if len(kinds) > 1 and not kinds <= {"addr", "cidr"}:
            raise TypeMismatchError(f"list mixes {sorted(kinds)} values", tok.line, tok.column)
        return "list:" + ("addr" if kinds <= {"addr", "cidr"} else kinds.pop())
    if isinstance(node, Arith):
        for side in (node.left, node.right):
            k = _operand_kind(side, tok)
            if k not in ("int", "addr"):
                raise TypeMismatchError(f"arithmetic on a {k} value", tok.line, tok.column)
        return "int"
    raise TypeError(node)


def _scalar_compatible(left: str, right: str, right_node: Operand, op: str) -> bool:
    if left == "flag" or right == "flag":
        other, node = (right, right_node) if left == "flag" else (left, None)
        if other == "flag":
            return op in ("==", "!=")
        return other == "int" and op in ("==", "!=") and (node is None or getattr(node, "value", None) in (0, 1))
    if "cidr" in (left, right):
        return {left, right} == {"addr", "cidr"} and op in ("==", "!=", "in")
    return left == right


def check_types(expr: Expr, tok: Token) -> None:
    if isinstance(expr, (And, Or)):
        check_types(expr.left, tok)
        check_types(expr.right, tok)
    elif isinstance(expr, Not):
        check_types(expr.expr, tok)
    elif isinstance(expr, Flag):
        if FIELDS[expr.field.name] != "flag":
            raise TypeMismatchError(f"bare field {expr.field.name} is not a flag", tok.line, tok.column)
    elif isinstance(expr, Compare):
        lk = _operand_kind(expr.left, tok)
        rk = _operand_kind(expr.right, tok)
        if lk.startswith("list") or lk == "cidr":
            raise TypeMismatchError("a list or CIDR block must appear on the right", tok.line, tok.column)
        if expr.op == "in":
            if rk == "cidr":
                ok = lk == "addr"
            elif rk.startswith("list:"):
                ok = rk[5:] == lk or (lk == "flag" and rk[5:] == "int")
            else:
                ok = False
            if not ok:
                raise TypeMismatchError(f"'in' needs a list or CIDR matching a {lk} value", tok.line, tok.column)
            return
        if rk.startswith("list"):
            raise TypeMismatchError(f"operator {expr.op} cannot take a list", tok.line, tok.column)
        if expr.op in ("<", "<=", ">", ">=") and ("flag" in (lk, rk) or "cidr" in (lk, rk)):
            raise TypeMismatchError(f"ordering comparison between {lk} and {rk}", tok.line, tok.column)
        if not _scalar_compatible(lk, rk, expr.right, expr.op):
            raise TypeMismatchError(f"cannot compare {lk} with {rk}", tok.line, tok.column)


# --------------------------------------------------------------------------
# public entry points
# --------------------------------------------------------------------------


def parse_rule(line: str, lineno: int = 1) -> SignatureRule:
    return _Parser(tokenize(line, lineno)).rule()


def parse_rules(text: str | bytes) -> list[SignatureRule]:
    """Parse a rules file; blank and comment-only lines are skipped, duplicate names rejected."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rules: list[SignatureRule] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if tokenize(line, lineno)[0].kind == "eof":
            continue
        r = parse_rule(line, lineno)
        if r.name in seen:
            raise RuleSyntaxError(f"duplicate rule name {r.name!r}", lineno, 1)
        seen.add(r.name)
        rules.append(r)
    return rules


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

_PREC = {Or: 1, And: 2, Not: 3}


def format_operand(node: Operand, parent_prec: int = 0) -> str:
    if isinstance(node, Field):
        return node.name
    if isinstance(node, Int):
        return str(node.value)
    if isinstance(node, (Addr, Cidr)):
        return str(node)
    if isinstance(node, ValueList):
        return "[" + ", ".join(format_operand(i) for i in node.items) + "]"
    if isinstance(node, Arith):
        prec = 1 if node.op in "+-" else 2
        text = f"{format_operand(node.left, prec)} {node.op} {format_operand(node.right, prec + 1)}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(node)


def format_expr(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, Compare):
        text = f"{format_operand(expr.left)} {expr.op} {format_operand(expr.right)}"
        return text
    if isinstance(expr, Flag):
        return expr.field.name
    if isinstance(expr, Not):
        return "not " + format_expr(expr.expr, 3)
    prec = _PREC[type(expr)]
    word = "or" if isinstance(expr, Or) else "and"
    text = f"{format_expr(expr.left, prec)} {word} {format_expr(expr.right, prec + 1)}"
    return f"({text})" if prec < parent_prec else text


def format_rule(rule: SignatureRule) -> str:
    name = rule.name.replace("\\", "\\\\").replace('"', '\\"')
    head = f'rule "{name}" {rule.severity} when '
    if rule.kind == "windowed_count":
        return head + (
            f"count({format_expr(rule.predicate)}, group by {rule.group_by.name}, "
            f"window {rule.window}) > {rule.threshold}"
        )
    return head + format_expr(rule.predicate)


def fields_referenced(expr: Expr) -> set[str]:
    """Every field name the predicate reads."""
    out: set[str] = set()

    def walk(node) -> None:
        if isinstance(node, Field):
            out.add(node.name)
        elif isinstance(node, Flag):
            out.add(node.field.name)
        elif isinstance(node, (And, Or)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Not):
            walk(node.expr)
        elif isinstance(node, (Compare, Arith)):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, ValueList):
            for it in node.items:
                walk(it)

    walk(expr)
    return out
