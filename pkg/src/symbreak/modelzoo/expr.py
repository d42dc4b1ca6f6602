"""A small smooth expression language with forward-mode differentiation.

Grammar (lowest to highest precedence)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom (("^" | "**") unary)?
    atom   := number | name | name "(" expr ")" | "(" expr ")"

Functions: sin, cos, sqrt, exp.  There are no conditionals: every
expression is smooth on its natural domain.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "sqrt", "exp")
CONSTANTS = {"pi": math.pi}


class ExpressionError(ValueError):
    def __init__(self, message: str, pos: int = -1, source: str = ""):
        self.message = message
        self.pos = pos
        self.source = source
        where = f" at offset {pos}" if pos >= 0 else ""
        super().__init__(f"{message}{where}")


class ExprSyntaxError(ExpressionError):
    pass


class UnknownIdentifierError(ExpressionError):
    pass


class ArityError(ExpressionError):
    pass


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Neg, BinOp, Call]

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def free_variables(node: Node) -> set:
    """Variable names used by the expression (named constants excluded)."""
    if isinstance(node, Var):
        return set() if node.name in CONSTANTS else {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>\*\*|[-+*/^(),])
""", re.VERBOSE)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        mt = _TOKEN.match(text, pos)
        if mt is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = mt.lastgroup
        if kind != "ws":
            val = mt.group(kind)
            if kind == "op" and val == "**":
                val = "^"
            out.append((kind, val, pos))
        pos = mt.end()
    out.append(("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, pos):
        raise ExprSyntaxError(msg, pos, self.text)

    def parse(self) -> Node:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "eof":
            self.fail(f"unexpected {val!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek()[:2] == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def group(self, open_pos):
        # an error reaching end of input inside the group is blamed on its "("
        try:
            node = self.expr()
        except ExprSyntaxError as err:
            if err.pos == len(self.text):
                self.fail("unclosed '('", open_pos)
            raise
        kind, val, pos = self.take()
        if (kind, val) == ("op", ","):
            return node, True
        if (kind, val) != ("op", ")"):
            if kind == "eof":
                self.fail("unclosed '('", open_pos)
            self.fail(f"expected ')' but found {val!r}", pos)
        return node, False

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", pos, self.text)
                open_pos = self.take()[2]
                if self.peek()[:2] == ("op", ")"):
                    raise ArityError(f"{val} takes exactly one argument, got 0", pos, self.text)
                arg, more = self.group(open_pos)
                if more:
                    raise ArityError(f"{val} takes exactly one argument", pos, self.text)
                return Call(val, arg)
            if val in FUNCTIONS:
                raise ArityError(f"function {val} used without an argument", pos, self.text)
            return Var(val)
        if (kind, val) == ("op", "("):
            node, more = self.group(pos)
            if more:
                self.fail("unexpected ','", self.toks[self.i - 1][2])
            return node
        if kind == "eof":
            self.fail("unexpected end of input", pos)
        self.fail(f"unexpected {val!r}", pos)


def parse_expression(text: str, variables=None) -> Node:
    """Parse ``text``; if ``variables`` is given every free name must be in it."""
    node = _Parser(text).parse()
    if variables is not None:
        allowed = set(variables) | set(CONSTANTS)
        unknown = sorted(free_variables(node) - allowed)
        if unknown:
            name = unknown[0]
            mt = re.search(rf"\b{re.escape(name)}\b", text)
            raise UnknownIdentifierError(f"unknown identifier {name!r}",
                                         mt.start() if mt else -1, text)
    return node


# ---------------------------------------------------------------------------
# printing


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg) or (isinstance(node, Num) and node.value < 0):
        return _PREC["neg"]
    return 10


def pretty(node: Node) -> str:
    """Canonical text with the minimal parentheses that preserve the tree."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({pretty(node.arg)})"
    if isinstance(node, Neg):
        inner = pretty(node.arg)
        return f"-({inner})" if _prec(node.arg) < _PREC["neg"] else f"-{inner}"
    p = _PREC[node.op]
    left, right = pretty(node.left), pretty(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(node.left) < p:
        left = f"({left})"
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# ---------------------------------------------------------------------------
# evaluation


class Dual:
    """Forward-mode dual number carrying a gradient vector."""

    __slots__ = ("val", "der")

    def __init__(self, val, der):
        self.val = float(val)
        self.der = der

    @staticmethod
    def lift(x, n):
        return x if isinstance(x, Dual) else Dual(x, np.zeros(n))

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val + o.val, self.der + o.der)
        return Dual(self.val + o, self.der)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val - o.val, self.der - o.der)
        return Dual(self.val - o, self.der)

    def __rsub__(self, o):
        return Dual(o - self.val, -self.der)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val * o.val, self.der * o.val + o.der * self.val)
        return Dual(self.val * o, self.der * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            return Dual(self.val / o.val, (self.der * o.val - o.der * self.val) / o.val**2)
        return Dual(self.val / o, self.der / o)

    def __rtruediv__(self, o):
        return Dual(o / self.val, -o * self.der / self.val**2)

    def __neg__(self):
        return Dual(-self.val, -self.der)

    def __pow__(self, o):
        if isinstance(o, Dual):
            v = self.val**o.val
            return Dual(v, v * (o.der * math.log(self.val) + o.val * self.der / self.val))
        if o == 0:
            return Dual(1.0, self.der * 0.0)
        return Dual(self.val**o, o * self.val ** (o - 1) * self.der)

    def __rpow__(self, o):
        v = o**self.val
        return Dual(v, v * math.log(o) * self.der)


def _sin(x):
    return Dual(math.sin(x.val), math.cos(x.val) * x.der) if isinstance(x, Dual) else math.sin(x)


def _cos(x):
    return Dual(math.cos(x.val), -math.sin(x.val) * x.der) if isinstance(x, Dual) else math.cos(x)


def _sqrt(x):
    if isinstance(x, Dual):
        r = math.sqrt(x.val)
        return Dual(r, x.der / (2 * r))
    return math.sqrt(x)


def _exp(x):
    if isinstance(x, Dual):
        e = math.exp(x.val)
        return Dual(e, e * x.der)
    return math.exp(x)


_FUNCS = {"sin": _sin, "cos": _cos, "sqrt": _sqrt, "exp": _exp}


def evaluate(node: Node, env: Mapping):
    """Evaluate on floats or :class:`Dual` values found in ``env``."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in env:
            return env[node.name]
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -evaluate(node.arg, env)
    if isinstance(node, Call):
        return _FUNCS[node.func](evaluate(node.arg, env))
    a = evaluate(node.left, env)
    b = evaluate(node.right, env)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if isinstance(a, Dual) or isinstance(b, Dual):
        if not isinstance(a, Dual):
            return b.__rpow__(a)
        return a**b
    return math.pow(a, b)


def value_and_grad(node: Node, names, x, extra: Mapping = None):
    """Value and gradient with respect to the variables ``names`` at ``x``."""
    n = len(names)
    eye = np.eye(n)
    env = dict(extra or {})
    env.update({nm: Dual(xi, eye[i]) for i, (nm, xi) in enumerate(zip(names, x))})
    out = evaluate(node, env)
    if isinstance(out, Dual):
        return out.val, out.der
    return float(out), np.zeros(n)
