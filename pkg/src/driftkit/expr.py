"""Small infix expression language for user-written drift functions.

Grammar (whitespace is insignificant)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | '+' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

so ``^`` binds tighter than unary minus (``-x^2 == -(x^2)``) and is right
associative.  Variables are ``x`` and ``n``; functions are ``exp``, ``ln``,
``min``, ``max`` and ``ceil``.

>>> parse("exp(-1+2*x/100)*x/100")(50.0)
0.5
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError

VARIABLES = frozenset({"x", "n"})
FUNCTIONS = {"exp": (1, 1), "ln": (1, 1), "ceil": (1, 1), "min": (2, None), "max": (2, None)}

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


class ExprSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class Var:
    name: str

    def eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise DomainError(f"variable {self.name!r} is not bound") from None


@dataclass(frozen=True)
class Neg:
    operand: object

    def eval(self, env):
        return -self.operand.eval(env)


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            if np.any(np.asarray(b) == 0.0):
                raise DomainError("division by zero")
            return a / b
        if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
            return _power_array(a, b)
        return _power(a, b)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def eval(self, env):
        vals = [arg.eval(env) for arg in self.args]
        if any(isinstance(v, np.ndarray) for v in vals):
            return self._eval_array(vals)
        if self.name == "exp":
            try:
                return math.exp(vals[0])
            except OverflowError:
                raise DomainError(f"exp overflow at {vals[0]!r}") from None
        if self.name == "ln":
            if vals[0] <= 0.0:
                raise DomainError(f"ln of non-positive value {vals[0]!r}")
            return math.log(vals[0])
        if self.name == "ceil":
            return float(math.ceil(vals[0]))
        if self.name == "min":
            return min(vals)
        return max(vals)

    def _eval_array(self, vals):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            if self.name == "exp":
                out = np.exp(vals[0])
                if not np.all(np.isfinite(out)):
                    raise DomainError("exp overflow")
                return out
            if self.name == "ln":
                if np.any(np.asarray(vals[0]) <= 0.0):
                    raise DomainError("ln of non-positive value")
                return np.log(vals[0])
        if self.name == "ceil":
            return np.ceil(vals[0])
        reduce = np.minimum if self.name == "min" else np.maximum
        out = vals[0]
        for v in vals[1:]:
            out = reduce(out, v)
        return out


def _power_array(a, b):
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if np.any((a == 0.0) & (b < 0.0)):
        raise DomainError("zero raised to a negative power")
    if np.any((a < 0.0) & (b != np.floor(b))):
        raise DomainError("negative base with non-integer exponent")
    with np.errstate(over="ignore"):
        out = np.power(a, b)
    if not np.all(np.isfinite(out)):
        raise DomainError("power overflow")
    return out


def _power(a, b):
    if a == 0.0 and b < 0.0:
        raise DomainError("zero raised to a negative power")
    if a < 0.0 and b != math.floor(b):
        raise DomainError(f"negative base {a!r} with non-integer exponent {b!r}")
    try:
        return math.pow(a, b)
    except OverflowError:
        raise DomainError(f"power overflow {a!r}^{b!r}") from None


def _walk(node):
    yield node
    if isinstance(node, Neg):
        yield from _walk(node.operand)
    elif isinstance(node, Binary):
        yield from _walk(node.left)
        yield from _walk(node.right)
    elif isinstance(node, Call):
        for arg in node.args:
            yield from _walk(arg)


@dataclass(frozen=True)
class Expr:
    """A parsed expression; call it with ``x`` (and ``n`` when used)."""

    source: str
    root: object

    def __call__(self, x, n: float | None = None):
        """Evaluate at scalar or array ``x``; arrays give arrays back."""
        if isinstance(x, np.ndarray):
            env = {"x": x.astype(float)}
        else:
            env = {"x": float(x)}
        if n is not None:
            env["n"] = float(n)
        out = self.root.eval(env)
        if isinstance(env["x"], np.ndarray):
            return np.broadcast_to(np.asarray(out, dtype=float), env["x"].shape).copy()
        return float(out)

    def evaluate(self, env: Mapping[str, float]) -> float:
        return float(self.root.eval(env))

    @property
    def variables(self) -> frozenset:
        return frozenset(node.name for node in _walk(self.root) if isinstance(node, Var))

    @property
    def uses_ceil(self) -> bool:
        return any(isinstance(node, Call) and node.name == "ceil" for node in _walk(self.root))

    def __str__(self):
        return self.source


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text):
        tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ExprSyntaxError(f"unexpected character at offset {pos}: {text[pos:pos + 10]!r}")
            kind = m.lastgroup
            tokens.append((kind, m.group(kind)))
            pos = m.end()
        return tokens

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise ExprSyntaxError(f"unexpected end of expression in {self.text!r}")
        if value is not None and tok[1] != value:
            raise ExprSyntaxError(f"expected {value!r}, found {tok[1]!r} in {self.text!r}")
        self.pos += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ExprSyntaxError("empty expression")
        node = self.expr()
        if self.pos != len(self.tokens):
            raise ExprSyntaxError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Neg(self.unary())
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, value = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if self.peek() == ("op", "("):
                if value not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {value!r}")
                self.take("(")
                args = [self.expr()]
                while self.peek() == ("op", ","):
                    self.take()
                    args.append(self.expr())
                self.take(")")
                lo, hi = FUNCTIONS[value]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    raise ExprSyntaxError(f"{value}() takes {lo}{'' if hi == lo else '+'} argument(s), got {len(args)}")
                return Call(value, tuple(args))
            if value not in VARIABLES:
                raise ExprSyntaxError(f"unknown identifier {value!r}; only x and n are allowed")
            return Var(value)
        if value == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ExprSyntaxError(f"unexpected token {value!r} in {self.text!r}")


def parse(text: str) -> Expr:
    """Parse ``text`` into an :class:`Expr`; raises :class:`ExprSyntaxError`."""
    return Expr(text, _Parser(text).parse())
