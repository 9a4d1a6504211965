"""Arithmetic expressions in x and t, evaluated on numpy arrays.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          right associative
    atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'

so ``-2^2 = -4`` and ``2^-1 = 0.5``.
"""
from __future__ import annotations

from dataclasses import dataclass
import re

import numpy as np

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "abs": 1, "sqrt": 1, "pow": 2}
CONSTANTS = {"pi": np.pi}
VARIABLES = ("x", "t")

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))")


class ExprSyntaxError(ValueError):
    def __init__(self, text, offset, expected, found):
        self.offset = offset
        self.expected = tuple(expected)
        self.found = found
        where = "end of input" if found is None else repr(found)
        super().__init__(f"syntax error at byte {offset} ({where}): expected "
                         + " or ".join(self.expected) + f" in {text!r}")


class ExprEvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


def _tokenize(text):
    toks, pos = [], 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            return toks, pos
        kind = m.lastgroup
        toks.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return toks, None


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks, bad = _tokenize(text)
        self.bad = bad
        self.i = 0

    def _offset(self, char_pos):
        return len(self.text[:char_pos].encode("utf-8"))

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def fail(self, expected):
        tok = self.peek()
        if tok is None:
            pos = self.bad if self.bad is not None else len(self.text)
            found = None if self.bad is None else self.text[self.bad]
        else:
            pos, found = tok[2], tok[1]
        raise ExprSyntaxError(self.text, self._offset(pos), expected, found)

    def accept(self, value):
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] == value:
            self.i += 1
            return True
        return False

    def expect(self, value):
        if not self.accept(value):
            self.fail([f"'{value}'"])

    def parse(self):
        node = self.expr()
        if self.peek() is not None or self.bad is not None:
            self.fail(["operator", "end of input"])
        return node

    def expr(self):
        node = self.term()
        while True:
            if self.accept("+"):
                node = Binary("+", node, self.term())
            elif self.accept("-"):
                node = Binary("-", node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            if self.accept("*"):
                node = Binary("*", node, self.unary())
            elif self.accept("/"):
                node = Binary("/", node, self.unary())
            else:
                return node

    def unary(self):
        if self.accept("-"):
            return Unary("-", self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        tok = self.peek()
        start = ["number", "name", "'('", "'-'"]
        if tok is None:
            self.fail(start)
        kind, val, _ = tok
        if kind == "num":
            self.i += 1
            return Num(float(val))
        if kind == "name":
            self.i += 1
            if val in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                if not self.accept(")"):
                    self.fail(["')'", "','"])
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(self.text, self._offset(tok[2]),
                                          [f"{FUNCTIONS[val]} argument(s) to {val}"], val)
                return Call(val, tuple(args))
            if val in CONSTANTS:
                return Num(CONSTANTS[val])
            if val in VARIABLES:
                return Var(val)
            self.i -= 1
            self.fail(["x", "t", "pi"] + [f"{f}(...)" for f in FUNCTIONS])
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        self.fail(start)


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        return -_eval(node.arg, env)
    if isinstance(node, Binary):
        l, r = _eval(node.left, env), _eval(node.right, env)
        if node.op == "+":
            return l + r
        if node.op == "-":
            return l - r
        if node.op == "*":
            return l * r
        if node.op == "/":
            if np.any(np.asarray(r) == 0):
                raise ExprEvalError("division by zero")
            return l / r
        return _pow(l, r)
    args = [_eval(a, env) for a in node.args]
    if node.name == "pow":
        return _pow(*args)
    if node.name == "sqrt":
        if np.any(np.asarray(args[0]) < 0):
            raise ExprEvalError("sqrt of a negative number")
        return np.sqrt(args[0])
    return {"sin": np.sin, "cos": np.cos, "exp": np.exp, "abs": np.abs}[node.name](args[0])


def _pow(base, ex):
    base, ex = np.asarray(base, dtype=float), np.asarray(ex, dtype=float)
    if np.any((base < 0) & (ex != np.round(ex))):
        raise ExprEvalError("non-integer power of a negative number")
    if np.any((base == 0) & (ex < 0)):
        raise ExprEvalError("division by zero in a negative power")
    return base ** ex


class Expr:
    """Parsed expression; call as ``e(x)`` or ``e(x, t)``."""

    def __init__(self, text):
        self.text = text
        self.tree = _Parser(text).parse()

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = _eval(self.tree, {"x": x, "t": t})
        out = np.broadcast_to(np.asarray(out, dtype=float), x.shape)
        return out.copy() if out.ndim else float(out)

    def uses(self, name):
        return _uses(self.tree, name)

    def __repr__(self):
        return f"Expr({self.text!r})"

    def __eq__(self, other):
        return isinstance(other, Expr) and other.tree == self.tree

    def __hash__(self):
        return hash(self.tree)


def _uses(node, name):
    if isinstance(node, Var):
        return node.name == name
    if isinstance(node, Unary):
        return _uses(node.arg, name)
    if isinstance(node, Binary):
        return _uses(node.left, name) or _uses(node.right, name)
    if isinstance(node, Call):
        return any(_uses(a, name) for a in node.args)
    return False


def parse_expr(text):
    if not isinstance(text, str):
        raise TypeError(f"expression must be a string, got {type(text).__name__}")
    return Expr(text)
