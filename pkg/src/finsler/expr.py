"""Expression language for Finsler functions and vector fields.

Grammar (see ``docs/grammar.md`` for the normative EBNF)::

    expr     = term { ("+" | "-") term } ;
    term     = unary { ("*" | "/") unary } ;
    unary    = "-" unary | power ;
    power    = atom [ "^" exponent ] ;
    exponent = [ "-" ] NUMBER | "(" rational ")" ;
    rational = [ "-" ] NUMBER [ "/" NUMBER ] ;
    atom     = NUMBER | VARIABLE | PARAM | call | "(" expr ")" ;
    call     = FUNC "(" expr ")" | "pow" "(" expr "," rational ")" ;

Variables are ``x1..xn`` (chart coordinates) and ``y1..yn`` (fibre
coordinates).  Any other identifier that is not a function name is a named
parameter.  Exponents are rational constants so that Taylor jets stay closed
under the chain rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Union

import numpy as np

from finsler.errors import DomainError, ParseError

FUNCTIONS = ("sqrt", "exp", "log", "sin", "cos")
_ALL_FUNCS = FUNCTIONS + ("pow",)


# --------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "y"
    index: int  # 1-based


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: Fraction


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Param, Neg, BinOp, Pow, Call]


def children(node: Expr) -> tuple[Expr, ...]:
    if isinstance(node, (Neg,)):
        return (node.arg,)
    if isinstance(node, Call):
        return (node.arg,)
    if isinstance(node, Pow):
        return (node.base,)
    if isinstance(node, BinOp):
        return (node.left, node.right)
    return ()


def walk(node: Expr) -> Iterator[Expr]:
    yield node
    for c in children(node):
        yield from walk(c)


def depth(node: Expr) -> int:
    """Edges on the longest root-to-leaf path (a leaf has depth 0)."""
    kids = children(node)
    return 0 if not kids else 1 + max(depth(c) for c in kids)


def variables(node: Expr) -> set[Var]:
    return {n for n in walk(node) if isinstance(n, Var)}


def parameters(node: Expr) -> set[str]:
    return {n.name for n in walk(node) if isinstance(n, Param)}


def max_index(node: Expr, kind: str) -> int:
    return max((v.index for v in variables(node) if v.kind == kind), default=0)


# --------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r\n]+)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)
_VAR_RE = re.compile(r"^([xy])([1-9][0-9]*)$")


@dataclass(frozen=True)
class _Token:
    kind: str  # num, ident, op, end
    text: str
    line: int
    column: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col, source=source)
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            for i, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        else:
            tokens.append(_Token(kind, text, line, col))
        pos = m.end()
    tokens.append(_Token("end", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# Parser

_EXPR_START = frozenset({"number", "identifier", "'('", "'-'"})


class _Parser:
    def __init__(self, source: str, dim: int | None, params: frozenset[str] | None, allow_y: bool):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0
        self.dim = dim
        self.params = params
        self.allow_y = allow_y

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, message: str, expected=frozenset(), tok: _Token | None = None):
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column, frozenset(expected), self.source)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise self.error(f"unexpected {found}", {f"'{text}'"})

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}", {"operator", "end of input"})
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            if self.accept("("):
                exponent = self.rational()
                self.expect(")")
            else:
                sign = -1 if self.accept("-") else 1
                exponent = sign * self.number()
            return Pow(base, exponent)
        return base

    def number(self) -> Fraction:
        if self.tok.kind != "num":
            raise self.error("exponent must be a rational constant", {"number"})
        value = Fraction(self.tok.text)
        self.pos += 1
        return value

    def rational(self) -> Fraction:
        sign = -1 if self.accept("-") else 1
        value = self.number()
        if self.accept("/"):
            tok = self.tok
            den = self.number()
            if den == 0:
                raise self.error("zero denominator in exponent", tok=tok)
            value = value / den
        return sign * value

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.pos += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                return self.call(tok)
            m = _VAR_RE.match(tok.text)
            if m:
                kind, index = m.group(1), int(m.group(2))
                if kind == "y" and not self.allow_y:
                    raise self.error(f"fibre variable {tok.text} not allowed in a vector field", tok=tok)
                if self.dim is not None and index > self.dim:
                    raise self.error(f"unknown variable {tok.text} (dimension is {self.dim})", tok=tok)
                return Var(kind, index)
            if tok.text in _ALL_FUNCS:
                raise self.error(f"function {tok.text} requires an argument list", {"'('"})
            if self.params is not None and tok.text not in self.params:
                raise self.error(f"unknown variable or parameter {tok.text!r}", tok=tok)
            return Param(tok.text)
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise self.error(f"unexpected {found}, expected expression", _EXPR_START)

    def call(self, name_tok: _Token) -> Expr:
        name = name_tok.text
        if name not in _ALL_FUNCS:
            raise self.error(f"unknown function {name!r}", set(_ALL_FUNCS), tok=name_tok)
        self.expect("(")
        arg = self.expr()
        if name == "pow":
            if not self.accept(","):
                raise self.error("pow takes 2 arguments", {"','"})
            exponent = self.rational()
            if self.tok.kind == "op" and self.tok.text == ",":
                raise self.error("pow takes 2 arguments")
            self.expect(")")
            return Pow(arg, exponent)
        if self.tok.kind == "op" and self.tok.text == ",":
            raise self.error(f"{name} takes 1 argument")
        self.expect(")")
        return Call(name, arg)


def parse_metric(source: str, dim: int | None = None, params: Mapping[str, float] | set[str] | None = None) -> Expr:
    """Parse a Finsler-function expression.

    ``dim`` bounds the variable indices and ``params`` (if given) is the set of
    admissible parameter names; unknown names are then rejected with a
    positioned :class:`ParseError`.
    """
    names = None if params is None else frozenset(params)
    return _Parser(source, dim, names, allow_y=True).parse()


def parse_field_component(source: str, dim: int | None = None, params=None) -> Expr:
    """Parse one vector-field component; fibre variables are rejected."""
    names = None if params is None else frozenset(params)
    return _Parser(source, dim, names, allow_y=False).parse()


# --------------------------------------------------------------------------
# Printer

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def _fmt_rational(q: Fraction) -> str:
    if q.denominator == 1 and q >= 0:
        return str(q.numerator)
    if q.denominator == 1:
        return f"({q.numerator})"
    return f"({q.numerator}/{q.denominator})"


def to_source(node: Expr) -> str:
    """Print an AST so that ``parse_metric(to_source(a)) == a``."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Param):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Pow):
        base = to_source(node.base)
        if _prec(node.base) < 5:
            base = f"({base})"
        return f"{base}^{_fmt_rational(node.exponent)}"
    if isinstance(node, Neg):
        inner = to_source(node.arg)
        if _prec(node.arg) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_source(node.left), to_source(node.right)
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# Evaluation

class Backend:
    """Elementary operations used by :func:`evaluate`.

    Subclasses override the five elementary functions and :meth:`power`.  The
    arithmetic operators of the value type itself are used for + - * /.
    """

    def const(self, value: float):
        return value

    def sqrt(self, v):
        raise NotImplementedError

    def exp(self, v):
        raise NotImplementedError

    def log(self, v):
        raise NotImplementedError

    def sin(self, v):
        raise NotImplementedError

    def cos(self, v):
        raise NotImplementedError

    def power(self, v, exponent: Fraction):
        raise NotImplementedError

    def divide(self, a, b):
        return a / b


class NumpyBackend(Backend):
    """Vectorised float evaluation with explicit domain checks."""

    def sqrt(self, v):
        if np.any(np.asarray(v) < 0):
            raise DomainError("sqrt of negative value")
        return np.sqrt(v)

    def exp(self, v):
        return np.exp(v)

    def log(self, v):
        if np.any(np.asarray(v) <= 0):
            raise DomainError("log of non-positive value")
        return np.log(v)

    def sin(self, v):
        return np.sin(v)

    def cos(self, v):
        return np.cos(v)

    def power(self, v, exponent: Fraction):
        arr = np.asarray(v, dtype=float)
        if exponent.denominator == 1:
            if exponent < 0 and np.any(arr == 0):
                raise DomainError("negative power of zero")
            return arr ** int(exponent)
        if np.any(arr < 0) or (exponent < 0 and np.any(arr == 0)):
            raise DomainError(f"non-integer power {exponent} of non-positive value")
        return arr ** float(exponent)

    def divide(self, a, b):
        if np.any(np.asarray(b) == 0):
            raise DomainError("division by zero")
        return a / b


NUMPY = NumpyBackend()


def evaluate(node: Expr, x, y, params: Mapping[str, float] | None = None, backend: Backend = NUMPY):
    """Evaluate ``node`` with chart coordinates ``x`` and fibre coordinates ``y``.

    ``x`` and ``y`` are indexable by 0-based coordinate index; entries may be
    floats, numpy arrays (vectorised evaluation) or jets.
    """
    params = params or {}

    def rec(n: Expr):
        if isinstance(n, Num):
            return backend.const(n.value)
        if isinstance(n, Var):
            return (x if n.kind == "x" else y)[n.index - 1]
        if isinstance(n, Param):
            return backend.const(float(params[n.name]))
        try:
            if isinstance(n, Neg):
                return -rec(n.arg)
            if isinstance(n, BinOp):
                a, b = rec(n.left), rec(n.right)
                if n.op == "+":
                    return a + b
                if n.op == "-":
                    return a - b
                if n.op == "*":
                    return a * b
                return backend.divide(a, b)
            if isinstance(n, Pow):
                return backend.power(rec(n.base), n.exponent)
            if isinstance(n, Call):
                fn: Callable = getattr(backend, n.func)
                return fn(rec(n.arg))
        except DomainError as exc:
            if exc.subexpression:
                raise
            raise DomainError(str(exc), to_source(n)) from None
        raise TypeError(f"not an expression node: {n!r}")

    return rec(node)
