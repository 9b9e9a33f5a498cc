"""A tiny expression language for the weight function g of the Preskill rule.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = primary , [ "^" , unary ] ;          (* right associative *)
    primary = number | "x" | call | "(" , expr , ")" ;
    call    = name , "(" , expr , { "," , expr } , ")" ;
    name    = "abs" | "sqrt" | "exp" | "log" | "min" | "max" | "pow" ;
    number  = digits , [ "." , [ digits ] ] , [ exponent ]
            | "." , digits , [ exponent ] ;
    exponent = ("e" | "E") , [ "+" | "-" ] , digits ;

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``. Whitespace is
ignored. ``abs``, ``sqrt``, ``exp`` and ``log`` take one argument, ``pow`` two,
``min``/``max`` two or more.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .config import tolerances
from .errors import ConstraintError, DSLSyntaxError, GDomainError, UnknownIdentifierError

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "GExpr",
    "GFunction",
    "parse_g",
    "to_source",
    "evaluate",
    "validate_g",
    "compile_g",
]

LOG_FLOOR = 1e-300

ARITY = {"abs": (1, 1), "sqrt": (1, 1), "exp": (1, 1), "log": (1, 1), "pow": (2, 2), "min": (2, None), "max": (2, None)}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "GExpr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "GExpr"
    right: "GExpr"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["GExpr", ...]


GExpr = Union[Num, Var, Neg, BinOp, Call]


# -- lexer -------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # number | name | op | end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        ch = source[pos]
        if ord(ch) > 127:
            raise DSLSyntaxError("non-ASCII character", pos, {"ASCII input"})
        m = _TOKEN.match(source, pos)
        if m is None:
            raise DSLSyntaxError(f"unexpected character {ch!r}", pos, {"number", "x", "function", "operator"})
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# -- parser ------------------------------------------------------------------

_PRIMARY_START = frozenset({"number", "x", "function", "(", "-"})


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def at_op(self, *ops: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in ops

    def expect(self, op: str) -> _Token:
        if not self.at_op(op):
            found = self.tok.text or "end of input"
            raise DSLSyntaxError(f"unexpected {found!r}", self.tok.offset, {op})
        return self.advance()

    def parse(self) -> GExpr:
        node = self.expr()
        if self.tok.kind != "end":
            raise DSLSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset, {"operator", "end of input"})
        return node

    def expr(self) -> GExpr:
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> GExpr:
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> GExpr:
        if self.at_op("-"):
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> GExpr:
        base = self.primary()
        if self.at_op("^"):
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> GExpr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            value = float(t.text)
            if not math.isfinite(value):
                raise DSLSyntaxError("numeric literal out of range", t.offset, {"finite number"})
            return Num(value)
        if t.kind == "name":
            self.advance()
            if t.text == "x":
                return Var()
            if t.text not in ARITY:
                raise UnknownIdentifierError(t.text, t.offset)
            return self.call(t)
        if self.at_op("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = t.text or "end of input"
        raise DSLSyntaxError(f"unexpected {found!r}", t.offset, _PRIMARY_START)

    def call(self, name: _Token) -> GExpr:
        self.expect("(")
        lo, hi = ARITY[name.text]
        args = [self.expr()]
        while len(args) < lo or (self.at_op(",") and (hi is None or len(args) < hi)):
            self.expect(",")
            args.append(self.expr())
        self.expect(")")
        return Call(name.text, tuple(args))


def parse_g(source: str) -> GExpr:
    """Parse g-function source text into an expression tree."""
    if not source or not source.strip():
        raise DSLSyntaxError("empty expression", 0, _PRIMARY_START)
    return _Parser(source).parse()


# -- canonical printer -------------------------------------------------------

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _level(node: GExpr) -> int:
    if isinstance(node, BinOp):
        return _LEVEL[node.op]
    if isinstance(node, Neg):
        return _LEVEL["neg"]
    return 5


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_source(node: GExpr) -> str:
    """Print ``node`` with the minimum parentheses; ``parse_g`` inverts it."""
    if isinstance(node, Num):
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = to_source(node.operand)
        return "-" + (f"({inner})" if _level(node.operand) < 3 else inner)
    lvl = _LEVEL[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _level(node.left) <= 4:
            left = f"({left})"
        if _level(node.right) < 3:
            right = f"({right})"
        return f"{left}^{right}"
    if _level(node.left) < lvl:
        left = f"({left})"
    if _level(node.right) <= lvl:
        right = f"({right})"
    return f"{left} {node.op} {right}"


# -- evaluation --------------------------------------------------------------


def _domain_fail(message: str, bad: np.ndarray, xs: np.ndarray):
    xs = np.atleast_1d(xs)
    idx = np.flatnonzero(np.broadcast_to(bad, xs.shape))
    raise GDomainError(message, xs[idx[0]] if idx.size else np.nan)


def _eval(node: GExpr, xs: np.ndarray) -> np.ndarray:
    if isinstance(node, Num):
        return np.full(xs.shape, node.value)
    if isinstance(node, Var):
        return xs
    if isinstance(node, Neg):
        return -_eval(node.operand, xs)
    if isinstance(node, BinOp):
        a = _eval(node.left, xs)
        b = _eval(node.right, xs)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = a * b
        elif node.op == "/":
            if np.any(b == 0):
                _domain_fail("division by zero", b == 0, xs)
            out = a / b
        else:
            out = np.power(a, b)
            bad = ~np.isfinite(out)
            if np.any(bad):
                _domain_fail("power outside its domain", bad, xs)
        return out
    args = [_eval(a, xs) for a in node.args]
    name = node.name
    if name == "abs":
        return np.abs(args[0])
    if name == "sqrt":
        if np.any(args[0] < 0):
            _domain_fail("sqrt of a negative number", args[0] < 0, xs)
        return np.sqrt(args[0])
    if name == "exp":
        out = np.exp(args[0])
        if np.any(~np.isfinite(out)):
            _domain_fail("exp overflow", ~np.isfinite(out), xs)
        return out
    if name == "log":
        if np.any(args[0] < LOG_FLOOR):
            _domain_fail("log of a value below 1e-300", args[0] < LOG_FLOOR, xs)
        return np.log(args[0])
    if name == "pow":
        out = np.power(args[0], args[1])
        if np.any(~np.isfinite(out)):
            _domain_fail("pow outside its domain", ~np.isfinite(out), xs)
        return out
    if name == "min":
        return np.minimum.reduce(args)
    return np.maximum.reduce(args)


def evaluate(node: GExpr, x):
    """Evaluate at a scalar or an array of points; raises GDomainError."""
    xs = np.asarray(x, dtype=float)
    with np.errstate(all="ignore"):
        out = _eval(node, xs)
        bad = ~np.isfinite(out)
        if np.any(bad):
            _domain_fail("non-finite value", bad, xs)
    if np.ndim(x) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class GFunction:
    """A validated g: continuous by construction, g(0) = 0, nonnegative on [0, 1]."""

    expr: GExpr
    source: str = field(default="", compare=False)

    def __call__(self, x):
        return evaluate(self.expr, x)

    @property
    def canonical(self) -> str:
        return to_source(self.expr)


def validate_g(expr: GExpr, source: str | None = None, rng=None) -> GFunction:
    """Check the premises on g and wrap it.

    g is sampled on a 1024-point grid of [0, 1] plus 1024 uniform random
    points. Nonnegativity and finiteness are checked on those points first,
    then g(0) = 0.
    """
    from .sampling import as_rng

    tol = tolerances()
    rng = as_rng(0 if rng is None else rng)
    xs = np.concatenate([np.linspace(0.0, 1.0, 1024), rng.generator.uniform(0.0, 1.0, 1024)])
    try:
        values = evaluate(expr, xs)
    except GDomainError as exc:
        raise ConstraintError("g is finite on [0, 1]", exc.x, float("nan")) from exc
    negative = np.flatnonzero(values < -tol.g_nonnegative)
    if negative.size:
        positive_x = negative[xs[negative] > 0]
        k = positive_x[0] if positive_x.size else negative[0]
        raise ConstraintError("g(x) >= 0", xs[k], values[k])
    g0 = values[0]
    if abs(g0) > tol.g_zero:
        raise ConstraintError("g(0) = 0", 0.0, g0)
    return GFunction(expr, source if source is not None else to_source(expr))


def compile_g(source: str, rng=None) -> GFunction:
    """Parse and validate in one step."""
    return validate_g(parse_g(source), source, rng)
