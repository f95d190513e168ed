"""A small expression language for metric coefficients.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?            # right associative
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Names are the declared chart coordinates plus the constant ``pi``.  The only
functions are ``sin cos exp log sqrt tanh``.  ``**`` is accepted as a synonym
for ``^``.

Expressions compile to closures that evaluate on floats, numpy arrays or
:class:`~brinkmann.jet.Jet` values, so the same tree yields plain values and
exact derivatives.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import jet as J
from .errors import EvaluationError, ExprSyntaxError, UnknownIdentifierError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")
CONSTANTS = {"pi": math.pi}
BINARY_OPS = ("+", "-", "*", "/", "^")
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


# -- AST ------------------------------------------------------------------
# ``pos`` is the byte offset of the node in the source and does not take part
# in structural equality.


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"
    pos: int = field(default=0, compare=False)


Expr = Const | Var | Neg | BinOp | Call


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, Call):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def is_constant(e: Expr) -> bool:
    return not variables(e)


# -- tokenizer ------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


@dataclass
class _Tok:
    kind: str  # num | name | op | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if m is None or m.end() == i:
            raise ExprSyntaxError(f"unexpected character {text[i]!r}", i, text)
        kind = m.lastgroup
        start = m.start(kind)
        tok = m.group(kind)
        toks.append(_Tok(kind, "^" if tok == "**" else tok, start))
        i = m.end()
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, coords: Sequence[str]):
        self.text = text
        self.coords = set(coords)
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: str):
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        raise ExprSyntaxError(f"expected {expected}, found {found}", t.pos, self.text)

    def accept(self, op: str) -> _Tok | None:
        t = self.tok
        if t.kind == "op" and t.text == op:
            self.i += 1
            return t
        return None

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            t = self.tok
            self.i += 1
            left = BinOp(t.text, left, self.term(), t.pos)
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            t = self.tok
            self.i += 1
            left = BinOp(t.text, left, self.factor(), t.pos)
        return left

    def factor(self) -> Expr:
        t = self.accept("-")
        if t is not None:
            return Neg(self.factor(), t.pos)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        t = self.accept("^")
        if t is not None:
            return BinOp("^", base, self.factor(), t.pos)
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Const(float(t.text), t.pos)
        if t.kind == "name":
            self.i += 1
            if t.text in FUNCTIONS:
                if not self.accept("("):
                    self.fail(f"'(' after function {t.text}")
                arg = self.expr()
                if not self.accept(")"):
                    self.fail("')'")
                return Call(t.text, arg, t.pos)
            if t.text in self.coords:
                return Var(t.text, t.pos)
            if t.text in CONSTANTS:
                return Const(CONSTANTS[t.text], t.pos)
            raise UnknownIdentifierError(t.text, t.pos)
        if self.accept("("):
            e = self.expr()
            if not self.accept(")"):
                self.fail("')'")
            return e
        self.fail("number, identifier, function call or '('")


def parse_expr(text: str, coords: Sequence[str]) -> Expr:
    """Parse ``text`` into an AST whose variables are drawn from ``coords``."""
    for c in coords:
        if c in FUNCTIONS or c in CONSTANTS:
            raise ValueError(f"coordinate name {c!r} collides with a reserved name")
    return _Parser(text, coords).parse()


# -- printing ---------------------------------------------------------------


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _PREC["neg"]
    return 5


def to_string(e: Expr) -> str:
    """Render ``e`` with the minimal parentheses needed to re-parse it identically."""
    if isinstance(e, Const):
        if e.value == math.pi:
            return "pi"
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        if _prec(e.operand) < _PREC["neg"]:
            inner = f"({inner})"
        return "-" + inner
    p = _PREC[e.op]
    left, right = to_string(e.left), to_string(e.right)
    if e.op == "^":
        # base binds tighter than everything but atoms; exponent is a factor
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _PREC["neg"]:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left} {e.op} {right}"


# -- evaluation ------------------------------------------------------------

_JET_FUNCS = {
    "sin": J.sin,
    "cos": J.cos,
    "exp": J.exp,
    "log": J.log,
    "sqrt": J.sqrt,
    "tanh": J.tanh,
}


def _check(cond, message, pos):
    if np.any(cond):
        raise EvaluationError(message, pos)


def compile_expr(e: Expr) -> Callable[[Mapping[str, object]], object]:
    """Compile ``e`` to a function of a name -> value mapping.

    Values may be floats, arrays or jets; constant trees are folded.
    """
    f = _compile(e)
    if is_constant(e):
        c = float(f({}))
        return lambda env: c
    return f


def _compile(e: Expr):
    if isinstance(e, Const):
        c = float(e.value)
        return lambda env: c
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Neg):
        f = _compile(e.operand)
        return lambda env: -f(env)
    if isinstance(e, Call):
        f = _compile(e.arg)
        fn = _JET_FUNCS[e.func]
        pos = e.pos
        if e.func == "log":

            def call(env):
                a = f(env)
                _check(J.value(a) <= 0, "log of nonpositive value", pos)
                return fn(a)

            return call
        if e.func == "sqrt":

            def call(env):
                a = f(env)
                v = J.value(a)
                _check(v < 0, "sqrt of negative value", pos)
                if isinstance(a, J.Jet):
                    _check(v == 0, "sqrt is not differentiable at 0", pos)
                return fn(a)

            return call
        return lambda env: fn(f(env))
    lf, rf = _compile(e.left), _compile(e.right)
    pos = e.pos
    op = e.op
    if op == "+":
        return lambda env: lf(env) + rf(env)
    if op == "-":
        return lambda env: lf(env) - rf(env)
    if op == "*":
        return lambda env: lf(env) * rf(env)
    if op == "/":

        def div(env):
            a, b = lf(env), rf(env)
            _check(J.value(b) == 0, "division by zero", pos)
            return a / b

        return div
    # power
    if isinstance(e.right, Const) or is_constant(e.right):
        c = float(_compile(e.right)({}))
        integral = c.is_integer()

        def pw(env):
            a = lf(env)
            v = J.value(a)
            if c < 0:
                _check(v == 0, "division by zero in negative power", pos)
            if not integral:
                _check(v < 0, "non-integer power of negative value", pos)
            if integral and not isinstance(a, J.Jet):
                return np.power(a, c) if np.ndim(a) else float(a) ** c
            return J.power(a, c)

        return pw

    def gpw(env):
        a, b = lf(env), rf(env)
        _check(J.value(a) <= 0, "variable power of nonpositive base", pos)
        if isinstance(a, J.Jet) or isinstance(b, J.Jet):
            if not isinstance(a, J.Jet):
                return J.exp(b * np.log(a))
            return J.exp(b * J.log(a))
        return np.power(a, b)

    return gpw


def eval_expr(e: Expr, bindings: Mapping[str, object], wrt: Sequence[str] | None = None, order=1):
    """Evaluate ``e`` at ``bindings``.

    With ``wrt=None`` returns the plain value.  Otherwise returns a
    :class:`~brinkmann.jet.Jet` whose gradient holds the exact partials with
    respect to the names in ``wrt`` (and the Hessian when ``order=2``).
    """
    missing = variables(e) - set(bindings)
    if missing:
        raise EvaluationError(f"unbound variables: {sorted(missing)}")
    f = _compile(e)
    if wrt is None:
        env = {k: (np.asarray(v, dtype=float) if np.ndim(v) else float(v)) for k, v in bindings.items()}
        return f(env)
    k = len(wrt)
    shape = np.broadcast_shapes(*(np.shape(v) for v in bindings.values())) if bindings else ()
    env = {}
    for name, val in bindings.items():
        val = np.broadcast_to(np.asarray(val, dtype=float), shape)
        if name in wrt:
            env[name] = J.Jet.variable(val, list(wrt).index(name), k, order)
        else:
            env[name] = val if shape else float(val)
    out = f(env)
    if not isinstance(out, J.Jet):
        out = J.Jet.constant(out, k, order, shape)
    return out
