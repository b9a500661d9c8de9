"""A small expression language for the problem data.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are either declared variables, the constants ``e`` and ``pi``, or one of
the functions ``exp ln sqrt abs min max pow``.

Evaluation works on Python floats and on numpy arrays alike.  ``evaluate``
raises :class:`EvalDomainError` on the first invalid operation; the callables
returned by :func:`compile_expr` can instead mark invalid entries with NaN,
which is what the vectorised numerics want.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Literal",
    "Variable",
    "Negate",
    "Binary",
    "Call",
    "ParseError",
    "EvalDomainError",
    "parse",
    "evaluate",
    "compile_expr",
    "to_source",
    "variables",
]

TINY_DIVISOR = 1e-300

CONSTANTS = {"e": math.e, "pi": math.pi}
FUNCTIONS = {"exp": 1, "ln": 1, "sqrt": 1, "abs": 1, "min": 2, "max": 2, "pow": 2}
BINARY_OPS = ("+", "-", "*", "/", "^")


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.message = message
        self.position = position


class EvalDomainError(ArithmeticError):
    """Raised when a subexpression leaves its mathematical domain."""

    def __init__(self, message: str, node: "Expr"):
        self.node = node
        self.subexpression = to_source(node)
        super().__init__(f"{message} in '{self.subexpression}'")


@dataclass(frozen=True)
class Literal:
    value: float


@dataclass(frozen=True)
class Variable:
    name: str


@dataclass(frozen=True)
class Negate:
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


Expr = Union[Literal, Variable, Negate, Binary, Call]


# ---------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            stripped = len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[pos + stripped]!r}", pos + stripped)
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind)
        if kind == "op" and value == "**":
            value = "^"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, allowed_vars: frozenset):
        self.tokens = _tokenize(text)
        self.i = 0
        self.allowed = allowed_vars

    @property
    def tok(self):
        return self.tokens[self.i]

    def accept(self, value: str) -> bool:
        kind, v, _ = self.tok
        if kind == "op" and v == value:
            self.i += 1
            return True
        return False

    def expect(self, value: str) -> None:
        if not self.accept(value):
            kind, v, pos = self.tok
            found = "end of input" if kind == "end" else repr(v)
            raise ParseError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Expr:
        node = self.expr()
        kind, v, pos = self.tok
        if kind != "end":
            raise ParseError(f"unexpected token {v!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            if self.accept("+"):
                node = Binary("+", node, self.term())
            elif self.accept("-"):
                node = Binary("-", node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.unary()
        while True:
            if self.accept("*"):
                node = Binary("*", node, self.unary())
            elif self.accept("/"):
                node = Binary("/", node, self.unary())
            else:
                return node

    def unary(self) -> Expr:
        if self.accept("-"):
            return Negate(self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        kind, v, pos = self.tok
        if kind == "num":
            self.i += 1
            return Literal(float(v))
        if kind == "name":
            self.i += 1
            if v in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[v]:
                    raise ParseError(
                        f"function {v!r} takes {FUNCTIONS[v]} argument(s), got {len(args)}", pos
                    )
                return Call(v, tuple(args))
            if v in self.allowed:
                return Variable(v)
            if v in CONSTANTS:
                return Variable(v)
            raise ParseError(f"unknown identifier {v!r}", pos)
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(v)
        raise ParseError(f"unexpected {found}", pos)


def parse(text: str, allowed_vars: Iterable[str] = ("t",)) -> Expr:
    """Parse ``text`` into an expression tree over ``allowed_vars``.

    >>> parse("2*t+1", {"t"})
    Binary(op='+', left=Binary(op='*', left=Literal(value=2.0), right=Variable(name='t')), right=Literal(value=1.0))
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    allowed = frozenset(allowed_vars)
    clash = allowed & (set(FUNCTIONS) | set(CONSTANTS))
    if clash:
        raise ValueError(f"variable names shadow builtins: {sorted(clash)}")
    return _Parser(text, allowed).parse()


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _fmt_float(x: float) -> str:
    r = repr(float(x))
    if r in ("inf", "-inf", "nan"):
        raise ValueError(f"cannot print non-finite literal {r}")
    return r


def to_source(e: Expr) -> str:
    """Render ``e`` as text that :func:`parse` maps back to the same tree."""
    if isinstance(e, Literal):
        s = _fmt_float(e.value)
        return f"({s})" if s.startswith("-") else s
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Negate):
        return f"-({to_source(e.operand)})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(to_source(a) for a in e.args)})"
    if isinstance(e, Binary):
        # parenthesise every operand that is itself compound; cheap and exact
        def wrap(sub):
            text = to_source(sub)
            return text if isinstance(sub, (Literal, Variable, Call)) else f"({text})"

        return f"{wrap(e.left)} {e.op} {wrap(e.right)}"
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> set[str]:
    """Free variable names of ``e`` (constants excluded)."""
    if isinstance(e, Variable):
        return set() if e.name in CONSTANTS else {e.name}
    if isinstance(e, Literal):
        return set()
    if isinstance(e, Negate):
        return variables(e.operand)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    return set().union(*(variables(a) for a in e.args))


# ---------------------------------------------------------------------------
# evaluation

Evaluator = Callable[[Mapping[str, object]], object]


def _finish(node, strict: bool, out, bad):
    """Either raise on ``bad`` entries or overwrite them with NaN."""
    if np.ndim(bad) == 0:
        if bad:
            if strict:
                raise EvalDomainError(_DOMAIN_MSG.get(_kind(node), "invalid operation"), node)
            return math.nan
        return out
    if bad.any():
        if strict:
            raise EvalDomainError(_DOMAIN_MSG.get(_kind(node), "invalid operation"), node)
        out = np.where(bad, np.nan, out)
    return out


def _kind(node) -> str:
    if isinstance(node, Call):
        return node.fn
    if isinstance(node, Binary):
        return node.op
    return ""


_DOMAIN_MSG = {
    "ln": "logarithm of a non-positive value",
    "sqrt": "square root of a negative value",
    "/": "division by zero",
    "^": "invalid power",
    "pow": "invalid power",
}


def _nan_in(*xs):
    if all(np.ndim(x) == 0 for x in xs):
        return any(math.isnan(x) for x in xs)
    acc = np.zeros(np.broadcast_shapes(*(np.shape(x) for x in xs)), dtype=bool)
    for x in xs:
        acc = acc | np.isnan(x)
    return acc


def _compile(node, strict: bool) -> Evaluator:
    if isinstance(node, Literal):
        v = float(node.value)
        return lambda env: v
    if isinstance(node, Variable):
        if node.name in CONSTANTS:
            v = CONSTANTS[node.name]
            return lambda env: v
        name = node.name

        def var(env):
            try:
                return env[name]
            except KeyError:
                raise KeyError(f"variable {name!r} is not bound") from None

        return var
    if isinstance(node, Negate):
        inner = _compile(node.operand, strict)
        return lambda env: -inner(env)
    if isinstance(node, Binary):
        left = _compile(node.left, strict)
        right = _compile(node.right, strict)
        op = node.op
        if op == "+":
            def add(env):
                a, b = left(env), right(env)
                out = a + b
                return _finish(node, strict, out, np.isnan(out) & ~_nan_in(a, b))
            return add
        if op == "-":
            def sub(env):
                a, b = left(env), right(env)
                out = a - b
                return _finish(node, strict, out, np.isnan(out) & ~_nan_in(a, b))
            return sub
        if op == "*":
            def mul(env):
                a, b = left(env), right(env)
                out = np.multiply(a, b)
                return _finish(node, strict, out, np.isnan(out) & ~_nan_in(a, b))
            return mul
        if op == "/":
            def div(env):
                a, b = left(env), right(env)
                bad = np.abs(b) < TINY_DIVISOR
                safe_b = np.where(bad, 1.0, b)
                out = np.divide(a, safe_b)
                bad = bad | (np.isnan(out) & ~_nan_in(a, b))
                return _finish(node, strict, out, bad)
            return div
        return _power(node, left, right, strict)
    if isinstance(node, Call):
        args = [_compile(a, strict) for a in node.args]
        fn = node.fn
        if fn == "exp":
            a0 = args[0]
            return lambda env: np.exp(a0(env))
        if fn == "abs":
            a0 = args[0]
            return lambda env: np.abs(a0(env))
        if fn == "ln":
            a0 = args[0]

            def ln(env):
                x = a0(env)
                bad = x <= 0
                out = np.log(np.where(bad, 1.0, x))
                return _finish(node, strict, out, bad)
            return ln
        if fn == "sqrt":
            a0 = args[0]

            def sqrt(env):
                x = a0(env)
                bad = x < 0
                out = np.sqrt(np.where(bad, 0.0, x))
                return _finish(node, strict, out, bad)
            return sqrt
        if fn == "min":
            a0, a1 = args
            return lambda env: np.minimum(a0(env), a1(env))
        if fn == "max":
            a0, a1 = args
            return lambda env: np.maximum(a0(env), a1(env))
        if fn == "pow":
            return _power(node, args[0], args[1], strict)
    raise TypeError(f"not an expression node: {node!r}")


def _power(node, base, expo, strict):
    def power(env):
        a, b = base(env), expo(env)
        zero_neg = (a == 0) & (b < 0)
        out = np.power(np.where(zero_neg, 1.0, a), b)
        bad = zero_neg | (np.isnan(out) & ~_nan_in(a, b))
        return _finish(node, strict, out, bad)
    return power


def _scalarize(fn: Evaluator) -> Evaluator:
    def run(env):
        with np.errstate(all="ignore"):
            out = fn(env)
        if np.ndim(out) == 0:
            return float(out)
        return out
    return run


def _compile_masked(node) -> Evaluator:
    """Lean array evaluator: IEEE NaN propagation does most of the work."""
    if isinstance(node, Literal):
        v = float(node.value)
        return lambda env: v
    if isinstance(node, Variable):
        if node.name in CONSTANTS:
            v = CONSTANTS[node.name]
            return lambda env: v
        name = node.name
        return lambda env: env[name]
    if isinstance(node, Negate):
        inner = _compile_masked(node.operand)
        return lambda env: -inner(env)
    if isinstance(node, Binary) or (isinstance(node, Call) and node.fn == "pow"):
        if isinstance(node, Binary):
            op, l_node, r_node = node.op, node.left, node.right
        else:
            op, (l_node, r_node) = "^", node.args
        left = _compile_masked(l_node)
        right = _compile_masked(r_node)
        if op == "+":
            return lambda env: np.add(left(env), right(env))
        if op == "-":
            return lambda env: np.subtract(left(env), right(env))
        if op == "*":
            return lambda env: np.multiply(left(env), right(env))
        if op == "/":
            def div(env):
                b = right(env)
                return np.where(np.abs(b) < TINY_DIVISOR, np.nan, np.divide(left(env), b))
            return div

        def power(env):
            a, b = left(env), right(env)
            return np.where((a == 0) & (b < 0), np.nan, np.power(a, b))
        return power
    fn = node.fn
    args = [_compile_masked(a) for a in node.args]
    if fn == "exp":
        a0 = args[0]
        return lambda env: np.exp(a0(env))
    if fn == "abs":
        a0 = args[0]
        return lambda env: np.abs(a0(env))
    if fn == "ln":
        a0 = args[0]

        def ln(env):
            x = a0(env)
            return np.where(x > 0, np.log(x), np.where(np.isnan(x), x, np.nan))
        return ln
    if fn == "sqrt":
        a0 = args[0]
        return lambda env: np.sqrt(a0(env))
    a0, a1 = args
    if fn == "min":
        return lambda env: np.minimum(a0(env), a1(env))
    return lambda env: np.maximum(a0(env), a1(env))


def compile_expr(e: Expr, strict: bool = True) -> Callable[..., object]:
    """Compile ``e`` into a callable taking keyword bindings.

    With ``strict=False`` invalid entries become NaN instead of raising.
    Array bindings broadcast; scalar bindings return a float.
    """
    inner = _scalarize(_compile(e, True) if strict else _compile_masked(e))

    def call(**bindings):
        env = {k: (np.asarray(v, dtype=float) if np.ndim(v) else float(v)) for k, v in bindings.items()}
        return inner(env)

    call.expr = e
    return call


def evaluate(e: Expr, bindings: Mapping[str, object] | None = None, **kw) -> object:
    """Evaluate ``e`` under ``bindings``; raises :class:`EvalDomainError`."""
    env = dict(bindings or {})
    env.update(kw)
    return compile_expr(e, strict=True)(**env)
