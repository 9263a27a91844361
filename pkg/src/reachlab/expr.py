"""Scalar arithmetic expressions: parsing, printing and evaluation.

Expressions define vector-field components (``"x1"``, ``"-x0 - 0.5*x1"``)
and functionals over reachable sets. The grammar is deliberately small::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

so ``^`` binds tighter than unary minus and is right-associative.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnboundVariableError, UnknownIdentifierError

FUNCTIONS = ("sin", "cos", "exp", "tanh", "abs", "sqrt")
BINARY_OPS = ("+", "-", "*", "/", "^")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a FUNCTIONS entry
    arg: "ExprAst"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExprAst"
    right: "ExprAst"


ExprAst = Union[Const, Var, Unary, Binary]


def state_names(n: int) -> list[str]:
    return [f"x{i}" for i in range(n)]


# -- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | name | op | end
    text: str
    pos: int  # 1-based


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    i = 0
    while i < len(src):
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", i + 1)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), i + 1))
        i = m.end()
    tokens.append(_Token("end", "", len(src) + 1))
    return tokens


class _Parser:
    def __init__(self, src: str, allowed_vars: Sequence[str]):
        self.tokens = _tokenize(src)
        self.i = 0
        self.allowed = set(allowed_vars)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind != "op":
            raise ExprSyntaxError(f"expected {text!r}", self.tok.pos)
        self._advance()

    def parse(self) -> ExprAst:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected token {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self._advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self._advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> ExprAst:
        if self.tok.kind == "op" and self.tok.text == "-":
            self._advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> ExprAst:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self._advance()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> ExprAst:
        tok = self.tok
        if tok.kind == "number":
            self._advance()
            return Const(float(tok.text))
        if tok.kind == "name":
            self._advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {tok.text!r} at position {tok.pos}")
                self._advance()
                arg = self.expr()
                self._expect(")")
                return Unary(tok.text, arg)
            if tok.text in self.allowed:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {tok.text!r} needs an argument", self.tok.pos)
            raise UnknownIdentifierError(f"unknown identifier {tok.text!r} at position {tok.pos}")
        if tok.kind == "op" and tok.text == "(":
            self._advance()
            node = self.expr()
            self._expect(")")
            return node
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of input", tok.pos)
        raise ExprSyntaxError(f"unexpected token {tok.text!r}", tok.pos)


def parse_expression(src: str, allowed_vars: Sequence[str] = ()) -> ExprAst:
    """Parse ``src`` into an immutable AST.

    Raises:
        ExprSyntaxError: malformed text, with a 1-based position.
        UnknownIdentifierError: a name that is neither in ``allowed_vars``
            nor a known function.
    """
    return _Parser(src, allowed_vars).parse()


def variables(ast: ExprAst) -> set[str]:
    if isinstance(ast, Var):
        return {ast.name}
    if isinstance(ast, Unary):
        return variables(ast.arg)
    if isinstance(ast, Binary):
        return variables(ast.left) | variables(ast.right)
    return set()


# -- printing ----------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _prec(node: ExprAst) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return _PREC["neg"]
    return _ATOM


def _wrap(node: ExprAst, parenthesize: bool) -> str:
    text = to_text(node)
    return f"({text})" if parenthesize else text


def to_text(ast: ExprAst) -> str:
    """Render with the minimum parentheses needed to re-parse the same tree."""
    if isinstance(ast, Const):
        return repr(float(ast.value))
    if isinstance(ast, Var):
        return ast.name
    if isinstance(ast, Unary):
        if ast.op == "neg":
            return "-" + _wrap(ast.arg, _prec(ast.arg) < _PREC["neg"])
        return f"{ast.op}({to_text(ast.arg)})"
    p = _PREC[ast.op]
    if ast.op == "^":
        left = _wrap(ast.left, _prec(ast.left) <= p)
        right = _wrap(ast.right, _prec(ast.right) < _PREC["neg"])
        return f"{left}^{right}"
    left = _wrap(ast.left, _prec(ast.left) < p)
    right = _wrap(ast.right, _prec(ast.right) <= p)
    return f"{left} {ast.op} {right}"


# -- scalar evaluation -------------------------------------------------------


def _checked(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise DomainError(f"{what} produced a non-finite value")
    return value


def _power(a: float, b: float) -> float:
    if a < 0 and b != math.floor(b):
        raise DomainError(f"negative base {a!r} with non-integer exponent {b!r}")
    if a == 0 and b < 0:
        raise DomainError("division by zero in power")
    try:
        return math.pow(a, b)
    except OverflowError:
        raise DomainError("overflow in power") from None


def _apply_unary(op: str, a: float) -> float:
    if op == "neg":
        return -a
    if op == "sqrt":
        if a < 0:
            raise DomainError(f"sqrt of negative value {a!r}")
        return math.sqrt(a)
    if op == "exp":
        try:
            return math.exp(a)
        except OverflowError:
            raise DomainError("overflow in exp") from None
    if op == "abs":
        return abs(a)
    return getattr(math, op)(a)


def _apply_binary(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if b == 0:
            raise DomainError("division by zero")
        return a / b
    return _power(a, b)


def eval_expression(ast: ExprAst, bindings: Mapping[str, float]) -> float:
    """Evaluate ``ast`` on real ``bindings``.

    Domain violations raise :class:`DomainError` instead of returning NaN.
    """
    if isinstance(ast, Const):
        return ast.value
    if isinstance(ast, Var):
        try:
            return float(bindings[ast.name])
        except KeyError:
            raise UnboundVariableError(f"variable {ast.name!r} is not bound") from None
    if isinstance(ast, Unary):
        return _checked(_apply_unary(ast.op, eval_expression(ast.arg, bindings)), ast.op)
    a = eval_expression(ast.left, bindings)
    b = eval_expression(ast.right, bindings)
    return _checked(_apply_binary(ast.op, a, b), repr(ast.op))


# -- vectorized evaluation ---------------------------------------------------

_NP_UNARY = {
    "neg": np.negative,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
    "sqrt": np.sqrt,
}


def _np_div(a, b):
    if np.any(np.asarray(b) == 0):
        raise DomainError("division by zero")
    return a / b


def _np_pow(a, b):
    a_arr, b_arr = np.asarray(a), np.asarray(b)
    if np.any((a_arr < 0) & (b_arr != np.floor(b_arr))):
        raise DomainError("negative base with non-integer exponent")
    if np.any((a_arr == 0) & (b_arr < 0)):
        raise DomainError("division by zero in power")
    return np.power(a, b)


def _np_sqrt(a):
    if np.any(np.asarray(a) < 0):
        raise DomainError("sqrt of negative value")
    return np.sqrt(a)


_NP_BINARY = {"+": np.add, "-": np.subtract, "*": np.multiply, "/": _np_div, "^": _np_pow}


def lambdify(ast: ExprAst) -> Callable[[Mapping[str, np.ndarray]], np.ndarray]:
    """Compile ``ast`` into a function of array bindings.

    Domain errors are still raised; overflow is left as ``inf`` so that the
    integrator's blow-up check can name the offending time.
    """
    if isinstance(ast, Const):
        value = ast.value
        return lambda env: value
    if isinstance(ast, Var):
        name = ast.name

        def var(env):
            try:
                return env[name]
            except KeyError:
                raise UnboundVariableError(f"variable {name!r} is not bound") from None

        return var
    if isinstance(ast, Unary):
        fn = _np_sqrt if ast.op == "sqrt" else _NP_UNARY[ast.op]
        arg = lambdify(ast.arg)
        return lambda env: fn(arg(env))
    fn = _NP_BINARY[ast.op]
    left, right = lambdify(ast.left), lambdify(ast.right)
    return lambda env: fn(left(env), right(env))
