"""A small Pratt parser for the scalar expressions used in run configurations.

Grammar, loosest to tightest binding::

    expr   := expr ('+' | '-') expr
            | expr ('*' | '/') expr
            | '-' expr
            | expr '^' expr            (right associative)
            | number | x | y | pi | name '(' expr ')' | '(' expr ')'

Unary minus binds tighter than ``*`` but looser than ``^``, so ``-x^2`` is
``-(x^2)`` and ``2*-x`` is allowed while ``2*+3`` is not (there is no unary
plus).  Evaluation works on floats and on numpy arrays alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS = {"pi": math.pi}
VARIABLES = ("x", "y")

# binding powers
_ADD = 10
_MUL = 20
_NEG = 30
_POW = 40


class ExprSyntaxError(ValueError):
    """Parse failure; ``offset`` is the byte offset of the offending token."""

    def __init__(self, message: str, offset: int, src: str):
        self.offset = offset
        self.src = src
        super().__init__(f"{message} at offset {offset}")


class ExprDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "ExprAst"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ExprAst"
    right: "ExprAst"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "ExprAst"


ExprAst = Union[Num, Var, Const, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "name", "op" or "end"
    text: str
    offset: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        match = _TOKEN.match(src, pos)
        if match is None or match.end() == pos:
            start = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ExprSyntaxError(f"unexpected character {src[start]!r}", _byte_offset(src, start), src)
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), _byte_offset(src, start)))
        pos = match.end()
    tokens.append(_Token("end", "", len(src.encode())))
    return tokens


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode())


class _Parser:
    def __init__(self, src: str, variables: tuple[str, ...]):
        self.src = src
        self.variables = variables
        self.tokens = _tokenize(src)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token):
        raise ExprSyntaxError(message, tok.offset, self.src)

    def expect(self, text: str):
        tok = self.advance()
        if tok.text != text or tok.kind != "op":
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            self.fail(f"expected {text!r}, found {found}", tok)

    def parse(self) -> ExprAst:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "end":
            self.fail(f"expected an operator or end of input, found {tok.text!r}", tok)
        return node

    def expression(self, min_bp: int) -> ExprAst:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in "+-*/^":
                return left
            if tok.text in "+-":
                lbp, rbp = _ADD, _ADD + 1
            elif tok.text in "*/":
                lbp, rbp = _MUL, _MUL + 1
            else:
                lbp, rbp = _POW, _POW  # right associative
            if lbp < min_bp:
                return left
            self.advance()
            left = BinOp(tok.text, left, self.expression(rbp))

    def prefix(self) -> ExprAst:
        tok = self.advance()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "name":
            return self.name(tok)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_NEG))
        if tok.kind == "op" and tok.text == "(":
            inner = self.expression(0)
            self.expect(")")
            return inner
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        self.fail(f"expected a number, name, '-' or '(', found {found}", tok)

    def name(self, tok: _Token) -> ExprAst:
        if tok.text in FUNCTIONS:
            self.expect("(")
            arg = self.expression(0)
            if self.peek().text == ",":
                self.fail(f"{tok.text} takes exactly one argument", self.peek())
            self.expect(")")
            return Call(tok.text, arg)
        if self.peek().kind == "op" and self.peek().text == "(":
            self.fail(f"unknown function {tok.text!r}", tok)
        if tok.text in CONSTANTS:
            return Const(tok.text)
        if tok.text in self.variables:
            return Var(tok.text)
        self.fail(f"unknown identifier {tok.text!r}", tok)


def parse_expression(src: str, variables: tuple[str, ...] = VARIABLES) -> ExprAst:
    """Parse ``src``; only the names in ``variables`` are accepted as variables."""
    return _Parser(src, tuple(variables)).parse()


def eval_expr(ast: ExprAst, point: dict | None = None, **bindings):
    """Evaluate ``ast`` with variables bound from ``point`` and keyword arguments.

    Values may be floats or numpy arrays.  Taking the log of a nonpositive
    number or the square root of a negative one raises ``ExprDomainError``.
    """
    env = dict(point or {})
    env.update(bindings)
    return _eval(ast, env)


def _eval(node: ExprAst, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Var):
        if node.name not in env:
            raise KeyError(f"variable {node.name!r} is not bound")
        return env[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        arg = _eval(node.arg, env)
        if node.func == "log" and np.any(np.asarray(arg) <= 0):
            raise ExprDomainError("log of a nonpositive number")
        if node.func == "sqrt" and np.any(np.asarray(arg) < 0):
            raise ExprDomainError("sqrt of a negative number")
        out = FUNCTIONS[node.func](arg)
        return float(out) if np.ndim(out) == 0 else out
    left = _eval(node.left, env)
    right = _eval(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if np.any(np.asarray(right) == 0):
            raise ExprDomainError("division by zero")
        return left / right
    with np.errstate(invalid="raise", over="ignore"):
        try:
            out = np.power(np.asarray(left, dtype=float), right)
        except FloatingPointError:
            raise ExprDomainError("negative base raised to a non-integer power") from None
    return float(out) if np.ndim(out) == 0 else out


def to_source(node: ExprAst) -> str:
    """Fully parenthesized source text that parses back to the same tree."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    return f"({to_source(node.left)} {node.op} {to_source(node.right)})"


def free_variables(node: ExprAst) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, (Num, Const)):
        return set()
    if isinstance(node, (Neg, Call)):
        return free_variables(node.operand if isinstance(node, Neg) else node.arg)
    return free_variables(node.left) | free_variables(node.right)


def compile_expression(src: str, variables: tuple[str, ...] = VARIABLES):
    """Parse once and return a function of the variables, in order."""
    ast = parse_expression(src, variables)

    def f(*args):
        return eval_expr(ast, dict(zip(variables, args)))

    f.ast = ast
    f.source = src
    return f
