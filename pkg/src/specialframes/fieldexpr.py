"""Parser and evaluator for scalar coefficient expressions.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'

``-a^b`` parses as ``-(a^b)`` and ``a^b^c`` as ``a^(b^c)``.  There is no
implicit multiplication.  Names resolve to declared variables, the constant
``pi``, or one of the functions in :data:`FUNCTIONS`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

from .errors import EvaluationError, ParseError

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "abs")
CONSTANTS = {"pi": math.pi}

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


@dataclass(frozen=True)
class Const:
    value: float
    offset: int = 0


@dataclass(frozen=True)
class Var:
    index: int
    offset: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    offset: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    offset: int = 0


Node = Union[Const, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expr:
    """A parsed expression bound to positional variable names."""

    ast: Node
    names: tuple[str, ...]
    text: str = ""

    @property
    def arity(self) -> int:
        return len(self.names)

    def __call__(self, point) -> float:
        return evaluate(self, point)

    def pretty(self) -> str:
        return pretty(self.ast, self.names)


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.names = {name: i for i, name in enumerate(names)}
        self.pos = 0

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def error(self, message: str, expected: str = "", offset: int | None = None):
        at = self.pos if offset is None else offset
        # offsets must stay inside the input, so clamp the end-of-input position
        at = max(0, min(at, len(self.text) - 1))
        return ParseError(at, message, expected)

    def parse(self) -> Node:
        self.skip()
        if self.pos >= len(self.text):
            raise ParseError(0, "empty expression", "number, name or '('")
        node = self.expr()
        self.skip()
        if self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch == ")":
                raise self.error("unbalanced ')'", "operator or end of input")
            raise self.error(f"unexpected {ch!r}", "operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek() in ("+", "-"):
            op, at = self.text[self.pos], self.pos
            self.pos += 1
            node = BinOp(op, node, self.term(), at)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek() in ("*", "/"):
            op, at = self.text[self.pos], self.pos
            self.pos += 1
            node = BinOp(op, node, self.unary(), at)
        return node

    def unary(self) -> Node:
        if self.peek() == "-":
            at = self.pos
            self.pos += 1
            return Neg(self.unary(), at)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek() == "^":
            at = self.pos
            self.pos += 1
            return BinOp("^", base, self.unary(), at)
        return base

    def atom(self) -> Node:
        ch = self.peek()
        at = self.pos
        if ch == "":
            raise self.error("unexpected end of input", "number, name or '('")
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                if self.pos >= len(self.text):
                    raise self.error("unbalanced '('", "')'", offset=at)
                raise self.error(f"unexpected {self.text[self.pos]!r}", "')'")
            self.pos += 1
            return node
        m = _NUMBER.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return Const(float(m.group(0)), at)
        m = _NAME.match(self.text, self.pos)
        if m:
            name = m.group(0)
            self.pos = m.end()
            if name in FUNCTIONS:
                if self.peek() != "(":
                    raise self.error(f"function {name!r} needs an argument", "'('")
                open_at = self.pos
                self.pos += 1
                arg = self.expr()
                if self.peek() != ")":
                    if self.pos >= len(self.text):
                        raise self.error("unbalanced '('", "')'", offset=open_at)
                    raise self.error(f"unexpected {self.text[self.pos]!r}", "')'")
                self.pos += 1
                return Call(name, arg, at)
            if name in self.names:
                return Var(self.names[name], at)
            if name in CONSTANTS:
                return Const(CONSTANTS[name], at)
            raise self.error(f"unknown identifier {name!r}", "variable, constant or function", at)
        if ch == ")":
            raise self.error("unbalanced ')'", "number, name or '('")
        raise self.error(f"unexpected {ch!r}", "number, name or '('")


def parse(text: str, names: Sequence[str]) -> Expr:
    """Parse ``text`` with variables bound by position to ``names``."""
    names = tuple(names)
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate variable names: {names}")
    for name in names:
        if not _NAME.fullmatch(name) or name in FUNCTIONS or name in CONSTANTS:
            raise ValueError(f"invalid variable name {name!r}")
    return Expr(_Parser(text, names).parse(), names, text)


def _eval(node: Node, x: Sequence[float]) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(x[node.index])
    if isinstance(node, Neg):
        return -_eval(node.operand, x)
    if isinstance(node, BinOp):
        a = _eval(node.left, x)
        b = _eval(node.right, x)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise EvaluationError("division by zero", node.offset)
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, ZeroDivisionError):
            raise EvaluationError(f"invalid power {a!r}^{b!r}", node.offset) from None
        except OverflowError:
            raise EvaluationError("overflow in power", node.offset) from None
    # Call
    v = _eval(node.arg, x)
    f = node.func
    if f == "log" and v <= 0.0:
        raise EvaluationError(f"log of non-positive value {v!r}", node.offset)
    if f == "sqrt" and v < 0.0:
        raise EvaluationError(f"sqrt of negative value {v!r}", node.offset)
    try:
        if f == "abs":
            return abs(v)
        return getattr(math, f)(v)
    except (ValueError, OverflowError) as exc:
        raise EvaluationError(f"{f}({v!r}): {exc}", node.offset) from None


def evaluate(expr: Expr | Node, point: Sequence[float], arity: int | None = None) -> float:
    """Evaluate in IEEE double precision, operands left to right."""
    if isinstance(expr, Expr):
        if len(point) != expr.arity:
            raise ValueError(f"point has {len(point)} coordinates, expression expects {expr.arity}")
        try:
            return _eval(expr.ast, point)
        except EvaluationError as exc:
            raise EvaluationError(str(exc), exc.offset, expr.text) from None
    if arity is not None and len(point) != arity:
        raise ValueError(f"point has {len(point)} coordinates, expected {arity}")
    return _eval(expr, point)


def pretty(node: Node, names: Sequence[str]) -> str:
    """Fully parenthesized text that parses back to an evaluation-equivalent tree."""
    if isinstance(node, Const):
        text = repr(float(node.value))
        return f"({text})" if node.value < 0 or text.startswith("-") else text
    if isinstance(node, Var):
        return names[node.index]
    if isinstance(node, Neg):
        return f"(-{pretty(node.operand, names)})"
    if isinstance(node, BinOp):
        return f"({pretty(node.left, names)} {node.op} {pretty(node.right, names)})"
    return f"{node.func}({pretty(node.arg, names)})"
