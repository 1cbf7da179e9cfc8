"""Expression language for integrand and exact-solution formulas.

A problem's integrand is written as text over the variables ``t`` (time),
``x`` (state) and ``Dx`` (fractional derivative of the state); exact
solutions may reference ``t`` only.  The grammar is deliberately small:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ['^' unary]            # right-associative
    atom    := NUMBER | 'pi' | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

Unary minus binds looser than '^', so ``-2^2`` is ``-(2^2) = -4``.  There
is no implicit multiplication.  Available functions: ln, exp, sqrt, sin,
cos, abs, gamma.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import gammafn

FUNCTIONS = ("ln", "exp", "sqrt", "sin", "cos", "abs", "gamma")
DEFAULT_VARIABLES = frozenset({"t", "x", "Dx"})


class ExpressionError(Exception):
    """Base class for all expression-language failures."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class LexError(ExpressionError):
    pass


class ParseError(ExpressionError):
    pass


class EvaluationError(ExpressionError):
    pass


# --------------------------------------------------------------------------
# tokens
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Token:
    kind: str  # number | identifier | operator | lparen | rparen | comma
    lexeme: str
    position: int


_NUMBER_RE = re.compile(r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_OPERATORS = "+-*/^"


def tokenize(source: str) -> list[Token]:
    """Longest-match lexing; whitespace is skipped."""
    if not source.strip():
        raise LexError("empty expression", 0)
    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER_RE.match(source, i)
        if m:
            tokens.append(Token("number", m.group(), i))
            i = m.end()
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            tokens.append(Token("identifier", m.group(), i))
            i = m.end()
            continue
        if ch in _OPERATORS:
            tokens.append(Token("operator", ch, i))
        elif ch == "(":
            tokens.append(Token("lparen", ch, i))
        elif ch == ")":
            tokens.append(Token("rparen", ch, i))
        elif ch == ",":
            tokens.append(Token("comma", ch, i))
        else:
            raise LexError(f"illegal character {ch!r}", i)
        i += 1
    return tokens


# --------------------------------------------------------------------------
# syntax tree
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Expr:
    """Base node.  ``position`` is excluded from structural equality."""

    position: int = field(compare=False)


@dataclass(frozen=True)
class Number(Expr):
    value: float = 0.0


@dataclass(frozen=True)
class Variable(Expr):
    name: str = ""


@dataclass(frozen=True)
class Constant(Expr):
    name: str = "pi"


@dataclass(frozen=True)
class Unary(Expr):
    operand: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Binary(Expr):
    op: str = "+"
    left: Expr = None  # type: ignore[assignment]
    right: Expr = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Call(Expr):
    func: str = ""
    arg: Expr = None  # type: ignore[assignment]


_CONSTANTS = {"pi": math.pi}


class _Parser:
    def __init__(self, tokens: list[Token], allowed_vars: frozenset[str] | set[str]):
        self.tokens = tokens
        self.allowed = frozenset(allowed_vars)
        self.i = 0

    def peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def advance(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise ParseError("unexpected end of expression", self._end_pos())
        self.i += 1
        return tok

    def _end_pos(self) -> int:
        if self.tokens:
            last = self.tokens[-1]
            return last.position + len(last.lexeme)
        return 0

    def expect(self, kind: str, lexeme: str | None = None) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind or (lexeme is not None and tok.lexeme != lexeme):
            want = lexeme or kind
            got = tok.lexeme if tok else "end of expression"
            pos = tok.position if tok else self._end_pos()
            raise ParseError(f"expected {want!r}, found {got!r}", pos)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok is not None:
            raise ParseError(f"unexpected token {tok.lexeme!r}", tok.position)
        return e

    def expr(self) -> Expr:
        node = self.term()
        while (tok := self.peek()) and tok.kind == "operator" and tok.lexeme in "+-":
            self.advance()
            node = Binary(tok.position, tok.lexeme, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while (tok := self.peek()) and tok.kind == "operator" and tok.lexeme in "*/":
            self.advance()
            node = Binary(tok.position, tok.lexeme, node, self.unary())
        return node

    def unary(self) -> Expr:
        tok = self.peek()
        if tok and tok.kind == "operator" and tok.lexeme == "-":
            self.advance()
            return Unary(tok.position, self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        tok = self.peek()
        if tok and tok.kind == "operator" and tok.lexeme == "^":
            self.advance()
            # right-associative; exponent may carry its own unary minus
            return Binary(tok.position, "^", base, self.unary())
        return base

    def atom(self) -> Expr:
        tok = self.advance()
        if tok.kind == "number":
            return Number(tok.position, float(tok.lexeme))
        if tok.kind == "lparen":
            inner = self.expr()
            self.expect("rparen")
            return inner
        if tok.kind == "identifier":
            nxt = self.peek()
            if nxt and nxt.kind == "lparen":
                if tok.lexeme not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok.lexeme!r}", tok.position)
                self.advance()
                arg = self.expr()
                self.expect("rparen")
                return Call(tok.position, tok.lexeme, arg)
            if tok.lexeme in _CONSTANTS:
                return Constant(tok.position, tok.lexeme)
            if tok.lexeme in self.allowed:
                return Variable(tok.position, tok.lexeme)
            raise ParseError(
                f"unknown or disallowed variable {tok.lexeme!r}", tok.position
            )
        raise ParseError(f"unexpected token {tok.lexeme!r}", tok.position)


def parse(tokens: list[Token], allowed_vars: frozenset[str] | set[str] = DEFAULT_VARIABLES) -> Expr:
    return _Parser(tokens, allowed_vars).parse()


def parse_expression(source: str, allowed_vars: frozenset[str] | set[str] = DEFAULT_VARIABLES) -> Expr:
    return parse(tokenize(source), allowed_vars)


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------

def evaluate(e: Expr, env: dict[str, float]) -> float:
    if isinstance(e, Number):
        return e.value
    if isinstance(e, Constant):
        return _CONSTANTS[e.name]
    if isinstance(e, Variable):
        try:
            return float(env[e.name])
        except KeyError:
            raise EvaluationError(f"unbound variable {e.name!r}", e.position) from None
    if isinstance(e, Unary):
        return -evaluate(e.operand, env)
    if isinstance(e, Binary):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise EvaluationError("division by zero", e.position)
            return a / b
        # '^'
        if a < 0.0 and b != math.floor(b):
            raise EvaluationError(
                "negative base with non-integer exponent", e.position
            )
        if a == 0.0 and b < 0.0:
            raise EvaluationError("zero raised to a negative power", e.position)
        try:
            return math.pow(a, b)
        except OverflowError:
            raise EvaluationError("overflow in power", e.position) from None
    if isinstance(e, Call):
        v = evaluate(e.arg, env)
        if e.func == "ln":
            if v <= 0.0:
                raise EvaluationError(f"ln of non-positive value {v!r}", e.position)
            return math.log(v)
        if e.func == "sqrt":
            if v < 0.0:
                raise EvaluationError(f"sqrt of negative value {v!r}", e.position)
            return math.sqrt(v)
        if e.func == "exp":
            try:
                return math.exp(v)
            except OverflowError:
                raise EvaluationError("overflow in exp", e.position) from None
        if e.func == "sin":
            return math.sin(v)
        if e.func == "cos":
            return math.cos(v)
        if e.func == "abs":
            return abs(v)
        # gamma
        try:
            return gammafn.gamma(v)
        except gammafn.GammaPoleError:
            raise EvaluationError(f"gamma pole at {v!r}", e.position) from None
        except OverflowError:
            raise EvaluationError("overflow in gamma", e.position) from None
    raise TypeError(f"not an expression node: {e!r}")


def variables(e: Expr) -> frozenset[str]:
    """Names of all variables referenced by the expression."""
    if isinstance(e, Variable):
        return frozenset({e.name})
    if isinstance(e, Unary):
        return variables(e.operand)
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Call):
        return variables(e.arg)
    return frozenset()


# --------------------------------------------------------------------------
# pretty printing
# --------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        if e.op in "+-":
            return _PREC_ADD
        if e.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    if isinstance(e, Unary):
        return _PREC_UNARY
    return _PREC_ATOM


def to_source(e: Expr) -> str:
    """Render with the minimal parentheses needed to reparse identically."""
    if isinstance(e, Number):
        return repr(e.value)
    if isinstance(e, Constant):
        return e.name
    if isinstance(e, Variable):
        return e.name
    if isinstance(e, Unary):
        inner = to_source(e.operand)
        if _prec(e.operand) < _PREC_UNARY:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Binary):
        p = _prec(e)
        left = to_source(e.left)
        right = to_source(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < p and not isinstance(e.right, Unary):
                right = f"({right})"
        else:
            if _prec(e.left) < p:
                left = f"({left})"
            if _prec(e.right) <= p:
                right = f"({right})"
        return f"{left} {e.op} {right}" if e.op in "+-" else f"{left}{e.op}{right}"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# compilation to a stack program (shared by both evaluation backends)
# --------------------------------------------------------------------------

OP_CONST = 0
OP_T = 1
OP_X = 2
OP_DX = 3
OP_NEG = 4
OP_ADD = 5
OP_SUB = 6
OP_MUL = 7
OP_DIV = 8
OP_POW = 9
OP_LN = 10
OP_EXP = 11
OP_SQRT = 12
OP_SIN = 13
OP_COS = 14
OP_ABS = 15
OP_GAMMA = 16

_VAR_OPS = {"t": OP_T, "x": OP_X, "Dx": OP_DX}
_BIN_OPS = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
_CALL_OPS = {
    "ln": OP_LN,
    "exp": OP_EXP,
    "sqrt": OP_SQRT,
    "sin": OP_SIN,
    "cos": OP_COS,
    "abs": OP_ABS,
    "gamma": OP_GAMMA,
}


@dataclass(frozen=True)
class Program:
    """Flat postfix form of an expression.

    ``ops`` is an (n, 2) int32 array of (opcode, argument) pairs, where the
    argument indexes ``consts`` for OP_CONST and is unused otherwise.
    """

    ops: np.ndarray
    consts: np.ndarray
    max_stack: int


def compile_program(e: Expr) -> Program:
    ops: list[tuple[int, int]] = []
    consts: list[float] = []

    def push_const(value: float) -> None:
        consts.append(value)
        ops.append((OP_CONST, len(consts) - 1))

    def emit(node: Expr) -> None:
        # constant subtrees are folded at compile time
        if not variables(node):
            push_const(evaluate(node, {}))
            return
        if isinstance(node, Variable):
            ops.append((_VAR_OPS[node.name], 0))
        elif isinstance(node, Unary):
            emit(node.operand)
            ops.append((OP_NEG, 0))
        elif isinstance(node, Binary):
            emit(node.left)
            emit(node.right)
            ops.append((_BIN_OPS[node.op], 0))
        elif isinstance(node, Call):
            emit(node.arg)
            ops.append((_CALL_OPS[node.func], 0))
        else:
            raise TypeError(f"not an expression node: {node!r}")

    emit(e)

    depth = 0
    max_depth = 0
    for code, _ in ops:
        if code in (OP_CONST, OP_T, OP_X, OP_DX):
            depth += 1
        elif code in (OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW):
            depth -= 1
        max_depth = max(max_depth, depth)

    return Program(
        ops=np.asarray(ops, dtype=np.int32).reshape(-1, 2),
        consts=np.asarray(consts, dtype=np.float64),
        max_stack=max_depth,
    )
