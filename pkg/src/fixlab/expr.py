"""Small expression language for distances, self-maps, and comparison functions.

Grammar (decimal literals, declared variables, calls):

    expr   := sum
    sum    := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' rhs)*          where rhs := '-' rhs | atom
    atom   := NUMBER | VARIABLE | '(' expr ')'
            | 'abs' '(' expr ')'
            | ('max' | 'min') '(' expr ',' expr ')'
            | 'if' '(' expr ('<' | '<=' | '=') expr ',' expr ',' expr ')'

All binary operators associate to the left; '^' binds tighter than unary
minus, which binds tighter than '*' and '/'.  Literals are non-negative
decimals (an optional exponent part is accepted); negative values are
produced by unary minus and may appear in programmatically built trees.

Evaluation is over IEEE doubles with a poisoning convention: division by
zero produces NaN, `0 ^ negative` produces +inf (the C pow convention),
and a NaN comparison operand poisons an `if`.  A non-finite result at the
top level raises :class:`EvaluationError`, so callers never see a silent
infinity.  Both branches of `if` are always computed; only the selected
value is kept.  This matches the compiled stack programs bit for bit.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Select",
    "Expression",
    "ExprError",
    "ParseError",
    "UnknownVariableError",
    "EvaluationError",
    "MissingBindingError",
    "Program",
    "parse",
    "to_source",
    "evaluate",
    "variables",
    "compile_program",
]


class ExprError(Exception):
    """Base class for everything this module raises."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"syntax error at offset {offset}: {message}")
        self.offset = offset


class UnknownVariableError(ParseError):
    def __init__(self, name: str, offset: int):
        ExprError.__init__(self, f"unknown variable {name!r} at offset {offset}")
        self.offset = offset
        self.name = name


class EvaluationError(ExprError):
    """Raised when an expression evaluates to a non-finite value."""


class MissingBindingError(ExprError):
    def __init__(self, name: str):
        super().__init__(f"no binding for variable {name!r}")
        self.name = name


# ---------------------------------------------------------------------------
# Syntax tree


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" | "abs"
    operand: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str  # "+" "-" "*" "/" "^" "max" "min"
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Select:
    cmp: str  # "<" "<=" "="
    lhs: "Expression"
    rhs: "Expression"
    on_true: "Expression"
    on_false: "Expression"


Expression = Union[Const, Var, Unary, Binary, Select]

_FUNCTIONS = ("abs", "max", "min", "if")
_CMP_OPS = ("<", "<=", "=")


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<num>   \d+(?:\.\d*)?(?:[eE][+-]?\d+)? | \.\d+(?:[eE][+-]?\d+)? )
  | (?P<name>  [A-Za-z_][A-Za-z_0-9]* )
  | (?P<op>    <= | [-+*/^(),<=] )
  | (?P<ws>    \s+ )
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent, one token of lookahead)


class _Parser:
    def __init__(self, source: str, variables: frozenset[str]):
        self.tokens = _tokenize(source)
        self.variables = variables
        self.i = 0

    def peek(self, ahead: int = 0) -> _Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "end":
            self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.next()
        if tok.kind == "end":
            raise ParseError(f"expected {text!r} but input ended", tok.pos)
        if tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text!r}", tok.pos)
        return tok

    def parse(self) -> Expression:
        node = self.sum()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r} after expression", tok.pos)
        return node

    def sum(self) -> Expression:
        node = self.term()
        while self.peek().text in ("+", "-") and self.peek().kind == "op":
            op = self.next().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.peek().text in ("*", "/") and self.peek().kind == "op":
            op = self.next().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expression:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            # Fold "-LITERAL" into a negative constant unless a '^' follows:
            # -2^2 stays -(2^2) per the usual convention.
            if self.peek(1).kind == "num" and self.peek(2).text != "^":
                self.next()
                num = self.next()
                return Const(-float(num.text))
            self.next()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Expression:
        node = self.atom()
        while self.peek().text == "^" and self.peek().kind == "op":
            self.next()
            node = Binary("^", node, self._power_rhs())
        return node

    def _power_rhs(self) -> Expression:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            if self.peek(1).kind == "num" and self.peek(2).text != "^":
                self.next()
                num = self.next()
                return Const(-float(num.text))
            self.next()
            return Unary("neg", self._power_rhs())
        return self.atom()

    def atom(self) -> Expression:
        tok = self.next()
        if tok.kind == "end":
            raise ParseError("expected an operand but input ended", tok.pos)
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "name":
            if tok.text in _FUNCTIONS:
                return self.call(tok)
            if tok.text in self.variables:
                return Var(tok.text)
            raise UnknownVariableError(tok.text, tok.pos)
        if tok.text == "(":
            node = self.sum()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {tok.text!r}", tok.pos)

    def call(self, tok: _Token) -> Expression:
        name = tok.text
        self.expect("(")
        if name == "abs":
            arg = self.sum()
            self.expect(")")
            return Unary("abs", arg)
        if name in ("max", "min"):
            left = self.sum()
            self.expect(",")
            right = self.sum()
            self.expect(")")
            return Binary(name, left, right)
        # if(lhs CMP rhs, on_true, on_false)
        lhs = self.sum()
        cmp_tok = self.next()
        if cmp_tok.text not in _CMP_OPS:
            raise ParseError(
                f"expected a comparison ('<', '<=' or '='), found {cmp_tok.text!r}",
                cmp_tok.pos,
            )
        rhs = self.sum()
        self.expect(",")
        on_true = self.sum()
        self.expect(",")
        on_false = self.sum()
        self.expect(")")
        return Select(cmp_tok.text, lhs, rhs, on_true, on_false)


def parse(source: str, variables: frozenset[str] | set[str]) -> Expression:
    """Parse ``source`` against a declared variable set.

    Raises :class:`ParseError` (with the byte offset of the problem) on
    malformed input and :class:`UnknownVariableError` for identifiers
    outside ``variables``.
    """
    return _Parser(source, frozenset(variables)).parse()


def variables(expr: Expression) -> frozenset[str]:
    """The set of variable names appearing in ``expr``."""
    found: set[str] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            found.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.operand)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Select):
            stack.extend((node.lhs, node.rhs, node.on_true, node.on_false))
    return frozenset(found)


# ---------------------------------------------------------------------------
# Printer

_LEVEL_SUM = 1
_LEVEL_TERM = 2
_LEVEL_NEG = 3
_LEVEL_POW = 4
_LEVEL_ATOM = 5


def _level(node: Expression) -> int:
    if isinstance(node, Binary):
        if node.op in ("+", "-"):
            return _LEVEL_SUM
        if node.op in ("*", "/"):
            return _LEVEL_TERM
        if node.op == "^":
            return _LEVEL_POW
        return _LEVEL_ATOM  # max / min render as calls
    if isinstance(node, Unary):
        return _LEVEL_ATOM if node.op == "abs" else _LEVEL_NEG
    return _LEVEL_ATOM


def _wrap(node: Expression, minimum: int) -> str:
    text = to_source(node)
    if _level(node) < minimum:
        return f"({text})"
    return text


def to_source(expr: Expression) -> str:
    """Render ``expr`` so that ``parse(to_source(e)) == e`` structurally."""
    if isinstance(expr, Const):
        return repr(float(expr.value))
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        if expr.op == "abs":
            return f"abs({to_source(expr.operand)})"
        # Parenthesize a literal operand so the printed form does not fold
        # back into a negative constant.
        if isinstance(expr.operand, Const):
            return f"-({to_source(expr.operand)})"
        return f"-{_wrap(expr.operand, _LEVEL_NEG)}"
    if isinstance(expr, Binary):
        if expr.op in ("max", "min"):
            return f"{expr.op}({to_source(expr.left)}, {to_source(expr.right)})"
        lvl = _level(expr)
        left = _wrap(expr.left, lvl)
        # A negative literal as the base of '^' needs parens: bare "-2.0^x"
        # would reparse as -(2.0^x).
        if expr.op == "^" and left.startswith("-"):
            left = f"({left})"
        right = _wrap(expr.right, lvl + 1)  # left-associative: (a-b)-c prints bare
        return f"{left} {expr.op} {right}" if expr.op in ("+", "-") else f"{left}{expr.op}{right}"
    if isinstance(expr, Select):
        return (
            f"if({to_source(expr.lhs)} {expr.cmp} {to_source(expr.rhs)}, "
            f"{to_source(expr.on_true)}, {to_source(expr.on_false)})"
        )
    raise TypeError(f"not an expression node: {expr!r}")


# ---------------------------------------------------------------------------
# Tree evaluation


def _pow(a: float, b: float) -> float:
    # C pow conventions: 0^negative -> inf, negative^non-integer -> nan,
    # overflow -> inf.  np.power implements exactly that for doubles.
    with np.errstate(all="ignore"):
        return float(np.power(np.float64(a), np.float64(b)))


def _binary_value(op: str, a: float, b: float) -> float:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return float("nan") if b == 0.0 else a / b
    if op == "^":
        return _pow(a, b)
    if a != a or b != b:  # NaN propagates through max/min
        return float("nan")
    if op == "max":
        return a if a > b else b
    return a if a < b else b


def _tree_value(expr: Expression, bindings: dict[str, float]) -> float:
    if isinstance(expr, Const):
        return float(expr.value)
    if isinstance(expr, Var):
        try:
            return float(bindings[expr.name])
        except KeyError:
            raise MissingBindingError(expr.name) from None
    if isinstance(expr, Unary):
        v = _tree_value(expr.operand, bindings)
        return abs(v) if expr.op == "abs" else -v
    if isinstance(expr, Binary):
        return _binary_value(
            expr.op,
            _tree_value(expr.left, bindings),
            _tree_value(expr.right, bindings),
        )
    # Select: both branches are computed, the comparison picks one, and a
    # NaN comparison operand poisons the whole node.
    lhs = _tree_value(expr.lhs, bindings)
    rhs = _tree_value(expr.rhs, bindings)
    on_true = _tree_value(expr.on_true, bindings)
    on_false = _tree_value(expr.on_false, bindings)
    if lhs != lhs or rhs != rhs:
        return float("nan")
    if expr.cmp == "<":
        return on_true if lhs < rhs else on_false
    if expr.cmp == "<=":
        return on_true if lhs <= rhs else on_false
    return on_true if lhs == rhs else on_false


def evaluate(expr: Expression, bindings: dict[str, float]) -> float:
    """Evaluate ``expr`` under ``bindings``.

    Raises :class:`MissingBindingError` when a variable is unbound and
    :class:`EvaluationError` when the result is not finite (division by
    zero, ``0 ^ negative``, overflow, or an invalid operation upstream).
    """
    value = _tree_value(expr, bindings)
    if not np.isfinite(value):
        raise EvaluationError(
            f"expression produced a non-finite value ({value!r}); "
            "check for division by zero or a negative power of zero"
        )
    return value


# ---------------------------------------------------------------------------
# Compilation to a flat stack program (shared by both evaluation backends)

OP_CONST = 0
OP_VAR = 1
OP_NEG = 2
OP_ABS = 3
OP_ADD = 4
OP_SUB = 5
OP_MUL = 6
OP_DIV = 7
OP_POW = 8
OP_MAX = 9
OP_MIN = 10
OP_SEL_LT = 11
OP_SEL_LE = 12
OP_SEL_EQ = 13

_BINARY_OPCODE = {
    "+": OP_ADD,
    "-": OP_SUB,
    "*": OP_MUL,
    "/": OP_DIV,
    "^": OP_POW,
    "max": OP_MAX,
    "min": OP_MIN,
}

_SELECT_OPCODE = {"<": OP_SEL_LT, "<=": OP_SEL_LE, "=": OP_SEL_EQ}


@dataclass(frozen=True, eq=False)
class Program:
    """Postfix form of an expression: opcode array plus immediates.

    ``imm[i]`` holds the literal for OP_CONST and the variable slot for
    OP_VAR; it is unused elsewhere.  ``stack_need`` is the exact working
    stack depth, so batch evaluators can preallocate.
    """

    code: np.ndarray  # int64
    imm: np.ndarray  # float64
    stack_need: int
    var_order: tuple[str, ...]


def compile_program(expr: Expression, var_order: tuple[str, ...]) -> Program:
    """Flatten ``expr`` into a :class:`Program` over ``var_order`` slots."""
    slots = {name: i for i, name in enumerate(var_order)}
    code: list[int] = []
    imm: list[float] = []

    def emit(op: int, value: float = 0.0) -> None:
        code.append(op)
        imm.append(value)

    def walk(node: Expression) -> None:
        if isinstance(node, Const):
            emit(OP_CONST, float(node.value))
        elif isinstance(node, Var):
            if node.name not in slots:
                raise MissingBindingError(node.name)
            emit(OP_VAR, float(slots[node.name]))
        elif isinstance(node, Unary):
            walk(node.operand)
            emit(OP_NEG if node.op == "neg" else OP_ABS)
        elif isinstance(node, Binary):
            walk(node.left)
            walk(node.right)
            emit(_BINARY_OPCODE[node.op])
        else:
            walk(node.lhs)
            walk(node.rhs)
            walk(node.on_true)
            walk(node.on_false)
            emit(_SELECT_OPCODE[node.cmp])

    walk(expr)

    depth = 0
    peak = 0
    for op in code:
        if op in (OP_CONST, OP_VAR):
            depth += 1
        elif op in (OP_NEG, OP_ABS):
            pass
        elif op >= OP_SEL_LT:
            depth -= 3
        else:
            depth -= 1
        peak = max(peak, depth)
    assert depth == 1, "program must leave exactly one value on the stack"

    return Program(
        code=np.asarray(code, dtype=np.int64),
        imm=np.asarray(imm, dtype=np.float64),
        stack_need=peak,
        var_order=tuple(var_order),
    )
