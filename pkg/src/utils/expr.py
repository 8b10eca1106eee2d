"""Closed-form expression language used by problem files.

Grammar (lowest to highest precedence)::

    condition := conj ('or' conj)*
    conj      := compare ('and' compare)*
    compare   := arith ('<=' | '>=' | '<' | '>' | '==' | '!=') arith
    arith     := term (('+' | '-') term)*
    term      := unary (('*' | '/') unary)*
    unary     := '-' unary | power
    power     := atom ('^' unary)?
    atom      := number | name | func '(' args ')' | '(' arith ')'
               | 'piecewise' '(' branch (',' branch)* ')'
    branch    := condition ':' arith | 'else' ':' arith

Evaluation works on floats and on 1-D numpy arrays alike, so a system map
can be applied to a whole grid of points in one call.
"""

from __future__ import annotations

import functools
import logging
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import (
    ExpressionEvaluationError,
    ExpressionSyntaxError,
    UndeclaredVariableError,
)

logger = logging.getLogger(__name__)

FUNCTIONS = {
    "exp": 1,
    "ln": 1,
    "abs": 1,
    "floor": 1,
    "sqrt": 1,
    "min": -2,
    "max": -2,
}
KEYWORDS = {"and", "or", "else", "piecewise"}
COMPARISONS = ("<=", ">=", "==", "!=", "<", ">")

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class TokenKind(Enum):
    NUMBER = "number"
    NAME = "name"
    OP = "operator"
    COMPARE = "comparison"
    LPAREN = "("
    RPAREN = ")"
    COMMA = ","
    COLON = ":"
    EOF = "end of input"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    offset: int


@dataclass(frozen=True)
class Number:
    value: float
    offset: int = 0


@dataclass(frozen=True)
class Variable:
    name: str
    offset: int = 0


@dataclass(frozen=True)
class Negate:
    operand: "Node"
    offset: int = 0


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Call:
    name: str
    args: Tuple["Node", ...]
    offset: int = 0


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Logical:
    op: str
    left: "Node"
    right: "Node"
    offset: int = 0


@dataclass(frozen=True)
class Piecewise:
    branches: Tuple[Tuple["Node", "Node"], ...]
    default: Optional["Node"] = None
    offset: int = 0


Node = Union[Number, Variable, Negate, BinaryOp, Call, Compare, Logical, Piecewise]
Value = Union[float, np.ndarray]


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its source text."""

    root: Node
    text: str
    variables: Tuple[str, ...]

    def evaluate(self, bindings: Mapping[str, Any]) -> Value:
        """Evaluate under the given variable bindings."""
        return evaluate(self, bindings)

    def __call__(self, **bindings: Any) -> Value:
        return evaluate(self, bindings)

    @property
    def free_variables(self) -> Tuple[str, ...]:
        """Names the expression actually uses, sorted."""
        return tuple(sorted(_collect_names(self.root)))


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def tokenize(text: str) -> List[Token]:
    """Split expression text into tokens with byte offsets."""
    tokens: List[Token] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        offset = _byte_offset(text, i)
        match = _NUMBER.match(text, i)
        if match:
            tokens.append(Token(TokenKind.NUMBER, match.group(0), offset))
            i = match.end()
            continue
        match = _NAME.match(text, i)
        if match:
            tokens.append(Token(TokenKind.NAME, match.group(0), offset))
            i = match.end()
            continue
        two = text[i:i + 2]
        if two in COMPARISONS:
            tokens.append(Token(TokenKind.COMPARE, two, offset))
            i += 2
            continue
        if ch in "<>":
            tokens.append(Token(TokenKind.COMPARE, ch, offset))
        elif ch in "+-*/^":
            tokens.append(Token(TokenKind.OP, ch, offset))
        elif ch == "(":
            tokens.append(Token(TokenKind.LPAREN, ch, offset))
        elif ch == ")":
            tokens.append(Token(TokenKind.RPAREN, ch, offset))
        elif ch == ",":
            tokens.append(Token(TokenKind.COMMA, ch, offset))
        elif ch == ":":
            tokens.append(Token(TokenKind.COLON, ch, offset))
        else:
            raise ExpressionSyntaxError(f"Unexpected character '{ch}'", offset)
        i += 1
    tokens.append(Token(TokenKind.EOF, "", _byte_offset(text, len(text))))
    return tokens


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, text: str, declared: Iterable[str]):
        self.tokens = tokenize(text)
        self.pos = 0
        self.declared = set(declared)

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def _advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind is not TokenKind.EOF:
            self.pos += 1
        return token

    def _expect(self, kind: TokenKind, what: str) -> Token:
        token = self.current
        if token.kind is not kind:
            raise ExpressionSyntaxError(f"Expected {what}, found {token.kind.value}", token.offset)
        return self._advance()

    def _at_op(self, *ops: str) -> bool:
        return self.current.kind is TokenKind.OP and self.current.text in ops

    def _at_name(self, name: str) -> bool:
        return self.current.kind is TokenKind.NAME and self.current.text == name

    def parse(self) -> Node:
        node = self.arith()
        if self.current.kind is not TokenKind.EOF:
            raise ExpressionSyntaxError(f"Unexpected '{self.current.text}'", self.current.offset)
        return node

    def condition(self) -> Node:
        node = self.conjunction()
        while self._at_name("or"):
            token = self._advance()
            node = Logical("or", node, self.conjunction(), token.offset)
        return node

    def conjunction(self) -> Node:
        node = self.comparison()
        while self._at_name("and"):
            token = self._advance()
            node = Logical("and", node, self.comparison(), token.offset)
        return node

    def comparison(self) -> Node:
        left = self.arith()
        token = self.current
        if token.kind is not TokenKind.COMPARE:
            raise ExpressionSyntaxError("Expected comparison", token.offset)
        self._advance()
        return Compare(token.text, left, self.arith(), token.offset)

    def arith(self) -> Node:
        node = self.term()
        while self._at_op("+", "-"):
            token = self._advance()
            node = BinaryOp(token.text, node, self.term(), token.offset)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self._at_op("*", "/"):
            token = self._advance()
            node = BinaryOp(token.text, node, self.unary(), token.offset)
        return node

    def unary(self) -> Node:
        if self._at_op("-"):
            token = self._advance()
            return Negate(self.unary(), token.offset)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self._at_op("^"):
            token = self._advance()
            return BinaryOp("^", base, self.unary(), token.offset)
        return base

    def atom(self) -> Node:
        token = self.current
        if token.kind is TokenKind.NUMBER:
            self._advance()
            return Number(float(token.text), token.offset)
        if token.kind is TokenKind.LPAREN:
            self._advance()
            node = self.arith()
            self._expect(TokenKind.RPAREN, "')'")
            return node
        if token.kind is TokenKind.NAME:
            if token.text == "piecewise":
                return self.piecewise()
            if token.text in FUNCTIONS:
                return self.call()
            if token.text in KEYWORDS:
                raise ExpressionSyntaxError(f"Unexpected keyword '{token.text}'", token.offset)
            if token.text not in self.declared:
                raise UndeclaredVariableError(token.text, token.offset)
            self._advance()
            return Variable(token.text, token.offset)
        raise ExpressionSyntaxError(f"Unexpected {token.kind.value}", token.offset)

    def call(self) -> Node:
        name = self._advance()
        self._expect(TokenKind.LPAREN, f"'(' after {name.text}")
        args = [self.arith()]
        while self.current.kind is TokenKind.COMMA:
            self._advance()
            args.append(self.arith())
        self._expect(TokenKind.RPAREN, "')'")
        arity = FUNCTIONS[name.text]
        if (arity > 0 and len(args) != arity) or (arity < 0 and len(args) < -arity):
            raise ExpressionSyntaxError(f"Wrong number of arguments for {name.text}", name.offset)
        return Call(name.text, tuple(args), name.offset)

    def piecewise(self) -> Node:
        start = self._advance()
        self._expect(TokenKind.LPAREN, "'(' after piecewise")
        branches: List[Tuple[Node, Node]] = []
        default: Optional[Node] = None
        while True:
            if default is not None:
                raise ExpressionSyntaxError("'else' must be the last branch", self.current.offset)
            if self._at_name("else"):
                self._advance()
                self._expect(TokenKind.COLON, "':'")
                default = self.arith()
            else:
                cond = self.condition()
                self._expect(TokenKind.COLON, "':'")
                branches.append((cond, self.arith()))
            if self.current.kind is not TokenKind.COMMA:
                break
            self._advance()
        self._expect(TokenKind.RPAREN, "')'")
        if not branches:
            raise ExpressionSyntaxError("piecewise needs at least one guarded branch", start.offset)
        return Piecewise(tuple(branches), default, start.offset)


def parse(text: str, declared_vars: Iterable[str] = ()) -> Expression:
    """Parse expression text; every free name must be declared."""
    declared = tuple(declared_vars)
    root = _Parser(text, declared).parse()
    logger.debug(f"Parsed expression: {text}")
    return Expression(root, text, declared)


def constant(text: Union[str, float, int]) -> float:
    """Read a number or a constant expression such as "1/3"."""
    if isinstance(text, (int, float)):
        return float(text)
    value = evaluate(parse(str(text)), {})
    return float(value)


def _collect_names(node: Node) -> set:
    if isinstance(node, Variable):
        return {node.name}
    if isinstance(node, Number):
        return set()
    if isinstance(node, Negate):
        return _collect_names(node.operand)
    if isinstance(node, (BinaryOp, Compare, Logical)):
        return _collect_names(node.left) | _collect_names(node.right)
    if isinstance(node, Call):
        return set().union(*(_collect_names(a) for a in node.args))
    names: set = set()
    for cond, branch in node.branches:
        names |= _collect_names(cond) | _collect_names(branch)
    if node.default is not None:
        names |= _collect_names(node.default)
    return names


def to_text(expr: Union[Expression, Node]) -> str:
    """Print a tree as fully parenthesised text that parses back to it."""
    node = expr.root if isinstance(expr, Expression) else expr
    if isinstance(node, Number):
        if node.value < 0:
            return f"(-{abs(node.value)!r})"
        return repr(node.value)
    if isinstance(node, Variable):
        return node.name
    if isinstance(node, Negate):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, BinaryOp):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, (Compare, Logical)):
        return f"{to_text(node.left)} {node.op} {to_text(node.right)}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    parts = [f"{to_text(c)}: {to_text(b)}" for c, b in node.branches]
    if node.default is not None:
        parts.append(f"else: {to_text(node.default)}")
    return f"piecewise({', '.join(parts)})"


class _Evaluator:
    """Tree walker over float or array bindings."""

    def __init__(self, bindings: Mapping[str, Any]):
        self.bindings = {k: (np.asarray(v, dtype=float) if np.ndim(v) else float(v))
                         for k, v in bindings.items()}
        shapes = [np.shape(v) for v in self.bindings.values() if np.ndim(v)]
        self.shape: Optional[Tuple[int, ...]] = np.broadcast_shapes(*shapes) if shapes else None

    def restricted(self, mask: np.ndarray) -> "_Evaluator":
        sub = {k: (np.broadcast_to(v, self.shape)[mask] if np.ndim(v) else v)
               for k, v in self.bindings.items()}
        return _Evaluator(sub)

    def run(self, node: Node) -> Any:
        if isinstance(node, Number):
            return node.value
        if isinstance(node, Variable):
            if node.name not in self.bindings:
                raise ExpressionEvaluationError(f"Unbound variable '{node.name}'", node)
            return self.bindings[node.name]
        if isinstance(node, Negate):
            return -self.run(node.operand)
        if isinstance(node, BinaryOp):
            return self._binary(node)
        if isinstance(node, Call):
            return self._call(node)
        if isinstance(node, Compare):
            return self._compare(node)
        if isinstance(node, Logical):
            left, right = self.run(node.left), self.run(node.right)
            if node.op == "and":
                return np.logical_and(left, right)
            return np.logical_or(left, right)
        return self._piecewise(node)

    def _binary(self, node: BinaryOp) -> Any:
        left, right = self.run(node.left), self.run(node.right)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            if np.any(np.asarray(right) == 0):
                raise ExpressionEvaluationError("Division by zero", node)
            return left / right
        base = np.asarray(left, dtype=float)
        exponent = np.asarray(right, dtype=float)
        if np.any((base == 0) & (exponent < 0)):
            raise ExpressionEvaluationError("Zero raised to a negative power", node)
        if np.any((base < 0) & (exponent != np.floor(exponent))):
            raise ExpressionEvaluationError("Negative base with fractional exponent", node)
        with np.errstate(over="ignore"):
            return np.power(base, exponent)

    def _call(self, node: Call) -> Any:
        args = [self.run(a) for a in node.args]
        name = node.name
        if name == "ln":
            if np.any(np.asarray(args[0]) <= 0):
                raise ExpressionEvaluationError("Logarithm of a nonpositive value", node)
            return np.log(args[0])
        if name == "sqrt":
            if np.any(np.asarray(args[0]) < 0):
                raise ExpressionEvaluationError("Square root of a negative value", node)
            return np.sqrt(args[0])
        if name == "exp":
            with np.errstate(over="ignore"):
                return np.exp(args[0])
        if name == "abs":
            return np.abs(args[0])
        if name == "floor":
            return np.floor(args[0])
        if name == "min":
            return functools.reduce(np.minimum, args)
        return functools.reduce(np.maximum, args)

    def _compare(self, node: Compare) -> Any:
        left, right = self.run(node.left), self.run(node.right)
        return {
            "<=": np.less_equal,
            ">=": np.greater_equal,
            "<": np.less,
            ">": np.greater,
            "==": np.equal,
            "!=": np.not_equal,
        }[node.op](left, right)

    def _piecewise(self, node: Piecewise) -> Any:
        if self.shape is None:
            for cond, branch in node.branches:
                if bool(self.run(cond)):
                    return self.run(branch)
            if node.default is None:
                raise ExpressionEvaluationError("No piecewise branch matched", node)
            return self.run(node.default)

        result = np.empty(self.shape, dtype=float)
        remaining = np.ones(self.shape, dtype=bool)
        guarded: List[Tuple[Optional[Node], Node]] = list(node.branches)
        if node.default is not None:
            guarded.append((None, node.default))
        for cond, branch in guarded:
            if cond is None:
                mask = remaining.copy()
            else:
                mask = np.broadcast_to(self.run(cond), self.shape) & remaining
            if mask.any():
                result[mask] = np.broadcast_to(self.restricted(mask).run(branch), (int(mask.sum()),))
                remaining &= ~mask
        if remaining.any():
            raise ExpressionEvaluationError("No piecewise branch matched", node)
        return result


def evaluate(expr: Union[Expression, Node], bindings: Mapping[str, Any]) -> Value:
    """Evaluate an expression; floats in, float out; arrays in, array out."""
    node = expr.root if isinstance(expr, Expression) else expr
    value = _Evaluator(bindings).run(node)
    if np.ndim(value) == 0:
        return float(value)
    return np.asarray(value, dtype=float)


def bind_point(point: Sequence[float], parameters: Optional[Dict[str, float]] = None) -> Dict[str, Any]:
    """Bindings x1..xd for one point (or columns of a batch) plus parameters."""
    array = np.asarray(point, dtype=float)
    bindings: Dict[str, Any] = dict(parameters or {})
    if array.ndim == 1:
        for i, value in enumerate(array):
            bindings[f"x{i + 1}"] = float(value)
    else:
        for i in range(array.shape[1]):
            bindings[f"x{i + 1}"] = array[:, i]
    return bindings
