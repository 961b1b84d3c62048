"""Small arithmetic expression language used by scenario files.

Grammar (whitespace insensitive)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus and is right associative, so ``-x^2`` is
``-(x^2)`` and ``a^b^c`` is ``a^(b^c)``.  Functions: exp, log, sin, cos, sqrt.
The only named constant is ``pi``.

Trees are immutable and built through simplifying constructors, so
``parse_expression(str(e)) == e`` for every tree produced here.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import EvaluationError, ExpressionSyntaxError, UnknownIdentifierError

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
CONSTANTS = {"pi": math.pi}

# postfix opcodes shared with the numba kernels
OP_CONST, OP_VAR, OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW, OP_NEG = range(8)
OP_EXP, OP_LOG, OP_SIN, OP_COS, OP_SQRT = range(8, 13)
_BINARY_OPCODES = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "^": OP_POW}
_CALL_OPCODES = {"exp": OP_EXP, "log": OP_LOG, "sin": OP_SIN, "cos": OP_COS, "sqrt": OP_SQRT}

# printing precedence
_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


class Expression:
    """Base class of expression tree nodes."""

    __slots__ = ()
    prec = _PREC["atom"]

    def evaluate(self, values: Mapping[str, float]) -> float:
        raise NotImplementedError

    def diff(self, var: str) -> "Expression":
        raise NotImplementedError

    def variables(self) -> frozenset:
        raise NotImplementedError

    def rename(self, mapping: Mapping[str, str]) -> "Expression":
        raise NotImplementedError

    def _py(self, index: Mapping[str, int]) -> str:
        raise NotImplementedError

    def _postfix(self, index, consts, out) -> None:
        raise NotImplementedError

    def depth(self) -> int:
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return not self.variables()

    def __call__(self, **values: float) -> float:
        return self.evaluate(values)

    # operator sugar for builders
    def __add__(self, other):
        return add(self, as_expression(other))

    def __radd__(self, other):
        return add(as_expression(other), self)

    def __sub__(self, other):
        return sub(self, as_expression(other))

    def __rsub__(self, other):
        return sub(as_expression(other), self)

    def __mul__(self, other):
        return mul(self, as_expression(other))

    def __rmul__(self, other):
        return mul(as_expression(other), self)

    def __truediv__(self, other):
        return div(self, as_expression(other))

    def __rtruediv__(self, other):
        return div(as_expression(other), self)

    def __pow__(self, other):
        return power(self, as_expression(other))

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True, slots=True)
class Num(Expression):
    value: float

    def evaluate(self, values):
        return self.value

    def diff(self, var):
        return ZERO

    def variables(self):
        return frozenset()

    def rename(self, mapping):
        return self

    def depth(self):
        return 1

    def __str__(self):
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 or text.startswith("-") else text

    def _py(self, index):
        return f"({float(self.value)!r})"

    def _postfix(self, index, consts, out):
        consts.append(float(self.value))
        out.append((OP_CONST, len(consts) - 1))


@dataclass(frozen=True, slots=True)
class Var(Expression):
    name: str

    def evaluate(self, values):
        try:
            if self.name in values:
                return float(values[self.name])
            return CONSTANTS[self.name]
        except KeyError:
            raise UnknownIdentifierError(self.name) from None

    def diff(self, var):
        return ONE if var == self.name else ZERO

    def variables(self):
        return frozenset() if self.name in CONSTANTS else frozenset([self.name])

    def rename(self, mapping):
        return Var(mapping.get(self.name, self.name))

    def depth(self):
        return 1

    def __str__(self):
        return self.name

    def _py(self, index):
        if self.name in index:
            return f"x[{index[self.name]}]"
        if self.name in CONSTANTS:
            return repr(CONSTANTS[self.name])
        raise UnknownIdentifierError(self.name)

    def _postfix(self, index, consts, out):
        if self.name in index:
            out.append((OP_VAR, index[self.name]))
        elif self.name in CONSTANTS:
            consts.append(CONSTANTS[self.name])
            out.append((OP_CONST, len(consts) - 1))
        else:
            raise UnknownIdentifierError(self.name)


@dataclass(frozen=True, slots=True)
class Neg(Expression):
    arg: Expression
    prec = _PREC["neg"]

    def evaluate(self, values):
        return -self.arg.evaluate(values)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def variables(self):
        return self.arg.variables()

    def rename(self, mapping):
        return neg(self.arg.rename(mapping))

    def depth(self):
        return self.arg.depth()

    def __str__(self):
        inner = str(self.arg)
        return f"-({inner})" if self.arg.prec < _PREC["neg"] else f"-{inner}"

    def _py(self, index):
        return f"(-{self.arg._py(index)})"

    def _postfix(self, index, consts, out):
        self.arg._postfix(index, consts, out)
        out.append((OP_NEG, 0))


@dataclass(frozen=True, slots=True)
class BinOp(Expression):
    op: str
    left: Expression
    right: Expression

    @property
    def prec(self):
        return _PREC[self.op]

    def evaluate(self, values):
        a = self.left.evaluate(values)
        b = self.right.evaluate(values)
        return _apply_binary(self.op, a, b)

    def diff(self, var):
        a, b = self.left, self.right
        da, db = a.diff(var), b.diff(var)
        if self.op == "+":
            return add(da, db)
        if self.op == "-":
            return sub(da, db)
        if self.op == "*":
            return add(mul(da, b), mul(a, db))
        if self.op == "/":
            return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))
        # power
        if var not in b.variables():
            return mul(mul(b, power(a, sub(b, ONE))), da)
        if var not in a.variables():
            return mul(mul(self, call("log", a)), db)
        return mul(self, add(mul(db, call("log", a)), div(mul(b, da), a)))

    def variables(self):
        return self.left.variables() | self.right.variables()

    def rename(self, mapping):
        return _BUILDERS[self.op](self.left.rename(mapping), self.right.rename(mapping))

    def depth(self):
        # stack depth of the postfix program
        return max(self.left.depth(), self.right.depth() + 1)

    def __str__(self):
        p = self.prec
        left, right = str(self.left), str(self.right)
        if self.op == "^":
            if self.left.prec <= p:
                left = f"({left})"
            if self.right.prec < _PREC["neg"]:
                right = f"({right})"
            return f"{left}^{right}"
        if self.left.prec < p:
            left = f"({left})"
        if self.right.prec <= p:
            right = f"({right})"
        return f"{left} {self.op} {right}"

    def _py(self, index):
        a, b = self.left._py(index), self.right._py(index)
        if self.op == "^":
            return f"_pow({a}, {b})"
        return f"({a} {self.op} {b})"

    def _postfix(self, index, consts, out):
        self.left._postfix(index, consts, out)
        self.right._postfix(index, consts, out)
        out.append((_BINARY_OPCODES[self.op], 0))


@dataclass(frozen=True, slots=True)
class Call(Expression):
    func: str
    arg: Expression

    def evaluate(self, values):
        return _apply_call(self.func, self.arg.evaluate(values))

    def diff(self, var):
        a = self.arg
        da = a.diff(var)
        if da == ZERO:
            return ZERO
        if self.func == "exp":
            return mul(self, da)
        if self.func == "log":
            return div(da, a)
        if self.func == "sin":
            return mul(call("cos", a), da)
        if self.func == "cos":
            return neg(mul(call("sin", a), da))
        return div(da, mul(Num(2.0), self))

    def variables(self):
        return self.arg.variables()

    def rename(self, mapping):
        return call(self.func, self.arg.rename(mapping))

    def depth(self):
        return self.arg.depth()

    def __str__(self):
        return f"{self.func}({self.arg})"

    def _py(self, index):
        return f"_{self.func}({self.arg._py(index)})"

    def _postfix(self, index, consts, out):
        self.arg._postfix(index, consts, out)
        out.append((_CALL_OPCODES[self.func], 0))


ZERO = Num(0.0)
ONE = Num(1.0)


def _apply_binary(op, a, b):
    try:
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return a / b
        return math.pow(a, b)
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise EvaluationError(f"cannot evaluate {a!r} {op} {b!r}: {exc}") from None


def _apply_call(func, a):
    try:
        return getattr(math, func)(a)
    except (ValueError, OverflowError) as exc:
        raise EvaluationError(f"cannot evaluate {func}({a!r}): {exc}") from None


def _finite_or_none(thunk):
    try:
        v = thunk()
    except EvaluationError:
        return None
    # + 0.0 folds a signed zero so printed trees round-trip exactly
    return v + 0.0 if math.isfinite(v) else None


# -- simplifying constructors -------------------------------------------------

def as_expression(value) -> Expression:
    if isinstance(value, Expression):
        return value
    if isinstance(value, str):
        return parse_expression(value)
    return Num(float(value))


def neg(a: Expression) -> Expression:
    if isinstance(a, Num):
        return Num(-a.value) if a.value != 0 else ZERO
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        v = _finite_or_none(lambda: a.value + b.value)
        if v is not None:
            return Num(v)
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    return BinOp("+", a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        v = _finite_or_none(lambda: a.value - b.value)
        if v is not None:
            return Num(v)
    if b == ZERO:
        return a
    if a == ZERO:
        return neg(b)
    return BinOp("-", a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        v = _finite_or_none(lambda: a.value * b.value)
        if v is not None:
            return Num(v)
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    return BinOp("*", a, b)


def div(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        v = _finite_or_none(lambda: a.value / b.value)
        if v is not None:
            return Num(v)
    if a == ZERO and b != ZERO:
        return ZERO
    if b == ONE:
        return a
    return BinOp("/", a, b)


def power(a: Expression, b: Expression) -> Expression:
    if isinstance(a, Num) and isinstance(b, Num):
        v = _finite_or_none(lambda: _apply_binary("^", a.value, b.value))
        if v is not None:
            return Num(v)
    if b == ZERO:
        return ONE
    if b == ONE:
        return a
    return BinOp("^", a, b)


def call(func: str, a: Expression) -> Expression:
    if func not in FUNCTIONS:
        raise UnknownIdentifierError(func)
    if isinstance(a, Num):
        v = _finite_or_none(lambda: _apply_call(func, a.value))
        if v is not None:
            return Num(v)
    return Call(func, a)


_BUILDERS = {"+": add, "-": sub, "*": mul, "/": div, "^": power}


# -- parser -------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    n = len(src)
    while True:
        while pos < n and src[pos].isspace():
            pos += 1
        if pos >= n:
            break
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


_OPERAND_START = ("number", "identifier", "'('", "'-'")


class _Parser:
    def __init__(self, src, variables):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = None if variables is None else set(variables)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op, expected):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExpressionSyntaxError(f"expected {op!r}, found {text or 'end of input'!r}", pos, expected)
        self.take()

    def parse(self):
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {text!r}", pos, ("operator", "end of input"))
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = (add if op == "+" else sub)(e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            e = (mul if op == "*" else div)(e, self.unary())
        return e

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return power(base, self.unary())
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect_op("(", ("'('",))
                arg = self.expr()
                self.expect_op(")", ("')'", "operator"))
                return call(text, arg)
            if text in CONSTANTS:
                return Var(text)
            if self.variables is not None and text not in self.variables:
                raise UnknownIdentifierError(text, pos)
            return Var(text)
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect_op(")", ("')'", "operator"))
            return e
        found = text or "end of input"
        raise ExpressionSyntaxError(f"unexpected {found!r}", pos, _OPERAND_START)


def parse_expression(src: str, variables: Iterable[str] | None = None) -> Expression:
    """Parse ``src``; if ``variables`` is given, any other identifier is an error."""
    if not src or not src.strip():
        raise ExpressionSyntaxError("empty expression", 0, _OPERAND_START)
    return _Parser(src, variables).parse()


def differentiate(e: Expression, var: str, variables: Iterable[str] | None = None) -> Expression:
    """Exact symbolic partial derivative of ``e`` with respect to ``var``."""
    if variables is not None and var not in set(variables):
        raise UnknownIdentifierError(var)
    return e.diff(var)


# -- compilation --------------------------------------------------------------

_NAMESPACE = {
    "_pow": math.pow,
    "_exp": math.exp,
    "_log": math.log,
    "_sin": math.sin,
    "_cos": math.cos,
    "_sqrt": math.sqrt,
}


def _compile_source(body: str, label: str) -> Callable:
    code = compile(f"lambda x: {body}", f"<{label}>", "eval")
    raw = eval(code, dict(_NAMESPACE))

    def fn(x):
        # plain floats make math domain errors raise instead of warning
        try:
            return raw(x.tolist() if isinstance(x, np.ndarray) else [float(v) for v in x])
        except (ValueError, OverflowError, ZeroDivisionError) as exc:
            raise EvaluationError(f"{label}: {exc} at {list(map(float, x))}") from None

    return fn


def compile_scalar(e: Expression, names: Sequence[str]) -> Callable[[np.ndarray], float]:
    """Python function of a coordinate array ``x`` (``names[i]`` is ``x[i]``)."""
    index = {n: i for i, n in enumerate(names)}
    for v in e.variables():
        if v not in index:
            raise UnknownIdentifierError(v)
    return _compile_source(f"float({e._py(index)})", str(e)[:60])


def compile_array(exprs, names: Sequence[str]) -> Callable[[np.ndarray], np.ndarray]:
    """Compile a nested list of expressions into one function returning an ndarray."""
    index = {n: i for i, n in enumerate(names)}

    def src(obj):
        if isinstance(obj, Expression):
            for v in obj.variables():
                if v not in index:
                    raise UnknownIdentifierError(v)
            return obj._py(index)
        return "[" + ", ".join(src(o) for o in obj) + "]"

    raw = _compile_source(src(exprs), "array")
    return lambda x: np.array(raw(x), dtype=float)


@dataclass(frozen=True, eq=False)
class Program:
    """Concatenated postfix programs for the stack-machine kernel."""

    ops: np.ndarray
    args: np.ndarray
    consts: np.ndarray
    starts: np.ndarray
    stack_size: int

    @property
    def count(self) -> int:
        return len(self.starts) - 1


def compile_program(exprs: Sequence[Expression], names: Sequence[str]) -> Program:
    index = {n: i for i, n in enumerate(names)}
    consts: list[float] = []
    code: list[tuple[int, int]] = []
    starts = [0]
    depth = 1
    for e in exprs:
        e._postfix(index, consts, code)
        starts.append(len(code))
        depth = max(depth, e.depth())
    ops = np.array([c[0] for c in code], dtype=np.int64)
    args = np.array([c[1] for c in code], dtype=np.int64)
    return Program(ops, args, np.array(consts + [0.0]), np.array(starts, dtype=np.int64), depth + 1)


def coordinate_names(prefix: str, count: int) -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(count)]
