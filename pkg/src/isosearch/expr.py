"""Expression trees over one pressure variable and named parameters.

A tree is built from four immutable node types: the pressure variable ``p``,
indexed parameters ``c1..cN``, integer literals, and operator nodes.  Trees
are hashable values; every transformation returns a new tree.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Iterator, Sequence, Union

import numpy as np


class OpKind(Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"
    POW = "^"
    SQRT = "sqrt"
    SQUARE = "square"
    CUBE = "cube"

    @property
    def arity(self) -> int:
        return 1 if self in (OpKind.SQRT, OpKind.SQUARE, OpKind.CUBE) else 2

    @property
    def is_infix(self) -> bool:
        return self.arity == 2


#: Operators the genetic-algorithm search may propose.
GA_OPSET = (OpKind.ADD, OpKind.SUB, OpKind.MUL, OpKind.DIV)

#: Operators the Bayesian MCMC search may propose.
BSR_OPSET = (
    OpKind.ADD,
    OpKind.SUB,
    OpKind.MUL,
    OpKind.DIV,
    OpKind.SQUARE,
    OpKind.CUBE,
    OpKind.SQRT,
)


@dataclass(frozen=True, slots=True)
class Var:
    """The pressure variable ``p``."""


@dataclass(frozen=True, slots=True)
class Param:
    """Named constant ``c<index>``; indices are 1-based."""

    index: int


@dataclass(frozen=True, slots=True)
class IntLit:
    """Integer literal.  Only produced by simplification or parsing, never
    proposed by a search."""

    value: int


@dataclass(frozen=True, slots=True)
class Op:
    kind: OpKind
    args: tuple

    def __post_init__(self):
        if len(self.args) != self.kind.arity:
            raise ValueError(
                f"{self.kind.name} takes {self.kind.arity} args, got {len(self.args)}"
            )


Expr = Union[Var, Param, IntLit, Op]

P = Var()


def add(a, b):
    return Op(OpKind.ADD, (a, b))


def sub(a, b):
    return Op(OpKind.SUB, (a, b))


def mul(a, b):
    return Op(OpKind.MUL, (a, b))


def div(a, b):
    return Op(OpKind.DIV, (a, b))


def pow_(a, b):
    return Op(OpKind.POW, (a, b))


def sqrt(a):
    return Op(OpKind.SQRT, (a,))


def square(a):
    return Op(OpKind.SQUARE, (a,))


def cube(a):
    return Op(OpKind.CUBE, (a,))


def node_count(expr: Expr) -> int:
    """Total node count (internal + leaves); the complexity measure."""
    if isinstance(expr, Op):
        return 1 + sum(node_count(a) for a in expr.args)
    return 1


complexity = node_count


def depth(expr: Expr) -> int:
    if isinstance(expr, Op):
        return 1 + max(depth(a) for a in expr.args)
    return 1


def subtrees(expr: Expr, _path=()) -> Iterator[tuple[tuple, Expr]]:
    """Yield (path, node) pairs in preorder.  A path is a tuple of child
    indices from the root."""
    yield _path, expr
    if isinstance(expr, Op):
        for i, a in enumerate(expr.args):
            yield from subtrees(a, _path + (i,))


def get_subtree(expr: Expr, path: tuple) -> Expr:
    for i in path:
        expr = expr.args[i]
    return expr


def replace_subtree(expr: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    i = path[0]
    args = list(expr.args)
    args[i] = replace_subtree(args[i], path[1:], new)
    return Op(expr.kind, tuple(args))


def param_indices(expr: Expr) -> list[int]:
    """Distinct parameter indices in left-to-right leaf order."""
    seen: list[int] = []
    for _, node in subtrees(expr):
        if isinstance(node, Param) and node.index not in seen:
            seen.append(node.index)
    return seen


def param_count(expr: Expr) -> int:
    return len(param_indices(expr))


def max_param_index(expr: Expr) -> int:
    idx = param_indices(expr)
    return max(idx) if idx else 0


_FRESH = itertools.count(1_000_000)


def fresh_param() -> Param:
    """A parameter leaf with a unique placeholder index; call
    :func:`renumber_params` afterwards to assign the real index."""
    return Param(next(_FRESH))


def renumber_params(expr: Expr) -> Expr:
    """Renumber parameters contiguously from 1 in left-to-right first-appearance
    order.  Duplicate indices stay duplicated."""
    order = param_indices(expr)
    mapping = {old: new for new, old in enumerate(order, start=1)}

    def walk(node):
        if isinstance(node, Param):
            return Param(mapping[node.index])
        if isinstance(node, Op):
            return Op(node.kind, tuple(walk(a) for a in node.args))
        return node

    return walk(expr)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------
#
# Undefined results (division by zero, sqrt of a negative, any non-finite
# intermediate) are values, not errors: they come back as NaN.  Division and
# power are the only operators that can turn a non-finite input into a finite
# output (x/inf -> 0, inf**0 -> 1), so those two mask their inputs explicitly;
# NaN propagates through everything else on its own.


def _mask_div(a, b):
    # callers suppress numpy warnings; x/inf -> 0 must still come out NaN
    r = np.divide(a, b)
    if np.isfinite(r).all() and np.isfinite(b).all():
        return r
    bad = ~np.isfinite(a) | ~np.isfinite(b) | ~np.isfinite(r)
    return np.where(bad, np.nan, r)


def _mask_pow(a, b):
    # inf**0 and 1**inf are finite in IEEE; mask them back to NaN
    r = np.power(a, b)
    if np.isfinite(r).all() and np.isfinite(a).all() and np.isfinite(b).all():
        return r
    bad = ~np.isfinite(a) | ~np.isfinite(b) | ~np.isfinite(r)
    return np.where(bad, np.nan, r)


_COMPILE_GLOBALS = {
    "_div": _mask_div,
    "_pow": _mask_pow,
    "_sqrt": np.sqrt,
    "np": np,
}


def _codegen(expr: Expr) -> str:
    if isinstance(expr, Var):
        return "p"
    if isinstance(expr, Param):
        return f"c[{expr.index - 1}]"
    if isinstance(expr, IntLit):
        return f"({expr.value}.0)"
    if expr.kind == OpKind.SQUARE:
        return f"np.square({_codegen(expr.args[0])})"
    if expr.kind == OpKind.CUBE:
        return f"np.power({_codegen(expr.args[0])}, 3)"
    if expr.kind == OpKind.SQRT:
        return f"_sqrt({_codegen(expr.args[0])})"
    a = _codegen(expr.args[0])
    b = _codegen(expr.args[1])
    if expr.kind == OpKind.ADD:
        return f"({a} + {b})"
    if expr.kind == OpKind.SUB:
        return f"({a} - {b})"
    if expr.kind == OpKind.MUL:
        return f"({a} * {b})"
    if expr.kind == OpKind.DIV:
        return f"_div({a}, {b})"
    return f"_pow({a}, {b})"


@lru_cache(maxsize=4096)
def compile_body(expr: Expr):
    """Raw compiled ``f(c, p)``; the caller must suppress numpy warnings
    (``np.errstate(all="ignore")``) and may get a scalar back when the tree
    has no variable."""
    return eval(  # noqa: S307 - source generated from our own grammar
        "lambda c, p: " + _codegen(expr), dict(_COMPILE_GLOBALS)
    )


def compile_evaluator(expr: Expr):
    """Compile a tree into ``f(c, p) -> ndarray`` for fast repeated evaluation.

    ``c`` is the parameter vector, ``p`` an ndarray of pressures.  Semantics
    match :func:`evaluate` (undefined positions come back NaN).
    """
    body = compile_body(expr)

    def f(c, p):
        with np.errstate(all="ignore"):
            out = body(c, p)
        if not isinstance(out, np.ndarray) or out.ndim == 0:
            out = np.full_like(p, float(out), dtype=float)
        return out

    return f


def evaluate(expr: Expr, params: Sequence[float], p):
    """Evaluate at pressure(s) ``p``.  Returns a float (scalar input) or an
    ndarray; undefined positions are NaN.

    Raises ValueError if ``params`` is shorter than the largest parameter
    index in the tree.
    """
    need = max_param_index(expr)
    if len(params) < need:
        raise ValueError(f"expression needs {need} parameters, got {len(params)}")
    scalar = np.isscalar(p) or (isinstance(p, np.ndarray) and p.ndim == 0)
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    c = np.asarray(params, dtype=float)
    out = compile_evaluator(expr)(c, arr)
    bad = ~np.isfinite(out)
    if bad.any():
        out = np.where(bad, np.nan, out)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Random generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class TreeLimits:
    """Bounds and leaf probabilities for random tree generation.

    ``p_leaf`` is the chance an unforced node is a leaf; ``p_var`` the chance
    a leaf is the variable rather than a fresh parameter.
    """

    max_depth: int = 5
    max_size: int = 25
    p_leaf: float = 0.35
    p_var: float = 0.5


def random_tree(limits: TreeLimits, opset: Sequence[OpKind], rng) -> Expr:
    """Random tree within ``limits``; parameter leaves are fresh and the
    result is renumbered left-to-right."""
    if limits.max_depth < 1 or limits.max_size < 1:
        raise ValueError("bounds must be >= 1")
    counter = [0]

    def leaf():
        if rng.random() < limits.p_var:
            return P
        counter[0] += 1
        return Param(counter[0])

    def gen(depth_left, budget):
        if depth_left <= 1 or budget <= 2 or rng.random() < limits.p_leaf:
            return leaf()
        kind = opset[int(rng.integers(len(opset)))]
        if kind.arity == 1:
            return Op(kind, (gen(depth_left - 1, budget - 1),))
        left = gen(depth_left - 1, (budget - 1) // 2)
        right = gen(depth_left - 1, budget - 1 - node_count(left))
        return Op(kind, (left, right))

    return renumber_params(gen(limits.max_depth, limits.max_size))


def expected_node_count(limits: TreeLimits, opset: Sequence[OpKind]) -> float:
    """Expected node count of :func:`random_tree`, ignoring the size cap
    (accurate when the cap rarely binds)."""
    mean_arity = sum(k.arity for k in opset) / len(opset)
    e = 1.0
    for _ in range(limits.max_depth - 1):
        e = limits.p_leaf + (1.0 - limits.p_leaf) * (1.0 + mean_arity * e)
    return e


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------
#
# Stable infix format: binary operators are spelled `a + b`, `a - b`, `a * b`,
# `a / b`, `a ^ b` with internal children parenthesized; unary operators are
# spelled sqrt(x), square(x), cube(x).  The variable is `p`, parameters are
# `c1..cN`.


def render(expr: Expr) -> str:
    """Render to the stable infix text format; parse(render(t)) == t."""

    def wrap(node):
        s = render(node)
        if isinstance(node, Op) and node.kind.is_infix:
            return f"({s})"
        return s

    if isinstance(expr, Var):
        return "p"
    if isinstance(expr, Param):
        return f"c{expr.index}"
    if isinstance(expr, IntLit):
        return str(expr.value)
    if expr.kind.arity == 1:
        return f"{expr.kind.value}({render(expr.args[0])})"
    a, b = expr.args
    return f"{wrap(a)} {expr.kind.value} {wrap(b)}"


class ParseError(ValueError):
    """Malformed expression text; ``token`` is the 1-based token position."""

    def __init__(self, message: str, token: int):
        super().__init__(f"{message} (at token {token})")
        self.token = token


_UNARY = {"sqrt": OpKind.SQRT, "square": OpKind.SQUARE, "cube": OpKind.CUBE}


def _tokenize(text: str) -> list[str]:
    tokens = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^()":
            tokens.append(ch)
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < len(text) and text[j].isdigit():
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        raise ParseError(f"unexpected character {ch!r}", len(tokens) + 1)
    return tokens


def parse(text: str) -> Expr:
    """Parse infix text into a tree.  Accepts standard precedence
    (^ over * and /, over + and -) in addition to explicit parentheses."""
    tokens = _tokenize(text)
    pos = [0]

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def take():
        t = peek()
        pos[0] += 1
        return t

    def err(msg):
        raise ParseError(msg, pos[0] + 1)

    def parse_sum():
        node = parse_term()
        while peek() in ("+", "-"):
            op = take()
            rhs = parse_term()
            node = Op(OpKind.ADD if op == "+" else OpKind.SUB, (node, rhs))
        return node

    def parse_term():
        node = parse_power()
        while peek() in ("*", "/"):
            op = take()
            rhs = parse_power()
            node = Op(OpKind.MUL if op == "*" else OpKind.DIV, (node, rhs))
        return node

    def parse_power():
        base = parse_atom()
        if peek() == "^":
            take()
            exponent = parse_power()
            return Op(OpKind.POW, (base, exponent))
        return base

    def parse_atom():
        t = peek()
        if t is None:
            err("unexpected end of input")
        if t == "(":
            take()
            node = parse_sum()
            if peek() != ")":
                err("expected ')'")
            take()
            return node
        if t == "-":
            take()
            n = peek()
            if n is not None and n.isdigit():
                take()
                return IntLit(-int(n))
            err("unary minus is only supported on integer literals")
        if t.isdigit():
            take()
            return IntLit(int(t))
        if t == "p":
            take()
            return P
        if t in _UNARY:
            take()
            if peek() != "(":
                err(f"expected '(' after {t}")
            take()
            node = parse_sum()
            if peek() != ")":
                err("expected ')'")
            take()
            return Op(_UNARY[t], (node,))
        if t.startswith("c") and t[1:].isdigit() and len(t) > 1:
            take()
            k = int(t[1:])
            if k < 1:
                err("parameter indices start at c1")
            return Param(k)
        err(f"unexpected token {t!r}")

    node = parse_sum()
    if pos[0] != len(tokens):
        raise ParseError(f"unexpected token {tokens[pos[0]]!r}", pos[0] + 1)
    return node
