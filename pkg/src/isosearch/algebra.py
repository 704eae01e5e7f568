"""Purpose-built symbolic layer: differentiation, simplification, rational
normalization, and canonical-form generation with prime substitution.

Rational forms carry exact ``Fraction`` coefficients so that monic
normalization never suffers rounding; floats only appear at evaluation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .expr import (
    Expr,
    IntLit,
    Op,
    OpKind,
    P,
    Param,
    Var,
    add,
    div,
    evaluate,
    mul,
    node_count,
    param_indices,
    pow_,
    render,
    renumber_params,
    sqrt,
    square,
    sub,
)


class NotRational(Exception):
    """Expression has no rational-function representation (sqrt or a
    non-integer exponent survives)."""


class ZeroDenominator(Exception):
    """Expression divides by a polynomial that is identically zero."""


class UnsupportedExpression(Exception):
    """Operation not defined for this tree (e.g. d/dp of p ** f(p))."""


# ---------------------------------------------------------------------------
# Dense polynomials over Fraction: tuple of coefficients, index = degree,
# trailing zeros trimmed, zero polynomial = ().
# ---------------------------------------------------------------------------

_ZERO = ()
_ONE = (Fraction(1),)


def _trim(c):
    c = list(c)
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _padd(a, b):
    n = max(len(a), len(b))
    return _trim(
        [
            (a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0)
            for i in range(n)
        ]
    )


def _pneg(a):
    return tuple(-x for x in a)


def _psub(a, b):
    return _padd(a, _pneg(b))


def _pmul(a, b):
    if not a or not b:
        return _ZERO
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x == 0:
            continue
        for j, y in enumerate(b):
            out[i + j] += x * y
    return _trim(out)


def _pscale(a, s):
    return _trim([x * s for x in a])


def _pdivmod(a, b):
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 0)
    r = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(_trim(r)) - 1 >= db and _trim(r):
        r = list(_trim(r))
        k = len(r) - 1 - db
        f = r[-1] / lb
        q[k] = f
        for i in range(len(b)):
            r[k + i] -= f * b[i]
        r = list(_trim(r))
    return _trim(q), _trim(r)


def _pgcd(a, b):
    a, b = _trim(a), _trim(b)
    while b:
        _, r = _pdivmod(a, b)
        a, b = b, _trim(r)
        if a:
            a = _pscale(a, 1 / a[-1])  # monic to tame coefficient growth
    if a:
        a = _pscale(a, 1 / a[-1])
    return a


def _pderiv(a):
    return _trim([a[i] * i for i in range(1, len(a))])


def _peval(a, x):
    out = 0
    for c in reversed(a):
        out = out * x + c
    return out


def _pcontent(a) -> Fraction:
    """Positive rational content (gcd of coefficients) of a polynomial,
    signed by its leading coefficient; 0 for the zero polynomial."""
    if not a:
        return Fraction(0)
    num_gcd = 0
    den_lcm = 1
    for c in a:
        num_gcd = math.gcd(num_gcd, abs(c.numerator))
        den_lcm = den_lcm * c.denominator // math.gcd(den_lcm, c.denominator)
    content = Fraction(num_gcd, den_lcm)
    return content if a[-1] > 0 else -content


def _sqrt_fraction(v: Fraction) -> Optional[Fraction]:
    if v < 0:
        return None
    n, d = v.numerator, v.denominator
    rn, rd = math.isqrt(n), math.isqrt(d)
    if rn * rn == n and rd * rd == d:
        return Fraction(rn, rd)
    return None


def _psqrt(a) -> Optional[tuple]:
    """Exact polynomial square root, or None if ``a`` is not a perfect
    square over the rationals."""
    if not a:
        return _ZERO
    deg = len(a) - 1
    if deg % 2:
        return None
    m = deg // 2
    lead = _sqrt_fraction(a[-1])
    if lead is None:
        return None
    s = [Fraction(0)] * (m + 1)
    s[m] = lead
    for i in range(m - 1, -1, -1):
        acc = a[i + m] if i + m < len(a) else Fraction(0)
        for j in range(i + 1, m):
            k = i + m - j
            if i < k < m:
                acc -= s[j] * s[k]
        s[i] = acc / (2 * lead)
    s = _trim(s)
    if _pmul(s, s) != _trim(a):
        return None
    return s


# ---------------------------------------------------------------------------
# Rational forms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class RationalForm:
    """``num/den`` as dense coefficient tuples in the search variable
    (or in q = sqrt(p) when built in sqrt mode)."""

    num: tuple
    den: tuple

    def eval(self, x):
        d = _peval(self.den, x)
        if d == 0:
            return None
        return _peval(self.num, x) / d


def _nonneg(coeffs) -> bool:
    return all(c >= 0 for c in coeffs)


def to_rational(
    expr: Expr,
    values: dict[int, Fraction],
    sqrt_mode: bool = False,
    family_mode: bool = False,
) -> RationalForm:
    """Convert a tree with parameter ``values`` substituted into a rational
    form.  In ``sqrt_mode`` the variable is q = sqrt(p) (p becomes q^2) and
    sqrt nodes of perfect-square arguments are admitted; the result is then
    valid in a neighborhood of 0+.

    Sqrt nodes whose argument is a perfect square of a rational form reduce
    exactly when the chosen root is certified nonnegative on p > 0 (all
    coefficients one sign).  ``family_mode`` additionally cancels
    square(sqrt(u)) -> u (principal branch) and lets a square-free constant
    factor under sqrt become an approximate coefficient; it is meant for
    canonicalization, where equivalence-class identity matters rather than
    pointwise real-domain agreement.

    Raises NotRational or ZeroDenominator.
    """

    def conv(node) -> RationalForm:
        if isinstance(node, Var):
            if sqrt_mode:
                return RationalForm((Fraction(0), Fraction(0), Fraction(1)), _ONE)
            return RationalForm((Fraction(0), Fraction(1)), _ONE)
        if isinstance(node, Param):
            try:
                v = values[node.index]
            except KeyError:
                raise NotRational(f"no value for c{node.index}")
            return RationalForm((Fraction(v),) if v != 0 else _ZERO, _ONE)
        if isinstance(node, IntLit):
            v = Fraction(node.value)
            return RationalForm((v,) if v != 0 else _ZERO, _ONE)
        k = node.kind
        if k == OpKind.ADD or k == OpKind.SUB:
            a, b = conv(node.args[0]), conv(node.args[1])
            if a.den == b.den:
                n = _padd(a.num, b.num) if k == OpKind.ADD else _psub(a.num, b.num)
                return RationalForm(n, a.den)
            x = _pmul(a.num, b.den)
            y = _pmul(b.num, a.den)
            n = _padd(x, y) if k == OpKind.ADD else _psub(x, y)
            return RationalForm(n, _pmul(a.den, b.den))
        if k == OpKind.MUL:
            a, b = conv(node.args[0]), conv(node.args[1])
            return RationalForm(_pmul(a.num, b.num), _pmul(a.den, b.den))
        if k == OpKind.DIV:
            a, b = conv(node.args[0]), conv(node.args[1])
            if not b.num:
                raise ZeroDenominator(render(node))
            return RationalForm(_pmul(a.num, b.den), _pmul(a.den, b.num))
        if k == OpKind.SQUARE:
            (child,) = node.args
            if family_mode and isinstance(child, Op) and child.kind == OpKind.SQRT:
                return conv(child.args[0])  # (sqrt u)^2 == u, principal branch
            a = conv(child)
            return RationalForm(_pmul(a.num, a.num), _pmul(a.den, a.den))
        if k == OpKind.CUBE:
            a = conv(node.args[0])
            return RationalForm(
                _pmul(_pmul(a.num, a.num), a.num),
                _pmul(_pmul(a.den, a.den), a.den),
            )
        if k == OpKind.POW:
            base, e = node.args
            if not isinstance(e, IntLit):
                raise NotRational("non-integer exponent")
            a = conv(base)
            n = e.value
            if n < 0:
                if not a.num:
                    raise ZeroDenominator(render(node))
                a = RationalForm(a.den, a.num)
                n = -n
            rn, rd = _ONE, _ONE
            for _ in range(n):
                rn, rd = _pmul(rn, a.num), _pmul(rd, a.den)
            return RationalForm(rn, rd)
        if k == OpKind.SQRT:
            a = conv(node.args[0])
            if not a.num:
                return RationalForm(_ZERO, _ONE)
            if sqrt_mode:
                # value near 0+ must be nonnegative for sqrt to be defined
                lo_n = next(i for i, c in enumerate(a.num) if c != 0)
                lo_d = next(i for i, c in enumerate(a.den) if c != 0)
                if a.num[lo_n] / a.den[lo_d] < 0:
                    raise NotRational("sqrt of negative near 0+")
                s = _psqrt(_pmul(a.num, a.den))
                if s is None:
                    raise NotRational("sqrt of non-square")
                lo_s = next(i for i, c in enumerate(s) if c != 0)
                if s[lo_s] / a.den[lo_d] < 0:
                    s = _pneg(s)
                return RationalForm(s, a.den)
            s2 = _pmul(a.num, a.den)
            s = _psqrt(s2)
            if s is None and family_mode:
                # pull out a constant factor: sqrt(k * Q) with Q a square
                content = _pcontent(s2)
                if content > 0:
                    s = _psqrt(_pscale(s2, 1 / content))
                    if s is not None:
                        s = _pscale(s, Fraction(math.sqrt(float(content))))
            if s is None:
                raise NotRational("sqrt of non-square")
            # certify sqrt(u) = s/d >= 0 on p > 0: one-signed coefficients
            den = a.den
            if not _nonneg(den):
                if _nonneg(_pneg(den)):
                    den = _pneg(den)
                else:
                    raise NotRational("sqrt sign uncertified")
            if not _nonneg(s):
                if _nonneg(_pneg(s)):
                    s = _pneg(s)
                else:
                    raise NotRational("sqrt sign uncertified")
            return RationalForm(s, den)
        raise NotRational(str(k))

    out = conv(expr)
    if not out.den:
        raise ZeroDenominator(render(expr))
    return out


def normalize_rational(rf: RationalForm) -> RationalForm:
    """Cancel the polynomial GCD and scale so the denominator is monic."""
    num, den = _trim(rf.num), _trim(rf.den)
    if not den:
        raise ZeroDenominator("normalize")
    if not num:
        return RationalForm(_ZERO, _ONE)
    g = _pgcd(num, den)
    if len(g) > 1:
        num, _ = _pdivmod(num, g)
        den, _ = _pdivmod(den, g)
    lead = den[-1]
    num = _pscale(num, 1 / lead)
    den = _pscale(den, 1 / lead)
    return RationalForm(num, den)


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------


def _contains_var(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Op):
        return any(_contains_var(a) for a in e.args)
    return False


def differentiate(expr: Expr) -> Expr:
    """Symbolic derivative with respect to p (identity-level cleanup applied,
    full simplification not guaranteed)."""

    def d(e):
        if isinstance(e, Var):
            return IntLit(1)
        if isinstance(e, (Param, IntLit)):
            return IntLit(0)
        k = e.kind
        if k in (OpKind.ADD, OpKind.SUB):
            return Op(k, (d(e.args[0]), d(e.args[1])))
        if k == OpKind.MUL:
            a, b = e.args
            return add(mul(d(a), b), mul(a, d(b)))
        if k == OpKind.DIV:
            a, b = e.args
            return div(sub(mul(d(a), b), mul(a, d(b))), square(b))
        if k == OpKind.SQRT:
            (a,) = e.args
            return div(d(a), mul(IntLit(2), sqrt(a)))
        if k == OpKind.SQUARE:
            (a,) = e.args
            return mul(mul(IntLit(2), a), d(a))
        if k == OpKind.CUBE:
            (a,) = e.args
            return mul(mul(IntLit(3), square(a)), d(a))
        if k == OpKind.POW:
            base, exp = e.args
            if _contains_var(exp):
                raise UnsupportedExpression("variable exponent")
            if isinstance(exp, IntLit):
                new_exp = IntLit(exp.value - 1)
            else:
                new_exp = sub(exp, IntLit(1))
            return mul(mul(exp, pow_(base, new_exp)), d(base))
        raise UnsupportedExpression(str(k))

    return _identity_pass(d(expr))


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------

_FOLD_LIMIT = 10**12


def _fold(kind: OpKind, args) -> Optional[Expr]:
    if not all(isinstance(a, IntLit) for a in args):
        return None
    vals = [a.value for a in args]
    if kind == OpKind.ADD:
        v = vals[0] + vals[1]
    elif kind == OpKind.SUB:
        v = vals[0] - vals[1]
    elif kind == OpKind.MUL:
        v = vals[0] * vals[1]
    elif kind == OpKind.DIV:
        if vals[1] == 0 or vals[0] % vals[1]:
            return None
        v = vals[0] // vals[1]
    elif kind == OpKind.SQUARE:
        v = vals[0] ** 2
    elif kind == OpKind.CUBE:
        v = vals[0] ** 3
    elif kind == OpKind.SQRT:
        if vals[0] < 0:
            return None
        r = math.isqrt(vals[0])
        if r * r != vals[0]:
            return None
        v = r
    elif kind == OpKind.POW:
        if not (0 <= vals[1] <= 8):
            return None
        v = vals[0] ** vals[1]
    else:
        return None
    if abs(v) > _FOLD_LIMIT:
        return None
    return IntLit(v)


def _is_zero(e):
    return isinstance(e, IntLit) and e.value == 0


def _is_one(e):
    return isinstance(e, IntLit) and e.value == 1


def _identity_node(e: Expr) -> Expr:
    """One identity/folding rewrite at the root of ``e`` (children assumed
    already simplified); returns ``e`` unchanged when no rule applies."""
    if not isinstance(e, Op):
        return e
    folded = _fold(e.kind, e.args)
    if folded is not None:
        return folded
    k = e.kind
    if k == OpKind.ADD:
        a, b = e.args
        if _is_zero(a):
            return b
        if _is_zero(b):
            return a
    elif k == OpKind.SUB:
        a, b = e.args
        if _is_zero(b):
            return a
        if a == b:
            return IntLit(0)
    elif k == OpKind.MUL:
        a, b = e.args
        if _is_one(a):
            return b
        if _is_one(b):
            return a
        if _is_zero(a) or _is_zero(b):
            return IntLit(0)
    elif k == OpKind.DIV:
        a, b = e.args
        if _is_one(b):
            return a
        if a == b and not _is_zero(a):
            return IntLit(1)
        if _is_zero(a) and not _is_zero(b):
            return IntLit(0)
    elif k == OpKind.POW:
        a, b = e.args
        if _is_one(b):
            return a
        if _is_zero(b) and not _is_zero(a):
            return IntLit(1)
    return e


def _identity_pass(e: Expr) -> Expr:
    if isinstance(e, Op):
        e = Op(e.kind, tuple(_identity_pass(a) for a in e.args))
    return _identity_node(e)


def _is_div(e):
    return isinstance(e, Op) and e.kind == OpKind.DIV


def _fraction_node(e: Expr) -> Expr:
    """Combine fractions at the root of ``e`` (children already processed)."""
    if not isinstance(e, Op):
        return e
    k = e.kind
    if k in (OpKind.ADD, OpKind.SUB):
        a, b = e.args
        if _is_div(a) and _is_div(b):
            an, ad = a.args
            bn, bd = b.args
            if ad == bd:
                return div(Op(k, (an, bn)), ad)
            return div(Op(k, (mul(an, bd), mul(bn, ad))), mul(ad, bd))
        if _is_div(a):
            an, ad = a.args
            return div(Op(k, (an, mul(b, ad))), ad)
        if _is_div(b):
            bn, bd = b.args
            return div(Op(k, (mul(a, bd), bn)), bd)
    elif k == OpKind.MUL:
        a, b = e.args
        if _is_div(a) and _is_div(b):
            an, ad = a.args
            bn, bd = b.args
            return div(mul(an, bn), mul(ad, bd))
        if _is_div(a):
            an, ad = a.args
            return div(mul(an, b), ad)
        if _is_div(b):
            bn, bd = b.args
            return div(mul(a, bn), bd)
    elif k == OpKind.DIV:
        a, b = e.args
        if _is_div(a) and _is_div(b):
            an, ad = a.args
            bn, bd = b.args
            return div(mul(an, bd), mul(ad, bn))
        if _is_div(a):
            an, ad = a.args
            return div(an, mul(ad, b))
        if _is_div(b):
            bn, bd = b.args
            return div(mul(a, bd), bn)
    elif k in (OpKind.SQUARE, OpKind.CUBE):
        (a,) = e.args
        if _is_div(a):
            an, ad = a.args
            return div(Op(k, (an,)), Op(k, (ad,)))
    return e


def simplify(expr: Expr, max_passes: int = 12) -> Expr:
    """Value-equivalent cleanup: constant folding, identity elimination
    (x+0, x*1, x/1, x-x, x/x), and combination of nested fractions over a
    common denominator.

    The identity/folding rules never grow the tree; fraction combination can.
    """

    def one_pass(e):
        if isinstance(e, Op):
            e = Op(e.kind, tuple(one_pass(a) for a in e.args))
        e = _identity_node(e)
        e2 = _fraction_node(e)
        if e2 is not e:
            e2 = _identity_node(e2)
        return e2

    for _ in range(max_passes):
        out = one_pass(expr)
        if out == expr:
            break
        expr = out
    return expr


# ---------------------------------------------------------------------------
# Prime substitution and canonical form
# ---------------------------------------------------------------------------

_PRIMES: list[int] = [2, 3]


def _nth_prime(i: int) -> int:
    while len(_PRIMES) <= i:
        cand = _PRIMES[-1] + 2
        while any(cand % q == 0 for q in _PRIMES if q * q <= cand):
            cand += 2
        _PRIMES.append(cand)
    return _PRIMES[i]


def substitute_primes(expr: Expr, offset: int = 0) -> tuple[Expr, dict[int, int]]:
    """Replace each distinct parameter with a distinct prime (starting at the
    ``offset``-th prime); returns the substituted tree and the mapping."""
    order = param_indices(expr)
    mapping = {idx: _nth_prime(offset + j) for j, idx in enumerate(order)}

    def walk(node):
        if isinstance(node, Param):
            return IntLit(mapping[node.index])
        if isinstance(node, Op):
            return Op(node.kind, tuple(walk(a) for a in node.args))
        return node

    return walk(expr), mapping


@dataclass(frozen=True, slots=True)
class CanonicalForm:
    """Normalized representative of an expression's equivalence class.

    ``expr`` has parameters renumbered c1..cK; ``values`` carries one derived
    numeric coefficient per parameter (from the prime substitution, or from
    the fitted parameters when those were supplied); ``source_values`` are the
    substituted leaf values of the input's parameters (in index order) that
    produced those coefficients; ``rational`` says whether fraction
    normalization applied; ``unreliable`` marks retry exhaustion.
    """

    expr: Expr
    param_count: int
    complexity: int
    values: Optional[tuple]
    rational: bool
    unreliable: bool = False
    source_values: Optional[tuple] = None

    @property
    def string(self) -> str:
        return render(self.expr)


def _fraction_tree(v: Fraction) -> Expr:
    if v.denominator == 1:
        return IntLit(int(v))
    return div(IntLit(v.numerator), IntLit(v.denominator))


def _term_tree(degree: int, coeff: Expr | None) -> Expr:
    """coeff=None means a bare (monic) power of p."""
    if degree == 0:
        return coeff if coeff is not None else IntLit(1)
    base = P if degree == 1 else pow_(P, IntLit(degree))
    return base if coeff is None else mul(coeff, base)


def _poly_tree(coeffs, kinds, next_param) -> tuple[Expr | None, list]:
    """Build an ascending-degree polynomial tree.

    ``kinds[i]`` is "param" or ("const", Fraction); ``next_param`` is a
    one-element list holding the next parameter index.  Returns the tree
    (None for the zero polynomial) and the ordered values assigned to fresh
    parameters.
    """
    values = []
    acc = None
    for d, kind in enumerate(kinds):
        if kind is None:
            continue
        if kind == "param":
            coeff = Param(next_param[0])
            next_param[0] += 1
            values.append(coeffs[d])
            term = _term_tree(d, coeff)
            acc = term if acc is None else add(acc, term)
            continue
        _, v = kind
        if v == 1:
            term = _term_tree(d, None)
            acc = term if acc is None else add(acc, term)
        elif v < 0 and acc is not None:
            pos = -v
            term = _term_tree(d, None if pos == 1 else _fraction_tree(pos))
            acc = sub(acc, term)
        else:
            term = _term_tree(d, _fraction_tree(v))
            acc = term if acc is None else add(acc, term)
    return acc, values


def _shape(rf: RationalForm):
    def pat(coeffs):
        return tuple(
            "0" if c == 0 else "1" if c == 1 else "-1" if c == -1 else "*"
            for c in coeffs
        )

    return len(rf.num), len(rf.den), pat(rf.num), pat(rf.den)


def _build_canonical(rf: RationalForm, kinds_num, kinds_den) -> tuple[Expr, tuple]:
    next_param = [1]
    num_tree, vnum = _poly_tree(rf.num, kinds_num, next_param)
    den_tree, vden = _poly_tree(rf.den, kinds_den, next_param)
    if num_tree is None:
        return IntLit(0), ()
    values = tuple(vnum + vden)
    if den_tree is None or den_tree == IntLit(1):
        return num_tree, values
    return div(num_tree, den_tree), values


def canonical_form(
    expr: Expr,
    fitted_params: Optional[Sequence[float]] = None,
    max_retries: int = 4,
) -> CanonicalForm:
    """Canonicalize: substitute primes (or the fitted values when given),
    reduce to a monic-denominator rational form when possible, and re-abstract
    the derived coefficients to fresh parameters c1..cK.

    Sqrt-bearing (non-rational) expressions are canonicalized through
    simplification and renumbering only.
    """
    e0 = renumber_params(expr)
    k = len(param_indices(e0))

    if fitted_params is not None:
        if len(fitted_params) < k:
            raise ValueError(f"need {k} fitted parameters, got {len(fitted_params)}")
        values = {i + 1: Fraction(float(fitted_params[i])) for i in range(k)}
        try:
            rf = normalize_rational(to_rational(e0, values, family_mode=True))
        except NotRational:
            return _simplified_canonical(e0, fitted_params, unreliable=False)
        except ZeroDenominator:
            return _simplified_canonical(e0, fitted_params, unreliable=True)
        kinds_num = [None if c == 0 else "param" for c in rf.num]
        kinds_den = [None if c == 0 else "param" for c in rf.den]
        if rf.den and kinds_den:
            kinds_den[-1] = ("const", rf.den[-1])  # monic leading 1
        tree, vals = _build_canonical(rf, kinds_num, kinds_den)
        return CanonicalForm(
            expr=tree,
            param_count=len(vals),
            complexity=node_count(tree),
            values=tuple(float(v) for v in vals),
            rational=True,
            source_values=tuple(float(fitted_params[i]) for i in range(k)),
        )

    # Symbolic path: run the pipeline twice, once with primes and once with
    # squares of different primes; coefficients that agree across runs are
    # structural integers, the rest are parameter-derived and get
    # re-abstracted.  The second run uses squares so that linear relations
    # between consecutive substituted values (prime gaps repeat constantly)
    # cannot coincide across the runs.  A shape mismatch means a collision
    # (accidental cancellation or a spurious 0/1), so shift both sequences
    # and retry.
    for attempt in range(max_retries):
        off_a = attempt * (2 * k + 16)
        off_b = off_a + k + 8
        vals_a = {idx: Fraction(_nth_prime(off_a + j)) for j, idx in enumerate(param_indices(e0))}
        vals_b = {idx: Fraction(_nth_prime(off_b + j)) ** 2 for j, idx in enumerate(param_indices(e0))}
        try:
            rf_a = normalize_rational(to_rational(e0, vals_a, family_mode=True))
            rf_b = normalize_rational(to_rational(e0, vals_b, family_mode=True))
        except NotRational:
            return _simplified_canonical(e0, None, unreliable=False)
        except ZeroDenominator:
            return _simplified_canonical(e0, None, unreliable=True)
        if _shape(rf_a) != _shape(rf_b):
            continue
        kinds_num = _classify(rf_a.num, rf_b.num)
        kinds_den = _classify(rf_a.den, rf_b.den)
        tree, vals = _build_canonical(rf_a, kinds_num, kinds_den)
        return CanonicalForm(
            expr=tree,
            param_count=len(vals),
            complexity=node_count(tree),
            values=tuple(vals),
            rational=True,
            source_values=tuple(vals_a[i] for i in sorted(vals_a)),
        )
    return _simplified_canonical(e0, None, unreliable=True)


def _classify(coeffs_a, coeffs_b):
    kinds = []
    for ca, cb in zip(coeffs_a, coeffs_b):
        if ca == 0:
            kinds.append(None)
        elif ca == cb:
            kinds.append(("const", ca))
        else:
            kinds.append("param")
    return kinds


def _simplified_canonical(e0: Expr, fitted_params, unreliable: bool) -> CanonicalForm:
    s = simplify(e0)
    kept = param_indices(s)
    tree = renumber_params(s)
    values = None
    if fitted_params is not None:
        values = tuple(float(fitted_params[i - 1]) for i in kept)
    return CanonicalForm(
        expr=tree,
        param_count=len(kept),
        complexity=node_count(tree),
        values=values,
        rational=False,
        unreliable=unreliable,
    )


# ---------------------------------------------------------------------------
# Numeric equivalence oracle
# ---------------------------------------------------------------------------

_EQ_GRID = np.logspace(-6.0, 3.0, 50)


def equivalent_numeric(a: Expr, b: Expr, params_a, params_b, rtol: float = 1e-9) -> bool:
    """True iff |a(p) - b(p)| <= rtol*(1+|a(p)|) at 50 log-spaced pressures in
    [1e-6, 1e3], skipping points where both are undefined.  A point defined on
    one side only counts as a mismatch."""
    va = evaluate(a, params_a, _EQ_GRID)
    vb = evaluate(b, params_b, _EQ_GRID)
    na, nb = np.isnan(va), np.isnan(vb)
    if np.any(na != nb):
        return False
    ok = ~na
    if not ok.any():
        return True
    return bool(
        np.all(np.abs(va[ok] - vb[ok]) <= rtol * (1.0 + np.abs(va[ok])))
    )
