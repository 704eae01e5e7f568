"""Thermodynamic constraint predicates with time budgets and memoization.

Three checks on an isotherm candidate f(p) with concrete parameter values:

  1. f(p) -> 0 as p -> 0+          (all molecules desorb at zero pressure)
  2. f'(p) -> c with 0 < c < inf   (finite positive Henry's-law slope)
  3. f is monotone non-decreasing on (start, stop); zero slope allowed

A check that exceeds its time budget reports fail with a timed_out flag.
"""

from __future__ import annotations

import os
import time
from collections import OrderedDict
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import algebra
from .algebra import (
    NotRational,
    RationalForm,
    UnsupportedExpression,
    ZeroDenominator,
    differentiate,
    normalize_rational,
    to_rational,
)
from .expr import Expr, compile_evaluator, evaluate, max_param_index, render, renumber_params

_ABS_ZERO_TOL = 1e-10       # numeric-limit tolerance for "equals zero"
_MONO_TOL = 1e-12           # relative slack for the pairwise monotonic check
_SCAN_POINTS = 512          # derivative sign-change scan resolution
_NUM_FALLBACK_P = (1e-4, 1e-6, 1e-8, 1e-10)

DEFAULT_BUDGET = 0.1        # seconds per check
DEFAULT_START = 1e-8
DEFAULT_STOP = 1000.0


class _Timeout(Exception):
    pass


class _Deadline:
    def __init__(self, budget: Optional[float]):
        self.t_end = time.monotonic() + budget if budget is not None else None

    def check(self):
        if self.t_end is not None and time.monotonic() > self.t_end:
            raise _Timeout


@dataclass(frozen=True, slots=True)
class LimitValue:
    """One-sided limit at p -> 0+: finite value, signed infinity, or
    undefined."""

    category: str  # "finite" | "+inf" | "-inf" | "undefined"
    value: Optional[float] = None

    @staticmethod
    def finite(v) -> "LimitValue":
        return LimitValue("finite", float(v))

    @property
    def is_finite(self) -> bool:
        return self.category == "finite"

    def __str__(self):
        if self.category == "finite":
            return f"{self.value:g}"
        return {"+inf": "+inf", "-inf": "-inf", "undefined": "undefined"}[self.category]


@dataclass(frozen=True, slots=True)
class ConstraintVerdict:
    """Pass/fail per constraint (None = not requested), with per-check
    timeout flags and elapsed seconds.  A timed-out check reports fail."""

    c1_pass: Optional[bool]
    c2_pass: Optional[bool]
    c3_pass: Optional[bool]
    timed_out: tuple
    elapsed: tuple

    def passed(self, i: int) -> Optional[bool]:
        return (self.c1_pass, self.c2_pass, self.c3_pass)[i - 1]


class Counters:
    """Instrumentation for the skip rule and cache behaviour."""

    def __init__(self):
        self.requests = 0      # check_all calls that ran or looked up checks
        self.computed = 0      # individual constraint evaluations performed
        self.memo_hits = 0

    def reset(self):
        self.requests = 0
        self.computed = 0
        self.memo_hits = 0


counters = Counters()


class _Memo:
    def __init__(self):
        self.cap = int(os.environ.get("ISOSEARCH_MEMO_CAP", "200000"))
        self.data: OrderedDict = OrderedDict()

    def get(self, key):
        return self.data.get(key)

    def put(self, key, value):
        if len(self.data) >= self.cap:
            try:
                self.data.popitem(last=False)
            except KeyError:
                pass
        self.data[key] = value

    def clear(self):
        self.data.clear()


_memo = _Memo()


def clear_memo():
    _memo.clear()


# ---------------------------------------------------------------------------
# Limits at zero
# ---------------------------------------------------------------------------


def _param_fractions(expr, params):
    need = max_param_index(expr)
    if len(params) < need:
        raise ValueError(f"expression needs {need} parameters, got {len(params)}")
    return {i + 1: Fraction(float(params[i])) for i in range(need)}


def _lowest(coeffs):
    for i, c in enumerate(coeffs):
        if c != 0:
            return i, c
    return None, None


def _limit_of_rational(rf: RationalForm) -> LimitValue:
    ln, an = _lowest(rf.num)
    ld, bd = _lowest(rf.den)
    if bd is None:
        return LimitValue("undefined")
    if an is None:
        return LimitValue.finite(0.0)
    if ln > ld:
        return LimitValue.finite(0.0)
    ratio = an / bd
    if ln == ld:
        return LimitValue.finite(ratio)
    return LimitValue("+inf" if ratio > 0 else "-inf")


def _limit_numeric(expr, params) -> LimitValue:
    v = [evaluate(expr, params, p) for p in _NUM_FALLBACK_P]
    if any(np.isnan(x) for x in v):
        return LimitValue("undefined")
    v1, v2, v3, v4 = v
    if max(abs(x) for x in v) <= 1e-11:
        return LimitValue.finite(0.0)
    d2, d3 = v3 - v2, v4 - v3
    if abs(d3) <= 1e-9 * (1.0 + abs(v4)):
        return LimitValue.finite(v4)
    m2, m3, m4 = abs(v2), abs(v3), abs(v4)
    growing = m4 > 5.0 * max(m3, 1e-300) and m3 > 5.0 * max(m2, 1e-300)
    if growing or m4 > 1e15:
        if v3 * v4 > 0:
            return LimitValue("+inf" if v4 > 0 else "-inf")
        return LimitValue("undefined")
    # contracting difference ratio: Aitken extrapolation of the tail
    if d2 != 0 and abs(d3 / d2) < 0.98:
        denom = d3 - d2
        if denom != 0:
            return LimitValue.finite(v4 - d3 * d3 / denom)
        return LimitValue.finite(v4)
    return LimitValue("undefined")


def limit_at_zero_plus(expr: Expr, params, budget: Optional[float] = None) -> LimitValue:
    try:
        lv, _ = _limit(expr, params, _Deadline(budget))
        return lv
    except _Timeout:
        return LimitValue("undefined")


def _limit(expr, params, deadline) -> tuple[LimitValue, bool]:
    """Returns (limit, exact) where exact means the symbolic path decided."""
    vals = _param_fractions(expr, params)
    deadline.check()
    try:
        return _limit_of_rational(to_rational(expr, vals)), True
    except NotRational:
        pass
    except ZeroDenominator:
        return LimitValue("undefined"), True
    deadline.check()
    try:
        return _limit_of_rational(to_rational(expr, vals, sqrt_mode=True)), True
    except (NotRational, ZeroDenominator):
        pass
    deadline.check()
    return _limit_numeric(expr, params), False


# ---------------------------------------------------------------------------
# The three constraints
# ---------------------------------------------------------------------------


def constraint1(expr: Expr, params, budget: Optional[float] = DEFAULT_BUDGET) -> bool:
    try:
        ok, _ = _c1(expr, params, _Deadline(budget))
        return ok
    except _Timeout:
        return False


def _c1(expr, params, deadline):
    lv, exact = _limit(expr, params, deadline)
    if not lv.is_finite:
        return False, lv
    if exact:
        return lv.value == 0.0, lv
    return abs(lv.value) <= _ABS_ZERO_TOL, lv


def constraint2(expr: Expr, params, budget: Optional[float] = DEFAULT_BUDGET) -> bool:
    try:
        ok, _ = _c2(expr, params, _Deadline(budget))
        return ok
    except _Timeout:
        return False


def _c2(expr, params, deadline):
    try:
        deriv = differentiate(expr)
    except UnsupportedExpression:
        return False, LimitValue("undefined")
    lv, exact = _limit(deriv, params, deadline)
    if not lv.is_finite:
        return False, lv
    if exact:
        return lv.value > 0.0, lv
    return lv.value > _ABS_ZERO_TOL, lv


def _real_roots(coeffs, lo, hi):
    """Real roots of a Fraction-coefficient polynomial inside (lo, hi)."""
    cs = list(coeffs)
    while cs and cs[-1] == 0:
        cs.pop()
    if len(cs) <= 1:
        return []
    top = max(abs(c) for c in cs)
    arr = np.array([float(c / top) for c in reversed(cs)], dtype=float)
    try:
        roots = np.roots(arr)
    except np.linalg.LinAlgError:
        return []
    out = []
    for r in roots:
        if abs(r.imag) <= 1e-9 * (1.0 + abs(r.real)) and lo < r.real < hi:
            out.append(float(r.real))
    return sorted(out)


def _pairwise_nondecreasing(ys):
    prev = ys[0]
    for y in ys[1:]:
        if y - prev < -_MONO_TOL * (1.0 + abs(prev)):
            return False
        prev = y
    return True


def constraint3(
    expr: Expr,
    params,
    start: float = DEFAULT_START,
    stop: float = DEFAULT_STOP,
    budget: Optional[float] = DEFAULT_BUDGET,
) -> bool:
    if not (0.0 < start < stop):
        raise ValueError("need 0 < start < stop")
    try:
        return _c3(expr, params, start, stop, _Deadline(budget))
    except _Timeout:
        return False


def _c3(expr, params, start, stop, deadline):
    if not algebra._contains_var(expr):
        # constants pass, unless the constant itself is undefined
        return bool(np.isfinite(evaluate(expr, params, 1.0)))
    vals = _param_fractions(expr, params)
    deadline.check()
    try:
        rf = normalize_rational(to_rational(expr, vals))
    except ZeroDenominator:
        return False
    except NotRational:
        return _c3_numeric(expr, params, start, stop, deadline)

    # a genuine pole inside the range forces a decrease on one side of it
    if len(rf.den) > 1 and _real_roots(rf.den, start, stop):
        return False
    deadline.check()
    dnum = algebra._psub(
        algebra._pmul(algebra._pderiv(rf.num), rf.den),
        algebra._pmul(rf.num, algebra._pderiv(rf.den)),
    )
    crit = _real_roots(dnum, start, stop)
    deadline.check()
    points = np.array([start] + crit + [stop], dtype=float)
    scale = max(abs(c) for c in (rf.num + rf.den) if c != 0)
    num_f = np.array([float(c / scale) for c in reversed(rf.num)] or [0.0])
    den_f = np.array([float(c / scale) for c in reversed(rf.den)])
    with np.errstate(all="ignore"):
        ys = np.polyval(num_f, points) / np.polyval(den_f, points)
    if not np.all(np.isfinite(ys)):
        return False
    return _pairwise_nondecreasing(list(ys))


def _c3_numeric(expr, params, start, stop, deadline):
    grid = np.logspace(np.log10(start), np.log10(stop), _SCAN_POINTS)
    c = np.asarray(params, dtype=float)
    f = compile_evaluator(expr)
    ys = f(c, grid)
    if not np.all(np.isfinite(ys)):
        return False
    # dense running check first: cheap and catches what the coarse critical
    # point partition could miss
    if not _pairwise_nondecreasing(list(ys)):
        return False
    deadline.check()
    try:
        deriv = differentiate(expr)
    except UnsupportedExpression:
        return True  # dense scan is all we have
    fd = compile_evaluator(deriv)
    ds = fd(c, grid)
    finite = np.isfinite(ds)
    crit = []
    sign = np.sign(ds)
    flips = np.nonzero(
        (sign[:-1] * sign[1:] < 0) & finite[:-1] & finite[1:]
    )[0]
    for i in flips[:64]:
        deadline.check()
        crit.append(_bisect_root(fd, c, grid[i], grid[i + 1]))
    points = np.array([start] + sorted(crit) + [stop], dtype=float)
    ys2 = f(c, points)
    if not np.all(np.isfinite(ys2)):
        return False
    return _pairwise_nondecreasing(list(ys2))


def _bisect_root(fd, c, lo, hi, iters: int = 60):
    flo = float(fd(c, np.array([lo]))[0])
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = float(fd(c, np.array([mid]))[0])
        if not np.isfinite(fm) or fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Combined check with memoization
# ---------------------------------------------------------------------------


def _round_sig(x: float) -> str:
    return f"{float(x):.6g}"


def check_all(
    expr: Expr,
    params,
    budget: float = DEFAULT_BUDGET,
    p_max: Optional[float] = None,
    checks: tuple = (True, True, True),
    memo_key: Optional[str] = None,
) -> ConstraintVerdict:
    """Run the requested constraint checks under individual time budgets.

    Results are memoized; ``memo_key`` (typically a canonical-form string
    plus its coefficient values) shares verdicts across equivalent surface
    forms, otherwise the renumbered render string is used.
    """
    if not any(checks):
        return ConstraintVerdict(None, None, None, (False,) * 3, (0.0,) * 3)
    counters.requests += 1
    stop = 10.0 * p_max if p_max else DEFAULT_STOP
    if memo_key is None:
        e0 = renumber_params(expr)
        memo_key = render(e0) + "|" + ",".join(_round_sig(v) for v in params)
    key = (memo_key, _round_sig(stop), checks, _round_sig(budget))
    hit = _memo.get(key)
    if hit is not None:
        counters.memo_hits += 1
        return hit

    results = [None, None, None]
    touts = [False, False, False]
    times = [0.0, 0.0, 0.0]
    runners = (
        lambda dl: _c1(expr, params, dl)[0],
        lambda dl: _c2(expr, params, dl)[0],
        lambda dl: _c3(expr, params, DEFAULT_START, stop, dl),
    )
    for i in range(3):
        if not checks[i]:
            continue
        counters.computed += 1
        t0 = time.monotonic()
        try:
            results[i] = bool(runners[i](_Deadline(budget)))
        except _Timeout:
            results[i] = False
            touts[i] = True
        except (ValueError, OverflowError, ZeroDivisionError):
            results[i] = False
        times[i] = time.monotonic() - t0
    verdict = ConstraintVerdict(
        results[0], results[1], results[2], tuple(touts), tuple(times)
    )
    _memo.put(key, verdict)
    return verdict
