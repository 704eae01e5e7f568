"""Thermodynamic constraint checks: limits, the three predicates, budgets,
and memoization."""

import numpy as np
import pytest

from isosearch.constraints import (
    check_all,
    clear_memo,
    constraint1,
    constraint2,
    constraint3,
    counters,
    limit_at_zero_plus,
)
from isosearch.expr import (
    BSR_OPSET,
    TreeLimits,
    evaluate,
    param_indices,
    parse,
    random_tree,
)

LANGMUIR = parse("(c1 * p) / (c2 + p)")


@pytest.fixture(autouse=True)
def fresh_memo():
    clear_memo()
    counters.reset()
    yield


class TestLimit:
    def test_langmuir_limit_zero(self):
        lv = limit_at_zero_plus(LANGMUIR, [5, 2])
        assert lv.is_finite and lv.value == 0

    def test_affine_rational_limit(self):
        lv = limit_at_zero_plus(parse("((c1 * p) + c2) / (c3 + p)"), [5, 1, 2])
        assert lv.is_finite and lv.value == pytest.approx(0.5)

    def test_one_over_p_diverges(self):
        assert limit_at_zero_plus(parse("c1 / p"), [1]).category == "+inf"

    def test_negative_divergence(self):
        assert limit_at_zero_plus(parse("(0 - c1) / p"), [1]).category == "-inf"

    def test_sqrt_path(self):
        lv = limit_at_zero_plus(parse("c1 * sqrt(p)"), [3])
        assert lv.is_finite and lv.value == 0

    def test_sqrt_reciprocal(self):
        assert limit_at_zero_plus(parse("c1 / sqrt(p)"), [1]).category == "+inf"

    def test_numeric_fallback_power(self):
        lv = limit_at_zero_plus(parse("c1 * (p ^ c2)"), [2.0, 0.7])
        assert lv.is_finite and abs(lv.value) <= 1e-6

    def test_undefined_everywhere(self):
        assert limit_at_zero_plus(parse("c1 / (p - p)"), [1]).category == "undefined"


class TestConstraint1:
    def test_langmuir_passes(self):
        assert constraint1(LANGMUIR, [5, 2])

    def test_affine_fails(self):
        assert not constraint1(parse("(c1 * p) + c2"), [1, 0.3])

    def test_constant_fails(self):
        assert not constraint1(parse("c1"), [4])


class TestConstraint2:
    def test_langmuir_slope(self):
        assert constraint2(LANGMUIR, [5, 2])

    def test_sqrt_slope_diverges(self):
        assert not constraint2(parse("c1 * sqrt(p)"), [1])

    def test_square_slope_vanishes(self):
        assert not constraint2(parse("c1 * (p ^ 2)"), [1])

    def test_negative_slope_fails(self):
        assert not constraint2(parse("(0 - c1) * p"), [2])


class TestConstraint3:
    def test_langmuir_increasing(self):
        assert constraint3(LANGMUIR, [5, 2])

    def test_cube_passes_zero_slope_at_origin(self):
        assert constraint3(parse("c1 * cube(p)"), [1])

    def test_decreasing_langmuir_fails(self):
        assert not constraint3(LANGMUIR, [-5, 2])

    def test_constant_passes(self):
        assert constraint3(parse("c1"), [3])

    def test_bet_fails_across_asymptote(self):
        bet = parse("(c1 * p) / (((p ^ 2) + (c2 * p)) + c3)")
        # denominator roots at p = 1 and p = 2; range crosses them
        assert not constraint3(bet, [10.0, -3.0, 2.0], stop=10.0)
        # restricted below the first pole the same instance is fine
        assert constraint3(bet, [10.0, -3.0, 2.0], start=1e-8, stop=0.5)

    def test_interior_dip_detected(self):
        # p^3 - p has negative slope on part of (start, stop)
        assert not constraint3(parse("cube(p) - p"), [], stop=10.0)

    def test_bad_range_rejected(self):
        with pytest.raises(ValueError):
            constraint3(LANGMUIR, [5, 2], start=-1.0, stop=1.0)


def brute_force_monotone(expr, params, start, stop, n=10_000):
    grid = np.logspace(np.log10(start), np.log10(stop), n)
    ys = evaluate(expr, list(params), grid)
    if np.any(np.isnan(ys)):
        return False
    run_max = ys[0]
    for y in ys[1:]:
        if y < run_max - 1e-12 * (1.0 + abs(run_max)):
            return False
        if y > run_max:
            run_max = y
    return True


class TestCheckAll:
    def test_langmuir_all_pass(self):
        v = check_all(LANGMUIR, [5, 2])
        assert (v.c1_pass, v.c2_pass, v.c3_pass) == (True, True, True)
        assert brute_force_monotone(LANGMUIR, [5, 2], 1e-8, 100.0)

    def test_affine_rational(self):
        e = parse("((c1 * p) + c2) / (c3 + p)")
        v = check_all(e, [5, 1, 2])
        assert (v.c1_pass, v.c2_pass, v.c3_pass) == (False, True, True)

    def test_sqrt_model(self):
        e = parse("c1 * sqrt(p)")
        v = check_all(e, [1])
        assert (v.c1_pass, v.c2_pass, v.c3_pass) == (True, False, True)

    def test_memo_transparency(self):
        v1 = check_all(LANGMUIR, [5, 2])
        hits_before = counters.memo_hits
        v2 = check_all(LANGMUIR, [5, 2])
        assert counters.memo_hits == hits_before + 1
        assert v1 == v2

    def test_selective_checks(self):
        v = check_all(LANGMUIR, [5, 2], checks=(True, True, False))
        assert v.c3_pass is None
        assert v.c1_pass is True

    def test_no_checks_no_request(self):
        counters.reset()
        v = check_all(LANGMUIR, [5, 2], checks=(False, False, False))
        assert counters.requests == 0
        assert (v.c1_pass, v.c2_pass, v.c3_pass) == (None, None, None)

    def test_timeout_reports_false(self):
        # a hostile budget forces the timeout path
        deep = parse("/".join(["((c1 * p) + c2)"] * 1) )
        v = check_all(LANGMUIR, [5, 2], budget=1e-9)
        assert v.c1_pass is False and v.timed_out[0]


class TestOracleAgreement:
    def test_constraint3_matches_brute_force(self):
        rng = np.random.default_rng(99)
        limits = TreeLimits(max_depth=4, max_size=15)
        stop = 1000.0
        disagreements = []
        for i in range(300):
            t = random_tree(limits, BSR_OPSET, rng)
            k = len(param_indices(t))
            params = tuple(
                float(v) for v in np.exp(rng.uniform(np.log(0.1), np.log(10), k))
            )
            mine = constraint3(t, params, stop=stop, budget=2.0)
            brute = brute_force_monotone(t, params, 1e-8, stop)
            if mine != brute:
                disagreements.append((t, params, mine, brute))
        assert not disagreements, disagreements[:3]
