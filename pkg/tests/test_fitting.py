"""Constant fitting: loss semantics, recovery, restart and idempotence
properties."""

import numpy as np
import pytest

from isosearch.datasets import GridSpec, catalog_model, synthesize
from isosearch.expr import parse
from isosearch.fitting import SENTINEL_LOSS, fit_constants, l2_loss

GRID = GridSpec(0.01, 100.0, 20, "log")
LANGMUIR = catalog_model("langmuir")
DUAL = catalog_model("dual_site_langmuir")


@pytest.fixture(scope="module")
def lang_data():
    return synthesize(LANGMUIR, [5.0, 2.0], GRID, 0.0)


@pytest.fixture(scope="module")
def dual_data():
    return synthesize(DUAL, [3.0, 0.05, 8.0, 40.0], GRID, 0.0)


class TestLoss:
    def test_truth_has_zero_loss(self, lang_data):
        assert l2_loss(LANGMUIR.sr_form, [5.0, 2.0], lang_data) <= 1e-20

    def test_constant_model_gives_variance(self, lang_data):
        y = lang_data.loadings
        c = float(np.mean(y))
        assert l2_loss(parse("c1"), [c], lang_data) == pytest.approx(
            float(np.var(y))
        )

    def test_undefined_point_gives_sentinel(self, lang_data):
        # undefined at every point: division by zero
        assert l2_loss(parse("c1 / (p - p)"), [1.0], lang_data) == SENTINEL_LOSS

    def test_scaling_quadratic_in_y(self, lang_data):
        from isosearch.datasets import Dataset

        scaled = Dataset(lang_data.pressures, 10.0 * lang_data.loadings)
        expr = parse("c1 * p")
        fr1 = fit_constants(expr, lang_data, restarts=4,
                            rng=np.random.default_rng(0))
        fr2 = fit_constants(expr, scaled, restarts=4,
                            rng=np.random.default_rng(0))
        assert fr2.loss == pytest.approx(100.0 * fr1.loss, rel=1e-6)


class TestFitConstants:
    def test_zero_parameter_expression(self):
        from isosearch.datasets import Dataset

        p = np.linspace(1, 10, 10)
        ds = Dataset(p, p)
        fr = fit_constants(parse("p"), ds, restarts=2,
                           rng=np.random.default_rng(0))
        assert fr.loss == 0.0
        assert fr.params.size == 0

    def test_langmuir_recovery(self, lang_data):
        wins = 0
        for seed in range(8):
            fr = fit_constants(LANGMUIR.sr_form, lang_data, restarts=8,
                               rng=np.random.default_rng(seed))
            rel = np.max(np.abs(fr.params - [5.0, 2.0]) / np.array([5.0, 2.0]))
            if rel < 0.01 and fr.loss <= 1e-12:
                wins += 1
        assert wins >= 7

    def test_dual_site_recovery(self, dual_data):
        wins = 0
        for seed in range(8):
            fr = fit_constants(DUAL.sr_form, dual_data, restarts=8,
                               rng=np.random.default_rng(100 + seed))
            if fr.loss <= 1e-6:
                wins += 1
        assert wins >= 6

    def test_monotone_in_restarts(self, lang_data):
        expr = parse("(c1 * p) / ((c2 + p) + (c3 * p))")
        for seed in (0, 1, 2, 3):
            f1 = fit_constants(expr, lang_data, restarts=1,
                               rng=np.random.default_rng(seed))
            f8 = fit_constants(expr, lang_data, restarts=8,
                               rng=np.random.default_rng(seed))
            assert f8.loss <= f1.loss + 1e-15

    def test_refit_idempotence(self, lang_data):
        fr = fit_constants(LANGMUIR.sr_form, lang_data, restarts=4,
                           rng=np.random.default_rng(5))
        again = fit_constants(LANGMUIR.sr_form, lang_data, restarts=1,
                              rng=np.random.default_rng(6),
                              warm_start=fr.params)
        assert again.loss <= fr.loss + 1e-12

    def test_restarts_validated(self, lang_data):
        with pytest.raises(ValueError):
            fit_constants(LANGMUIR.sr_form, lang_data, restarts=0)
