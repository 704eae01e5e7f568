"""CSV loading, the isotherm catalog, and synthetic data generation."""

import numpy as np
import pytest

from isosearch.datasets import (
    Dataset,
    DatasetError,
    GridSpec,
    catalog,
    catalog_model,
    load_csv,
    synthesize,
)
from isosearch.expr import node_count, parse, render
from isosearch.fitting import fit_constants, l2_loss


class TestDataset:
    def test_minimum_three_points(self):
        with pytest.raises(DatasetError):
            Dataset(np.array([1.0, 2.0]), np.array([1.0, 2.0]))

    def test_strictly_increasing(self):
        with pytest.raises(DatasetError):
            Dataset(np.array([1.0, 1.0, 2.0]), np.array([1.0, 2.0, 3.0]))

    def test_positive_pressure(self):
        with pytest.raises(DatasetError):
            Dataset(np.array([0.0, 1.0, 2.0]), np.array([1.0, 2.0, 3.0]))

    def test_finite_values(self):
        with pytest.raises(DatasetError):
            Dataset(np.array([1.0, 2.0, 3.0]), np.array([1.0, np.nan, 3.0]))


class TestLoadCsv:
    def write(self, tmp_path, text):
        f = tmp_path / "d.csv"
        f.write_text(text)
        return str(f)

    def test_valid_file(self, tmp_path):
        rows = "\n".join(f"{p},{2*p}" for p in range(1, 21))
        ds = load_csv(self.write(tmp_path, "pressure,loading\n" + rows))
        assert len(ds) == 20

    def test_two_points_rejected(self, tmp_path):
        path = self.write(tmp_path, "pressure,loading\n1,1\n2,2\n")
        with pytest.raises(DatasetError):
            load_csv(path)

    def test_bad_row_reports_line(self, tmp_path):
        path = self.write(tmp_path, "pressure,loading\n1,1\nabc,1.0\n3,3\n")
        with pytest.raises(DatasetError) as e:
            load_csv(path)
        assert ":3:" in str(e.value)

    def test_duplicate_pressure_rejected(self, tmp_path):
        path = self.write(tmp_path, "pressure,loading\n1,1\n2,2\n2,3\n4,4\n")
        with pytest.raises(DatasetError) as e:
            load_csv(path)
        assert "duplicate" in str(e.value)

    def test_missing_file_names_path(self):
        with pytest.raises(DatasetError) as e:
            load_csv("no/such/file.csv")
        assert "no/such/file.csv" in str(e.value)

    def test_unsorted_input_sorted(self, tmp_path):
        path = self.write(tmp_path, "pressure,loading\n3,3\n1,1\n2,2\n")
        ds = load_csv(path)
        assert list(ds.pressures) == [1.0, 2.0, 3.0]


class TestCatalog:
    def test_complexities_match(self):
        expected = {
            "langmuir": 7,
            "dual_site_langmuir": 15,
            "bet": 13,
            "freundlich": 5,
            "sips": 9,
        }
        got = {m.name: m.sr_complexity for m in catalog()}
        assert got == expected
        for m in catalog():
            assert node_count(m.sr_form) == m.sr_complexity

    def test_catalog_forms_roundtrip(self):
        for m in catalog():
            assert parse(render(m.sr_form)) == m.sr_form

    def test_unknown_model(self):
        with pytest.raises(DatasetError):
            catalog_model("henry")


GRID = GridSpec(0.01, 100.0, 20, "log")


class TestSynthesize:
    def test_noise_free_loss_is_zero(self):
        m = catalog_model("langmuir")
        ds = synthesize(m, [5.0, 2.0], GRID, 0.0)
        assert l2_loss(m.sr_form, [5.0, 2.0], ds) <= 1e-20

    def test_dual_site_double_knee(self):
        m = catalog_model("dual_site_langmuir")
        params = [3.0, 0.05, 8.0, 40.0]
        ds = synthesize(m, params, GridSpec(0.001, 1000.0, 50, "log"), 0.0)
        from isosearch.expr import evaluate

        f = lambda p: evaluate(m.sr_form, params, p)
        assert f(0.05) < f(40.0) / 2.0
        # the two half-saturation pressures differ by the ratio of the site
        # constants: 40 / 0.05 = 800
        assert params[3] / params[1] == pytest.approx(800.0)

    def test_bet_grid_beyond_asymptote_rejected(self):
        m = catalog_model("bet")
        # denominator p^2 - 3p + 2 has roots at 1 and 2
        with pytest.raises(DatasetError) as e:
            synthesize(m, [10.0, -3.0, 2.0], GridSpec(0.01, 5.0, 20, "log"), 0.0)
        assert "diverges" in str(e.value)

    def test_bet_grid_inside_validity_ok(self):
        m = catalog_model("bet")
        ds = synthesize(m, [10.0, -3.0, 2.0], GridSpec(0.01, 0.9, 20, "log"), 0.0)
        assert len(ds) == 20

    def test_noise_requires_rng(self):
        m = catalog_model("langmuir")
        with pytest.raises(DatasetError):
            synthesize(m, [5.0, 2.0], GRID, 0.02)

    def test_generate_refit_loop(self):
        m = catalog_model("langmuir")
        ds = synthesize(m, [5.0, 2.0], GRID, 0.0)
        fr = fit_constants(m.sr_form, ds, restarts=8,
                           rng=np.random.default_rng(1))
        rel = np.max(np.abs(fr.params - [5.0, 2.0]) / np.array([5.0, 2.0]))
        assert rel < 0.01

    def test_descriptor_recorded(self):
        m = catalog_model("langmuir")
        rng = np.random.default_rng(0)
        ds = synthesize(m, [5.0, 2.0], GRID, 0.02, rng)
        assert ds.source["model"] == "langmuir"
        assert ds.source["noise_sigma"] == 0.02
