"""Dataset loading, the ground-truth isotherm catalog, and synthetic data
generation from catalog models."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .algebra import NotRational, ZeroDenominator, to_rational
from .constraints import _real_roots
from .expr import Expr, evaluate, node_count, parse


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Paired pressure/loading observations, sorted by pressure."""

    pressures: np.ndarray
    loadings: np.ndarray
    name: str = "dataset"
    units: str = ""
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        p = np.asarray(self.pressures, dtype=float)
        y = np.asarray(self.loadings, dtype=float)
        object.__setattr__(self, "pressures", p)
        object.__setattr__(self, "loadings", y)
        if p.shape != y.shape or p.ndim != 1:
            raise DatasetError("pressure and loading must be equal-length vectors")
        if len(p) < 3:
            raise DatasetError(f"need at least 3 points, got {len(p)}")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(y))):
            raise DatasetError("non-finite values in dataset")
        if np.any(p <= 0):
            raise DatasetError("pressures must be > 0")
        if np.any(np.diff(p) <= 0):
            raise DatasetError("pressures must be strictly increasing")

    def __len__(self):
        return len(self.pressures)

    @property
    def max_pressure(self) -> float:
        return float(self.pressures[-1])


def load_csv(path: str) -> Dataset:
    """Load a ``pressure,loading`` CSV.  Rows are sorted by pressure;
    duplicate pressures and malformed rows are errors with line numbers."""
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot open dataset file {path}: {e.strerror}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file")
        if [h.strip().lower() for h in header] != ["pressure", "loading"]:
            raise DatasetError(f"{path}:1: expected header 'pressure,loading'")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DatasetError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1]), lineno))
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: cannot parse row {','.join(row)!r}")
    rows.sort(key=lambda r: r[0])
    for (pa, _, la), (pb, _, lb) in zip(rows, rows[1:]):
        if pa == pb:
            raise DatasetError(f"{path}:{lb}: duplicate pressure {pa!r} (also line {la})")
    p = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    import os

    return Dataset(p, y, name=os.path.splitext(os.path.basename(path))[0],
                   source={"kind": "file", "path": str(path)})


@dataclass(frozen=True)
class IsothermModel:
    """A ground-truth isotherm: literature equation, the form a search would
    write it in, and that form's complexity."""

    name: str
    literature: str
    sr_form: Expr
    sr_complexity: int
    param_ranges: tuple

    def __post_init__(self):
        if node_count(self.sr_form) != self.sr_complexity:
            raise ValueError(
                f"{self.name}: catalog complexity {self.sr_complexity} != "
                f"tree node count {node_count(self.sr_form)}"
            )


def catalog() -> list[IsothermModel]:
    """The well-known isotherms with their search-form complexities."""
    return [
        IsothermModel(
            name="langmuir",
            literature="q_max*K*p / (1 + K*p)",
            sr_form=parse("(c1 * p) / (c2 + p)"),
            sr_complexity=7,
            param_ranges=((0.1, 100.0), (0.01, 100.0)),
        ),
        IsothermModel(
            name="dual_site_langmuir",
            literature="qa*Ka*p/(1+Ka*p) + qb*Kb*p/(1+Kb*p)",
            sr_form=parse("((c1 * p) / (c2 + p)) + ((c3 * p) / (c4 + p))"),
            sr_complexity=15,
            param_ranges=((0.1, 100.0), (0.001, 10.0), (0.1, 100.0), (1.0, 1000.0)),
        ),
        IsothermModel(
            name="bet",
            literature="vm*c*(p/p0) / ((1-p/p0)*(1+(c-1)*p/p0))",
            sr_form=parse("(c1 * p) / (((p ^ 2) + (c2 * p)) + c3)"),
            sr_complexity=13,
            param_ranges=((0.1, 1000.0), (-100.0, 100.0), (0.01, 1000.0)),
        ),
        IsothermModel(
            name="freundlich",
            literature="c1 * p^(1/n)",
            sr_form=parse("c1 * (p ^ c2)"),
            sr_complexity=5,
            param_ranges=((0.1, 100.0), (0.05, 1.0)),
        ),
        IsothermModel(
            name="sips",
            literature="c1*p^(1/n) / (1 + c1*p^(1/n))",
            sr_form=parse("(p ^ c2) / (c1 + (p ^ c2))"),
            sr_complexity=9,
            param_ranges=((0.01, 100.0), (0.05, 1.0)),
        ),
    ]


def catalog_model(name: str) -> IsothermModel:
    for m in catalog():
        if m.name == name:
            return m
    raise DatasetError(f"unknown catalog model {name!r}; have "
                       + ", ".join(m.name for m in catalog()))


@dataclass(frozen=True)
class GridSpec:
    """Pressure grid: n points from lo to hi, log- or linearly spaced."""

    lo: float
    hi: float
    n: int = 20
    kind: str = "log"

    def points(self) -> np.ndarray:
        if not (0 < self.lo < self.hi) or self.n < 3:
            raise DatasetError("grid needs 0 < lo < hi and n >= 3")
        if self.kind == "log":
            return np.logspace(np.log10(self.lo), np.log10(self.hi), self.n)
        if self.kind == "linear":
            return np.linspace(self.lo, self.hi, self.n)
        raise DatasetError(f"unknown grid kind {self.kind!r}")


def _validity_limit(model: IsothermModel, params) -> Optional[float]:
    """Smallest positive pole of the model instance (the saturation-pressure
    analog for BET-like forms), or None when the instance has no positive
    pole."""
    values = {i + 1: Fraction(float(params[i])) for i in range(len(params))}
    try:
        rf = to_rational(model.sr_form, values)
    except (NotRational, ZeroDenominator):
        return None
    roots = _real_roots(rf.den, 0.0, float("inf"))
    return min(roots) if roots else None


def synthesize(
    model: IsothermModel,
    params: Sequence[float],
    grid: GridSpec,
    noise_sigma: float = 0.0,
    rng=None,
    name: Optional[str] = None,
) -> Dataset:
    """Synthetic dataset y = f(p) * (1 + eps), eps ~ N(0, sigma^2).

    The grid must stay inside the model's validity range: requesting points
    at or beyond a positive pole (the BET asymptote) is an error.
    """
    p = grid.points()
    limit = _validity_limit(model, params)
    if limit is not None and grid.hi >= limit:
        raise DatasetError(
            f"{model.name}: grid reaches {grid.hi:g} but the model instance "
            f"diverges at p = {limit:g}; keep the grid below it"
        )
    y = evaluate(model.sr_form, list(params), p)
    if np.any(np.isnan(y)):
        raise DatasetError(f"{model.name}: model undefined inside the grid")
    if noise_sigma > 0:
        if rng is None:
            raise DatasetError("noise requested but no rng supplied")
        y = y * (1.0 + noise_sigma * rng.standard_normal(len(p)))
    descriptor = {
        "kind": "synthetic",
        "model": model.name,
        "params": tuple(float(v) for v in params),
        "grid": (grid.kind, grid.lo, grid.hi, grid.n),
        "noise_sigma": float(noise_sigma),
    }
    return Dataset(p, y, name=name or f"synthetic-{model.name}",
                   source=descriptor)
