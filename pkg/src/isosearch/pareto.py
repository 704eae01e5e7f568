"""Pareto fronts over (complexity, loss), merging across runs, and constraint
pass-rate accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

from . import constraints
from .constraints import ConstraintVerdict, check_all
from .expr import Expr


@dataclass(frozen=True)
class ScoredModel:
    """An evaluated expression: the unit of comparison between engines.

    ``params`` parameterize ``expr``; ``canonical_params`` are the derived
    coefficients of the canonical form for the same fit.
    """

    expr: Expr
    params: tuple
    loss: float                      # search loss (penalties included for GA)
    raw_l2: float                    # unpenalized mean squared error
    raw_complexity: int
    canonical: str
    canonical_complexity: int
    verdict: Optional[ConstraintVerdict] = None
    score: Optional[float] = None
    canonical_params: Optional[tuple] = None


@dataclass(frozen=True)
class FrontEntry:
    complexity: int
    loss: float
    canonical: str
    params: tuple
    verdict: Optional[ConstraintVerdict] = None


def _better(a: FrontEntry, b: FrontEntry) -> bool:
    """Deterministic preference between entries at the same complexity."""
    ka = (a.loss, a.canonical, a.params)
    kb = (b.loss, b.canonical, b.params)
    return ka < kb


class ParetoFront:
    """Best loss at each canonical complexity; dominated entries pruned.

    An entry is dominated when another entry has strictly lower complexity
    and loss at least as good.
    """

    def __init__(self):
        self._by_c: dict[int, FrontEntry] = {}

    def __len__(self):
        return len(self._by_c)

    def __contains__(self, complexity: int):
        return complexity in self._by_c

    def get(self, complexity: int) -> Optional[FrontEntry]:
        return self._by_c.get(complexity)

    def entries(self) -> list[FrontEntry]:
        return [self._by_c[c] for c in sorted(self._by_c)]

    def copy(self) -> "ParetoFront":
        out = ParetoFront()
        out._by_c = dict(self._by_c)
        return out

    def update(self, model: ScoredModel) -> bool:
        """Insert ``model`` if it improves the best loss at its canonical
        complexity; prune anything it dominates.  Returns True on insert."""
        params = model.canonical_params
        if params is None:
            params = model.params
        entry = FrontEntry(
            complexity=model.canonical_complexity,
            loss=model.loss,
            canonical=model.canonical,
            params=tuple(float(v) for v in params),
            verdict=model.verdict,
        )
        return self._insert(entry)

    def _insert(self, entry: FrontEntry) -> bool:
        cur = self._by_c.get(entry.complexity)
        if cur is not None and not _better(entry, cur):
            return False
        # reject if dominated by a simpler entry
        for c, e in self._by_c.items():
            if c < entry.complexity and e.loss <= entry.loss:
                return False
        self._by_c[entry.complexity] = entry
        # prune entries the new one dominates
        for c in [c for c, e in self._by_c.items()
                  if c > entry.complexity and entry.loss <= e.loss]:
            del self._by_c[c]
        return True

    def check_invariant(self) -> bool:
        es = self.entries()
        for i, a in enumerate(es):
            for b in es[i + 1:]:
                if a.loss <= b.loss:  # a is simpler; b must be strictly better
                    return False
        return True


def update_front(front: ParetoFront, model: ScoredModel) -> ParetoFront:
    front.update(model)
    return front


def log_area_under_front(front: ParetoFront) -> Optional[float]:
    """Area under the front with log10-scaled loss, piecewise-constant
    between consecutive complexities.  A comparison convenience only,
    non-normative: lower is better, but the head of the front dominates the
    number."""
    entries = front.entries()
    if len(entries) < 2:
        return None
    area = 0.0
    for a, b in zip(entries, entries[1:]):
        area += math.log10(max(a.loss, 1e-300)) * (b.complexity - a.complexity)
    return area


def merge_fronts(fronts: Iterable[ParetoFront]) -> ParetoFront:
    """Dominance-pruned union; idempotent, commutative, order-invariant."""
    fronts = list(fronts)
    if not fronts:
        raise ValueError("need at least one front")
    entries = [e for f in fronts for e in f.entries()]
    entries.sort(key=lambda e: (e.complexity, e.loss, e.canonical, e.params))
    out = ParetoFront()
    for e in entries:
        out._insert(e)
    return out


@dataclass(frozen=True)
class PassRateRow:
    """Fractions of deduplicated expressions passing each constraint."""

    engine: str
    constraints_on: bool
    n_unique: int
    c1: float
    c2: float
    c3: float


def dedupe_by_canonical(samples: list[ScoredModel]) -> list[ScoredModel]:
    """Keep the most accurate sample per canonical form."""
    best: dict[str, ScoredModel] = {}
    for s in samples:
        cur = best.get(s.canonical)
        if cur is None or (s.raw_l2, s.params) < (cur.raw_l2, cur.params):
            best[s.canonical] = s
    return [best[k] for k in sorted(best)]


def pass_rates(
    samples: list[ScoredModel],
    engine: str = "",
    constraints_on: bool = False,
    budget: float = constraints.DEFAULT_BUDGET,
    p_max: Optional[float] = None,
) -> PassRateRow:
    """Deduplicate by canonical form, recompute all three constraint verdicts
    post-hoc, and report pass fractions."""
    if not samples:
        raise ValueError("no samples")
    unique = dedupe_by_canonical(samples)
    n = len(unique)
    passed = [0, 0, 0]
    for s in unique:
        v = check_all(s.expr, s.params, budget=budget, p_max=p_max)
        for i in range(3):
            if v.passed(i + 1):
                passed[i] += 1
    return PassRateRow(
        engine=engine,
        constraints_on=constraints_on,
        n_unique=n,
        c1=passed[0] / n,
        c2=passed[1] / n,
        c3=passed[2] / n,
    )
