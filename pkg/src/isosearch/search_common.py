"""Shared machinery for the two search engines: per-run caches, scored-model
construction, and the run record both engines emit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import constraints
from .algebra import CanonicalForm, canonical_form
from .constraints import check_all
from .expr import Expr, node_count, render
from .fitting import FitResult, fit_constants
from .pareto import ParetoFront, ScoredModel

_CACHE_CAP = 500_000


class EngineContext:
    """Per-run caches keyed by the renumbered render string of a structure.

    Fits are memoized per structure (structural duplicates dominate both
    engines' traffic); canonical forms are memoized the same way; constraint
    verdicts are memoized downstream keyed by the canonical instance.
    """

    def __init__(self, dataset, fit_restarts, fit_max_iter, fit_tol,
                 check_budget):
        self.dataset = dataset
        self.fit_restarts = fit_restarts
        self.fit_max_iter = fit_max_iter
        self.fit_tol = fit_tol
        self.check_budget = check_budget
        self.p_max = dataset.max_pressure if dataset is not None else None
        self.fit_cache: dict[str, FitResult] = {}
        self.canon_cache: dict[str, CanonicalForm] = {}
        self.instances: dict[tuple, Optional[CanonicalForm]] = {}
        self.fits_computed = 0
        self.fit_hits = 0

    @staticmethod
    def structure_key(expr: Expr) -> str:
        return render(expr)

    def fit(self, expr: Expr, key: str, rng, warm_start=None) -> FitResult:
        """Memoized fit; a warm start triggers one extra descent and keeps
        the cache entry if it improves."""
        cached = self.fit_cache.get(key)
        if cached is not None and warm_start is None:
            self.fit_hits += 1
            return cached
        if warm_start is not None and cached is not None:
            fr = fit_constants(expr, self.dataset, restarts=1, rng=rng,
                               warm_start=np.asarray(warm_start, dtype=float),
                               max_iter=self.fit_max_iter, tol=self.fit_tol)
            self.fits_computed += 1
            best = fr if fr.loss < cached.loss else cached
            self.fit_cache[key] = best
            return best
        fr = fit_constants(expr, self.dataset, restarts=self.fit_restarts,
                           rng=rng, warm_start=warm_start,
                           max_iter=self.fit_max_iter, tol=self.fit_tol)
        self.fits_computed += 1
        if len(self.fit_cache) < _CACHE_CAP:
            self.fit_cache[key] = fr
        return fr

    def canonical(self, expr: Expr, key: str) -> CanonicalForm:
        cf = self.canon_cache.get(key)
        if cf is None:
            cf = canonical_form(expr)
            if len(self.canon_cache) < _CACHE_CAP:
                self.canon_cache[key] = cf
        return cf

    def instance(self, expr: Expr, key: str, params) -> Optional[CanonicalForm]:
        """Canonical instance for concrete parameter values (memoized);
        None when canonicalization errored."""
        pk = tuple(f"{float(v):.6g}" for v in params)
        k = (key, pk)
        if k in self.instances:
            return self.instances[k]
        try:
            inst = canonical_form(expr, fitted_params=list(params))
        except (ValueError, OverflowError, ZeroDivisionError):
            inst = None
        if len(self.instances) < _CACHE_CAP:
            self.instances[k] = inst
        return inst

    def instance_key(self, expr: Expr, key: str, params) -> str:
        """Memo key for constraint verdicts: canonical instance string plus
        its derived coefficients rounded to 6 significant digits."""
        inst = self.instance(expr, key, params)
        if inst is None:
            return key + "|" + ",".join(f"{float(v):.6g}" for v in params)
        vals = inst.values or ()
        return inst.string + "|" + ",".join(f"{float(v):.6g}" for v in vals)

    def check(self, expr: Expr, key: str, params, checks,
              canonical_key: bool = False) -> constraints.ConstraintVerdict:
        """Constraint verdicts through the shared memo.

        With ``canonical_key`` (or when the canonical instance is already
        cached) verdicts are shared across equivalent surface forms;
        otherwise the cheaper structural key is used.
        """
        pk = tuple(f"{float(v):.6g}" for v in params)
        if canonical_key or (key, pk) in self.instances:
            memo_key = self.instance_key(expr, key, params)
        else:
            memo_key = key + "|" + ",".join(pk)
        return check_all(
            expr,
            params,
            budget=self.check_budget,
            p_max=self.p_max,
            checks=checks,
            memo_key=memo_key,
        )


@dataclass
class RunRecord:
    """Everything one search run produced, engine-agnostic."""

    engine: str
    seed: Optional[int]
    samples: list
    front: ParetoFront
    counters: dict
    config: dict
    duration: float
    fronts_per_gen: Optional[list] = None   # GA: HOF snapshot per generation


def make_scored(expr: Expr, params, loss, raw_l2, canonical: CanonicalForm,
                verdict=None, score=None, canonical_params=None) -> ScoredModel:
    return ScoredModel(
        expr=expr,
        params=tuple(float(v) for v in params),
        loss=float(loss),
        raw_l2=float(raw_l2),
        raw_complexity=node_count(expr),
        canonical=canonical.string,
        canonical_complexity=canonical.complexity,
        verdict=verdict,
        score=score,
        canonical_params=canonical_params,
    )


def polish_front(front: ParetoFront, models: dict, ctx: EngineContext, rng,
                 restarts: int = 8, penalize=None,
                 with_verdicts: bool = False) -> ParetoFront:
    """Post-processing pass over a finished front: refit each member at full
    precision and attach the canonical coefficients of the final fit.

    ``with_verdicts`` recomputes a complete three-constraint verdict and
    re-applies the engine's penalty policy; engines leave it off when their
    constraints are disabled so the checker is never consulted (the reporting
    layer computes verdicts post-hoc on its own).
    """
    from .pareto import FrontEntry

    out = ParetoFront()
    for entry in front.entries():
        sm = models.get(entry.canonical)
        if sm is None or ctx.dataset is None:
            out._insert(entry)
            continue
        fr = fit_constants(sm.expr, ctx.dataset, restarts=restarts, rng=rng)
        if fr.loss <= sm.raw_l2:
            raw, params = float(fr.loss), tuple(float(v) for v in fr.params)
        else:
            raw, params = sm.raw_l2, sm.params
        key = ctx.structure_key(sm.expr)
        verdict = None
        loss = raw
        if with_verdicts:
            verdict = ctx.check(sm.expr, key, params, (True, True, True))
            if penalize is not None:
                loss = penalize(raw, verdict)
        inst = ctx.instance(sm.expr, key, params)
        shown = inst.values if inst is not None and inst.values else params
        out._insert(FrontEntry(
            complexity=entry.complexity,
            loss=float(loss),
            canonical=entry.canonical,
            params=tuple(float(v) for v in shown),
            verdict=verdict,
        ))
    return out


def constraint_counter_snapshot() -> dict:
    return {
        "requests": constraints.counters.requests,
        "computed": constraints.counters.computed,
        "memo_hits": constraints.counters.memo_hits,
    }


def constraint_counter_delta(before: dict) -> dict:
    now = constraint_counter_snapshot()
    return {k: now[k] - before[k] for k in now}
