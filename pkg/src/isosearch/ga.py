"""Genetic-algorithm symbolic regression: tournament reproduction over island
populations, oldest-member replacement, constraint-penalized scoring, and a
cross-island Hall-of-Fame Pareto front."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .expr import (
    Expr,
    GA_OPSET,
    Op,
    TreeLimits,
    Var,
    fresh_param,
    node_count,
    random_tree,
    renumber_params,
    replace_subtree,
    subtrees,
)
from . import algebra
from .pareto import ParetoFront, ScoredModel
from .search_common import (
    EngineContext,
    RunRecord,
    constraint_counter_delta,
    constraint_counter_snapshot,
    polish_front,
)

_DEFAULT_WEIGHTS = {
    "constant": 1.0,
    "operator": 1.0,
    "append": 1.0,
    "insert": 1.0,
    "delete": 1.0,
    "simplify": 0.5,
    "regenerate": 1.0,
    "crossover": 1.0,
}


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 64
    islands: int = 2
    generations: int = 200
    penalties: tuple = (1.0, 1.0, 1.0)   # loss multipliers on constraint failure
    parsimony: float = 0.01              # score = loss + nodes * parsimony
    mutation_weights: Mapping = field(default_factory=lambda: dict(_DEFAULT_WEIGHTS))
    max_size: int = 25
    replace_frac: float = 0.2
    tournament: int = 4
    hof_period: int = 5
    hof_submit: int = 10
    hof_inject: int = 1
    fit_restarts: int = 8
    fit_max_iter: int = 250
    fit_tol: float = 1e-7
    check_budget: float = 0.1
    tree_limits: TreeLimits = TreeLimits()
    opset: tuple = GA_OPSET

    def constraints_enabled(self) -> tuple:
        return tuple(g > 1.0 for g in self.penalties)


def apply_penalties(loss: float, verdict, penalties) -> float:
    """Multiply the loss by g_i for every enabled constraint i that failed;
    a penalty of exactly 1.0 disables its constraint entirely."""
    for i, g in enumerate(penalties):
        if g > 1.0 and verdict is not None and verdict.passed(i + 1) is False:
            loss = loss * g
    return loss


def member_score(loss: float, nodes: int, parsimony: float) -> float:
    """Score = loss + node_count * parsimony; lower is better."""
    return loss + nodes * parsimony


@dataclass
class Member:
    expr: Expr
    params: tuple
    raw_l2: float
    loss: float
    score: float
    verdict: object
    age: int
    canonical: str
    canonical_complexity: int
    canonical_params: tuple = ()

    def as_model(self) -> ScoredModel:
        return ScoredModel(
            expr=self.expr,
            params=self.params,
            loss=self.loss,
            raw_l2=self.raw_l2,
            raw_complexity=node_count(self.expr),
            canonical=self.canonical,
            canonical_complexity=self.canonical_complexity,
            verdict=self.verdict,
            score=self.score,
            canonical_params=self.canonical_params or self.params,
        )


def score_member(expr: Expr, dataset, config: GaConfig, ctx: EngineContext,
                 rng, age: int = 0, warm_start=None) -> Member:
    """Fit, apply the penalty loop (loss *= g_i on each failed check), and
    attach score = loss + node_count * parsimony.

    With every penalty at exactly 1.0 the constraint checker is never
    consulted.
    """
    expr = renumber_params(expr)
    key = ctx.structure_key(expr)
    fit = ctx.fit(expr, key, rng, warm_start=warm_start)
    raw_l2 = fit.loss
    params = tuple(float(v) for v in fit.params)
    inst = ctx.instance(expr, key, params)
    loss = raw_l2
    enabled = config.constraints_enabled()
    verdict = None
    if any(enabled):
        verdict = ctx.check(expr, key, params, enabled, canonical_key=True)
        loss = apply_penalties(loss, verdict, config.penalties)
    score = member_score(loss, node_count(expr), config.parsimony)
    canon = ctx.canonical(expr, key)
    canonical_params = (
        tuple(float(v) for v in inst.values)
        if inst is not None and inst.values else params
    )
    return Member(
        expr=expr,
        params=params,
        raw_l2=raw_l2,
        loss=loss,
        score=score,
        verdict=verdict,
        age=age,
        canonical=canon.string,
        canonical_complexity=canon.complexity,
        canonical_params=canonical_params,
    )


# ---------------------------------------------------------------------------
# Variation operators
# ---------------------------------------------------------------------------


def _fresh_leaf(limits: TreeLimits, rng) -> Expr:
    if rng.random() < limits.p_var:
        return Var()
    return fresh_param()


def _internal_paths(expr):
    return [(path, node) for path, node in subtrees(expr) if isinstance(node, Op)]


def _leaf_paths(expr):
    return [(path, node) for path, node in subtrees(expr) if not isinstance(node, Op)]


def _mutate_once(kind: str, member: Member, config: GaConfig, rng):
    """Apply one mutation kind; returns (expr, warm_start) or None when the
    kind does not apply to this tree."""
    expr = member.expr
    limits = config.tree_limits
    if kind == "constant":
        if not member.params:
            return None
        params = list(member.params)
        i = int(rng.integers(len(params)))
        params[i] = params[i] * float(np.exp(rng.normal(0.0, 0.7)))
        return expr, tuple(params)
    if kind == "operator":
        internals = _internal_paths(expr)
        internals = [
            (p, n) for p, n in internals
            if any(k.arity == n.kind.arity and k != n.kind for k in config.opset)
        ]
        if not internals:
            return None
        path, node = internals[int(rng.integers(len(internals)))]
        alts = [k for k in config.opset if k.arity == node.kind.arity and k != node.kind]
        new = Op(alts[int(rng.integers(len(alts)))], node.args)
        return replace_subtree(expr, path, new), None
    if kind == "append":
        leaves = _leaf_paths(expr)
        path, node = leaves[int(rng.integers(len(leaves)))]
        op = config.opset[int(rng.integers(len(config.opset)))]
        if op.arity == 1:
            new = Op(op, (node,))
        elif rng.random() < 0.5:
            new = Op(op, (node, _fresh_leaf(limits, rng)))
        else:
            new = Op(op, (_fresh_leaf(limits, rng), node))
        return replace_subtree(expr, path, new), None
    if kind == "insert":
        nodes = list(subtrees(expr))
        path, node = nodes[int(rng.integers(len(nodes)))]
        op = config.opset[int(rng.integers(len(config.opset)))]
        if op.arity == 1:
            new = Op(op, (node,))
        elif rng.random() < 0.5:
            new = Op(op, (node, _fresh_leaf(limits, rng)))
        else:
            new = Op(op, (_fresh_leaf(limits, rng), node))
        return replace_subtree(expr, path, new), None
    if kind == "delete":
        internals = _internal_paths(expr)
        if not internals:
            return None
        path, _ = internals[int(rng.integers(len(internals)))]
        return replace_subtree(expr, path, _fresh_leaf(limits, rng)), None
    if kind == "simplify":
        s = algebra.simplify(expr)
        if s == expr:
            return None
        return s, None
    if kind == "regenerate":
        return random_tree(limits, config.opset, rng), None
    return None


def mutate(member: Member, config: GaConfig, rng, max_tries: int = 8):
    """Draw mutation kinds by weight until one applies and fits the size cap;
    falls back to a fresh random tree."""
    kinds = [k for k in config.mutation_weights if k != "crossover"]
    weights = np.array([config.mutation_weights[k] for k in kinds], dtype=float)
    weights = weights / weights.sum()
    for _ in range(max_tries):
        kind = kinds[int(rng.choice(len(kinds), p=weights))]
        out = _mutate_once(kind, member, config, rng)
        if out is None:
            continue
        expr, warm = out
        if node_count(expr) <= config.max_size:
            return renumber_params(expr), warm
    return random_tree(config.tree_limits, config.opset, rng), None


def crossover(a: Member, b: Member, config: GaConfig, rng,
              max_tries: int = 8) -> Optional[Expr]:
    """Replace a uniformly chosen subtree of ``a`` with a uniformly chosen
    subtree of ``b``; resamples when the child exceeds the size cap."""
    a_nodes = list(subtrees(a.expr))
    b_nodes = list(subtrees(b.expr))
    for _ in range(max_tries):
        path, _ = a_nodes[int(rng.integers(len(a_nodes)))]
        _, graft = b_nodes[int(rng.integers(len(b_nodes)))]
        child = replace_subtree(a.expr, path, graft)
        if node_count(child) <= config.max_size:
            return renumber_params(child)
    return None


def _tournament(island: list, k: int, rng) -> Member:
    n = len(island)
    idx = rng.choice(n, size=min(k, n), replace=False)
    best = min(idx, key=lambda i: (island[i].score, i))
    return island[best]


# ---------------------------------------------------------------------------
# The run loop
# ---------------------------------------------------------------------------


def run_ga(dataset, config: GaConfig, rng, seed: Optional[int] = None) -> RunRecord:
    """Evolve island populations; every ``hof_period`` generations each island
    submits its best members to the Hall of Fame, which is pruned by Pareto
    dominance and reinjected into the islands.  Returns the full history."""
    t0 = time.time()
    cbefore = constraint_counter_snapshot()
    ctx = EngineContext(dataset, config.fit_restarts, config.fit_max_iter,
                        config.fit_tol, config.check_budget)

    islands: list[list[Member]] = []
    samples: list[ScoredModel] = []
    hof = ParetoFront()
    hof_models: dict[str, ScoredModel] = {}

    def submit(member: Member):
        model = member.as_model()
        if hof.update(model):
            hof_models[model.canonical] = model

    for _ in range(config.islands):
        island = []
        for _ in range(config.population_size):
            tree = random_tree(config.tree_limits, config.opset, rng)
            m = score_member(tree, dataset, config, ctx, rng, age=0)
            island.append(m)
            samples.append(m.as_model())
        islands.append(island)
    for island in islands:
        for m in island:
            submit(m)

    fronts_per_gen = [hof.copy()]

    n_new = max(1, int(round(config.replace_frac * config.population_size)))
    weights = config.mutation_weights
    total_w = sum(weights.values())
    p_crossover = weights.get("crossover", 0.0) / total_w if total_w else 0.0

    for gen in range(1, config.generations + 1):
        for island in islands:
            children = []
            for _ in range(n_new):
                parent = _tournament(island, config.tournament, rng)
                child_expr, warm = None, None
                if rng.random() < p_crossover:
                    other = _tournament(island, config.tournament, rng)
                    child_expr = crossover(parent, other, config, rng)
                if child_expr is None:
                    child_expr, warm = mutate(parent, config, rng)
                child = score_member(child_expr, dataset, config, ctx, rng,
                                     age=gen, warm_start=warm)
                children.append(child)
            oldest = sorted(range(len(island)), key=lambda i: (island[i].age, i))
            for slot, child in zip(oldest, children):
                island[slot] = child
            samples.extend(c.as_model() for c in children)

        if gen % config.hof_period == 0 or gen == config.generations:
            for island in islands:
                top = sorted(island, key=lambda m: (m.score, m.canonical))
                for m in top[: config.hof_submit]:
                    submit(m)
            entries = hof.entries()
            if entries:
                for island in islands:
                    for _ in range(config.hof_inject):
                        pick = entries[int(rng.integers(len(entries)))]
                        model = hof_models.get(pick.canonical)
                        if model is None:
                            continue
                        inj = Member(
                            expr=model.expr,
                            params=model.params,
                            raw_l2=model.raw_l2,
                            loss=model.loss,
                            score=model.score
                            if model.score is not None
                            else model.loss + node_count(model.expr) * config.parsimony,
                            verdict=model.verdict,
                            age=gen,
                            canonical=model.canonical,
                            canonical_complexity=model.canonical_complexity,
                            canonical_params=model.canonical_params or model.params,
                        )
                        oldest = min(range(len(island)),
                                     key=lambda i: (island[i].age, i))
                        island[oldest] = inj
        fronts_per_gen.append(hof.copy())

    def penalize(raw, verdict):
        return apply_penalties(raw, verdict, config.penalties)

    front = polish_front(hof, hof_models, ctx, rng, penalize=penalize,
                         with_verdicts=any(config.constraints_enabled()))
    counters = {
        "fits": ctx.fits_computed,
        "fit_memo_hits": ctx.fit_hits,
        "constraints": constraint_counter_delta(cbefore),
    }
    return RunRecord(
        engine="ga",
        seed=seed,
        samples=samples,
        front=front,
        counters=counters,
        config=_config_dict(config),
        duration=time.time() - t0,
        fronts_per_gen=fronts_per_gen,
    )


def _config_dict(config: GaConfig) -> dict:
    return {
        "engine": "ga",
        "population_size": config.population_size,
        "islands": config.islands,
        "generations": config.generations,
        "penalties": tuple(config.penalties),
        "parsimony": config.parsimony,
        "max_size": config.max_size,
        "replace_frac": config.replace_frac,
        "tournament": config.tournament,
        "hof_period": config.hof_period,
        "hof_submit": config.hof_submit,
        "fit_restarts": config.fit_restarts,
    }
