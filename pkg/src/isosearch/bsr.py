"""Bayesian symbolic regression: Metropolis sampling over expression trees
with three reversible moves, BIC-based description length, and a
constraint-aware prior."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .expr import (
    BSR_OPSET,
    Expr,
    Op,
    TreeLimits,
    Var,
    fresh_param,
    max_param_index,
    node_count,
    param_count,
    random_tree,
    renumber_params,
    replace_subtree,
    subtrees,
)
from .pareto import ParetoFront, ScoredModel
from .search_common import (
    EngineContext,
    RunRecord,
    constraint_counter_delta,
    constraint_counter_snapshot,
    make_scored,
    polish_front,
)

_SSE_FLOOR = 1e-30


@dataclass(frozen=True)
class BsrConfig:
    steps: int = 100_000
    c_ops: float = 3.0                    # prior weight per operator node
    penalties: tuple = (0.0, 0.0)         # (b1, b2): prior energy on failure
    c_par: float = 1.0                    # prior weight per parameter
    move_freqs: tuple = (0.5, 0.25, 0.25)  # node-replace, root-add/remove, elem-replace
    max_size: int = 20
    thin: int = 100
    fit_restarts: int = 2
    fit_max_iter: int = 150
    fit_tol: float = 1e-7
    check_budget: float = 0.1
    opset: tuple = BSR_OPSET
    init_limits: TreeLimits = TreeLimits(max_depth=3, max_size=7)

    def constraints_enabled(self) -> bool:
        return self.penalties[0] > 0.0 or self.penalties[1] > 0.0


@dataclass(frozen=True)
class ChainState:
    expr: Expr
    params: tuple
    raw_l2: float
    bic: float
    verdict: object          # C1/C2 verdict, or None when the prior skips them
    prior_energy: float
    description_length: float


def bic(expr: Expr, fit, dataset) -> float:
    """Gaussian-likelihood BIC: N*ln(SSE/N) + k*ln(N) with k = parameter
    count + 1 for the error-variance term; SSE floored at 1e-30."""
    n = len(dataset)
    sse = max(n * float(fit.loss), _SSE_FLOOR)
    k = param_count(expr) + 1
    return n * math.log(sse / n) + k * math.log(n)


def prior_energy(expr: Expr, verdict, config: BsrConfig) -> float:
    """EP = c_ops * (operator count) + sum of b_i over failed constraints
    + c_par * (parameter count).  Only constraints 1 and 2 contribute."""
    ops = sum(1 for _, n in subtrees(expr) if isinstance(n, Op))
    ep = config.c_ops * ops + config.c_par * param_count(expr)
    if verdict is not None:
        if config.penalties[0] > 0.0 and verdict.passed(1) is False:
            ep += config.penalties[0]
        if config.penalties[1] > 0.0 and verdict.passed(2) is False:
            ep += config.penalties[1]
    return ep


# ---------------------------------------------------------------------------
# Moves
# ---------------------------------------------------------------------------
#
# Atomic proposals and their base weights:
#   node-replace        f0
#   root-add, root-rem  f1/2 each
#   elem-grow, elem-shrink  f2/2 each
# An atom that does not apply to the current tree is excluded and the rest
# renormalize (drawing until applicable).  The returned log proposal ratio is
# log q(y->x) - log q(x->y) over the full joint mechanism, which is what the
# Metropolis rule needs for detailed balance.

_NR, _ADD, _REM, _GROW, _SHRINK = range(5)


def _is_leaf(e: Expr) -> bool:
    return not isinstance(e, Op)


def _promotable(root: Expr) -> list:
    """Child indices of the root whose removal is reversible: every sibling
    of the promoted child must be a leaf (it gets deleted)."""
    if not isinstance(root, Op):
        return []
    if root.kind.arity == 1:
        return [0]
    a, b = root.args
    out = []
    if _is_leaf(b):
        out.append(0)
    if _is_leaf(a):
        out.append(1)
    return out


def _elem_sites(expr: Expr) -> list:
    """Paths of internal nodes whose children are all leaves."""
    return [
        (path, node)
        for path, node in subtrees(expr)
        if isinstance(node, Op) and all(_is_leaf(a) for a in node.args)
    ]


def _leaves(expr: Expr) -> list:
    return [(path, node) for path, node in subtrees(expr) if _is_leaf(node)]


def _atom_weights(expr: Expr, freqs) -> dict:
    w = {
        _NR: freqs[0],
        _ADD: freqs[1] / 2.0,
        _GROW: freqs[2] / 2.0,
    }
    if _promotable(expr):
        w[_REM] = freqs[1] / 2.0
    if isinstance(expr, Op):
        w[_SHRINK] = freqs[2] / 2.0
    return w


def _total(w: dict) -> float:
    return sum(w.values())


def _draw_leaf(rng) -> Expr:
    return Var() if rng.random() < 0.5 else fresh_param()


def draw_atom(expr: Expr, config: BsrConfig, rng) -> int:
    """Pick an applicable atomic proposal with probability proportional to
    its base weight (equivalent to redrawing until applicable)."""
    w_x = _atom_weights(expr, config.move_freqs)
    r = rng.random() * _total(w_x)
    acc = 0.0
    atom = None
    for a, wa in w_x.items():
        acc += wa
        atom = a
        if r <= acc:
            break
    return atom


def propose_move(expr: Expr, config: BsrConfig, rng) -> tuple[Expr, float]:
    """One reversible move; returns (candidate, log proposal ratio)."""
    freqs = config.move_freqs
    opset = config.opset
    w_x = _atom_weights(expr, freqs)
    total_x = _total(w_x)
    atom = draw_atom(expr, config, rng)

    if atom == _NR:
        nodes = list(subtrees(expr))
        path, node = nodes[int(rng.integers(len(nodes)))]
        if _is_leaf(node):
            new = fresh_param() if isinstance(node, Var) else Var()
        else:
            alts = [k for k in opset if k.arity == node.kind.arity and k != node.kind]
            if not alts:
                return expr, 0.0
            new = Op(alts[int(rng.integers(len(alts)))], node.args)
        cand = renumber_params(replace_subtree(expr, path, new))
        # same node position, same alternative count, identical atom weights
        # both ways: the ratio is exactly 1
        return cand, 0.0

    if atom == _ADD:
        kind = opset[int(rng.integers(len(opset)))]
        if kind.arity == 1:
            cand_raw = Op(kind, (expr,))
            log_fwd = math.log(w_x[_ADD] / total_x) + math.log(1.0 / len(opset))
        else:
            leaf = _draw_leaf(rng)
            if rng.random() < 0.5:
                cand_raw = Op(kind, (expr, leaf))
            else:
                cand_raw = Op(kind, (leaf, expr))
            log_fwd = (
                math.log(w_x[_ADD] / total_x)
                + math.log(1.0 / len(opset))
                + math.log(0.25)
            )
        w_y = _atom_weights(cand_raw, freqs)
        log_rev = math.log(w_y[_REM] / _total(w_y)) + math.log(
            1.0 / len(_promotable(cand_raw))
        )
        return renumber_params(cand_raw), log_rev - log_fwd

    if atom == _REM:
        proms = _promotable(expr)
        child_i = proms[int(rng.integers(len(proms)))]
        cand_raw = expr.args[child_i]
        log_fwd = math.log(w_x[_REM] / total_x) + math.log(1.0 / len(proms))
        w_y = _atom_weights(cand_raw, freqs)
        log_rev = math.log(w_y[_ADD] / _total(w_y)) + math.log(1.0 / len(opset))
        if expr.kind.arity == 2:
            log_rev += math.log(0.25)
        return renumber_params(cand_raw), log_rev - log_fwd

    if atom == _GROW:
        leaves = _leaves(expr)
        path, _ = leaves[int(rng.integers(len(leaves)))]
        kind = opset[int(rng.integers(len(opset)))]
        children = tuple(_draw_leaf(rng) for _ in range(kind.arity))
        cand_raw = replace_subtree(expr, path, Op(kind, children))
        log_fwd = (
            math.log(w_x[_GROW] / total_x)
            + math.log(1.0 / len(leaves))
            + math.log(1.0 / len(opset))
            + kind.arity * math.log(0.5)
        )
        w_y = _atom_weights(cand_raw, freqs)
        log_rev = (
            math.log(w_y[_SHRINK] / _total(w_y))
            + math.log(1.0 / len(_elem_sites(cand_raw)))
            + math.log(0.5)
        )
        return renumber_params(cand_raw), log_rev - log_fwd

    # _SHRINK
    sites = _elem_sites(expr)
    path, node = sites[int(rng.integers(len(sites)))]
    leaf = _draw_leaf(rng)
    cand_raw = replace_subtree(expr, path, leaf)
    log_fwd = (
        math.log(w_x[_SHRINK] / total_x)
        + math.log(1.0 / len(sites))
        + math.log(0.5)
    )
    w_y = _atom_weights(cand_raw, freqs)
    log_rev = (
        math.log(w_y[_GROW] / _total(w_y))
        + math.log(1.0 / len(_leaves(cand_raw)))
        + math.log(1.0 / len(config.opset))
        + node.kind.arity * math.log(0.5)
    )
    return renumber_params(cand_raw), log_rev - log_fwd


# ---------------------------------------------------------------------------
# The chain
# ---------------------------------------------------------------------------


def _evaluate_state(expr: Expr, dataset, config: BsrConfig, ctx: EngineContext,
                    rng, warm=None) -> ChainState:
    expr = renumber_params(expr)
    key = ctx.structure_key(expr)
    if dataset is None:
        params, raw_l2, b = (), float("nan"), 0.0
    else:
        if key in ctx.fit_cache:
            warm = None  # cached fit wins; no extra descent on revisits
        fit = ctx.fit(expr, key, rng, warm_start=warm)
        params, raw_l2 = tuple(float(v) for v in fit.params), fit.loss
        b = bic(expr, fit, dataset)
    verdict = None
    if config.constraints_enabled():
        checks = (config.penalties[0] > 0.0, config.penalties[1] > 0.0, False)
        verdict = ctx.check(expr, key, params, checks)
    ep = prior_energy(expr, verdict, config)
    return ChainState(
        expr=expr,
        params=params,
        raw_l2=raw_l2,
        bic=b,
        verdict=verdict,
        prior_energy=ep,
        description_length=b / 2.0 + ep,
    )


def mcmc_step(state: ChainState, dataset, config: BsrConfig,
              ctx: EngineContext, rng, counters: dict) -> ChainState:
    """Propose, fit the candidate's constants, and accept with probability
    min(1, exp(-dL) * proposal ratio)."""
    cand_expr, log_ratio = propose_move(state.expr, config, rng)
    counters["proposals"] += 1
    if node_count(cand_expr) > config.max_size:
        counters["size_rejects"] += 1
        return state
    warm = None
    if dataset is not None:
        k = max_param_index(cand_expr)
        if k:
            warm = list(state.params[:k])
            while len(warm) < k:
                warm.append(float(np.exp(rng.uniform(np.log(1e-2), np.log(1e2)))))
    cand = _evaluate_state(cand_expr, dataset, config, ctx, rng, warm=warm)
    dl = cand.description_length - state.description_length
    if metropolis_accept(dl, log_ratio, rng):
        counters["accepts"] += 1
        return cand
    return state


def metropolis_accept(dl_delta: float, log_ratio: float, rng) -> bool:
    """Accept with probability min(1, exp(-dL) * proposal ratio)."""
    log_accept = -dl_delta + log_ratio
    if log_accept >= 0.0:
        return True
    if log_accept < -745.0:  # exp underflow: probability is numerically 0
        return False
    return rng.random() < math.exp(log_accept)


def run_bsr(dataset, config: BsrConfig, rng, seed: Optional[int] = None) -> RunRecord:
    """Run one chain; records thinned samples with canonical forms and keeps
    a best-loss-per-canonical-complexity Pareto front over the samples.

    ``dataset=None`` runs the prior-only chain (no fitting, BIC = 0)."""
    t0 = time.time()
    cbefore = constraint_counter_snapshot()
    ctx = EngineContext(dataset, config.fit_restarts, config.fit_max_iter,
                        config.fit_tol, config.check_budget)
    counters = {"proposals": 0, "accepts": 0, "size_rejects": 0}

    state = _evaluate_state(
        random_tree(config.init_limits, config.opset, rng), dataset, config, ctx, rng
    )
    samples: list[ScoredModel] = []
    front = ParetoFront()
    front_models: dict[str, ScoredModel] = {}

    def record(st: ChainState):
        key = ctx.structure_key(st.expr)
        canon = ctx.canonical(st.expr, key)
        loss = st.raw_l2 if dataset is not None else 0.0
        inst = ctx.instance(st.expr, key, st.params) if dataset is not None else None
        canonical_params = (
            tuple(float(v) for v in inst.values)
            if inst is not None and inst.values else st.params
        )
        model = make_scored(st.expr, st.params, loss, loss, canon,
                            verdict=st.verdict,
                            canonical_params=canonical_params)
        samples.append(model)
        if dataset is not None and front.update(model):
            front_models[model.canonical] = model

    record(state)
    for step in range(1, config.steps + 1):
        state = mcmc_step(state, dataset, config, ctx, rng, counters)
        if step % config.thin == 0:
            record(state)

    front_out = (
        polish_front(front, front_models, ctx, rng,
                     with_verdicts=config.constraints_enabled())
        if dataset is not None else front
    )
    run_counters = {
        "fits": ctx.fits_computed,
        "fit_memo_hits": ctx.fit_hits,
        **counters,
        "constraints": constraint_counter_delta(cbefore),
    }
    return RunRecord(
        engine="bsr",
        seed=seed,
        samples=samples,
        front=front_out,
        counters=run_counters,
        config=_config_dict(config),
        duration=time.time() - t0,
    )


def _config_dict(config: BsrConfig) -> dict:
    return {
        "engine": "bsr",
        "steps": config.steps,
        "c_ops": config.c_ops,
        "penalties": tuple(config.penalties),
        "c_par": config.c_par,
        "move_freqs": tuple(config.move_freqs),
        "max_size": config.max_size,
        "thin": config.thin,
        "fit_restarts": config.fit_restarts,
    }
