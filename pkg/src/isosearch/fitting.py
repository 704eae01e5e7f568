"""Constant fitting by multi-start Nelder-Mead simplex, and the squared-error
loss used by both search engines.

The simplex runs on plain float tuples: parameter vectors are short (a
handful of constants) and the per-iteration bookkeeping would otherwise be
dominated by numpy call overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import Expr, compile_body, max_param_index

#: Loss assigned when the model is undefined anywhere on the dataset.
SENTINEL_LOSS = 1e12

_START_LO, _START_HI = 1e-2, 1e2
_POSITIVE_BIAS = 0.9
_SPREAD_TOL = 1e-10
_MAX_ITER = 2000


@dataclass(frozen=True)
class FitResult:
    params: np.ndarray
    loss: float
    restarts_used: int
    converged: bool


def l2_loss(expr: Expr, params, dataset) -> float:
    """Mean squared error over the dataset; any undefined model evaluation
    yields the sentinel loss instead of an error."""
    body = compile_body(expr)
    with np.errstate(all="ignore"):
        return _loss(body, tuple(float(v) for v in params),
                     dataset.pressures, dataset.loadings)


def _loss(body, c, p, y) -> float:
    out = body(c, p)
    r = out - y
    v = float(r @ r) / len(y)
    return v if math.isfinite(v) else SENTINEL_LOSS


def _random_start(n, rng):
    mag = np.exp(rng.uniform(np.log(_START_LO), np.log(_START_HI), size=n))
    sign = np.where(rng.random(n) < _POSITIVE_BIAS, 1.0, -1.0)
    return tuple(float(v) for v in mag * sign)


def _nelder_mead(obj, x0, max_iter=_MAX_ITER, tol=_SPREAD_TOL):
    """Standard simplex descent (reflect 1, expand 2, contract 0.5, shrink
    0.5) over float tuples.  Converged when the vertex spread falls below
    ``tol`` relative to the best vertex."""
    n = len(x0)
    verts = [tuple(x0)]
    for j in range(n):
        v = list(x0)
        v[j] += 0.05 * max(abs(v[j]), 1.0)
        verts.append(tuple(v))
    fs = [obj(v) for v in verts]

    for _ in range(max_iter):
        order = sorted(range(n + 1), key=lambda i: fs[i])
        verts = [verts[i] for i in order]
        fs = [fs[i] for i in order]
        best, worst = verts[0], verts[-1]
        spread = 0.0
        scale = 1.0
        for b in best:
            a = abs(b)
            if a > scale:
                scale = a
        for v in verts[1:]:
            for a, b in zip(v, best):
                d = abs(a - b)
                if d > spread:
                    spread = d
        if spread <= tol * (1.0 + scale):
            return best, fs[0], True

        centroid = tuple(
            (sum(v[j] for v in verts[:-1])) / n for j in range(n)
        )
        xr = tuple(2.0 * cj - wj for cj, wj in zip(centroid, worst))
        fr = obj(xr)
        if fr < fs[0]:
            xe = tuple(cj + 2.0 * (rj - cj) for cj, rj in zip(centroid, xr))
            fe = obj(xe)
            if fe < fr:
                verts[-1], fs[-1] = xe, fe
            else:
                verts[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            verts[-1], fs[-1] = xr, fr
        else:
            if fr < fs[-1]:
                xc = tuple(cj + 0.5 * (rj - cj) for cj, rj in zip(centroid, xr))
            else:
                xc = tuple(cj - 0.5 * (cj - wj) for cj, wj in zip(centroid, worst))
            fc = obj(xc)
            if fc < min(fr, fs[-1]):
                verts[-1], fs[-1] = xc, fc
            else:
                b0 = verts[0]
                for j in range(1, n + 1):
                    verts[j] = tuple(
                        bj + 0.5 * (vj - bj) for bj, vj in zip(b0, verts[j])
                    )
                    fs[j] = obj(verts[j])
    order = sorted(range(n + 1), key=lambda i: fs[i])
    return verts[order[0]], fs[order[0]], False


def fit_constants(
    expr: Expr,
    dataset,
    restarts: int = 8,
    rng=None,
    warm_start=None,
    max_iter: int = _MAX_ITER,
    tol: float = _SPREAD_TOL,
) -> FitResult:
    """Fit parameters by Nelder-Mead from ``restarts`` random starts
    (log-uniform magnitudes in [1e-2, 1e2], 90% positive) and keep the best.

    ``warm_start`` adds one extra descent from the given point before the
    random restarts.  Zero-parameter expressions come back immediately with
    their direct loss.  ``max_iter`` and ``tol`` loosen the per-start descent
    for throughput-sensitive callers; the defaults are the full-precision
    settings.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    n = max_param_index(expr)
    body = compile_body(expr)
    p, y = dataset.pressures, dataset.loadings

    with np.errstate(all="ignore"):
        if n == 0:
            loss = _loss(body, (), p, y)
            return FitResult(np.empty(0), loss, 0, True)

        if rng is None:
            rng = np.random.default_rng()

        def obj(c):
            return _loss(body, c, p, y)

        best_x, best_f, best_conv = None, np.inf, False
        used = 0
        starts = []
        if warm_start is not None:
            starts.append(tuple(float(v) for v in warm_start))
        for _ in range(restarts):
            starts.append(_random_start(n, rng))
        for x0 in starts:
            x, fx, conv = _nelder_mead(obj, x0, max_iter=max_iter, tol=tol)
            used += 1
            if fx < best_f:
                best_x, best_f, best_conv = x, fx, conv
    return FitResult(np.asarray(best_x, dtype=float), float(best_f),
                     used, best_conv)
