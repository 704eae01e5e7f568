"""isosearch: constrained symbolic regression for adsorption isotherms.

Two search engines over expression trees, a genetic algorithm and a Bayesian
MCMC sampler, both guided by thermodynamic background knowledge through a
built-in symbolic constraint checker.
"""

__version__ = "0.1.0"

from .algebra import (
    CanonicalForm,
    canonical_form,
    differentiate,
    equivalent_numeric,
    simplify,
    substitute_primes,
)
from .bsr import BsrConfig, run_bsr
from .constraints import (
    ConstraintVerdict,
    LimitValue,
    check_all,
    constraint1,
    constraint2,
    constraint3,
    limit_at_zero_plus,
)
from .datasets import Dataset, GridSpec, IsothermModel, catalog, load_csv, synthesize
from .expr import (
    BSR_OPSET,
    GA_OPSET,
    Expr,
    OpKind,
    ParseError,
    TreeLimits,
    complexity,
    evaluate,
    node_count,
    parse,
    random_tree,
    render,
)
from .fitting import FitResult, fit_constants, l2_loss
from .ga import GaConfig, run_ga
from .pareto import ParetoFront, ScoredModel, merge_fronts, pass_rates, update_front
from .search_common import RunRecord

__all__ = [
    "BSR_OPSET",
    "BsrConfig",
    "CanonicalForm",
    "ConstraintVerdict",
    "Dataset",
    "Expr",
    "FitResult",
    "GA_OPSET",
    "GaConfig",
    "GridSpec",
    "IsothermModel",
    "LimitValue",
    "OpKind",
    "ParetoFront",
    "ParseError",
    "RunRecord",
    "ScoredModel",
    "TreeLimits",
    "canonical_form",
    "catalog",
    "check_all",
    "complexity",
    "constraint1",
    "constraint2",
    "constraint3",
    "differentiate",
    "equivalent_numeric",
    "evaluate",
    "fit_constants",
    "l2_loss",
    "limit_at_zero_plus",
    "load_csv",
    "merge_fronts",
    "node_count",
    "parse",
    "pass_rates",
    "random_tree",
    "render",
    "run_bsr",
    "run_ga",
    "simplify",
    "substitute_primes",
    "synthesize",
    "update_front",
]
