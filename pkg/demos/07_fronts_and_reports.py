"""Pareto fronts and pass-rate tables: combining runs into reports.

Fronts keep the best loss at each canonical complexity and are merged
across runs by dominance pruning.  Pass-rate rows deduplicate expressions by
canonical form, recheck all three constraints, and report the passing
fractions, which is how the effect of enabling constraints is measured.
"""

import numpy as np

from isosearch import GaConfig, merge_fronts, pass_rates, run_ga
from isosearch.datasets import GridSpec, catalog_model, synthesize

model = catalog_model("langmuir")
data = synthesize(model, [5.0, 2.0], GridSpec(0.01, 100.0, 20, "log"),
                  0.02, np.random.default_rng(42))

config = GaConfig(population_size=24, islands=2, generations=15,
                  penalties=(1.3, 1.3, 1.3))
runs = [
    run_ga(data, config, np.random.default_rng(seed), seed=seed)
    for seed in (1, 2, 3)
]

merged = merge_fronts([r.front for r in runs])
print("merged front across 3 runs:")
for e in merged.entries():
    print(f"  {e.complexity:>2}  {e.loss:<12.6g}  {e.canonical}")

# per-run fronts are never better than the merge at a shared complexity
for r in runs:
    for e in r.front.entries():
        best = merged.get(e.complexity)
        assert best is None or best.loss <= e.loss

all_samples = [s for r in runs for s in r.samples]
row = pass_rates(all_samples, engine="ga", constraints_on=True,
                 p_max=data.max_pressure)
print(f"\npass rates over {row.n_unique} unique canonical forms:")
print(f"  C1 {row.c1:.1%}   C2 {row.c2:.1%}   C3 {row.c3:.1%}")
