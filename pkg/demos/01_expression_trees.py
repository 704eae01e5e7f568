"""Expression trees: build, parse, evaluate, and measure complexity.

The unit of search is a small immutable tree over the pressure variable `p`
and named constants `c1..cN`.  This walkthrough builds the classic isotherm
forms and shows the text format both engines write to their output files.
"""

import numpy as np

from isosearch import evaluate, node_count, parse, render
from isosearch.datasets import catalog

langmuir = parse("(c1 * p) / (c2 + p)")
print("Langmuir:", render(langmuir))
print("  complexity (total nodes):", node_count(langmuir))
print("  value at p=2 with (c1, c2) = (5, 2):", evaluate(langmuir, [5, 2], 2.0))

pressures = np.logspace(-2, 2, 7)
print("  loading curve:", np.round(evaluate(langmuir, [5, 2], pressures), 3))

# Undefined values are data, not crashes: division by zero comes back NaN.
print("c1/p at p=0:", evaluate(parse("c1 / p"), [1], 0.0))

# The whole ground-truth catalog, with the complexities a search would see.
print("\nisotherm catalog:")
for model in catalog():
    print(f"  {model.name:<20} {render(model.sr_form):<45} "
          f"complexity {model.sr_complexity}")

# Round trip: render/parse is the stable interchange format.
for model in catalog():
    assert parse(render(model.sr_form)) == model.sr_form
print("\nall catalog forms round-trip through the text format")
