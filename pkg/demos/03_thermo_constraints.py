"""The three thermodynamic checks that encode background knowledge.

For a candidate isotherm f(p) with fitted constants:

  C1: f(p) -> 0 as p -> 0+        (everything desorbs at zero pressure)
  C2: f'(p) -> c with 0 < c < inf (finite positive Henry's-law slope)
  C3: f never decreases on the checked pressure range

Each check answers true/false under a time budget; a timed-out check counts
as a failure.  The search engines use these as soft penalties rather than
hard filters.
"""

from isosearch import check_all, limit_at_zero_plus, parse
from isosearch.algebra import differentiate

candidates = [
    ("(c1 * p) / (c2 + p)", (5.0, 2.0)),      # Langmuir: passes all three
    ("((c1 * p) + c2) / (c3 + p)", (5.0, 1.0, 2.0)),  # offset at p=0
    ("c1 * sqrt(p)", (1.0,)),                  # infinite initial slope
    ("c1 * (p ^ 2)", (1.0,)),                  # zero initial slope
    ("(c1 * p) / (c2 + p)", (-5.0, 2.0)),      # decreasing
]

for text, params in candidates:
    expr = parse(text)
    v = check_all(expr, params)
    lim = limit_at_zero_plus(expr, params)
    slope = limit_at_zero_plus(differentiate(expr), params)
    marks = " ".join(
        f"C{i}={'pass' if v.passed(i) else 'fail'}" for i in (1, 2, 3)
    )
    print(f"{text:<28} params={params}")
    print(f"   {marks}   f(0+)={lim}  f'(0+)={slope}")

# The BET form is the famous exception: valid below its saturation pressure,
# it fails monotonicity over a range that crosses the asymptote.
from isosearch import constraint3

bet = parse("(c1 * p) / (((p ^ 2) + (c2 * p)) + c3)")
print("\nBET instance with poles at p=1 and p=2:")
print("  monotone on (0, 0.5):", constraint3(bet, [10, -3, 2], stop=0.5))
print("  monotone on (0, 10): ", constraint3(bet, [10, -3, 2], stop=10.0))
