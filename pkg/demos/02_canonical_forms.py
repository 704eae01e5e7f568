"""Canonical forms: why two different-looking trees can be the same model.

Searches produce many surface forms of one underlying family.  The
canonicalizer substitutes distinct primes for the constants, reduces to a
monic-denominator rational form, and re-abstracts the derived coefficients,
so equivalent families collapse to one string.
"""

from isosearch import canonical_form, parse, render, simplify

# Identity clutter disappears.
messy = parse("((c1 * p) + 0) / (1 * (c2 + p))")
print("simplify:", render(messy), "->", render(simplify(messy)))

# A redundant constant is removed: 4 constants describe a 3-parameter family.
four = parse("(c1 * p) / (((c2 * (p ^ 2)) + (c3 * p)) + c4)")
cf = canonical_form(four)
print("\n4-constant rational:", render(four))
print("  canonical:", cf.string, f"({cf.param_count} parameters)")

# Degeneracy: c1*p and c2*p are the same one-parameter family.
print("\nc1*p and c7*p share a canonical string:",
      canonical_form(parse("c1 * p")).string
      == canonical_form(parse("c7 * p")).string)

# Instances work too: the numeric example keeps its coefficients.
inst = canonical_form(parse("(2 * p) / (((3 * (p ^ 2)) + (4 * p)) + 5)"),
                      fitted_params=[])
print("\nnumeric instance 2p/(3p^2+4p+5):")
print("  canonical:", inst.string)
print("  coefficients:", tuple(round(v, 6) for v in inst.values))

# Square/sqrt disguises of a rational family are seen through.
disguised = parse("c1 * square(sqrt(p / (p - c2)))")
print("\ndisguised Langmuir:", render(disguised))
print("  canonical:", canonical_form(disguised).string)

# Canonical complexity can differ from the raw complexity in either
# direction; both are reported by the engines.
from isosearch import node_count

dual = parse("((c1 * p) / (c2 + p)) + ((c3 * p) / (c4 + p))")
cfd = canonical_form(dual)
print("\ndual-site Langmuir raw complexity:", node_count(dual),
      "canonical complexity:", cfd.complexity)
