"""
Exponent bootstrap in exact arithmetic
======================================

Starting from ``L^N`` the integrability exponent climbs until the Laplacian
lands in ``L^r`` with ``r > n/2``.
"""

from fractions import Fraction

from yamabe import bootstrap_trace

for n, p in [(3, "2"), (3, "7/4"), (4, "3"), (5, "3"), (6, "10/3"), (10, "11/2")]:
    t = bootstrap_trace(n, p)
    chain = " -> ".join(str(s) for s in t.sequence)
    print(f"n={n:2d} p={str(Fraction(p)):>5}  {t.terminal.value:15s} {t.embedding_class:11s} {chain}")

###############################################################################
# The descending variant of the recurrence stops after one step.
print([str(s) for s in bootstrap_trace(4, 3, descending=True).sequence])
