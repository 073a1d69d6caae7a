"""
Yamabe invariant of the round three-sphere
==========================================

The constant field already minimizes the functional on the round sphere, so
the continuation in the exponent should land on the sharp Sobolev value.
"""

import numpy as np

from yamabe import best_constant_inv2, conformal_laplacian, continuation_to_critical, round_sphere
from yamabe import yamabe_functional

###############################################################################
# Build the radial grid and the conformal Laplacian ``Delta + 3/4``.
spec = round_sphere(3, 512)
op = conformal_laplacian(spec)
print("I(1)          =", yamabe_functional(op, np.ones(op.size)))
print("K^-2(3, 2)    =", best_constant_inv2(3))

###############################################################################
# Follow the subcritical minimizers up to the critical exponent.
rep = continuation_to_critical(op)
for rung in rep.q_trace:
    print(f"q = {rung.q:.3f}   mu_q = {rung.mu:.10f}")
print("critical estimate:", rep.mu_estimate, " residual:", rep.final_residual)
