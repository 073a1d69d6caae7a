"""Numerical tools for Yamabe-type equations on model manifolds.

Submodules
----------
geometry
    Model manifolds, grids, conformal factors and metric specs.
discrete_ops
    Weak-form operators ``Delta + h``, the Yamabe functional, eigenvalues.
yamabe_solver
    Subcritical minimisation and continuation to the critical exponent.
test_functions
    Aubin bubbles, the Schoen glued function and Sobolev probes.
green_function
    Parametrix Green functions, a lattice oracle and mass extraction.
bootstrap
    Exact exponent bootstrap and regularity labels.
cli
    Experiment runner and report comparison.
"""

__version__ = "0.1.0"

from .bootstrap import bootstrap_trace, regularity_class  # noqa: E402
from .discrete_ops import (assemble_operator, coercivity_check, conformal_laplacian, linear_solve,  # noqa: E402
                           smallest_eigenvalue, yamabe_functional)
from .geometry import (MetricSpec, ModelManifold, singular_conformal_factor, flat_torus,  # noqa: E402
                       round_sphere)
from .green_function import ParametrixConfig, assemble_green, conformal_green, extract_mass  # noqa: E402
from .test_functions import aubin_bubble, best_constant, best_constant_inv2, bubble_scan  # noqa: E402
from .yamabe_solver import (check_uniqueness, conformal_invariance_check, continuation_to_critical,  # noqa: E402
                            minimize_subcritical, solve_constant_curvature)

__all__ = [
    "MetricSpec", "ModelManifold", "round_sphere", "flat_torus", "singular_conformal_factor",
    "assemble_operator", "conformal_laplacian", "linear_solve", "smallest_eigenvalue", "yamabe_functional",
    "coercivity_check", "minimize_subcritical", "continuation_to_critical", "solve_constant_curvature",
    "check_uniqueness", "conformal_invariance_check", "aubin_bubble", "bubble_scan", "best_constant",
    "best_constant_inv2", "ParametrixConfig", "assemble_green", "conformal_green", "extract_mass",
    "bootstrap_trace", "regularity_class",
]
