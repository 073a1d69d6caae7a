"""Discrete operators ``L = Delta_g + h``, norms, energies and linear algebra.

The operator is stored in weak form: a stiffness part ``K`` assembled from
edge weights (symmetric by construction, constants in its kernel) and a
diagonal mass ``m`` of volume weights. The strong form used for residuals is
``L u = K u / m + h u``; all residual norms are mass weighted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, DomainError, GridMismatchError, InvariantError, NotCoerciveError
from .geometry import MetricSpec, RadialGrid, conformal_coefficient, scalar_curvature

__all__ = [
    "OperatorHandle",
    "assemble_operator",
    "conformal_laplacian",
    "as_field",
    "lp_norm",
    "energy",
    "yamabe_functional",
    "smallest_eigenvalue",
    "linear_solve",
    "coercivity_check",
    "CoercivityReport",
    "brezis_lieb_probe",
    "BrezisLiebReport",
    "EIGEN_TOL",
    "SOLVE_TOL",
]

EIGEN_TOL = 1e-8
SOLVE_TOL = 1e-10


def as_field(grid, values, name: str = "field") -> np.ndarray:
    """Validate nodal values against a grid and return them as a float array."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size != grid.size:
        raise GridMismatchError(f"{name} has {v.size} values, grid has {grid.size} nodes")
    if not np.all(np.isfinite(v)):
        raise InvariantError(f"{name} contains non-finite values")
    return v


def lp_norm(f, s: float, weights) -> float:
    """Quadrature ``L^s`` norm ``(sum_j w_j |f_j|^s)^{1/s}``.

    Parameters
    ----------
    f : array_like
        Nodal values.
    s : float
        Exponent, ``s >= 1`` or ``numpy.inf``.
    weights : array_like
        Volume weights, e.g. ``op.mass`` or ``spec.volume_weights()``.
    """
    if not s >= 1:
        raise DomainError(f"norm exponent must be >= 1, got {s}")
    f = np.abs(np.asarray(f, dtype=float))
    if np.isinf(s):
        return float(f.max(initial=0.0))
    return float(np.dot(weights, f ** s) ** (1.0 / s))


class _Factorization:
    """Solver for ``(K + diag(m (h + shift))) u = b``.

    Radial grids use a banded factorisation (Cholesky when the matrix is
    known to be positive definite, LU otherwise). Torus lattices use
    matrix-free conjugate gradients with a Jacobi preconditioner.
    """

    def __init__(self, op: "OperatorHandle", shift: float, definite: bool):
        self.op = op
        self.shift = float(shift)
        self.definite = bool(definite)
        self.diag_mass = op.mass * (op.potential + self.shift)
        diag = op.stiffness_diagonal + self.diag_mass
        if isinstance(op.grid, RadialGrid):
            (a,) = op.edge_weights
            self.banded = True
            if definite:
                ab = np.zeros((2, op.size))
                ab[0, 1:] = -a
                ab[1] = diag
                self.cho = sla.cholesky_banded(ab, lower=False)
            else:
                ab = np.zeros((3, op.size))
                ab[0, 1:] = -a
                ab[1] = diag
                ab[2, :-1] = -a
                self.ab = ab
        else:
            if not definite:
                raise DomainError("torus solves need a positive definite shifted operator")
            self.banded = False
            size = op.size
            self.A = spla.LinearOperator((size, size), matvec=self._matvec, dtype=float)
            inv = 1.0 / diag
            self.P = spla.LinearOperator((size, size), matvec=lambda x: inv * x, dtype=float)

    def _matvec(self, u):
        u = np.ravel(u)
        return self.op.stiffness(u) + self.diag_mass * u

    def solve(self, b: np.ndarray, rtol: float = 1e-13, x0=None) -> np.ndarray:
        if self.banded:
            if self.definite:
                return sla.cho_solve_banded((self.cho, False), b)
            return sla.solve_banded((1, 1), self.ab, b)
        x, info = spla.cg(self.A, b, x0=x0, rtol=rtol, atol=0.0, M=self.P, maxiter=20 * b.size)
        if info != 0:
            raise ConvergenceError("conjugate gradients did not converge", float("nan"), info)
        return x


class OperatorHandle:
    """Assembled discrete operator ``L = Delta_g + h``.

    Parameters
    ----------
    spec : MetricSpec
        Metric; its factor scales edge weights by ``phi_j phi_k`` and node
        weights by ``phi_j^N``.
    potential : ndarray
        Nodal potential ``h``.

    Attributes
    ----------
    mass : ndarray
        Volume weights of ``g``.
    edge_weights : tuple of ndarray
        Dirichlet-form edge weights of ``g``.
    potential : ndarray
        Nodal potential.
    """

    def __init__(self, spec: MetricSpec, potential: np.ndarray):
        self.spec = spec
        self.grid = spec.grid
        self.mass = spec.volume_weights()
        self.edge_weights = spec.edge_weights()
        p = np.array(potential, dtype=float)
        p.flags.writeable = False
        self.potential = p
        self._eig: tuple | None = None
        self._solvers: dict = {}

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def N(self) -> float:
        return self.spec.N

    @property
    def size(self) -> int:
        return self.grid.size

    @property
    def volume(self) -> float:
        return float(self.mass.sum())

    @property
    def is_homogeneous(self) -> bool:
        """No conformal factor and a constant potential."""
        return self.spec.factor is None and bool(np.ptp(self.potential) == 0.0)

    @cached_property
    def stiffness_diagonal(self) -> np.ndarray:
        if isinstance(self.grid, RadialGrid):
            (a,) = self.edge_weights
            d = np.zeros(self.size)
            d[:-1] += a
            d[1:] += a
            return d
        d = np.zeros(self.grid.shape)
        for ax, w in enumerate(self.edge_weights):
            g = w.reshape(self.grid.shape)
            d += g + np.roll(g, 1, axis=ax)
        return d.ravel()

    def check(self, u, name: str = "field") -> np.ndarray:
        return as_field(self.grid, u, name)

    def stiffness(self, u) -> np.ndarray:
        """Weak-form stiffness action ``K u``."""
        return self.grid.stiffness_apply(np.asarray(u, dtype=float), self.edge_weights)

    def dirichlet(self, u) -> float:
        """Discrete ``int |grad u|^2 dv`` as a sum of squared edge differences."""
        u = np.asarray(u, dtype=float)
        return float(sum(np.dot(a, du * du) for a, du in zip(self.edge_weights, self.grid.differences(u))))

    def weak(self, u) -> np.ndarray:
        """Weak-form action ``K u + m h u``."""
        u = np.asarray(u, dtype=float)
        return self.stiffness(u) + self.mass * self.potential * u

    def apply(self, u) -> np.ndarray:
        """Strong-form action ``L u = K u / m + h u``."""
        u = np.asarray(u, dtype=float)
        return self.stiffness(u) / self.mass + self.potential * u

    def form(self, u, w) -> float:
        """Bilinear form ``int g(grad u, grad w) + h u w dv``."""
        return float(np.dot(w, self.weak(u)))

    def inner(self, u, w) -> float:
        """Mass inner product ``int u w dv``."""
        return float(np.dot(self.mass * u, w))

    def norm(self, u, s: float = 2.0) -> float:
        return lp_norm(u, s, self.mass)

    def matrix(self) -> sp.csr_matrix:
        """Sparse matrix of the weak form ``K + diag(m h)``."""
        K = self.grid.stiffness_matrix(self.edge_weights)
        return (K + sp.diags(self.mass * self.potential)).tocsr()

    def gershgorin_lower_bound(self) -> float:
        """Gershgorin bound for the spectrum of ``m^{-1} (K + m h)``.

        ``K`` has zero row sums and nonpositive off-diagonal entries, so row
        ``i`` of the mass-scaled operator has centre ``K_ii / m_i + h_i`` and
        radius ``K_ii / m_i``; the bound is ``min h``.
        """
        return float(self.potential.min())

    def factorization(self, shift: float = 0.0, definite: bool = True) -> _Factorization:
        key = (float(shift), bool(definite))
        if key not in self._solvers:
            self._solvers[key] = _Factorization(self, shift, definite)
        return self._solvers[key]

    def solve_shifted(self, f, shift: float = 0.0, rtol: float = 1e-13) -> np.ndarray:
        """Solve ``(L + shift) u = f`` when ``L + shift`` is known to be positive definite."""
        return self.factorization(shift, True).solve(self.mass * np.asarray(f, dtype=float), rtol)


def assemble_operator(spec: MetricSpec, h) -> OperatorHandle:
    """Assemble ``L = Delta_g + h`` on the grid of ``spec``.

    Parameters
    ----------
    spec : MetricSpec
        Metric and grid.
    h : float or array_like
        Potential; a scalar is broadcast to every node.

    Returns
    -------
    OperatorHandle
    """
    if np.isscalar(h):
        h = np.full(spec.grid.size, float(h))
    h = as_field(spec.grid, h, "potential")
    return OperatorHandle(spec, h)


def conformal_laplacian(spec: MetricSpec) -> OperatorHandle:
    """``L_g = Delta_g + (n-2)/(4(n-1)) R_g`` with ``R_g`` from :func:`scalar_curvature`."""
    return assemble_operator(spec, conformal_coefficient(spec.n) * scalar_curvature(spec))


def energy(op: OperatorHandle, psi) -> float:
    """``E(psi) = int |grad psi|^2 + h psi^2 dv``."""
    psi = op.check(psi, "psi")
    return op.dirichlet(psi) + float(np.dot(op.mass * op.potential, psi * psi))


def yamabe_functional(op: OperatorHandle, psi) -> float:
    """``I(psi) = E(psi) / ||psi||_N^2`` with ``N = 2n/(n-2)``."""
    psi = op.check(psi, "psi")
    nrm = op.norm(psi, op.N)
    if nrm == 0.0:
        raise DomainError("the functional is undefined for the zero field")
    return energy(op, psi) / nrm ** 2


def _eigen_normalize(op: OperatorHandle, x: np.ndarray) -> np.ndarray:
    x = x / np.sqrt(op.inner(x, x))
    return -x if np.dot(op.mass, x) < 0 else x


def _eigen_residual(op: OperatorHandle, x: np.ndarray) -> tuple[float, float]:
    lam = op.form(x, x)
    r = op.apply(x) - lam * x
    return lam, float(np.sqrt(op.inner(r, r)))


def smallest_eigenvalue(op: OperatorHandle, tol: float = EIGEN_TOL,
                        max_iter: int = 5000) -> tuple[float, np.ndarray]:
    """Lowest eigenpair of ``L`` in the mass inner product.

    Shifted inverse iteration with the shift one unit below the Gershgorin
    bound. On radial grids the pair is then polished by Rayleigh-quotient
    iteration.

    Returns
    -------
    lam : float
        Smallest eigenvalue.
    phi : ndarray
        Eigenfield with ``||phi||_2 = 1`` and nonnegative mean.

    Raises
    ------
    ConvergenceError
        If the residual ``||L phi - lam phi||_2`` does not reach ``tol``.
    """
    if op._eig is not None and op._eig[2] <= tol:
        return op._eig[0], op._eig[1].copy()
    sigma = op.gershgorin_lower_bound() - 1.0
    solver = op.factorization(-sigma, True)
    x = _eigen_normalize(op, np.ones(op.size))
    lam, res = _eigen_residual(op, x)
    it = 0
    radial = isinstance(op.grid, RadialGrid)
    while res > tol and it < max_iter:
        it += 1
        if radial and res < 1e-3 * (1.0 + abs(lam)):
            break
        y = solver.solve(op.mass * x, rtol=1e-14, x0=x / (lam - sigma))
        x = _eigen_normalize(op, y)
        lam, res = _eigen_residual(op, x)
    if radial:
        for _ in range(20):
            if res <= 0.1 * tol:
                break
            try:
                y = op.factorization(-lam, False).solve(op.mass * x)
            except (np.linalg.LinAlgError, ValueError):
                break
            op._solvers.pop((-lam, False), None)
            if not np.all(np.isfinite(y)):
                break
            x_new = _eigen_normalize(op, y)
            lam_new, res_new = _eigen_residual(op, x_new)
            if res_new >= res:
                break
            x, lam, res = x_new, lam_new, res_new
            it += 1
    if res > tol:
        raise ConvergenceError("smallest_eigenvalue did not converge", res, it)
    op._eig = (lam, x.copy(), res)
    return lam, x


def linear_solve(op: OperatorHandle, f, tol: float = SOLVE_TOL) -> np.ndarray:
    """Solve ``L u = f`` for a coercive operator.

    Residual ``||L u - f||_2 <= tol ||f||_2`` in the mass norm is enforced by
    iterative refinement.

    Raises
    ------
    NotCoerciveError
        If the smallest eigenvalue is not positive.
    """
    f = op.check(f, "rhs")
    lam, _ = smallest_eigenvalue(op)
    if lam <= 0:
        raise NotCoerciveError("linear_solve needs a positive operator; use a shifted solve", lam)
    solver = op.factorization(0.0, True)
    fn = op.norm(f)
    if fn == 0.0:
        return np.zeros(op.size)
    u = solver.solve(op.mass * f)
    for _ in range(5):
        r = f - op.apply(u)
        if op.norm(r) <= tol * fn:
            return u
        u = u + solver.solve(op.mass * r)
    r = f - op.apply(u)
    if op.norm(r) > tol * fn:
        raise ConvergenceError("linear_solve residual above tolerance", op.norm(r) / fn, 5)
    return u


@dataclass
class CoercivityReport:
    """Outcome of :func:`coercivity_check`."""

    eigenvalue: float
    coercive: bool
    constant: float | None
    samples: int
    ratios: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"eigenvalue": self.eigenvalue, "coercive": self.coercive, "constant": self.constant,
                "samples": self.samples}


def coercivity_check(op: OperatorHandle, samples: int = 16,
                     rng: np.random.Generator | None = None) -> CoercivityReport:
    """Fit the coercivity constant ``c`` in ``(L psi, psi) >= c (||grad psi||^2 + ||psi||^2)``.

    The fitted constant is the minimum ratio over the constant field, the
    lowest eigenfield and ``samples`` random fields. It is only reported when
    the smallest eigenvalue is positive.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    lam, phi = smallest_eigenvalue(op)
    if lam <= 0:
        return CoercivityReport(lam, False, None, samples)
    fields = [np.ones(op.size), phi] + [rng.standard_normal(op.size) + rng.uniform(-1, 1)
                                           for _ in range(samples)]
    ratios = [energy(op, u) / (op.dirichlet(u) + op.inner(u, u)) for u in fields]
    return CoercivityReport(lam, True, float(min(ratios)), samples, ratios)


@dataclass
class BrezisLiebReport:
    """Gaps ``|(||f_i||^s - ||f_i - f||^s) - ||f||^s|`` along a concentrating sequence."""

    gaps: list
    exponent: float
    monotone_decreasing: bool

    def to_dict(self) -> dict:
        return {"gaps": list(self.gaps), "exponent": self.exponent,
                "monotone_decreasing": self.monotone_decreasing}


def brezis_lieb_probe(f, bubbles, s: float, weights) -> BrezisLiebReport:
    """Brezis-Lieb defect for ``f_i = f + bubble_i``.

    Parameters
    ----------
    f : array_like
        Limit field.
    bubbles : sequence of array_like
        Perturbations converging to zero away from a point.
    s : float
        Exponent.
    weights : array_like
        Volume weights.
    """
    f = np.asarray(f, dtype=float)
    base = lp_norm(f, s, weights) ** s
    gaps = []
    for b in bubbles:
        b = np.asarray(b, dtype=float)
        fi = f + b
        gaps.append(abs(lp_norm(fi, s, weights) ** s - lp_norm(b, s, weights) ** s - base))
    mono = all(g1 < g0 or g0 == g1 == 0.0 for g0, g1 in zip(gaps, gaps[1:]))
    return BrezisLiebReport([float(g) for g in gaps], float(s), bool(mono))
