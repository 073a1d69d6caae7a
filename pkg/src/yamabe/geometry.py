"""Model manifolds, grids, conformal factors and scalar curvature.

Two homogeneous models are supported: the round unit sphere ``S^n`` and the
flat torus ``T^n``. Fields on the sphere are zonal, i.e. functions of the
polar angle ``theta = d(P0, .)`` measured from the north pole ``P0``, and live
on a :class:`RadialGrid`. Fields on the torus live on a periodic
:class:`TorusGrid`. A :class:`RadialGrid` with the ``"flat"`` profile models a
geodesic ball of the torus around ``P0`` (radially symmetric fields supported
in that ball).

Every grid exposes the same small discrete calculus: nodal quadrature
weights, a list of edges with nonnegative weights, and the edge-incidence
stiffness ``K u = D^T (a * D u)``. Conformal factors act on it by scaling
edge weights with ``phi_j * phi_k`` and node weights with ``phi_j^N``; with
that choice the discrete functional transforms exactly like the continuous
one (see :func:`yamabe.discrete_ops.yamabe_functional`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, GridMismatchError, InvariantError

__all__ = [
    "Kind",
    "ModelManifold",
    "RadialGrid",
    "TorusGrid",
    "ConformalFactor",
    "MetricSpec",
    "sphere_volume",
    "critical_exponent",
    "conformal_coefficient",
    "geodesic_distance",
    "singular_factor_value",
    "singular_conformal_factor",
    "scalar_curvature",
    "round_sphere",
    "flat_torus",
]

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(16)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def sphere_volume(n: int) -> float:
    """Volume of the unit ``n``-sphere.

    Parameters
    ----------
    n : int
        Dimension of the sphere, ``n >= 1``.

    Returns
    -------
    float
        ``2 pi^{(n+1)/2} / Gamma((n+1)/2)``.

    Examples
    --------
    >>> round(sphere_volume(3), 7)
    19.7392088
    """
    if int(n) != n or n < 1:
        raise DomainError(f"sphere dimension must be an integer >= 1, got {n!r}")
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def critical_exponent(n: int) -> float:
    """Critical Sobolev exponent ``N = 2n/(n-2)``."""
    if n < 3:
        raise DomainError(f"dimension must be >= 3, got {n}")
    return 2.0 * n / (n - 2)


def conformal_coefficient(n: int) -> float:
    """Curvature coefficient ``(n-2)/(4(n-1))`` of the conformal Laplacian."""
    if n < 3:
        raise DomainError(f"dimension must be >= 3, got {n}")
    return (n - 2) / (4.0 * (n - 1))


class Kind(str, Enum):
    """Model geometry."""

    ROUND_SPHERE = "round_sphere"
    FLAT_TORUS = "flat_torus"


@dataclass(frozen=True)
class ModelManifold:
    """A homogeneous model manifold.

    Parameters
    ----------
    kind : Kind
        Round unit sphere or flat torus.
    n : int
        Dimension, at least 3.
    periods : tuple of float, optional
        Torus side lengths (length ``n``). Defaults to all ones.
    """

    kind: Kind
    n: int
    periods: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.n) != self.n or self.n < 3:
            raise DomainError(f"dimension must be an integer >= 3, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if self.kind is Kind.FLAT_TORUS:
            periods = (1.0,) * self.n if self.periods is None else tuple(float(p) for p in self.periods)
            if len(periods) != self.n:
                raise DomainError(f"torus needs {self.n} periods, got {len(periods)}")
            if not all(p > 0 and math.isfinite(p) for p in periods):
                raise DomainError(f"torus periods must be positive, got {periods}")
            object.__setattr__(self, "periods", periods)
        elif self.periods is not None:
            raise DomainError("periods are only meaningful for the torus")

    @classmethod
    def sphere(cls, n: int) -> "ModelManifold":
        return cls(Kind.ROUND_SPHERE, n)

    @classmethod
    def torus(cls, n: int, periods: Sequence[float] | None = None) -> "ModelManifold":
        return cls(Kind.FLAT_TORUS, n, None if periods is None else tuple(periods))

    @property
    def is_sphere(self) -> bool:
        return self.kind is Kind.ROUND_SPHERE

    @property
    def volume(self) -> float:
        if self.is_sphere:
            return sphere_volume(self.n)
        return float(np.prod(self.periods))

    @property
    def injectivity_radius(self) -> float:
        return math.pi if self.is_sphere else 0.5 * min(self.periods)

    @property
    def scalar_curvature(self) -> float:
        """Constant scalar curvature of the model metric."""
        return float(self.n * (self.n - 1)) if self.is_sphere else 0.0

    @property
    def base_point(self) -> np.ndarray:
        """Default pole: the north pole of the sphere or the torus origin."""
        if self.is_sphere:
            p = np.zeros(self.n + 1)
            p[-1] = 1.0
            return p
        return np.zeros(self.n)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "n": self.n}
        if self.periods is not None:
            out["periods"] = list(self.periods)
        return out


def geodesic_distance(m: ModelManifold, P, Q):
    """Geodesic distance between points of a model manifold.

    Parameters
    ----------
    m : ModelManifold
        The manifold.
    P, Q : array_like
        Points, broadcast along leading axes. Sphere points are vectors of
        ``R^{n+1}`` (normalised internally); torus points are vectors of
        ``R^n`` taken modulo the periods.

    Returns
    -------
    float or ndarray
        Angle between unit vectors on the sphere, minimum-image Euclidean
        distance on the torus.
    """
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    dim = m.n + 1 if m.is_sphere else m.n
    if P.shape[-1] != dim or Q.shape[-1] != dim:
        raise DomainError(f"points must have {dim} coordinates")
    if m.is_sphere:
        P = P / np.linalg.norm(P, axis=-1, keepdims=True)
        Q = Q / np.linalg.norm(Q, axis=-1, keepdims=True)
        # atan2 form is accurate both near 0 and near pi
        d = 2.0 * np.arctan2(np.linalg.norm(P - Q, axis=-1), np.linalg.norm(P + Q, axis=-1))
    else:
        L = np.asarray(m.periods)
        delta = (Q - P) % L
        delta = np.minimum(delta, L - delta)
        d = np.linalg.norm(delta, axis=-1)
    return float(d) if np.ndim(d) == 0 else d


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Cell-centred grid for radially symmetric fields.

    Nodes sit at cell centres ``r_j = (j + 1/2) h`` so neither end point is
    ever a node. Quadrature weights are exact cell integrals of the volume
    density and edge weights are the face areas divided by ``h``, with no flux
    through either end.

    Parameters
    ----------
    n : int
        Dimension of the ambient manifold.
    node_count : int
        Number of cells ``J``.
    profile : {"sphere", "flat"}
        ``"sphere"`` covers ``theta`` in ``(0, pi)`` with density
        ``omega_{n-1} sin^{n-1}``. ``"flat"`` covers ``r`` in ``(0, radius)``
        with density ``omega_{n-1} r^{n-1}`` (a flat geodesic ball).
    radius : float, optional
        Outer radius for the flat profile.
    """

    n: int
    node_count: int
    profile: str = "sphere"
    radius: float | None = None
    spacing: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)
    faces: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    face_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 3:
            raise DomainError(f"dimension must be >= 3, got {self.n}")
        if int(self.node_count) != self.node_count or self.node_count < 4:
            raise DomainError(f"node_count must be an integer >= 4, got {self.node_count!r}")
        J = int(self.node_count)
        object.__setattr__(self, "node_count", J)
        if self.profile == "sphere":
            if self.radius is not None:
                raise DomainError("the sphere profile spans (0, pi); radius must be None")
            R = math.pi
            density = np.sin
        elif self.profile == "flat":
            if self.radius is None or not self.radius > 0:
                raise DomainError("the flat profile needs a positive radius")
            R = float(self.radius)
            density = None
        else:
            raise DomainError(f"unknown radial profile {self.profile!r}")
        h = R / J
        edges = np.arange(J + 1) * h
        omega = sphere_volume(self.n - 1)
        if density is None:
            w = omega * (edges[1:] ** self.n - edges[:-1] ** self.n) / self.n
            a = omega * edges[1:-1] ** (self.n - 1) / h
        else:
            mid = 0.5 * (edges[1:] + edges[:-1])
            x = mid[:, None] + 0.5 * h * _GAUSS_X[None, :]
            w = omega * 0.5 * h * (density(x) ** (self.n - 1)) @ _GAUSS_W
            a = omega * density(edges[1:-1]) ** (self.n - 1) / h
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "nodes", _frozen((np.arange(J) + 0.5) * h))
        object.__setattr__(self, "faces", _frozen(edges[1:-1]))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "face_weights", _frozen(a))

    # -- shared grid interface -------------------------------------------
    @property
    def size(self) -> int:
        return self.node_count

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.node_count,)

    @property
    def kind(self) -> str:
        return "radial"

    @property
    def outer_radius(self) -> float:
        return math.pi if self.profile == "sphere" else float(self.radius)

    def base_edge_weights(self) -> tuple[np.ndarray, ...]:
        return (self.face_weights,)

    def edge_products(self, phi: np.ndarray) -> tuple[np.ndarray, ...]:
        return (phi[:-1] * phi[1:],)

    def differences(self, u: np.ndarray) -> tuple[np.ndarray, ...]:
        return (u[1:] - u[:-1],)

    def stiffness_apply(self, u: np.ndarray, edge_weights) -> np.ndarray:
        (a,) = edge_weights
        flux = a * (u[1:] - u[:-1])
        out = np.zeros_like(u, dtype=float)
        out[:-1] -= flux
        out[1:] += flux
        return out

    def stiffness_matrix(self, edge_weights) -> sp.csr_matrix:
        (a,) = edge_weights
        J = self.node_count
        diag = np.zeros(J)
        diag[:-1] += a
        diag[1:] += a
        return sp.diags([-a, diag, -a], [-1, 0, 1], shape=(J, J), format="csr")

    def distances(self, P=None) -> np.ndarray:
        """Distance of every node from the pole.

        Radial grids only represent fields centred on the pole, so ``P`` must
        be ``None`` or the pole itself.
        """
        if P is not None:
            P = np.asarray(P, dtype=float)
            if self.profile == "sphere":
                pole = ModelManifold.sphere(self.n).base_point
                ok = P.shape == pole.shape and np.allclose(P / np.linalg.norm(P), pole)
            else:
                ok = P.shape == (self.n,) and np.allclose(P, 0.0)
            if not ok:
                raise DomainError("radial grids are centred on the pole; other centres are not representable")
        return self.nodes

    def describe(self) -> dict:
        out = {"type": "radial", "profile": self.profile, "n": self.n, "node_count": self.node_count,
               "spacing": self.spacing}
        if self.radius is not None:
            out["radius"] = float(self.radius)
        return out

    def same_as(self, other) -> bool:
        return (isinstance(other, RadialGrid) and other.n == self.n and other.node_count == self.node_count
                and other.profile == self.profile and other.radius == self.radius)


@dataclass(frozen=True, eq=False)
class TorusGrid:
    """Uniform periodic lattice on a flat torus.

    Node ``i`` sits at ``x_i = i * spacing`` (componentwise). Fields are flat
    arrays in C order of length ``prod(shape)``; each axis contributes one
    edge per node joining it to its forward neighbour.

    Parameters
    ----------
    manifold : ModelManifold
        A flat torus.
    shape : int or sequence of int
        Node counts per axis.
    """

    manifold: ModelManifold
    shape: tuple[int, ...]
    spacing: tuple[float, ...] = field(init=False)
    cell_volume: float = field(init=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.manifold.is_sphere:
            raise DomainError("TorusGrid needs a flat torus")
        n = self.manifold.n
        shape = (int(self.shape),) * n if np.isscalar(self.shape) else tuple(int(s) for s in self.shape)
        if len(shape) != n or min(shape) < 3:
            raise DomainError(f"torus grid needs {n} axes with at least 3 nodes, got {shape}")
        spacing = tuple(L / s for L, s in zip(self.manifold.periods, shape))
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "cell_volume", float(np.prod(spacing)))
        object.__setattr__(self, "weights", _frozen(np.full(int(np.prod(shape)), self.cell_volume)))

    @property
    def n(self) -> int:
        return self.manifold.n

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def kind(self) -> str:
        return "torus"

    def base_edge_weights(self) -> tuple[np.ndarray, ...]:
        return tuple(np.full(self.size, self.cell_volume / h ** 2) for h in self.spacing)

    def _grid(self, u):
        return np.reshape(u, self.shape)

    def edge_products(self, phi: np.ndarray) -> tuple[np.ndarray, ...]:
        g = self._grid(phi)
        return tuple((g * np.roll(g, -1, axis=ax)).ravel() for ax in range(self.n))

    def differences(self, u: np.ndarray) -> tuple[np.ndarray, ...]:
        g = self._grid(u)
        return tuple((np.roll(g, -1, axis=ax) - g).ravel() for ax in range(self.n))

    def stiffness_apply(self, u: np.ndarray, edge_weights) -> np.ndarray:
        g = self._grid(u)
        out = np.zeros(self.shape)
        for ax, a in enumerate(edge_weights):
            flux = self._grid(a) * (np.roll(g, -1, axis=ax) - g)
            out += np.roll(flux, 1, axis=ax) - flux
        return out.ravel()

    def stiffness_matrix(self, edge_weights) -> sp.csr_matrix:
        idx = np.arange(self.size).reshape(self.shape)
        rows, cols, vals = [], [], []
        diag = np.zeros(self.size)
        for ax, a in enumerate(edge_weights):
            j = idx.ravel()
            k = np.roll(idx, -1, axis=ax).ravel()
            rows += [j, k]
            cols += [k, j]
            vals += [-a, -a]
            np.add.at(diag, j, a)
            np.add.at(diag, k, a)
        rows.append(np.arange(self.size))
        cols.append(np.arange(self.size))
        vals.append(diag)
        return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                             shape=(self.size, self.size))

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape ``(size, n)``."""
        axes = [np.arange(s) * h for s, h in zip(self.shape, self.spacing)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def displacements(self, P=None) -> np.ndarray:
        """Minimum-image displacement of every node from ``P``, shape ``(size, n)``."""
        P = np.zeros(self.n) if P is None else np.asarray(P, dtype=float)
        L = np.asarray(self.manifold.periods)
        d = (self.coordinates() - P) % L
        return np.where(d > 0.5 * L, d - L, d)

    def distances(self, P=None) -> np.ndarray:
        return np.linalg.norm(self.displacements(P), axis=-1)

    def node_index(self, P) -> int:
        """Flat index of the node at ``P``; raises if ``P`` is not a node."""
        P = np.asarray(P, dtype=float)
        steps = P / np.asarray(self.spacing)
        r = np.rint(steps)
        if not np.allclose(steps, r, atol=1e-9):
            raise DomainError(f"point {P.tolist()} is not a grid node")
        return int(np.ravel_multi_index(tuple(int(v) % s for v, s in zip(r, self.shape)), self.shape))

    def describe(self) -> dict:
        return {"type": "torus", "n": self.n, "shape": list(self.shape), "spacing": list(self.spacing),
                "periods": list(self.manifold.periods)}

    def same_as(self, other) -> bool:
        return (isinstance(other, TorusGrid) and other.shape == self.shape
                and other.manifold.periods == self.manifold.periods)


Grid = RadialGrid | TorusGrid


# ---------------------------------------------------------------------------
# conformal factors and metric specifications


@dataclass(frozen=True, eq=False)
class ConformalFactor:
    """Positive nodal function ``phi`` defining ``g~ = phi^{4/(n-2)} g``.

    Parameters
    ----------
    grid : RadialGrid or TorusGrid
        Grid carrying the samples.
    values : ndarray
        Nodal values, strictly positive.
    at_pole : float, optional
        Value at the pole when the pole is not a node (radial grids). When
        omitted it is extrapolated quadratically from the first three nodes.
    """

    grid: Grid
    values: np.ndarray
    at_pole: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.grid.size:
            raise GridMismatchError(f"factor has {v.size} values, grid has {self.grid.size} nodes")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InvariantError("conformal factor must be finite and strictly positive")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ConformalFactor":
        return cls(grid, np.full(grid.size, float(c)), at_pole=float(c))

    def pole_value(self) -> float:
        """Value of the factor at the pole ``P0``."""
        if self.at_pole is not None:
            return float(self.at_pole)
        if isinstance(self.grid, TorusGrid):
            return float(self.values[0])
        # quadratic through nodes h/2, 3h/2, 5h/2 evaluated at 0
        v = self.values
        return float((15 * v[0] - 10 * v[1] + 3 * v[2]) / 8)

    def compose(self, other: "ConformalFactor") -> "ConformalFactor":
        """Factor of the metric obtained by applying ``other`` after ``self``."""
        if not self.grid.same_as(other.grid):
            raise GridMismatchError("factors live on different grids")
        return ConformalFactor(self.grid, self.values * other.values, self.pole_value() * other.pole_value())

    def reciprocal(self) -> "ConformalFactor":
        return ConformalFactor(self.grid, 1.0 / self.values, 1.0 / self.pole_value())


@dataclass(frozen=True, eq=False)
class MetricSpec:
    """A model metric possibly multiplied by a conformal factor.

    Parameters
    ----------
    manifold : ModelManifold
        Base model ``(M, g0)``.
    grid : RadialGrid or TorusGrid
        Discretisation. Sphere models need a sphere-profile radial grid;
        torus models take a :class:`TorusGrid` or a flat radial grid (a ball
        around ``P0`` no larger than the injectivity radius).
    factor : ConformalFactor, optional
        ``phi`` with ``g = phi^{4/(n-2)} g0``.
    delta : float, optional
        Radius of the ball around ``P0`` where the metric is smooth.
        Defaults to the injectivity radius.
    pole : array_like, optional
        The distinguished point ``P0``; defaults to the model's base point.
    """

    manifold: ModelManifold
    grid: Grid
    factor: ConformalFactor | None = None
    delta: float | None = None
    pole: np.ndarray | None = None

    def __post_init__(self):
        m, g = self.manifold, self.grid
        if g.n != m.n:
            raise GridMismatchError(f"grid dimension {g.n} differs from manifold dimension {m.n}")
        if m.is_sphere:
            if not (isinstance(g, RadialGrid) and g.profile == "sphere"):
                raise GridMismatchError("sphere models are discretised on sphere-profile radial grids")
        elif isinstance(g, RadialGrid):
            if g.profile != "flat" or g.radius > m.injectivity_radius + 1e-12:
                raise GridMismatchError("torus balls need a flat radial grid within the injectivity radius")
        elif g.manifold != m:
            raise GridMismatchError("torus grid built for a different torus")
        if self.factor is not None and not self.factor.grid.same_as(g):
            raise GridMismatchError("conformal factor grid does not match the base grid")
        delta = m.injectivity_radius if self.delta is None else float(self.delta)
        if not delta > 0:
            raise DomainError(f"smooth-ball radius must be positive, got {delta}")
        object.__setattr__(self, "delta", delta)
        pole = m.base_point if self.pole is None else np.asarray(self.pole, dtype=float)
        if isinstance(g, RadialGrid):
            g.distances(pole)
        else:
            g.node_index(pole)
        object.__setattr__(self, "pole", _frozen(pole))

    @property
    def n(self) -> int:
        return self.manifold.n

    @property
    def N(self) -> float:
        return critical_exponent(self.n)

    def phi(self) -> np.ndarray:
        return np.ones(self.grid.size) if self.factor is None else np.asarray(self.factor.values)

    def volume_weights(self) -> np.ndarray:
        """Nodal quadrature weights of the volume element of ``g``."""
        w = np.asarray(self.grid.weights)
        return w if self.factor is None else w * self.factor.values ** self.N

    def edge_weights(self) -> tuple[np.ndarray, ...]:
        """Edge weights of the Dirichlet form of ``g``."""
        base = self.grid.base_edge_weights()
        if self.factor is None:
            return base
        return tuple(a * p for a, p in zip(base, self.grid.edge_products(self.factor.values)))

    def distances(self) -> np.ndarray:
        """Base-metric distance of every node from ``P0``."""
        return self.grid.distances(self.pole)

    def pole_index(self) -> int | None:
        """Node index of ``P0`` on torus grids, ``None`` on radial grids."""
        return self.grid.node_index(self.pole) if isinstance(self.grid, TorusGrid) else None

    def conformal(self, psi: ConformalFactor) -> "MetricSpec":
        """The metric ``psi^{4/(n-2)} g`` expressed over the same base model."""
        if not psi.grid.same_as(self.grid):
            raise GridMismatchError("factor grid does not match the spec grid")
        total = psi if self.factor is None else self.factor.compose(psi)
        return MetricSpec(self.manifold, self.grid, total, self.delta, self.pole)

    def without_factor(self) -> "MetricSpec":
        return MetricSpec(self.manifold, self.grid, None, self.delta, self.pole)

    def describe(self) -> dict:
        return {"manifold": self.manifold.to_dict(), "grid": self.grid.describe(),
                "conformal_factor": self.factor is not None, "delta": self.delta,
                "pole": [float(x) for x in self.pole]}


def round_sphere(n: int = 3, node_count: int = 512) -> MetricSpec:
    """Round unit sphere on a zonal grid."""
    return MetricSpec(ModelManifold.sphere(n), RadialGrid(n, node_count))


def flat_torus(n: int = 3, shape: int | Sequence[int] = 16,
               periods: Sequence[float] | None = None) -> MetricSpec:
    """Flat torus on a periodic lattice."""
    m = ModelManifold.torus(n, periods)
    return MetricSpec(m, TorusGrid(m, shape))


# ---------------------------------------------------------------------------
# singular conformal example and curvature


def singular_factor_value(r, n: int, alpha: float, mexp: float):
    """Closed form ``phi(r) = (1 + r^{2-alpha})^{mexp (n-2)/4}``."""
    r = np.asarray(r, dtype=float)
    return (1.0 + r ** (2.0 - alpha)) ** (mexp * (n - 2) / 4.0)


def singular_conformal_factor(m: ModelManifold, grid: Grid, alpha: float, mexp: float,
                              P0=None) -> ConformalFactor:
    """Factor of the metric ``(1 + d(P0, .)^{2-alpha})^{mexp} g0``.

    The metric is ``C^1`` but not ``C^2`` at ``P0`` for ``alpha`` in
    ``(0, 1)``; its curvature is only integrable there.

    Parameters
    ----------
    m : ModelManifold
        Base model.
    grid : RadialGrid or TorusGrid
        Sampling grid.
    alpha : float
        Exponent in ``(0, 1)``.
    mexp : float
        Power of the metric multiplier.
    P0 : array_like, optional
        Singular point; the pole of the grid by default.

    Returns
    -------
    ConformalFactor
        ``phi = (1 + r^{2-alpha})^{mexp (n-2)/4}``, with value 1 at ``P0``.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in the open interval (0, 1), got {alpha}")
    if grid.n != m.n:
        raise GridMismatchError("grid dimension does not match the manifold")
    r = grid.distances(P0)
    return ConformalFactor(grid, singular_factor_value(r, m.n, alpha, mexp), at_pole=1.0)


def scalar_curvature(spec: MetricSpec) -> np.ndarray:
    """Nodal scalar curvature of the metric described by ``spec``.

    Without a factor this is the model constant. With a factor ``phi`` it is
    ``phi^{1-N} [ (4(n-1)/(n-2)) Delta phi + R0 phi ]``, where ``Delta phi``
    is the weak-form Laplacian ``K phi / m`` of the base grid.
    """
    m, grid = spec.manifold, spec.grid
    R0 = m.scalar_curvature
    if spec.factor is None:
        return np.full(grid.size, R0)
    phi = np.asarray(spec.factor.values)
    lap = grid.stiffness_apply(phi, grid.base_edge_weights()) / grid.weights
    n = m.n
    return phi ** (1.0 - spec.N) * (4.0 * (n - 1) / (n - 2) * lap + R0 * phi)
