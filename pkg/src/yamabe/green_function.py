"""Green functions of ``L = Delta + c`` by a parametrix series.

With ``H(P, Q) = f(r) r^{2-n} / ((n-2) omega_{n-1})`` and its defect
``Gamma^1 = -L_Q H`` the Green function is

    G_P = H + sum_{i=1..k} Gamma^i * H + F,    L F = Gamma^{k+1},

where ``Gamma^{i+1} = Gamma^i * Gamma^1`` and ``k = floor(n/2)``. The kernels
are closed-form functions of distance; the convolutions are computed by FFT
on torus lattices and by a zonal double integral on the sphere (``n = 3``);
the remainder ``F`` comes from a discrete linear solve.

Green functions of conformal metrics are obtained from a homogeneous one with
:func:`conformal_green`. The mass ``A`` of ``G = r^{2-n} + A + O(r)`` is
extracted by :func:`extract_mass`.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import erfc, erfcx, expit, gamma, gammaincc

from .discrete_ops import OperatorHandle, linear_solve, smallest_eigenvalue
from .errors import DomainError, GridMismatchError, NotCoerciveError, NotHomogeneousError, ResolutionError
from .geometry import ConformalFactor, MetricSpec, RadialGrid, TorusGrid, sphere_volume

__all__ = [
    "ParametrixConfig",
    "GreenProfile",
    "GammaCascade",
    "MassReport",
    "DeltaReport",
    "OracleResult",
    "lattice_zeta",
    "singular_pole_value",
    "parametrix_H",
    "gamma_kernels",
    "assemble_green",
    "fourier_green_oracle",
    "verify_delta",
    "default_delta_tests",
    "conformal_green",
    "extract_mass",
]

_GL8 = np.polynomial.legendre.leggauss(8)


# ---------------------------------------------------------------------------
# cutoff and closed-form kernels


def _smooth_step(t):
    """C-infinity step ``S(t) = 1 / (1 + exp(1/t - 1/(1-t)))`` with ``S'`` and ``S''``."""
    t = np.asarray(t, dtype=float)
    inner = (t > 0) & (t < 1)
    tc = np.where(inner, t, 0.5)
    u = 1.0 / tc - 1.0 / (1.0 - tc)
    du = -1.0 / tc ** 2 - 1.0 / (1.0 - tc) ** 2
    ddu = 2.0 / tc ** 3 - 2.0 / (1.0 - tc) ** 3
    s = expit(-u)
    q = s * expit(u)
    s1 = -q * du
    s2 = -(q * (1.0 - 2.0 * s) * (-du) * du + q * ddu)
    s = np.where(inner, s, (t >= 1).astype(float))
    return s, np.where(inner, s1, 0.0), np.where(inner, s2, 0.0)


def _cot_minus_inv(r):
    """``cot r - 1/r`` evaluated without cancellation for small ``r``."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    small = np.abs(r) < 1e-2
    rs = r[small]
    out[small] = -rs / 3.0 - rs ** 3 / 45.0 - 2.0 * rs ** 5 / 945.0
    rl = r[~small]
    out[~small] = np.cos(rl) / np.sin(rl) - 1.0 / rl
    return out


@dataclass(frozen=True)
class ParametrixConfig:
    """Parametrix settings.

    Parameters
    ----------
    n : int
        Dimension.
    delta : float
        Cutoff scale: ``f = 1`` for ``r < delta/2`` and ``f = 0`` for
        ``r >= delta``. Must not exceed the injectivity radius.
    k : int, optional
        Number of convolution terms; must equal ``floor(n/2)``.
    panel_width : float
        Sphere only: maximal panel width of the outer quadrature.
    gauss_points : int
        Sphere only: Gauss-Legendre points per panel.
    antiderivative_intervals : int
        Sphere only: intervals used to tabulate the inner antiderivative.

    Notes
    -----
    ``f(r) = 1 - S((r - delta/2) / (delta/2))`` with the smooth step
    ``S(t) = 1 / (1 + exp(1/t - 1/(1-t)))``, which is ``C^infinity``.
    """

    n: int
    delta: float
    k: int | None = None
    panel_width: float = 0.02
    gauss_points: int = 12
    antiderivative_intervals: int = 8192

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("dimension must be >= 3")
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        k = self.n // 2 if self.k is None else int(self.k)
        if k != self.n // 2:
            raise DomainError(f"k must equal floor(n/2) = {self.n // 2}, got {k}")
        object.__setattr__(self, "k", k)

    @property
    def normalization(self) -> float:
        """``(n-2) omega_{n-1}``."""
        return (self.n - 2) * sphere_volume(self.n - 1)

    def cutoff(self, r):
        """``f``, ``f'`` and ``f''`` at radii ``r``."""
        half = 0.5 * self.delta
        s, s1, s2 = _smooth_step((np.asarray(r, dtype=float) - half) / half)
        return 1.0 - s, -s1 / half, -s2 / half ** 2

    def H(self, r):
        """Parametrix ``f(r) r^{2-n} / ((n-2) omega_{n-1})`` for ``r > 0``."""
        r = np.asarray(r, dtype=float)
        f, _, _ = self.cutoff(r)
        with np.errstate(divide="ignore"):
            return np.where(f > 0, f * r ** (2.0 - self.n), 0.0) / self.normalization

    def gamma1(self, r, sphere: bool, c: float):
        """``Gamma^1 = -L_Q H`` for ``L = Delta + c`` at ``r > 0``.

        ``-Delta`` acting on radial functions is ``u'' + (n-1) kappa u'``
        with ``kappa = 1/r`` (flat) or ``cot r`` (sphere).
        """
        n = self.n
        r = np.asarray(r, dtype=float)
        f, f1, f2 = self.cutoff(r)
        C = self.normalization
        with np.errstate(divide="ignore", invalid="ignore"):
            ra = r ** (2.0 - n)
            out = (f2 + (3.0 - n) * f1 / r) * ra / C
            if sphere:
                dH = (f1 * ra + (2.0 - n) * f * ra / r) / C
                out = out + (n - 1) * _cot_minus_inv(r) * dH
            out = out - c * f * ra / C
        return np.where(r < self.delta, out, 0.0)

    def to_dict(self) -> dict:
        return {"n": self.n, "delta": self.delta, "k": self.k, "panel_width": self.panel_width,
                "gauss_points": self.gauss_points, "antiderivative_intervals": self.antiderivative_intervals}


# ---------------------------------------------------------------------------
# lattice pole correction


def _upper_gamma(a: float, x):
    """Non-normalized upper incomplete gamma, extended to negative non-integer ``a``."""
    if a > 0:
        return gammaincc(a, x) * gamma(a)
    if a == int(a):
        raise DomainError(f"upper incomplete gamma needs non-integer a <= 0, got {a}")
    # Gamma(a, x) = (Gamma(a + 1, x) - x^a e^{-x}) / a
    return (_upper_gamma(a + 1.0, x) - x ** a * np.exp(-x)) / a


def lattice_zeta(spacings, s: float, terms: int = 6) -> float:
    """Analytically continued Epstein zeta ``sum'_{x in L} |x|^{-2s}``.

    ``L`` is the rectangular lattice with the given spacings. Uses the
    theta-function splitting at ``t = 1`` on the lattice rescaled to unit
    covolume, which converges after a few shells.
    """
    h = np.asarray(spacings, dtype=float)
    n = h.size
    scale = float(np.prod(h)) ** (1.0 / n)
    b = h / scale
    rng = np.arange(-terms, terms + 1)
    pts = np.array(list(itertools.product(rng, repeat=n)), dtype=float)
    pts = pts[np.any(pts != 0, axis=1)]
    xr = np.pi * np.sum((pts * b) ** 2, axis=1)
    xk = np.pi * np.sum((pts / b) ** 2, axis=1)
    a2 = n / 2.0 - s
    direct = np.sum(_upper_gamma(s, xr) * xr ** (-s))
    dual = np.sum(_upper_gamma(a2, xk) * xk ** (-a2))
    z = np.pi ** s / gamma(s) * (-1.0 / s + 1.0 / (s - n / 2.0) + direct + dual)
    return float(z * scale ** (-2.0 * s))


def singular_pole_value(grid: TorusGrid) -> float:
    """Nodal value standing in for ``r^{2-n}`` at the pole of a lattice.

    Chosen so that nodal quadrature of ``u r^{2-n}`` against smooth ``u`` is
    exact up to ``O(h^2)`` corrections: ``-Z_L((n-2)/2)``.
    """
    return -lattice_zeta(grid.spacing, (grid.n - 2) / 2.0)


# ---------------------------------------------------------------------------
# sphere zonal convolution (n = 3)


class _ZonalKernel:
    """Tabulated ``B(rho) = int_0^rho K(t) sin t dt`` for a kernel supported in ``[0, delta)``."""

    def __init__(self, fn, delta: float, intervals: int):
        self.delta = delta
        mesh = np.linspace(0.0, delta, intervals + 1)
        x, w = _GL8
        mid = 0.5 * (mesh[1:] + mesh[:-1])
        half = 0.5 * (mesh[1:] - mesh[:-1])
        t = mid[:, None] + half[:, None] * x[None, :]
        vals = fn(t.ravel()).reshape(t.shape) * np.sin(t)
        cum = np.concatenate([[0.0], np.cumsum((vals @ w) * half)])
        d = fn(np.maximum(mesh, 1e-9)) * np.sin(np.maximum(mesh, 1e-9))
        self.total = float(cum[-1])
        self.spline = CubicHermiteSpline(mesh, cum, d)

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        inside = rho < self.delta
        out = np.full(rho.shape, self.total)
        out[inside] = self.spline(rho[inside])
        return out


def _zonal_convolution(A, kernel: _ZonalKernel, targets, delta: float, panel: float, npts: int):
    """``(A * B)(theta_Q) = int A(theta_S) B(d(S, Q)) dv(S)`` on the 3-sphere.

    The azimuthal integral is done exactly through the antiderivative
    ``B(rho)``; the polar one by composite Gauss-Legendre with breakpoints at
    every kink of the integrand.
    """
    x, w = np.polynomial.legendre.leggauss(npts)
    out = np.empty(len(targets))
    for i, tq in enumerate(targets):
        cand = [0.0, tq, math.pi - tq, 0.5 * delta, delta, tq - delta, tq + delta,
                tq - 0.5 * delta, tq + 0.5 * delta, delta - tq, 0.5 * delta - tq]
        br = np.unique(np.clip(cand, 0.0, min(delta, math.pi)))
        nodes, weights = [], []
        for a, b in zip(br[:-1], br[1:]):
            if b - a <= 1e-15:
                continue
            m = max(1, int(math.ceil((b - a) / panel)))
            e = np.linspace(a, b, m + 1)
            mid = 0.5 * (e[1:] + e[:-1])
            hw = 0.5 * (e[1:] - e[:-1])
            nodes.append((mid[:, None] + hw[:, None] * x[None, :]).ravel())
            weights.append((hw[:, None] * w[None, :]).ravel())
        ts = np.concatenate(nodes)
        ws = np.concatenate(weights)
        lo = np.abs(ts - tq)
        hi = np.minimum(ts + tq, 2.0 * math.pi - ts - tq)
        inner = kernel(hi) - kernel(lo)
        out[i] = 2.0 * math.pi / math.sin(tq) * np.dot(ws, A(ts) * np.sin(ts) * inner)
    return out


# ---------------------------------------------------------------------------
# torus lattice convolution


def _fft_convolve(grid: TorusGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    axes = tuple(range(grid.n))
    fa = np.fft.rfftn(a.reshape(grid.shape), axes=axes)
    fb = np.fft.rfftn(b.reshape(grid.shape), axes=axes)
    return np.fft.irfftn(fa * fb, s=grid.shape, axes=axes).ravel() * grid.cell_volume


def _shift_to_pole(grid: TorusGrid, field_at_origin: np.ndarray, pole_index: int) -> np.ndarray:
    shift = np.unravel_index(pole_index, grid.shape)
    return np.roll(field_at_origin.reshape(grid.shape), shift, axis=tuple(range(grid.n))).ravel()


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True, eq=False)
class GreenProfile:
    """Nodal Green function with pole ``P0``.

    Parameters
    ----------
    spec : MetricSpec
        Metric whose operator the profile inverts (grid, pole, volume).
    values : ndarray
        Nodal values. On torus grids the pole node carries the quadrature
        value of the singular part (see :func:`singular_pole_value`).
    radii : ndarray
        Distance of every node from the pole in the metric of ``spec``.
    normalized : bool
        ``False``: the singular part is ``r^{2-n} / ((n-2) omega_{n-1})``.
        ``True``: it is ``r^{2-n}``.
    quad_values : ndarray
        Values to use when integrating against the profile; they differ from
        ``values`` in the first cell of radial grids, where the singular part
        is replaced by its exact cell average.
    pole_index : int or None
        Pole node on torus grids.
    mass : float or None
        Extracted mass, if known.
    """

    spec: MetricSpec
    values: np.ndarray
    radii: np.ndarray
    normalized: bool
    quad_values: np.ndarray
    pole_index: int | None = None
    mass: float | None = None

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def singular_coefficient(self) -> float:
        return 1.0 if self.normalized else 1.0 / ((self.n - 2) * sphere_volume(self.n - 1))

    def _away(self) -> np.ndarray:
        mask = self.radii > 0
        if self.pole_index is not None:
            mask[self.pole_index] = False
        return mask

    def decay_constant(self) -> float:
        """``max |G| d^{n-2}`` over nodes other than the pole."""
        m = self._away()
        return float(np.max(np.abs(self.values[m]) * self.radii[m] ** (self.n - 2)))

    def normalize(self) -> "GreenProfile":
        """Rescale so that the singular coefficient is 1."""
        if self.normalized:
            return self
        c = (self.n - 2) * sphere_volume(self.n - 1)
        return replace(self, values=self.values * c, quad_values=self.quad_values * c, normalized=True)

    def regular_part(self) -> tuple[np.ndarray, np.ndarray]:
        """Radii and values of ``G - c r^{2-n}`` along a ray from the pole.

        Radial grids use every node; torus grids use the nodes on the first
        coordinate axis.
        """
        if isinstance(self.spec.grid, RadialGrid):
            idx = np.arange(self.spec.grid.size)
        else:
            grid = self.spec.grid
            pole = np.array(np.unravel_index(self.pole_index, grid.shape))
            steps = np.arange(1, grid.shape[0] // 2 + 1)
            coords = np.repeat(pole[None, :], steps.size, axis=0)
            coords[:, 0] = (coords[:, 0] + steps) % grid.shape[0]
            idx = np.ravel_multi_index(tuple(coords.T), grid.shape)
        r = self.radii[idx]
        return r, self.values[idx] - self.singular_coefficient * r ** (2.0 - self.n)

    def evaluate(self, r):
        """Profile at radius ``r`` by cubic interpolation of the regular part."""
        rr, d = self.regular_part()
        spline = CubicSpline(rr, d)
        r = np.asarray(r, dtype=float)
        out = self.singular_coefficient * r ** (2.0 - self.n) + spline(r)
        return float(out) if out.ndim == 0 else out

    def to_csv(self, path) -> None:
        """Write columns ``r, G, G - r^{2-n}`` (in the profile's convention)."""
        order = np.argsort(self.radii, kind="stable")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "G", "G_minus_singular"])
            for j in order:
                r = self.radii[j]
                if r <= 0:
                    continue
                g = self.values[j]
                w.writerow([repr(float(r)), repr(float(g)),
                            repr(float(g - self.singular_coefficient * r ** (2.0 - self.n)))])


def _radial_quad_values(spec: MetricSpec, values: np.ndarray, coef: float, radii: np.ndarray) -> np.ndarray:
    """Replace the singular part in the first cell by its exact cell average."""
    grid = spec.grid
    n = spec.n
    h = grid.spacing
    x, w = _GL8
    t = 0.5 * h * (x + 1.0)
    dens = np.sin(t) if grid.profile == "sphere" else t
    cell = sphere_volume(n - 1) * 0.5 * h * np.dot(w, t ** (2.0 - n) * dens ** (n - 1))
    q = values.copy()
    q[0] = values[0] + coef * (cell / grid.weights[0] - radii[0] ** (2.0 - n))
    return q


@dataclass
class GammaCascade:
    """Kernels ``Gamma^1 .. Gamma^{k+1}`` and their measured bounds.

    ``bounds[i]`` is ``sup |Gamma^{i+1}| d^{n-2(i+1)}`` when ``2(i+1) < n``,
    ``sup |Gamma^{i+1}| / (1 + |log d|)`` when ``2(i+1) = n`` and
    ``sup |Gamma^{i+1}|`` otherwise; the supremum skips the pole node.
    """

    kernels: list
    bounds: list
    regimes: list
    radii: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"count": len(self.kernels), "bounds": self.bounds, "regimes": self.regimes}


def _bounds(kernels, r, n, mask):
    bounds, regimes = [], []
    for i, g in enumerate(kernels, start=1):
        a = np.abs(g[mask])
        d = r[mask]
        if 2 * i < n:
            bounds.append(float(np.max(a * d ** (n - 2 * i))))
            regimes.append("singular")
        elif 2 * i == n:
            bounds.append(float(np.max(a / (1.0 + np.abs(np.log(d))))))
            regimes.append("logarithmic")
        else:
            bounds.append(float(np.max(a)))
            regimes.append("bounded")
    return bounds, regimes


def _check_homogeneous(config: ParametrixConfig, op: OperatorHandle) -> float:
    spec = op.spec
    if not op.is_homogeneous:
        raise NotHomogeneousError("the parametrix needs a model metric with constant potential; "
                                  "use conformal_green for conformal metrics")
    if config.n != spec.n:
        raise DomainError("parametrix dimension differs from the operator's")
    if config.delta > spec.manifold.injectivity_radius + 1e-12:
        raise DomainError(f"delta {config.delta:g} exceeds the injectivity radius "
                          f"{spec.manifold.injectivity_radius:g}")
    if isinstance(spec.grid, RadialGrid):
        if spec.grid.profile != "sphere":
            raise DomainError("flat radial balls have no closed Green function; use a torus lattice")
        if spec.n != 3:
            raise DomainError("the zonal sphere parametrix is implemented for n = 3")
    return float(op.potential[0])


def parametrix_H(config: ParametrixConfig, spec: MetricSpec, P=None) -> np.ndarray:
    """Nodal values of ``H(P, .)``.

    On torus lattices the pole node carries ``singular_pole_value`` scaled
    by the normalisation; radial grids never contain the pole.
    """
    if isinstance(spec.grid, RadialGrid):
        return config.H(spec.grid.distances(P))
    grid = spec.grid
    P = spec.pole if P is None else np.asarray(P, dtype=float)
    idx = grid.node_index(P)
    r = grid.distances(P)
    out = config.H(np.where(r > 0, r, 1.0))
    out[idx] = singular_pole_value(grid) / config.normalization
    return out


def _torus_cascade(config, op, c):
    grid = op.grid
    r = grid.distances(None)
    safe = np.where(r > 0, r, 1.0)
    H = config.H(safe)
    H[0] = singular_pole_value(grid) / config.normalization
    G1 = config.gamma1(safe, False, c)
    G1[0] = -c * H[0]
    kernels = [G1]
    for _ in range(config.k):
        kernels.append(_fft_convolve(grid, kernels[-1], G1))
    return H, kernels, r


def _sphere_cascade(config, op, c):
    grid = op.grid
    th = grid.nodes
    H = config.H(th)
    g1 = lambda t: config.gamma1(t, True, c)  # noqa: E731
    k_g1 = _ZonalKernel(g1, config.delta, config.antiderivative_intervals)
    k_h = _ZonalKernel(config.H, config.delta, config.antiderivative_intervals)
    G1 = g1(th)
    G2 = _zonal_convolution(g1, k_g1, th, config.delta, config.panel_width, config.gauss_points)
    C1 = _zonal_convolution(g1, k_h, th, config.delta, config.panel_width, config.gauss_points)
    return H, [G1, G2], th, [C1]


def gamma_kernels(config: ParametrixConfig, op: OperatorHandle, P=None) -> GammaCascade:
    """Compute ``Gamma^1 .. Gamma^{k+1}`` with their decay bounds.

    Raises
    ------
    NotHomogeneousError
        If the operator carries a conformal factor or a varying potential.
    """
    c = _check_homogeneous(config, op)
    if isinstance(op.grid, RadialGrid):
        _, kernels, r, _ = _sphere_cascade(config, op, c)
        mask = np.ones(r.size, bool)
    else:
        _, kernels, r = _torus_cascade(config, op, c)
        mask = r > 0
        if P is not None:
            idx = op.grid.node_index(P)
            kernels = [_shift_to_pole(op.grid, g, idx) for g in kernels]
            r = op.grid.distances(P)
            mask = r > 0
    bounds, regimes = _bounds(kernels, r, op.n, mask)
    return GammaCascade(kernels, bounds, regimes, r)


def assemble_green(config: ParametrixConfig, op: OperatorHandle, P=None) -> GreenProfile:
    """Green function of a coercive homogeneous operator with pole ``P``.

    Parameters
    ----------
    config : ParametrixConfig
        Cutoff and quadrature settings.
    op : OperatorHandle
        ``Delta + c`` on a model metric, ``c`` constant.
    P : array_like, optional
        Pole; ``spec.pole`` by default. Radial grids only admit their pole.

    Returns
    -------
    GreenProfile
        Raw convention (singular coefficient ``1/((n-2) omega_{n-1})``).

    Raises
    ------
    NotCoerciveError
        If the smallest eigenvalue is not positive.
    """
    c = _check_homogeneous(config, op)
    lam, _ = smallest_eigenvalue(op)
    if lam <= 0:
        raise NotCoerciveError("a Green function needs an invertible operator", lam)
    spec = op.spec
    if isinstance(op.grid, RadialGrid):
        op.grid.distances(P)
        H, kernels, r, convs = _sphere_cascade(config, op, c)
        F = linear_solve(op, kernels[-1])
        G = H + sum(convs) + F
        quad = _radial_quad_values(spec, G, 1.0 / config.normalization, r)
        return GreenProfile(spec, G, r.copy(), False, quad, None)
    grid = op.grid
    H, kernels, _ = _torus_cascade(config, op, c)
    G = H.copy()
    for g in kernels[:-1]:
        G += _fft_convolve(grid, g, H)
    G += linear_solve(op, kernels[-1])
    P = spec.pole if P is None else np.asarray(P, dtype=float)
    idx = grid.node_index(P)
    G = _shift_to_pole(grid, G, idx)
    return GreenProfile(MetricSpec(spec.manifold, grid, None, spec.delta, P), G, grid.distances(P),
                        False, G.copy(), idx)


# ---------------------------------------------------------------------------
# oracle


@dataclass
class OracleResult:
    """Ewald-split lattice Green function of ``Delta + m^2`` on a 3-torus."""

    values: np.ndarray
    fourier_truncation: float
    image_truncation: float
    splitting: float


def fourier_green_oracle(grid: TorusGrid, m2: float, P=None, splitting: float | None = None) -> OracleResult:
    """Green function of ``Delta + m^2`` from its lattice eigen-expansion.

    The expansion ``sum_k e^{ik.x} / (V (|k|^2 + m^2))`` is split with a
    Gaussian of width ``t``: the smooth part is summed in Fourier space up to
    the grid's Nyquist frequency, the short-range part in real space over
    the 27 nearest periodic images (closed form for ``n = 3``).

    Parameters
    ----------
    grid : TorusGrid
        Three-dimensional lattice.
    m2 : float
        Positive mass term.
    P : array_like, optional
        Pole node; the origin by default.
    splitting : float, optional
        Ewald parameter ``t``; defaults to ``25 / (pi * max(shape) / L)^2``.

    Returns
    -------
    OracleResult
        Nodal values (``nan`` at the pole) and truncation estimates.
    """
    if not m2 > 0:
        raise DomainError(f"the oracle needs m^2 > 0, got {m2}")
    if grid.n != 3:
        raise DomainError("the closed-form oracle is three-dimensional")
    m = math.sqrt(m2)
    L = np.asarray(grid.manifold.periods)
    V = float(np.prod(L))
    kmax = min(math.pi / h for h in grid.spacing)
    t = 25.0 / kmax ** 2 if splitting is None else float(splitting)
    axes = tuple(range(3))
    freqs = [2.0 * np.pi * np.fft.fftfreq(s, d=h) for s, h in zip(grid.shape, grid.spacing)]
    freqs[-1] = 2.0 * np.pi * np.fft.rfftfreq(grid.shape[-1], d=grid.spacing[-1])
    k2 = sum(np.meshgrid(*[f ** 2 for f in freqs], indexing="ij"))
    coef = np.exp(-t * (k2 + m2)) / (k2 + m2)
    smooth = np.fft.irfftn(coef, s=grid.shape, axes=axes).ravel() * (grid.size / V)
    disp = grid.displacements(None)
    short = np.zeros(grid.size)
    st = math.sqrt(t)
    for off in itertools.product((-1, 0, 1), repeat=3):
        r = np.linalg.norm(disp + np.asarray(off) * L, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            a = r / (2.0 * st)
            term = (np.exp(-m * r) * erfc(a - m * st)
                    + np.exp(-a * a - m2 * t) * erfcx(a + m * st)) / (8.0 * np.pi * r)
        short += np.where(r > 0, term, 0.0)
    vals = smooth + short
    vals[0] = np.nan
    if P is not None:
        vals = _shift_to_pole(grid, vals, grid.node_index(P))
    four_err = math.exp(-t * (kmax ** 2 + m2)) / (kmax ** 2 + m2) * grid.size / V
    img_err = float(erfc(0.5 * float(L.min()) * 1.5 / st)) / (4.0 * np.pi * float(L.min()))
    return OracleResult(vals, float(four_err), img_err, t)


# ---------------------------------------------------------------------------
# delta property


@dataclass
class DeltaReport:
    errors: list
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {"errors": self.errors, "tolerance": self.tolerance, "passed": self.passed}


def default_delta_tests(spec: MetricSpec) -> list:
    """Smooth test fields with their values at the pole.

    Low zonal modes on radial grids, low Fourier modes relative to the pole
    on torus lattices.
    """
    if isinstance(spec.grid, RadialGrid):
        th = spec.grid.nodes
        return [(np.ones_like(th), 1.0), (np.cos(th), 1.0), (np.cos(2 * th), 1.0)]
    x = spec.grid.displacements(spec.pole)
    L = np.asarray(spec.manifold.periods)
    k = 2 * np.pi / L
    tests = [(np.ones(spec.grid.size), 1.0), (np.cos(k[0] * x[:, 0]), 1.0)]
    if spec.n >= 2:
        tests.append((np.cos(k[0] * x[:, 0] + k[1] * x[:, 1]), 1.0))
    return tests


def verify_delta(profile: GreenProfile, op: OperatorHandle, tests=None, tol: float = 1e-3) -> DeltaReport:
    """Check ``<G_P, L f> = f(P)`` on smooth fields.

    Parameters
    ----------
    profile : GreenProfile
        Raw or normalised profile (normalised ones are rescaled back).
    op : OperatorHandle
        Operator the profile inverts, on the same grid.
    tests : list, optional
        Entries are nodal arrays or ``(array, value_at_pole)`` pairs; for bare
        arrays on radial grids the pole value is extrapolated.
    tol : float
        Threshold on ``|<G, L f> - f(P)| / ||f||_inf``.
    """
    if not profile.spec.grid.same_as(op.grid):
        raise GridMismatchError("profile and operator live on different grids")
    tests = default_delta_tests(profile.spec) if tests is None else tests
    scale = 1.0
    if profile.normalized:
        scale = 1.0 / ((profile.n - 2) * sphere_volume(profile.n - 1))
    errors = []
    for item in tests:
        if isinstance(item, tuple):
            f, fP = np.asarray(item[0], dtype=float), float(item[1])
        else:
            f = np.asarray(item, dtype=float)
            if profile.pole_index is not None:
                fP = float(f[profile.pole_index])
            else:
                fP = float((15 * f[0] - 10 * f[1] + 3 * f[2]) / 8)
        pairing = scale * float(np.dot(op.mass * profile.quad_values, op.apply(f)))
        errors.append(abs(pairing - fP) / np.max(np.abs(f)))
    return DeltaReport([float(e) for e in errors], tol, bool(max(errors) <= tol))


# ---------------------------------------------------------------------------
# conformal transfer and mass


def _radial_distance(grid: RadialGrid, rho: np.ndarray, rho_pole: float):
    """``int_0^theta rho`` at the nodes by the trapezoid rule."""
    t = np.concatenate([[0.0], grid.nodes])
    v = np.concatenate([[rho_pole], rho])
    return np.cumsum(np.concatenate([[0.0], 0.5 * (v[1:] + v[:-1]) * np.diff(t)]))[1:]


def conformal_green(psi: ConformalFactor, tilde_profile: GreenProfile) -> GreenProfile:
    """Green function of ``g`` from that of ``g~ = psi^{4/(n-2)} g``.

    ``G_P(Q) = psi(P) psi(Q) G~_P(Q)``. The returned profile lives on the
    metric ``g`` (factor divided by ``psi``) and its radii are ``g``
    distances from the pole.
    """
    spec_t = tilde_profile.spec
    if not psi.grid.same_as(spec_t.grid):
        raise GridMismatchError("factor and profile live on different grids")
    n = spec_t.n
    p = np.asarray(psi.values)
    if tilde_profile.pole_index is not None:
        pP = float(p[tilde_profile.pole_index])
    else:
        pP = psi.pole_value()
    spec_g = spec_t.conformal(psi.reciprocal())
    if isinstance(spec_t.grid, RadialGrid):
        # lengths of g scale by its total factor to the power 2/(n-2)
        total = spec_g.factor
        rho = total.values ** (2.0 / (n - 2))
        radii = _radial_distance(spec_t.grid, rho, total.pole_value() ** (2.0 / (n - 2)))
    else:
        scale = (1.0 / pP) ** (2.0 / (n - 2))
        radii = tilde_profile.radii * scale
    vals = pP * p * tilde_profile.values
    quad = pP * p * tilde_profile.quad_values
    return GreenProfile(spec_g, vals, radii, tilde_profile.normalized, quad, tilde_profile.pole_index)


@dataclass
class MassReport:
    """Mass extracted from ``G - r^{2-n}`` on a dyadic ladder of radii."""

    mass: float
    slope: float
    residual: float
    radii: list
    regular_values: list

    def to_dict(self) -> dict:
        return {"A": self.mass, "slope": self.slope, "extrapolation_residual": self.residual,
                "radii": self.radii, "regular_values": self.regular_values}


def extract_mass(profile: GreenProfile, r0: float = 0.2, levels: int = 5, min_spacings: float = 2.0) -> MassReport:
    """Estimate ``A`` in ``G = r^{2-n} + A + O(r)``.

    The regular part is interpolated at ``r_j = r0 2^{-j}`` (``j < levels``)
    and fitted by ``A + B r`` in least squares.

    Raises
    ------
    ResolutionError
        If the smallest radius is below ``min_spacings`` local node spacings.
    DomainError
        If the profile is not normalised.
    """
    if not profile.normalized:
        raise DomainError("normalise the profile before extracting the mass")
    rr, d = profile.regular_part()
    radii = r0 * 2.0 ** -np.arange(levels)
    j = int(np.clip(np.searchsorted(rr, radii[-1]), 1, rr.size - 2))
    spacing = float(np.max(np.diff(rr[: j + 2])))
    if radii[-1] < min_spacings * spacing:
        raise ResolutionError(f"ladder radius {radii[-1]:.3g} is below {min_spacings:g} grid spacings "
                              f"({spacing:.3g})")
    if radii[0] > rr.max():
        raise ResolutionError("ladder radius exceeds the profile range")
    vals = CubicSpline(rr, d)(radii)
    B, A = np.polyfit(radii, vals, 1)
    res = float(np.max(np.abs(A + B * radii - vals)))
    return MassReport(float(A), float(B), res, [float(x) for x in radii], [float(v) for v in vals])
