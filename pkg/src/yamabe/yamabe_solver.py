"""Minimisation of the Yamabe functional and the Yamabe-type equation.

The critical problem ``L psi = mu psi^{N-1}`` is reached through a ladder of
subcritical problems ``L psi = mu_q psi^{q-1}``, ``||psi||_q = 1``, with
warm starts. Two backends are used:

* coercive ``L`` (smallest eigenvalue positive): the fixed point
  ``psi <- normalize_q(L^{-1} psi^{q-1})``;
* otherwise: projected preconditioned gradient descent on the constraint
  set ``{psi >= 0, ||psi||_q = 1}`` with Armijo backtracking.

When the smallest eigenvalue vanishes the critical equation degenerates to
``L psi = 0`` and the kernel is returned directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from .discrete_ops import (OperatorHandle, conformal_laplacian, energy, smallest_eigenvalue,
                           yamabe_functional)
from .errors import ConvergenceError, DomainError, InvariantError
from .geometry import ConformalFactor, MetricSpec, RadialGrid, scalar_curvature
from .test_functions import best_constant_inv2

__all__ = [
    "RungRecord",
    "SolveReport",
    "SubcriticalResult",
    "default_ladder",
    "euler_lagrange_residual",
    "minimize_subcritical",
    "continuation_to_critical",
    "solve_constant_curvature",
    "ConstantCurvatureReport",
    "check_uniqueness",
    "UniquenessReport",
    "conformal_invariance_check",
    "ConformalCheckReport",
]

RESIDUAL_TOL = 1e-8
MAX_ITER = 10_000
DEGENERATE_TOL = 1e-9
# relative margin below K^{-2} required before the strict-inequality flag is set
THRESHOLD_MARGIN = 1e-6


class SubcriticalResult(NamedTuple):
    """Minimiser at a fixed exponent."""

    psi: np.ndarray
    mu: float
    iterations: int
    residual: float
    backend: str


@dataclass
class RungRecord:
    q: float
    mu: float
    iterations: int
    residual: float

    def to_dict(self) -> dict:
        return {"q": self.q, "mu": self.mu, "iterations": self.iterations, "residual": self.residual}


@dataclass
class SolveReport:
    """Outcome of a critical solve.

    ``solution`` holds the nodal field and is written to CSV rather than to
    the JSON report.
    """

    mu_estimate: float
    h_tilde: float
    q_trace: list
    final_residual: float
    positivity_margin: float
    normalized: bool
    kinv2: float
    mu_lt_kinv2: bool
    backend: str
    eigenvalue: float
    degenerate: bool
    solution: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "mu_estimate": self.mu_estimate,
            "h_tilde": self.h_tilde,
            "q_trace": [r.to_dict() for r in self.q_trace],
            "final_residual": self.final_residual,
            "positivity_margin": self.positivity_margin,
            "normalized": self.normalized,
            "kinv2": self.kinv2,
            "mu_lt_Kinv2": self.mu_lt_kinv2,
            "backend": self.backend,
            "smallest_eigenvalue": self.eigenvalue,
            "degenerate": self.degenerate,
        }


def default_ladder(n: int, rungs: int = 8) -> list[float]:
    """Geometric ladder of exponents from 2 to ``N`` (both included)."""
    N = 2.0 * n / (n - 2)
    t = np.arange(rungs) / (rungs - 1)
    q = 2.0 * (N / 2.0) ** t
    q[-1] = N
    return [float(v) for v in q]


def _normalize(op: OperatorHandle, v: np.ndarray, q: float) -> np.ndarray:
    nrm = op.norm(v, q)
    if not nrm > 0:
        raise InvariantError("iterate collapsed to zero")
    return v / nrm


def euler_lagrange_residual(op: OperatorHandle, psi: np.ndarray, mu: float, q: float) -> float:
    """Mass-weighted norm of ``L psi - mu psi^{q-1}``."""
    r = op.apply(psi) - mu * np.abs(psi) ** (q - 1)
    return float(np.sqrt(op.inner(r, r)))


def _newton_polish(op, q, psi, tol, max_iter=60):
    """Newton's method for ``L u = u^{q-1}`` on radial grids.

    At ``q = N`` the fixed point is almost neutral along the directions
    generated by conformal motions, and on a zonal grid the critical point
    continued from the subcritical branch is a saddle of the discrete
    functional along them. Full Newton steps converge to it; they may leave
    the valley for one step and come back, so no monotone line search is
    used and the best iterate is kept.
    """
    (a,) = op.edge_weights
    mu = energy(op, psi)
    res = euler_lagrange_residual(op, psi, mu, q)
    if mu <= 0 or q <= 2.0:
        return psi, mu, 0, res
    best = (psi, mu, res)
    u = mu ** (1.0 / (q - 2.0)) * psi
    it = 0
    while best[2] > tol and it < max_iter:
        it += 1
        F = op.weak(u) - op.mass * u ** (q - 1)
        ab = np.zeros((3, op.size))
        ab[0, 1:] = -a
        ab[1] = op.stiffness_diagonal + op.mass * (op.potential - (q - 1) * u ** (q - 2))
        ab[2, :-1] = -a
        u = u + sla.solve_banded((1, 1), ab, -F)
        if not np.all(np.isfinite(u)) or u.min() <= 0:
            break
        psi = _normalize(op, u, q)
        mu = energy(op, psi)
        res = euler_lagrange_residual(op, psi, mu, q)
        if res < best[2]:
            best = (psi, mu, res)
    return best[0], best[1], it, best[2]


def _fixed_point(op, q, psi, tol, max_iter):
    solver = op.factorization(0.0, True)
    mu = energy(op, psi)
    res = euler_lagrange_residual(op, psi, mu, q)
    radial = isinstance(op.grid, RadialGrid)
    it = 0
    checkpoint = res
    while res > tol and it < max_iter:
        it += 1
        u = solver.solve(op.mass * psi ** (q - 1), rtol=1e-14, x0=psi / max(mu, 1e-300))
        psi = _normalize(op, np.maximum(u, 0.0), q)
        mu = energy(op, psi)
        res = euler_lagrange_residual(op, psi, mu, q)
        if radial and it % 100 == 0:
            if res > 0.5 * checkpoint:
                psi, mu, extra, res = _newton_polish(op, q, psi, tol)
                it += extra
                break
            checkpoint = res
    return psi, mu, it, res


def _projected_gradient(op, q, psi, tol, max_iter, lam):
    shift = max(1.0 - lam, 0.0)
    P = op.factorization(shift, True)
    mu = energy(op, psi)
    res = euler_lagrange_residual(op, psi, mu, q)
    it = 0
    while res > tol and it < max_iter:
        it += 1
        g = op.weak(psi)
        c = op.mass * psi ** (q - 1)
        Pg = P.solve(g, rtol=1e-12)
        Pc = P.solve(c, rtol=1e-12)
        alpha = np.dot(c, Pg) / np.dot(c, Pc)
        d = -(Pg - alpha * Pc)
        slope = 2.0 * np.dot(g, d)
        if slope >= 0:
            # descent lost in rounding: keep the unit step only if it lowers the residual
            trial = _normalize(op, np.maximum(psi + d, 0.0), q)
            e = energy(op, trial)
            r = euler_lagrange_residual(op, trial, e, q)
            if r >= res:
                break
            psi, mu, res = trial, e, r
            continue
        # the preconditioner makes the unit step natural
        tau = 1.0
        while True:
            trial = _normalize(op, np.maximum(psi + tau * d, 0.0), q)
            e = energy(op, trial)
            if e <= mu + 1e-4 * tau * slope or tau < 1e-12:
                break
            tau *= 0.5
        psi, mu = trial, e
        res = euler_lagrange_residual(op, psi, mu, q)
    return psi, mu, it, res


def _minimize(op: OperatorHandle, q: float, initial, tol: float, max_iter: int) -> SubcriticalResult:
    lam, phi = smallest_eigenvalue(op)
    psi0 = np.ones(op.size) if initial is None else np.abs(op.check(initial, "initial"))
    psi = _normalize(op, psi0, q)
    if lam > 0:
        psi, mu, it, res = _fixed_point(op, q, psi, tol, max_iter)
        backend = "fixed_point"
    else:
        psi, mu, it, res = _projected_gradient(op, q, psi, tol, max_iter, lam)
        backend = "projected_gradient"
    if res > tol:
        raise ConvergenceError(f"minimisation at q={q:.6g} did not converge", res, it,
                               {"q": q, "backend": backend})
    return SubcriticalResult(psi, float(mu), it, float(res), backend)


def minimize_subcritical(op: OperatorHandle, q: float, initial=None, tol: float = RESIDUAL_TOL,
                         max_iter: int = MAX_ITER) -> SubcriticalResult:
    """Minimise ``E(psi)`` over nonnegative ``psi`` with ``||psi||_q = 1``.

    Parameters
    ----------
    op : OperatorHandle
        Operator ``L = Delta_g + h``.
    q : float
        Exponent in ``[2, N)``.
    initial : array_like, optional
        Starting field; constants by default.
    tol : float
        Target for the Euler-Lagrange residual ``||L psi - mu psi^{q-1}||_2``.
    max_iter : int
        Iteration cap.

    Returns
    -------
    SubcriticalResult
        ``(psi, mu, iterations, residual, backend)`` with ``mu = E(psi)``.
    """
    if not 2.0 <= q < op.N:
        raise DomainError(f"subcritical exponent must lie in [2, {op.N:g}), got {q}")
    return _minimize(op, q, initial, tol, max_iter)


def continuation_to_critical(op: OperatorHandle, ladder: Sequence[float] | None = None, initial=None,
                             tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER) -> SolveReport:
    """Follow a ladder of exponents up to ``N`` and estimate ``mu(g)``.

    Parameters
    ----------
    op : OperatorHandle
        Operator ``L``; for ``mu(g)`` use :func:`conformal_laplacian`.
    ladder : sequence of float, optional
        Increasing exponents ending at ``N``. Defaults to :func:`default_ladder`.
    initial : array_like, optional
        Starting field for the first rung.

    Returns
    -------
    SolveReport

    Raises
    ------
    ConvergenceError
        Carrying the failing rung in ``detail``.
    """
    N = op.N
    ladder = default_ladder(op.n) if ladder is None else [float(q) for q in ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 2.0:
        raise DomainError("ladder must be increasing and start at q >= 2")
    if abs(ladder[-1] - N) > 1e-12:
        raise DomainError(f"ladder must end at the critical exponent {N:g}")
    ladder[-1] = N
    kinv2 = best_constant_inv2(op.n)
    lam, phi = smallest_eigenvalue(op)
    if abs(lam) <= DEGENERATE_TOL:
        psi = _normalize(op, np.abs(phi), N)
        res = float(np.sqrt(op.inner(op.apply(psi), op.apply(psi))))
        trace = [RungRecord(N, 0.0, 0, res)]
        return SolveReport(0.0, 0.0, trace, res, float(psi.min()), True, kinv2, bool(0.0 < kinv2),
                           "harmonic", lam, True, psi)
    psi = initial
    trace = []
    backend = ""
    for i, q in enumerate(ladder):
        try:
            out = _minimize(op, q, psi, tol, max_iter)
        except ConvergenceError as exc:
            exc.detail.update({"rung": i, "q": q, "trace": [r.to_dict() for r in trace]})
            raise
        psi, backend = out.psi, out.backend
        trace.append(RungRecord(q, out.mu, out.iterations, out.residual))
    mu = yamabe_functional(op, psi)
    h_tilde = energy(op, psi)
    margin = float(psi.min())
    if margin <= 0:
        raise InvariantError(f"critical solution is not strictly positive (min {margin:.3e})")
    return SolveReport(float(mu), float(h_tilde), trace, trace[-1].residual, margin,
                       bool(abs(op.norm(psi, N) - 1.0) <= 1e-10), kinv2,
                       bool(mu < kinv2 * (1.0 - THRESHOLD_MARGIN)), backend, lam, False, psi)


@dataclass
class ConstantCurvatureReport:
    solve: SolveReport
    curvature_constant: float
    relative_deviation: float
    exclusion_radius: float

    def to_dict(self) -> dict:
        return {"solve": self.solve.to_dict(), "curvature_constant": self.curvature_constant,
                "relative_sup_deviation": self.relative_deviation, "exclusion_radius": self.exclusion_radius}


def solve_constant_curvature(spec: MetricSpec, exclusion_radius: float = 0.0, ladder=None,
                             tol: float = RESIDUAL_TOL) -> tuple[ConformalFactor, ConstantCurvatureReport]:
    """Find ``psi`` so that ``psi^{4/(n-2)} g`` has constant scalar curvature.

    Parameters
    ----------
    spec : MetricSpec
        Metric ``g``.
    exclusion_radius : float
        Nodes closer than this to ``P0`` are left out of the sup deviation.

    Returns
    -------
    psi : ConformalFactor
        Minimiser normalised by ``||psi||_N = 1``.
    report : ConstantCurvatureReport
        Contains the constant ``4(n-1)/(n-2) mu`` and the relative sup
        deviation of the new curvature from it.
    """
    op = conformal_laplacian(spec)
    report = continuation_to_critical(op, ladder, tol=tol)
    psi = ConformalFactor(spec.grid, report.solution)
    n = spec.n
    target = 4.0 * (n - 1) / (n - 2) * report.mu_estimate
    R = scalar_curvature(spec.conformal(psi))
    keep = spec.distances() >= exclusion_radius
    dev = np.abs(R[keep] - target).max()
    rel = float(dev / abs(target)) if target != 0 else float(dev)
    return psi, ConstantCurvatureReport(report, float(target), rel, float(exclusion_radius))


@dataclass
class UniquenessReport:
    applicable: bool
    mu_sign: int
    eigenvalue: float
    seeds: int
    ratio_cv: list
    max_ratio_cv: float | None
    constancy_cv: list
    passed: bool
    mu_estimates: list

    def to_dict(self) -> dict:
        return {"applicable": self.applicable, "mu_sign": self.mu_sign, "smallest_eigenvalue": self.eigenvalue,
                "seeds": self.seeds, "ratio_cv": self.ratio_cv, "max_ratio_cv": self.max_ratio_cv,
                "constancy_cv": self.constancy_cv, "passed": self.passed, "mu_estimates": self.mu_estimates}


def _cv(x: np.ndarray) -> float:
    return float(np.std(x) / abs(np.mean(x)))


def check_uniqueness(op: OperatorHandle, seeds: int = 4, rng: np.random.Generator | None = None,
                     tol: float = 1e-6) -> UniquenessReport:
    """Proportionality of critical solutions from random positive starts.

    Only applicable when ``mu <= 0``; the sign of ``mu`` equals the sign of
    the smallest eigenvalue of ``L``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    lam, _ = smallest_eigenvalue(op)
    sign = 0 if abs(lam) <= DEGENERATE_TOL else int(np.sign(lam))
    if sign > 0:
        return UniquenessReport(False, 1, lam, seeds, [], None, [], True, [])
    sols, mus = [], []
    for _ in range(seeds):
        rep = continuation_to_critical(op, initial=0.5 + rng.random(op.size))
        sols.append(rep.solution)
        mus.append(rep.mu_estimate)
    cvs = [_cv(a / b) for i, a in enumerate(sols) for b in sols[i + 1:]]
    const = [_cv(s) for s in sols] if sign == 0 else []
    worst = max(cvs) if cvs else 0.0
    ok = worst <= tol and all(c <= tol for c in const)
    return UniquenessReport(True, sign, lam, seeds, cvs, worst, const, bool(ok), mus)


@dataclass
class ConformalCheckReport:
    identity_max_error: float
    covariance_max_error: float
    mu_g: float | None
    mu_tilde: float | None
    mu_relative_difference: float | None
    probes: int

    def to_dict(self) -> dict:
        return {"identity_max_error": self.identity_max_error,
                "covariance_max_error": self.covariance_max_error, "mu_g": self.mu_g,
                "mu_tilde": self.mu_tilde, "mu_relative_difference": self.mu_relative_difference,
                "probes": self.probes}


def conformal_invariance_check(spec: MetricSpec, phi: ConformalFactor, probes: int = 20,
                               rng: np.random.Generator | None = None,
                               compare_mu: bool = True) -> ConformalCheckReport:
    """Check ``I_{g~}(u) = I_g(phi u)`` and the weak covariance of ``L``.

    Parameters
    ----------
    spec : MetricSpec
        Metric ``g``.
    phi : ConformalFactor
        Factor with ``g~ = phi^{4/(n-2)} g``.
    probes : int
        Number of random fields ``u`` (and partners ``w``).
    compare_mu : bool
        Also estimate ``mu(g)`` and ``mu(g~)`` by continuation.

    Notes
    -----
    The identity error is ``|I_{g~}(u) - I_g(phi u)| / (1 + |I_g(phi u)|)``;
    the covariance error compares ``(phi^N L_{g~} u, w)_g`` with
    ``(L_g(phi u), phi w)_g`` relative to the product of the mass norms of
    the two weak-form vectors involved.
    """
    if probes < 1:
        raise DomainError("probes must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    op = conformal_laplacian(spec)
    tilde = spec.conformal(phi)
    opt = conformal_laplacian(tilde)
    p = np.asarray(phi.values)
    N = spec.N
    id_err, cov_err = 0.0, 0.0
    for _ in range(probes):
        u = 1.0 + 0.5 * rng.standard_normal(op.size)
        w = 1.0 + 0.5 * rng.standard_normal(op.size)
        a = yamabe_functional(opt, u)
        b = yamabe_functional(op, p * u)
        id_err = max(id_err, abs(a - b) / (1.0 + abs(b)))
        # (phi^N L~u, w)_g = sum m_g phi^N (L~ u) w ; (L(phi u), phi w)_g = sum m_g L(phi u) phi w
        left = np.dot(op.mass * p ** N * opt.apply(u), w)
        right = np.dot(op.mass * op.apply(p * u), p * w)
        scale = np.sqrt(np.dot(opt.weak(u) ** 2, 1 / opt.mass) * opt.inner(w, w)) + 1e-300
        cov_err = max(cov_err, abs(left - right) / scale)
    mu_g = mu_t = rel = None
    if compare_mu:
        mu_g = continuation_to_critical(op).mu_estimate
        mu_t = continuation_to_critical(opt).mu_estimate
        rel = abs(mu_g - mu_t) / max(abs(mu_g), 1e-300)
    return ConformalCheckReport(float(id_err), float(cov_err), mu_g, mu_t, rel, probes)
