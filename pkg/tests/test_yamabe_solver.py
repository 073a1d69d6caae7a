import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yamabe.discrete_ops import assemble_operator, conformal_laplacian, energy, yamabe_functional
from yamabe.errors import ConvergenceError, DomainError
from yamabe.geometry import ConformalFactor, flat_torus, round_sphere, singular_conformal_factor, sphere_volume
from yamabe.test_functions import best_constant_inv2
from yamabe.yamabe_solver import (check_uniqueness, conformal_invariance_check, continuation_to_critical,
                                  default_ladder, euler_lagrange_residual, minimize_subcritical,
                                  solve_constant_curvature)

KINV2 = best_constant_inv2(3)


@pytest.fixture(scope="module")
def torus_neg():
    return assemble_operator(flat_torus(3, 8), -1.0)


@pytest.fixture(scope="module")
def singular_sphere():
    spec = round_sphere(3, 512)
    phi = singular_conformal_factor(spec.manifold, spec.grid, 0.5, 1.0)
    return spec, phi


def test_default_ladder():
    lad = default_ladder(3)
    assert len(lad) == 8 and lad[0] == 2.0 and lad[-1] == pytest.approx(6.0)
    assert all(a < b for a, b in zip(lad, lad[1:]))


@pytest.mark.parametrize("q", [2.0, 3.0, 5.5])
def test_negative_torus_subcritical(torus_neg, q):
    res = minimize_subcritical(torus_neg, q, initial=0.5 + np.random.default_rng(1).random(torus_neg.size))
    assert res.mu == pytest.approx(-1.0, abs=1e-9)
    assert np.std(res.psi) / np.mean(res.psi) < 1e-6


def test_sphere_q2_is_first_eigenfunction():
    op = conformal_laplacian(round_sphere(3, 256))
    res = minimize_subcritical(op, 2.0)
    assert res.mu == pytest.approx(0.75, rel=1e-10)
    np.testing.assert_allclose(res.psi, sphere_volume(3) ** -0.5, rtol=1e-8)


def test_subcritical_rejects_critical(torus_neg):
    with pytest.raises(DomainError):
        minimize_subcritical(torus_neg, 6.0)


def test_negative_torus_continuation(torus_neg):
    rep = continuation_to_critical(torus_neg)
    assert rep.mu_estimate == pytest.approx(-1.0, abs=1e-8)
    assert rep.final_residual <= 1e-8
    assert rep.positivity_margin > 0
    assert rep.normalized and rep.h_tilde == rep.mu_estimate
    assert torus_neg.norm(rep.solution, 6.0) == pytest.approx(1.0, abs=1e-10)
    assert rep.h_tilde == pytest.approx(energy(torus_neg, rep.solution), abs=1e-10)
    assert len(rep.q_trace) == 8


@pytest.mark.parametrize("J", [256, 512, 1024])
def test_round_sphere_continuation(J):
    rep = continuation_to_critical(conformal_laplacian(round_sphere(3, J)))
    assert rep.mu_estimate == pytest.approx(KINV2, rel=1e-4)
    assert rep.mu_estimate <= KINV2 + 1e-6
    assert not rep.mu_lt_kinv2
    assert rep.positivity_margin > 0


def test_singular_sphere_continuation_finite(singular_sphere):
    spec, phi = singular_sphere
    rep = continuation_to_critical(conformal_laplacian(spec.conformal(phi)))
    assert rep.positivity_margin > 0
    assert rep.final_residual <= 1e-8
    # conformal to the round sphere, so the value cannot drop below K^-2
    assert rep.mu_estimate == pytest.approx(KINV2, rel=1e-8)


def test_failing_rung_is_reported():
    op = conformal_laplacian(round_sphere(3, 128))
    with pytest.raises(ConvergenceError) as exc:
        continuation_to_critical(op, initial=1.0 + np.cos(op.grid.nodes), max_iter=1, tol=1e-14)
    assert "q" in exc.value.detail and "rung" in exc.value.detail


def test_degenerate_torus_gives_harmonic():
    op = assemble_operator(flat_torus(3, 8), 0.0)
    rep = continuation_to_critical(op)
    assert rep.degenerate
    assert rep.mu_estimate == pytest.approx(0.0, abs=1e-10)
    assert np.std(rep.solution) / np.mean(rep.solution) < 1e-10


def test_torus_residual_refinement():
    # near-constant initial fields converge to the constant solution at every resolution
    res = []
    for m in (8, 16):
        op = assemble_operator(flat_torus(3, m), -1.0)
        x = op.grid.coordinates()
        rep = continuation_to_critical(op, initial=1.0 + 0.1 * np.cos(2 * np.pi * x[:, 0]))
        res.append(rep.final_residual)
    assert max(res) <= 1e-8


def test_constant_curvature_round_sphere():
    spec = round_sphere(3, 256)
    psi, rep = solve_constant_curvature(spec)
    assert np.std(psi.values) / np.mean(psi.values) < 1e-8
    assert rep.curvature_constant == pytest.approx(8 * KINV2, rel=1e-6)
    assert rep.relative_deviation <= 1e-6


def test_constant_curvature_flat_torus():
    psi, rep = solve_constant_curvature(flat_torus(3, 8))
    assert rep.solve.degenerate
    assert rep.curvature_constant == pytest.approx(0.0, abs=1e-10)
    assert np.std(psi.values) / np.mean(psi.values) < 1e-10


def test_constant_curvature_singular_sphere(singular_sphere):
    spec, phi = singular_sphere
    _, rep = solve_constant_curvature(spec.conformal(phi))
    assert rep.relative_deviation <= 1e-4


def test_uniqueness_negative_torus(torus_neg):
    rep = check_uniqueness(torus_neg, 4, np.random.default_rng(7))
    assert rep.applicable and rep.mu_sign == -1
    assert rep.max_ratio_cv <= 1e-6 and rep.passed
    assert len(rep.ratio_cv) == 6


def test_uniqueness_zero_mode():
    rep = check_uniqueness(assemble_operator(flat_torus(3, 8), 0.0), 3, np.random.default_rng(3))
    assert rep.applicable and rep.mu_sign == 0
    assert max(rep.constancy_cv) <= 1e-6 and rep.passed


def test_uniqueness_not_applicable():
    rep = check_uniqueness(conformal_laplacian(round_sphere(3, 128)), 4)
    assert not rep.applicable and rep.mu_sign == 1


def test_conformal_check_identity_factor():
    spec = round_sphere(3, 128)
    rep = conformal_invariance_check(spec, ConformalFactor.constant(spec.grid, 1.0), 5, compare_mu=False)
    assert rep.identity_max_error <= 1e-14 and rep.covariance_max_error <= 1e-14


def test_conformal_check_constant_factor():
    spec = round_sphere(3, 128)
    rep = conformal_invariance_check(spec, ConformalFactor.constant(spec.grid, 2.3), 5, compare_mu=False)
    assert rep.identity_max_error <= 1e-12


def test_conformal_check_singular(singular_sphere):
    spec, phi = singular_sphere
    rep = conformal_invariance_check(spec, phi, 20, np.random.default_rng(11))
    assert rep.identity_max_error <= 1e-8
    assert rep.covariance_max_error <= 1e-10
    assert rep.mu_relative_difference <= 1e-4


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_mu_below_sampled_functionals(seed):
    rng = np.random.default_rng(seed)
    spec = round_sphere(3, 256)
    op = conformal_laplacian(spec)
    mu = continuation_to_critical(op).mu_estimate
    th = spec.grid.nodes
    u = 1.0 + rng.uniform(-0.9, 0.9) * np.cos(th) + rng.uniform(-0.5, 0.5) * np.cos(2 * th)
    assert mu <= yamabe_functional(op, u) + 1e-12


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_residual_definition(seed):
    rng = np.random.default_rng(seed)
    op = assemble_operator(flat_torus(3, 6), -1.0)
    psi = np.ones(op.size)
    assert euler_lagrange_residual(op, psi, -1.0, 6.0) <= 1e-13
    u = 1.0 + 0.1 * rng.standard_normal(op.size)
    assert euler_lagrange_residual(op, u, -1.0, 6.0) > 0
