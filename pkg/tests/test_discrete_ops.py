import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from yamabe.discrete_ops import (assemble_operator, brezis_lieb_probe, coercivity_check, conformal_laplacian,
                                 energy, linear_solve, lp_norm, smallest_eigenvalue, yamabe_functional)
from yamabe.errors import DomainError, GridMismatchError, NotCoerciveError
from yamabe.geometry import ModelManifold, RadialGrid, MetricSpec, flat_torus, round_sphere, singular_conformal_factor
from yamabe.test_functions import best_constant_inv2, bubble_profile


@pytest.fixture(scope="module")
def sphere():
    return round_sphere(3, 512)


@pytest.fixture(scope="module")
def torus():
    return flat_torus(3, 16)


def test_torus_laplacian_kills_constants(torus):
    op = assemble_operator(torus, 0.0)
    assert np.max(np.abs(op.apply(np.ones(op.size)))) == 0.0
    assert op.dirichlet(np.ones(op.size)) == 0.0


def test_sphere_stiffness_kills_constants(sphere):
    op = assemble_operator(sphere, 0.0)
    assert np.max(np.abs(op.stiffness(np.ones(op.size)))) == 0.0


def test_zonal_harmonic_rayleigh_quotient_second_order():
    errs = []
    for J in (128, 256, 512):
        spec = round_sphere(3, J)
        op = assemble_operator(spec, 0.0)
        u = np.cos(spec.grid.nodes)
        errs.append(abs(op.dirichlet(u) / op.inner(u, u) - 3.0))
    assert errs[-1] < 1e-4
    for a, b in zip(errs, errs[1:]):
        assert 3.5 < a / b < 4.5


def test_torus_fourier_rayleigh_quotient():
    vals = []
    for m in (16, 32):
        spec = flat_torus(3, m)
        op = assemble_operator(spec, 0.0)
        u = np.sin(2 * np.pi * spec.grid.coordinates()[:, 0])
        vals.append(op.dirichlet(u) / op.inner(u, u))
    # oracle: the discrete symbol (2/h sin(pi h))^2 tends to 4 pi^2
    for m, v in zip((16, 32), vals):
        h = 1.0 / m
        assert v == pytest.approx((2 / h * math.sin(math.pi * h)) ** 2, rel=1e-12)
    assert abs(vals[1] - 4 * np.pi ** 2) < abs(vals[0] - 4 * np.pi ** 2) / 3.5


def test_grid_mismatch(sphere):
    with pytest.raises(GridMismatchError):
        assemble_operator(sphere, np.zeros(10))


def test_lp_norm_examples(sphere, torus):
    w = torus.volume_weights()
    for s in (1.0, 2.0, 6.0):
        assert lp_norm(np.ones(w.size), s, w) == pytest.approx(1.0, rel=1e-13)
    ws = sphere.volume_weights()
    assert lp_norm(np.full(ws.size, -2.5), 2.0, ws) == pytest.approx(2.5 * math.sqrt(2 * math.pi ** 2), rel=1e-10)
    r = torus.distances()
    bump = np.exp(-(r / 0.2) ** 2)
    assert lp_norm(bump, 1.0, w) <= lp_norm(bump, 2.0, w)
    with pytest.raises(DomainError):
        lp_norm(bump, 0.5, w)


def test_energy_examples(sphere):
    t = flat_torus(3, 8)
    assert energy(assemble_operator(t, 0.0), np.ones(t.grid.size)) == 0.0
    assert energy(assemble_operator(t, -1.0), np.ones(t.grid.size)) == pytest.approx(-1.0, rel=1e-14)
    op = conformal_laplacian(sphere)
    assert energy(op, np.ones(op.size)) == pytest.approx(1.5 * math.pi ** 2, rel=1e-10)


def test_functional_examples(sphere):
    op = conformal_laplacian(sphere)
    assert yamabe_functional(op, np.ones(op.size)) == pytest.approx(0.75 * (2 * math.pi ** 2) ** (2 / 3), rel=1e-10)
    assert yamabe_functional(op, np.ones(op.size)) == pytest.approx(best_constant_inv2(3), rel=1e-10)
    t = flat_torus(3, 8)
    assert yamabe_functional(assemble_operator(t, -1.0), np.ones(t.grid.size)) == pytest.approx(-1.0, rel=1e-14)
    with pytest.raises(DomainError):
        yamabe_functional(op, np.zeros(op.size))


def test_smallest_eigenvalue_examples(sphere):
    t = flat_torus(3, 8)
    lam, phi = smallest_eigenvalue(assemble_operator(t, 0.0))
    assert abs(lam) < 1e-10
    assert np.std(phi) / abs(np.mean(phi)) < 1e-8
    lam, _ = smallest_eigenvalue(assemble_operator(t, -1.0))
    assert lam == pytest.approx(-1.0, abs=1e-10)
    lam, phi = smallest_eigenvalue(conformal_laplacian(sphere))
    assert lam == pytest.approx(0.75, abs=1e-10)
    assert np.std(phi) / abs(np.mean(phi)) < 1e-8


def test_smallest_eigenvalue_variable_potential():
    spec = round_sphere(3, 256)
    h = -2.0 + 3.0 * np.cos(spec.grid.nodes)
    op = assemble_operator(spec, h)
    lam, phi = smallest_eigenvalue(op)
    dense = np.linalg.eigvalsh(np.diag(1 / np.sqrt(op.mass)) @ op.matrix().toarray() @ np.diag(1 / np.sqrt(op.mass)))
    assert lam == pytest.approx(dense[0], abs=1e-8)
    assert np.all(phi > 0) or np.all(phi < 0)


def test_linear_solve_examples():
    t = flat_torus(3, 16)
    op = assemble_operator(t, 1.0)
    np.testing.assert_allclose(linear_solve(op, np.ones(op.size)), 1.0, rtol=1e-10)
    f = np.sin(2 * np.pi * t.grid.coordinates()[:, 0])
    u = linear_solve(op, f)
    h = 1.0 / 16
    # exact for the lattice symbol; close to f/(1+4 pi^2) at O(h^2)
    np.testing.assert_allclose(u, f / (1 + (2 / h * math.sin(math.pi * h)) ** 2), atol=1e-10)
    np.testing.assert_allclose(u, f / (1 + 4 * np.pi ** 2), atol=2e-3)
    with pytest.raises(NotCoerciveError) as exc:
        linear_solve(assemble_operator(t, -1.0), f)
    assert exc.value.eigenvalue == pytest.approx(-1.0, abs=1e-8)


def test_coercivity_examples(sphere):
    t = flat_torus(3, 8)
    rep = coercivity_check(assemble_operator(t, 1.0), 8)
    assert rep.coercive and 0 < rep.constant <= 1.0
    assert rep.ratios[0] == pytest.approx(1.0)
    rep = coercivity_check(assemble_operator(t, -1.0), 8)
    assert not rep.coercive and rep.constant is None
    rep = coercivity_check(conformal_laplacian(sphere), 8)
    assert rep.coercive and rep.eigenvalue == pytest.approx(0.75, abs=1e-8)


def test_brezis_lieb_examples(sphere):
    w = sphere.volume_weights()
    th = sphere.grid.nodes
    f = 1.0 + 0.5 * np.cos(th)
    zero = brezis_lieb_probe(f, [np.zeros_like(th)] * 3, 6.0, w)
    assert zero.gaps == [0.0, 0.0, 0.0]
    bub = [bubble_profile(th, 2.0 ** -i, 3) for i in range(1, 6)]
    assert brezis_lieb_probe(np.zeros_like(th), bub, 6.0, w).gaps == [0.0] * 5
    rep = brezis_lieb_probe(f, bub, 6.0, w)
    assert rep.monotone_decreasing


_seed = st.integers(0, 2 ** 32 - 1)


@settings(max_examples=25, deadline=None)
@given(_seed)
def test_operator_symmetry(seed):
    rng = np.random.default_rng(seed)
    for spec in (round_sphere(3, 128), flat_torus(3, 6)):
        h = rng.standard_normal(spec.grid.size)
        op = assemble_operator(spec, h)
        u, w = rng.standard_normal((2, op.size))
        a, b = op.form(u, w), op.form(w, u)
        assert abs(a - b) <= 1e-12 * (abs(a) + 1.0)


@settings(max_examples=25, deadline=None)
@given(_seed)
def test_conformal_operator_symmetry(seed):
    rng = np.random.default_rng(seed)
    spec = round_sphere(3, 128)
    phi = singular_conformal_factor(spec.manifold, spec.grid, 0.5, 1.0)
    op = conformal_laplacian(spec.conformal(phi))
    u, w = rng.standard_normal((2, op.size))
    a, b = op.form(u, w), op.form(w, u)
    assert abs(a - b) <= 1e-12 * (abs(a) + 1.0)
    A = op.matrix()
    assert abs(A - A.T).max() == 0.0


@settings(max_examples=25, deadline=None)
@given(_seed, st.floats(0.01, 100.0))
def test_functional_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    spec = round_sphere(3, 128)
    op = conformal_laplacian(spec)
    psi = 0.2 + rng.random(op.size)
    assert yamabe_functional(op, c * psi) == pytest.approx(yamabe_functional(op, psi), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(_seed)
def test_energy_lower_bound(seed):
    rng = np.random.default_rng(seed)
    for spec in (round_sphere(3, 128), flat_torus(3, 6)):
        h = 2.0 * rng.standard_normal(spec.grid.size) - 1.0
        op = assemble_operator(spec, h)
        psi = rng.random(op.size) + 1e-3
        psi /= op.norm(psi, spec.N)
        assert energy(op, psi) >= -op.norm(h, spec.n / 2) - 1e-8


@settings(max_examples=30, deadline=None)
@given(_seed, st.floats(1.1, 8.0))
def test_discrete_holder(seed, p):
    rng = np.random.default_rng(seed)
    spec = round_sphere(3, 128)
    w = spec.volume_weights()
    h = rng.standard_normal(w.size)
    psi = rng.standard_normal(w.size)
    lhs = lp_norm(h * psi ** 2, 1.0, w)
    rhs = lp_norm(h, p, w) * lp_norm(psi, 2 * p / (p - 1), w) ** 2
    assert lhs <= rhs * (1 + 1e-12)


def test_flat_ball_grid_is_usable():
    m = ModelManifold.torus(3)
    spec = MetricSpec(m, RadialGrid(3, 256, "flat", 0.5), delta=0.5)
    op = assemble_operator(spec, 0.0)
    assert op.volume == pytest.approx(4 / 3 * math.pi * 0.125, rel=1e-10)
