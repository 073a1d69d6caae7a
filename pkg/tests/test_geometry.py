import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from yamabe.errors import DomainError, GridMismatchError
from yamabe.geometry import (ConformalFactor, MetricSpec, ModelManifold, RadialGrid, TorusGrid, conformal_coefficient,
                             critical_exponent, flat_torus, geodesic_distance, round_sphere, scalar_curvature,
                             singular_conformal_factor, singular_factor_value, sphere_volume)


def test_sphere_volume_small_dimensions():
    assert sphere_volume(1) == pytest.approx(2 * math.pi, rel=1e-15)
    assert sphere_volume(2) == pytest.approx(4 * math.pi, rel=1e-15)


def test_sphere_volume_three_matches_quadrature():
    # omega_3 = omega_2 * int_0^pi sin^2
    oracle = 4 * math.pi * quad(lambda t: math.sin(t) ** 2, 0, math.pi)[0]
    assert sphere_volume(3) == pytest.approx(oracle, rel=1e-12)
    assert sphere_volume(3) == pytest.approx(19.7392088, rel=1e-8)


@pytest.mark.parametrize("n", [4, 5, 7])
def test_sphere_volume_recursion(n):
    oracle = sphere_volume(n - 1) * quad(lambda t: math.sin(t) ** (n - 1), 0, math.pi)[0]
    assert sphere_volume(n) == pytest.approx(oracle, rel=1e-12)


def test_sphere_volume_rejects_zero():
    with pytest.raises(DomainError):
        sphere_volume(0)


def test_exponents():
    assert critical_exponent(3) == 6.0
    assert critical_exponent(4) == 4.0
    assert conformal_coefficient(3) == pytest.approx(1 / 8)


def test_manifold_validation():
    with pytest.raises(DomainError):
        ModelManifold.sphere(2)
    with pytest.raises(DomainError):
        ModelManifold.torus(3, [1.0, 0.0, 1.0])
    t = ModelManifold.torus(3, [1.0, 2.0, 0.5])
    assert t.volume == pytest.approx(1.0)
    assert t.injectivity_radius == pytest.approx(0.25)
    assert ModelManifold.sphere(3).injectivity_radius == pytest.approx(math.pi)


def test_geodesic_distance_examples():
    s = ModelManifold.sphere(3)
    P = np.array([0, 0, 0, 1.0])
    assert geodesic_distance(s, P, P) == 0.0
    assert geodesic_distance(s, P, -P) == pytest.approx(math.pi)
    t = ModelManifold.torus(3)
    assert geodesic_distance(t, [0, 0, 0], [0.9, 0, 0]) == pytest.approx(0.1)


def _sphere_point(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


_vec = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1)


@settings(max_examples=60, deadline=None)
@given(_vec, _vec, _vec)
def test_sphere_distance_metric_axioms(a, b, c):
    s = ModelManifold.sphere(3)
    P, Q, R = map(_sphere_point, (a, b, c))
    dpq = geodesic_distance(s, P, Q)
    assert dpq == pytest.approx(geodesic_distance(s, Q, P), abs=1e-14)
    assert dpq <= geodesic_distance(s, P, R) + geodesic_distance(s, R, Q) + 1e-12
    assert 0.0 <= dpq <= math.pi + 1e-15


_pt = st.lists(st.floats(-3, 3), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(_pt, _pt, _pt)
def test_torus_distance_metric_axioms(a, b, c):
    t = ModelManifold.torus(3, [1.0, 0.7, 1.3])
    dpq = geodesic_distance(t, a, b)
    assert dpq == pytest.approx(geodesic_distance(t, b, a), abs=1e-12)
    assert dpq <= geodesic_distance(t, a, c) + geodesic_distance(t, c, b) + 1e-12
    assert dpq <= 0.5 * math.sqrt(1 + 0.49 + 1.69) + 1e-12


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("J", [128, 512])
def test_radial_quadrature_exact_volume(n, J):
    g = RadialGrid(n, J)
    assert g.weights.sum() == pytest.approx(sphere_volume(n), rel=1e-10)
    assert g.nodes[0] > 0 and g.nodes[-1] < math.pi


def test_torus_grid_volume():
    m = ModelManifold.torus(3, [1.0, 2.0, 0.5])
    g = TorusGrid(m, [8, 10, 6])
    assert g.cell_volume == pytest.approx(np.prod(g.spacing), rel=1e-15)
    assert g.weights.sum() == pytest.approx(1.0, rel=1e-12)


def test_singular_factor_examples():
    assert float(singular_factor_value(1.0, 3, 0.5, 1.0)) == pytest.approx(2 ** 0.25, rel=1e-15)
    assert float(singular_factor_value(0.0, 3, 0.3, 2.0)) == 1.0
    spec = round_sphere(3, 256)
    phi0 = singular_conformal_factor(spec.manifold, spec.grid, 0.5, 0.0)
    assert np.all(phi0.values == 1.0)
    phi = singular_conformal_factor(spec.manifold, spec.grid, 0.5, 1.0)
    assert phi.pole_value() == 1.0
    assert np.all(phi.values >= 1.0)


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, -0.2])
def test_singular_factor_rejects_alpha(alpha):
    spec = round_sphere(3, 64)
    with pytest.raises(DomainError):
        singular_conformal_factor(spec.manifold, spec.grid, alpha, 1.0)


def test_factor_must_be_positive():
    g = RadialGrid(3, 32)
    with pytest.raises(Exception):
        ConformalFactor(g, np.zeros(32))


def test_spec_grid_checks():
    s = round_sphere(3, 64)
    t = flat_torus(3, 8)
    with pytest.raises(GridMismatchError):
        MetricSpec(s.manifold, t.grid)
    with pytest.raises(GridMismatchError):
        MetricSpec(s.manifold, s.grid, ConformalFactor.constant(RadialGrid(3, 32), 1.0))
    with pytest.raises(DomainError):
        MetricSpec(s.manifold, s.grid, delta=0.0)


def test_scalar_curvature_models():
    assert np.allclose(scalar_curvature(round_sphere(3, 128)), 6.0)
    assert np.allclose(scalar_curvature(flat_torus(3, 8)), 0.0)


@pytest.mark.parametrize("c", [0.5, 1.7, 3.0])
def test_scalar_curvature_constant_factor(c):
    spec = round_sphere(3, 256)
    R = scalar_curvature(spec.conformal(ConformalFactor.constant(spec.grid, c)))
    # oracle: R of c^4 g0 is 6 c^-4
    np.testing.assert_allclose(R, 6.0 * c ** -4, rtol=1e-8)


@pytest.mark.parametrize("n", [4, 5])
def test_scalar_curvature_scaling_law(n):
    spec = round_sphere(n, 128)
    c = 1.9
    R = scalar_curvature(spec.conformal(ConformalFactor.constant(spec.grid, c)))
    np.testing.assert_allclose(R, c ** (-4.0 / (n - 2)) * n * (n - 1), rtol=1e-8)


def test_zero_exponent_factor_matches_plain_spec():
    from yamabe.discrete_ops import conformal_laplacian, yamabe_functional

    spec = round_sphere(3, 256)
    phi = singular_conformal_factor(spec.manifold, spec.grid, 0.5, 0.0)
    a, b = conformal_laplacian(spec), conformal_laplacian(spec.conformal(phi))
    u = 1.0 + 0.3 * np.cos(spec.grid.nodes) ** 2
    assert yamabe_functional(a, u) == pytest.approx(yamabe_functional(b, u), rel=1e-12)
    np.testing.assert_allclose(a.apply(u), b.apply(u), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(scalar_curvature(spec), scalar_curvature(spec.conformal(phi)), rtol=1e-12)
