import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatmetric.measures import (ConePoint, DiscreteMeasure, GaussianMixture, RotGaussMixture,
                                 angular_separation, build_grid, cone_distance, project,
                                 quotient_cost, rotation, symmetric_lift)

radii = st.floats(0.01, 10.0)
angles = st.floats(-20.0, 20.0)
orders = st.sampled_from([1, 2, 4])


@given(radii, angles, radii, angles, orders)
def test_cone_distance_matches_quotient_cost(r1, a1, r2, a2, k):
    p, q = ConePoint(r1, a1, k), ConePoint(r2, a2, k)
    d = cone_distance(p, q)
    c = quotient_cost(p.planar(), q.planar(), k)[0, 0]
    assert d == pytest.approx(math.sqrt(c), abs=1e-9)
    assert cone_distance(q, p) == pytest.approx(d, abs=1e-12)


@given(radii, angles, radii, angles, radii, angles, orders)
def test_cone_distance_triangle(r1, a1, r2, a2, r3, a3, k):
    p, q, s = ConePoint(r1, a1, k), ConePoint(r2, a2, k), ConePoint(r3, a3, k)
    assert cone_distance(p, s) <= cone_distance(p, q) + cone_distance(q, s) + 1e-9


@given(radii, angles, orders)
def test_angle_reduced_and_lifts_on_circle(r, a, k):
    p = ConePoint(r, a, k)
    assert 0 <= p.alpha < p.theta
    L = p.lifts()
    assert L.shape == (k, 2)
    assert np.allclose(np.linalg.norm(L, axis=1), r)
    # every lift represents the same cone point
    for x in L:
        assert cone_distance(ConePoint.from_planar(x, k), p) < 1e-9


def test_apex_and_antipode():
    o = ConePoint(0.0, 1.3, 2)
    assert o.alpha == 0.0 and o.is_apex
    p, q = ConePoint(1.0, 0.0, 2), ConePoint(2.0, math.pi / 2, 2)
    # on C(pi) the largest angular separation is pi / 2
    assert angular_separation(p, q) == pytest.approx(math.pi / 2)
    assert cone_distance(p, q) == pytest.approx(math.sqrt(5))
    assert cone_distance(o, q) == 2.0


def test_invalid_points():
    with pytest.raises(ValueError):
        ConePoint(-1.0, 0.0, 2)
    with pytest.raises(ValueError):
        ConePoint(1.0, 0.0, 3)
    with pytest.raises(ValueError):
        cone_distance(ConePoint(1, 0, 2), ConePoint(1, 0, 4))


def test_rotation_is_orthogonal():
    R = rotation(0.7)
    assert np.allclose(R @ R.T, np.eye(2))
    assert np.allclose(rotation(math.pi / 2) @ [1, 0], [0, 1])


def test_discrete_measure_validation_and_merging():
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 2)), [0.3, 0.3])
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 2)), [1.5, -0.5])
    # (1, 0) and (-1, 0) are the same point of C(pi)
    m = DiscreteMeasure([[1.0, 0.0], [-1.0, 0.0]], [0.5, 0.5], k=2)
    assert m.size == 1 and m.weights[0] == pytest.approx(1.0)


@given(st.integers(1, 5), st.integers(0, 10_000), st.sampled_from([2, 4]))
def test_lift_then_project_roundtrip(n, seed, k):
    rng = np.random.default_rng(seed)
    nu = DiscreteMeasure(rng.normal(size=(n, 2)), rng.dirichlet(np.ones(n)), k=k)
    lifted = symmetric_lift(nu)
    assert lifted.size == k * nu.size
    # the lift is invariant under the rotation by 2 pi / k
    R = rotation(2 * math.pi / k)
    rot = DiscreteMeasure(lifted.points @ R.T, lifted.weights)
    a = sorted(map(tuple, np.round(lifted.points, 9)))
    b = sorted(map(tuple, np.round(rot.points, 9)))
    assert np.allclose(a, b)
    back = project(lifted, k)
    order_a, order_b = np.lexsort(nu.points.T), np.lexsort(back.points.T)
    assert np.allclose(nu.points[order_a], back.points[order_b])
    assert np.allclose(nu.weights[order_a], back.weights[order_b])


def test_mixture_density_and_score():
    mix = GaussianMixture(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0.5, 0.5]), 0.7)
    y = np.array([[0.3, -0.2], [2.0, 1.0]])
    # [DERIVED] score by central differences of the log density
    h = 1e-6
    num = np.stack([(mix.log_density(y + h * e) - mix.log_density(y - h * e)) / (2 * h)
                    for e in np.eye(2)], axis=1)
    assert np.allclose(mix.grad_log_density(y), num, atol=1e-7)
    # [DERIVED] density value from the explicit Gaussian formula, covariance 2t
    t = 0.7
    g = lambda c: np.exp(-((y - c) ** 2).sum(1) / (4 * t)) / (4 * math.pi * t)
    assert np.allclose(mix.density(y), 0.5 * g(np.array([1, 0])) + 0.5 * g(np.array([-1, 0])))


@given(st.floats(0.1, 4.0), st.floats(0.1, 3.0), st.sampled_from([1, 2, 3]))
def test_grid_moments(t, c, dim):
    """[DERIVED] Gauss-Hermite grid reproduces mean and second moments of N(c, 2t I)."""
    center = np.full(dim, c)
    g = build_grid(dim, t, center, order=12 if dim == 3 else 24)
    assert g.integrate(np.ones(g.size)) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(g.integrate(g.nodes), center, atol=1e-10)
    var = g.integrate((g.nodes - center) ** 2)
    assert np.allclose(var, 2 * t, rtol=1e-10)


def test_grid_rejects_bad_specs():
    with pytest.raises(ValueError):
        build_grid(4, 1.0)
    with pytest.raises(ValueError):
        build_grid(2, 0.0)
    with pytest.raises(ValueError):
        build_grid(2, 1.0, order=2)


def test_rotational_mixture_centers():
    m = RotGaussMixture((1.0, 0.3), 1.0, 4)
    c = m.component_centers
    assert c.shape == (4, 2)
    assert np.allclose(np.linalg.norm(c, axis=1), math.hypot(1.0, 0.3))
    # density is invariant under the quarter turn
    y = np.array([[0.4, -1.1]])
    assert m.eval_density(y) == pytest.approx(m.eval_density(y @ rotation(math.pi / 2).T))
