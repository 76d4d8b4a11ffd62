import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial.hermite_e import hermegauss

from heatmetric.elliptic import (BasisSpec, evaluate_basis, hermite_table, multi_indices,
                                 poincare_bound, poincare_constant, residual_check, solve_gram,
                                 solve_min_norm, translation_problem)
from heatmetric.measures import GaussianMixture, build_grid


def test_multi_index_counts():
    # [DERIVED] monomials of total degree 1..d in two variables: (d+1)(d+2)/2 - 1
    for d in range(1, 8):
        assert len(multi_indices(2, d)) == (d + 1) * (d + 2) // 2 - 1
    odd_odd = multi_indices(2, 6, parity=(1, 1))
    assert all(a % 2 == 1 and b % 2 == 1 for a, b in odd_odd)
    assert (0, 0) in multi_indices(2, 2, include_constant=True)


def test_hermite_orthonormal_under_standard_normal():
    z, w = hermegauss(40)
    w = w / math.sqrt(2 * math.pi)
    H, D = hermite_table(z, 10)
    gram = (H * w) @ H.T
    assert np.allclose(gram, np.eye(11), atol=1e-12)
    # derivative of He_j / sqrt(j!) is sqrt(j) He_{j-1} / sqrt((j-1)!)
    assert np.allclose(D[1:], np.sqrt(np.arange(1, 11))[:, None] * H[:-1])


@given(st.floats(-2, 2), st.floats(-2, 2), st.sampled_from(["hermite", "partition", "union"]))
def test_basis_gradients_by_finite_differences(a, b, family):
    mix = GaussianMixture(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([0.5, 0.5]), 1.0)
    spec = BasisSpec(2, 4, family=family, partition_degree=2)
    y = np.array([[a, b]])
    _, g = evaluate_basis(spec, y, mix)
    h = 1e-6
    for d, e in enumerate(np.eye(2)):
        vp, _ = evaluate_basis(spec, y + h * e, mix)
        vm, _ = evaluate_basis(spec, y - h * e, mix)
        assert np.allclose(g[0, :, d], (vp - vm)[0] / (2 * h), atol=1e-6)


def test_unknown_family():
    with pytest.raises(ValueError):
        BasisSpec(2, 4, family="fourier")


@given(st.floats(0.2, 3.0), st.floats(-2, 2), st.floats(-2, 2))
def test_translation_of_single_gaussian_costs_velocity_squared(t, v1, v2):
    """[DERIVED] moving N(c, 2t I) at constant velocity v is carried by the
    constant field v, a gradient, so the minimal norm is |v|^2."""
    mix = GaussianMixture(np.array([[0.4, -0.3]]), np.array([1.0]), t)
    pr = translation_problem(mix, [[v1, v2]], order=16)
    sol = solve_min_norm(pr, BasisSpec(2, 1, scale=math.sqrt(2 * t)))
    assert sol.q == pytest.approx(v1 * v1 + v2 * v2, rel=1e-10, abs=1e-12)


def test_galerkin_values_increase_with_degree():
    mix = GaussianMixture(np.array([[0.8, 0.0], [-0.8, 0.0]]), np.array([0.5, 0.5]), 1.0)
    vel = np.array([[0.0, 1.0], [0.0, -1.0]])  # rotation of the pair
    pr = translation_problem(mix, vel, order=48)
    qs = [solve_min_norm(pr, BasisSpec(2, d)).q for d in (2, 4, 8, 12)]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(qs, qs[1:]))
    # [DERIVED] the Galerkin value never exceeds int s^2 / f times the Poincare constant
    sol = solve_min_norm(pr, BasisSpec(2, 12))
    C = poincare_constant(pr.grid, BasisSpec(2, 8), mix)
    rep = poincare_bound(sol, C)
    assert rep["margin"] >= 0
    res = residual_check(sol, BasisSpec(2, 6))
    assert res["max"] < 1e-8


def test_poincare_constant_of_gaussian():
    # [DERIVED] Poincare constant of N(0, 2t I) is 2t, attained by linear functions
    for t in (0.5, 1.0, 2.0):
        g = build_grid(2, t, order=24)
        assert poincare_constant(g, BasisSpec(2, 6, scale=math.sqrt(2 * t))) == pytest.approx(2 * t, rel=1e-8)


def test_solve_gram_pseudo_inverse():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(6, 3))
    G = A @ A.T  # rank 3
    b = G @ rng.normal(size=6)
    c, q, rank = solve_gram(G, b)
    assert rank == 3
    assert np.allclose(G @ c, b, atol=1e-8)
    assert q == pytest.approx(c @ G @ c, rel=1e-8)
