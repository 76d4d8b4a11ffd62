import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatmetric import cone
from heatmetric.elliptic import BasisSpec, evaluate_basis


@pytest.fixture(scope="module")
def m2():
    return cone.tabulate(2)


@pytest.fixture(scope="module")
def m4():
    return cone.tabulate(4)


@given(st.floats(1e-3, 20.0), st.sampled_from([2, 4]))
def test_radial_coefficient_two_routes(r, k):
    """Adaptive quadrature and Gauss-Hermite evaluate the same closed form.
    The Gauss-Hermite route resolves the steep tanh near y = 0 only to
    about 1e-9 for r of a few units."""
    assert cone.radial_R(r, k) == pytest.approx(cone.radial_R_gh(r, k), rel=1e-7, abs=1e-14)


@pytest.mark.parametrize("r,value", [
    (3.0, 0.948718408622380039938),
    (5.0, 0.999370978342028837421),
])
def test_radial_coefficient_frozen(r, value):
    # [DERIVED] 30-digit adaptive quadrature of E[tanh^2(Y r / 2)], Y ~ N(r, 2), frozen
    assert cone.radial_R(r, 2) == pytest.approx(value, rel=1e-12)


def test_radial_asymptotics():
    # [PAPER] R ~ r^2 / 2 on C(pi) and r^2 / 4 on C(pi/2); R -> 1 far out
    for r in (1e-3, 1e-2):
        assert cone.radial_R(r, 2) / r ** 2 == pytest.approx(0.5, rel=1e-3)
        assert cone.radial_R(r, 4) / r ** 2 == pytest.approx(0.25, rel=1e-3)
    assert cone.radial_R(10.0, 2) == pytest.approx(1.0, abs=1e-10)
    assert cone.radial_R(0.0, 2) == 0.0
    with pytest.raises(ValueError):
        cone.radial_R(-1.0)
    with pytest.raises(ValueError):
        cone.radial_R(1.0, 3)


def test_radial_coefficient_is_increasing():
    vals = [cone.radial_R(r) for r in np.geomspace(1e-3, 10, 30)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("k,r", [(2, 0.05), (2, 0.02), (4, 0.1), (4, 0.05)])
def test_angular_coefficient_matches_oracle(k, r):
    """[DERIVED] leading-order A is r^2/4 (k=2) and r^6/384 (k=4)."""
    A = cone.angular_A(r, k).value
    assert A / cone.angular_oracle(r, k) == pytest.approx(1.0, rel=5 * r * r)


@pytest.mark.parametrize("k", [2, 4])
def test_oracle_potential_solves_the_continuity_equation(k):
    """The oracle gradient satisfies int grad(phi) . grad(f) dmu = int s f
    for polynomial test functions f, to leading order in r, and its energy
    is the oracle coefficient."""
    r = 0.02
    pr = cone.coefficient_problem(r, k, "angular")
    y = pr.grid.nodes
    h = 1e-5
    grad = np.stack([(cone.oracle_potential(y + h * e, r, k) - cone.oracle_potential(y - h * e, r, k)) / (2 * h)
                     for e in np.eye(2)], axis=1)
    energy = float(pr.grid.weights @ (grad ** 2).sum(1))
    # the components sit at distance r from the origin, an O(r^2) correction
    assert energy == pytest.approx(cone.angular_oracle(r, k), rel=2 * r * r)
    v, g = evaluate_basis(BasisSpec(2, 6), y)
    b = pr.load(v, g)
    lhs = np.einsum("n,nd,nid->i", pr.grid.weights, grad, g)
    assert np.max(np.abs(lhs - b)) <= 1e-3 * np.max(np.abs(b))
    # the potential printed with a four times larger constant fails the same check
    if k == 4:
        lhs4 = 4 * lhs
        assert np.max(np.abs(lhs4 - b)) > 0.5 * np.max(np.abs(b))


def test_angular_degree_sweep_monotone():
    res = cone.angular_A(0.1, 2, degrees=(16, 24, 32))
    assert res.monotone
    assert res.history[-1] / 0.01 == pytest.approx(0.25, rel=0.02)


def test_tabulated_metric_limits(m2, m4):
    assert m2.saturated and m4.saturated
    assert m2.coef_R(100.0) == 1.0 and m2.coef_A(100.0) == 1.0
    s = 1e-5
    assert m2.coef_R(s) / s ** 2 == pytest.approx(0.5, rel=1e-3)
    assert m4.coef_A(s) / s ** 6 == pytest.approx(1 / 384, rel=1e-2)


def test_unsaturated_table_refuses_extrapolation():
    m = cone.tabulate(2, rmin=1e-2, rmax=2.0, n=16)
    assert not m.saturated
    with pytest.raises(ValueError):
        m.coef_A(3.0)


@given(st.floats(1e-4, 40.0))
def test_second_derivatives_by_differences(s):
    m = cone.tabulate(2)
    h = 1e-5 * s
    R, dR, d2R, A, dA, d2A = (float(np.asarray(v)[0]) for v in m.coef_second_derivatives(np.array([s])))
    Rp, dRp, Ap, dAp = (float(np.asarray(v)[0]) for v in m.coef_with_derivatives(np.array([s + h])))
    Rm, dRm, Am, dAm = (float(np.asarray(v)[0]) for v in m.coef_with_derivatives(np.array([s - h])))
    assert dR == pytest.approx((Rp - Rm) / (2 * h), rel=1e-4, abs=1e-10)
    assert dA == pytest.approx((Ap - Am) / (2 * h), rel=1e-4, abs=1e-10)
    assert d2R == pytest.approx((dRp - dRm) / (2 * h), rel=1e-3, abs=1e-8)
    assert d2A == pytest.approx((dAp - dAm) / (2 * h), rel=1e-3, abs=1e-8)


@given(st.floats(1e-3, 30.0), st.floats(0.1, 9.0))
def test_rho_scaling_and_inverse(r, t):
    m = cone.tabulate(2)
    rt = cone.rho(r, t, m)
    assert rt == pytest.approx(math.sqrt(t) * cone.rho(r / math.sqrt(t), 1.0, m), rel=1e-12)
    assert cone.rho_inverse(rt, t, m) == pytest.approx(r, rel=1e-9)
    assert rt <= r


def test_rho_against_direct_quadrature(m2):
    from scipy.integrate import quad
    for r in (0.05, 1.0, 4.0):
        direct = quad(lambda s: math.sqrt(cone.radial_R(s)), 0, r, epsrel=1e-10)[0]
        assert cone.rho(r, 1.0, m2) == pytest.approx(direct, rel=1e-5)


def test_apex_angle_k2(m2):
    rep = cone.apex_angle(2, 1.0, m2)
    assert rep.limit == pytest.approx(math.sqrt(2) * math.pi, rel=1e-3)
    # the limit does not depend on t
    assert cone.apex_angle(2, 4.0, m2).limit == pytest.approx(rep.limit, rel=1e-9)


def test_apex_angle_k4_vanishes(m4):
    assert cone.ratio_at(1e-2, 1.0, m4) < 0.05
    assert cone.ratio_at(1e-3, 1.0, m4) < cone.ratio_at(1e-2, 1.0, m4)


def test_angle_at_infinity_tends_to_pi(m2):
    vals = [cone.ratio_at(r, 1.0, m2) for r in (10.0, 20.0, 50.0)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(math.pi, rel=0.03)


def test_tangent_chart(m2, m4):
    assert cone.sqrt_Abar(1e-4, m2) == pytest.approx(math.sqrt(2), rel=1e-3)
    assert cone.sqrt_Abar(1e-4, m4) < 0.05
    ch = cone.tangent_chart(m2)
    assert ch.sqrt_Abar_at(1e-5) == pytest.approx(math.sqrt(2), rel=1e-3)


def test_metric_csv_is_deterministic(m2):
    a = cone.metric_csv(m2)
    b = cone.metric_csv(cone.tabulate(2))
    assert a == b
    head, *rows = a.strip().split("\n")
    assert head == "r,R,A,rho,ell,ratio"
    assert len(rows) == m2.radii.size
