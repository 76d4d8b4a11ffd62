"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned in acceptance.TOL.

The whole suite is evaluated once per session; each criterion is then its own test
so a failure is reported against the criterion that produced it. The lines are
echoed as they are produced and repeated in the terminal summary.
"""
import math

import pytest

from heatmetric import acceptance

from conftest import ACCEPTANCE_LINES

PINNED = {
    "R2_rel": 0.01, "A2_rel": 0.02, "apex_rel": 0.01, "infinity_rel": 0.02, "R4_rel": 0.01,
    "slope_abs": 0.1, "ratio4_max": 0.05, "Abar2_rel": 0.02, "Abar4_max": 0.05,
    "scaling_rel": 1e-4, "chain_disc_rel": 1e-5, "sinkhorn_rel": 0.01, "lift_abs": 1e-9,
    "normed_abs": 1e-6, "h00_abs": 1e-6, "kernel_scaling_rel": 1e-9, "identity_rel": 0.01,
    "K_min": 1.9, "gXY_abs": 1e-6, "sandwich_gap": 4 * math.pi,
}


@pytest.fixture(scope="session")
def results():
    ctx = acceptance.Context(seed=0)

    def echo(line):
        ACCEPTANCE_LINES.append(line)
        print(line, flush=True)

    return {r.number: r for r in acceptance.run_all(ctx, echo=echo)}


def test_tolerances_are_pinned():
    assert acceptance.TOL == PINNED
    assert set(acceptance.CRITERIA) == set(range(1, 14))


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(results, number):
    res = results[number]
    assert res.passed, res.line()
