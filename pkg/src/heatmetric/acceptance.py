"""The acceptance suite: thirteen numerical criteria with pinned tolerances.

Each check returns a CriterionResult; run_all collects them. Random samples
are drawn from numpy generators seeded by the configuration.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cone, geodesics, heisenberg as hz, transport
from .measures import ConePoint, DiscreteMeasure, cone_distance, project, symmetric_lift

# tolerances, fixed by the acceptance criteria
TOL = {
    "R2_rel": 0.01,
    "A2_rel": 0.02,
    "apex_rel": 0.01,
    "infinity_rel": 0.02,
    "R4_rel": 0.01,
    "slope_abs": 0.1,
    "ratio4_max": 0.05,
    "Abar2_rel": 0.02,
    "Abar4_max": 0.05,
    "scaling_rel": 1e-4,
    "chain_disc_rel": 1e-5,
    "sinkhorn_rel": 0.01,
    "lift_abs": 1e-9,
    "normed_abs": 1e-6,
    "h00_abs": 1e-6,
    "kernel_scaling_rel": 1e-9,
    "identity_rel": 0.01,
    "K_min": 1.9,
    "gXY_abs": 1e-6,
    "sandwich_gap": 4 * math.pi,
}
SINKHORN_EPS_REL = 1e-4


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    summary: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d} {self.name}: {self.summary} ({self.seconds:.1f}s)"

    def to_dict(self):
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "summary": self.summary, "values": self.values, "seconds": self.seconds}


def _rel(a, b):
    return abs(a - b) / abs(b)


@dataclass
class Context:
    seed: int = 0
    degrees: tuple = (16, 24, 32)
    heis_degrees: tuple = (4, 8, 12, 16, 20, 24)
    upper_degree: int = 12
    tol: dict = field(default_factory=lambda: dict(TOL))
    _metrics: dict = field(default_factory=dict)

    def metric(self, k):
        if k not in self._metrics:
            self._metrics[k] = cone.tabulate(k)
        return self._metrics[k]

    def rng(self, offset):
        return np.random.default_rng(self.seed + offset)


def crit_1(ctx):
    r = 1e-2
    v = cone.radial_R(r, 2) / r ** 2
    ok = _rel(v, 0.5) <= ctx.tol["R2_rel"]
    return ok, f"R(1e-2)/r^2 = {v:.6f} (target 0.5 +- 1%)", {"value": v}


def crit_2(ctx):
    res = cone.angular_A(0.1, 2, degrees=ctx.degrees)
    vals = [q / 0.01 for q in res.history]
    mono = res.monotone
    ok = mono and _rel(vals[-1], 0.25) <= ctx.tol["A2_rel"]
    note = "" if mono else " [not monotone in degree: basis too small or ill-conditioned]"
    return ok, (f"A(0.1)/r^2 over degrees {list(ctx.degrees)} = "
                + ", ".join(f"{v:.7f}" for v in vals) + f" (target 0.25 +- 2%){note}"), \
        {"degrees": list(ctx.degrees), "values": vals, "monotone": mono}


def crit_3(ctx):
    m = ctx.metric(2)
    rep = cone.apex_angle(2, 1.0, m)
    # two-point Richardson on the linear error term as a second reading
    r0 = 1e-3
    rich = 2 * cone.ratio_at(r0 / 2, 1.0, m) - cone.ratio_at(r0, 1.0, m)
    target = math.sqrt(2) * math.pi
    ok = _rel(rep.limit, target) <= ctx.tol["apex_rel"]
    return ok, (f"fit limit {rep.limit:.7f}, Richardson {rich:.7f} vs sqrt(2) pi = {target:.6f} "
                f"(fit residual {rep.fit_residual:.1e})"), \
        {"limit": rep.limit, "richardson": rich, "fit_residual": rep.fit_residual}


def crit_4(ctx):
    m = ctx.metric(2)
    v = cone.ratio_at(50.0, 1.0, m)
    rel = _rel(v, math.pi)
    ok = rel <= ctx.tol["infinity_rel"]
    return ok, f"ratio(50) = {v:.6f}, relative deviation from pi {rel:.4%} (tolerance 2%)", \
        {"value": v, "rel": rel}


def crit_5(ctx):
    m = ctx.metric(4)
    r = 1e-2
    R = cone.radial_R(r, 4) / r ** 2
    radii = np.geomspace(1e-2, 1e-1, 6)
    A = np.array([cone.angular_A(x, 4, degree=24).value for x in radii])
    slope = float(np.polyfit(np.log(radii), 0.5 * np.log(A), 1)[0])
    ratio = cone.ratio_at(r, 1.0, m)
    ok = (_rel(R, 0.25) <= ctx.tol["R4_rel"] and abs(slope - 3) <= ctx.tol["slope_abs"]
          and ratio < ctx.tol["ratio4_max"])
    return ok, f"R/r^2 = {R:.6f}, slope log sqrt A = {slope:.5f}, ratio(1e-2) = {ratio:.2e}", \
        {"R_over_r2": R, "slope": slope, "ratio": ratio,
         "A_over_r6": (A / radii ** 6).tolist()}


def crit_6(ctx):
    v2 = cone.sqrt_Abar(1e-4, ctx.metric(2))
    v4 = cone.sqrt_Abar(1e-4, ctx.metric(4))
    ok = _rel(v2, math.sqrt(2)) <= ctx.tol["Abar2_rel"] and v4 <= ctx.tol["Abar4_max"]
    return ok, f"sqrt(Abar)(1e-4): k=2 {v2:.6f} (sqrt 2), k=4 {v4:.2e} (<= 0.05)", \
        {"k2": v2, "k4": v4}


def random_cone_pair(rng, k, rlo=0.05, rhi=3.0):
    return (ConePoint(rng.uniform(rlo, rhi), rng.uniform(0, 2 * math.pi), k),
            ConePoint(rng.uniform(rlo, rhi), rng.uniform(0, 2 * math.pi), k))


def crit_7(ctx):
    worst = 0.0
    for k in (2, 4):
        m = ctx.metric(k)
        rng = ctx.rng(7 + k)
        for _ in range(20):
            p, q = random_cone_pair(rng, k)
            for t in (0.25, 4.0):
                worst = max(worst, geodesics.scaling_check(p, q, t, m))
    ok = worst <= ctx.tol["scaling_rel"]
    return ok, f"worst relative scaling error {worst:.2e} over 2 x 20 pairs x 2 times", {"worst": worst}


def crit_8(ctx, n_pairs=50, n_plan=3):
    m = ctx.metric(2)
    rng = ctx.rng(8)
    viol = []
    worst_slack = math.inf
    plans = []
    for i in range(n_pairs):
        p, q = random_cone_pair(rng, 2)
        d = cone_distance(p, q)
        for t in (0.25, 1.0, 4.0):
            use_plan = i < n_plan and t == 1.0
            br = transport.chord_distance(p, q, t, plan=use_plan, order=6)
            g = geodesics.distance(p, q, m, t)
            dt = g.distance
            if use_plan:
                plans.append({"t": t, "plan_estimate": br.plan_estimate, "d_t": dt})
            ok = (br.lower <= br.upper and br.lower <= dt * (1 + 1e-12)
                  and dt <= d * (1 + ctx.tol["chain_disc_rel"]))
            worst_slack = min(worst_slack, (dt - br.lower) / d, (d - dt) / d)
            if not ok:
                viol.append({"i": i, "t": t, "lower": br.lower, "upper": br.upper, "d_t": dt, "d": d})
    return not viol, (f"{len(viol)} violations over {n_pairs} pairs x 3 times; "
                      f"smallest relative slack {worst_slack:.2e}"), \
        {"violations": viol, "min_slack": worst_slack, "plan_checks": plans}


def crit_9(ctx):
    rng = ctx.rng(9)
    gaps = []
    for _ in range(20):
        xa = rng.normal(size=(32, 2))
        xb = rng.normal(size=(32, 2)) + rng.normal(size=2)
        mu = DiscreteMeasure(xa, np.full(32, 1 / 32))
        nu = DiscreteMeasure(xb, np.full(32, 1 / 32))
        ex = transport.w2_exact(mu, nu).cost
        # final eps 1e-4 diam^2: at the default 1e-3 the entropic bias alone is about 1%
        eps = SINKHORN_EPS_REL * float(mu.cost_matrix(nu).max())
        sk = transport.w2_sinkhorn(mu, nu, eps=eps, debiased=True, tol=1e-7, max_iter=4000).cost
        gaps.append(abs(sk - ex) / ex)
    lift = 0.0
    for _ in range(10):
        # two-atom cone measures: their symmetric lifts carry four atoms
        wa = rng.dirichlet([1, 1])
        wb = rng.dirichlet([1, 1])
        ca = DiscreteMeasure(rng.normal(size=(2, 2)), wa, k=2)
        cb = DiscreteMeasure(rng.normal(size=(2, 2)), wb, k=2)
        plane = transport.w2_exact(symmetric_lift(ca), symmetric_lift(cb)).cost
        quot = transport.w2_exact(ca, cb).cost
        lift = max(lift, abs(plane - quot))
    normed = 0.0
    for _ in range(5):
        x, y = rng.normal(size=2), rng.normal(size=2)
        p, q = ConePoint.from_planar(x, 1), ConePoint.from_planar(y, 1)
        for t in (0.25, 1.0, 4.0):
            br = transport.chord_distance(p, q, t)
            d = float(np.linalg.norm(x - y))
            normed = max(normed, abs(br.lower - d), abs(br.upper - d))
    ok = (max(gaps) <= ctx.tol["sinkhorn_rel"] and lift <= ctx.tol["lift_abs"]
          and normed <= ctx.tol["normed_abs"])
    return ok, (f"Sinkhorn gap max {max(gaps):.2e}; lift identity {lift:.1e}; "
                f"normed fixture {normed:.1e}"), \
        {"sinkhorn_gaps": gaps, "lift": lift, "normed": normed}


def crit_10(ctx):
    h0 = hz.gaveau_kernel(0, 0, 0, 1.0).value
    rng = ctx.rng(10)
    worst = 0.0
    for _ in range(100):
        x, y = rng.normal(size=2) * 1.5
        u = rng.normal() * 2
        t = float(rng.choice([0.25, 0.5, 2.0, 4.0]))
        st = math.sqrt(t)
        a = hz.gaveau_kernel(x * st, y * st, u * t, t).value
        b = hz.gaveau_kernel(x, y, u, 1.0).value
        worst = max(worst, abs(a * t * t - b) / b)
    ok = abs(h0 - 1 / 16) <= ctx.tol["h00_abs"] and worst <= ctx.tol["kernel_scaling_rel"]
    return ok, f"h_1(0,0) - 1/16 = {h0 - 1 / 16:.1e}; worst scaling error {worst:.1e}", \
        {"h00": h0, "scaling": worst}


def crit_11(ctx):
    vals = {}
    ok = True
    for t in (1.0, 4.0):
        rep = hz.grad_log_identity(t)
        el = hz.elevator_norm(t)
        vals[t] = {"horizontal": rep.horizontal, "elevator": el, "mass": rep.mass}
        ok &= _rel(rep.horizontal, 2 / t) <= ctx.tol["identity_rel"]
        ok &= _rel(el, math.sqrt(2 / t)) <= ctx.tol["identity_rel"]
    s = "; ".join(f"t={t:g}: integral {v['horizontal']:.6f} (2/t), elevator {v['elevator']:.6f}"
                  for t, v in vals.items())
    return ok, s, {str(t): v for t, v in vals.items()}


def crit_12(ctx):
    rep = hz.estimate_constants(ctx.heis_degrees, ctx.upper_degree)
    mono = rep.monotone()
    margin = math.sqrt(2) - rep.Kk_ratio
    gxy = abs(rep.gX[-1] - rep.gY[-1])
    ok = (rep.K_lower >= ctx.tol["K_min"] and mono and margin > 0 and gxy <= ctx.tol["gXY_abs"])
    s = (f"K = sqrt g1(X) in [{rep.K_lower:.5f}, {rep.K_upper:.5f}] (needs lower >= 1.9), "
         f"monotone {mono}; K/kappa <= {rep.Kk_ratio:.5f}, margin to sqrt 2 {margin:.4f}; "
         f"|gX - gY| = {gxy:.1e}; unsquared g1(X) >= {rep.gX[-1]:.5f}")
    return ok, s, rep.to_dict()


def crit_13(ctx):
    rng = ctx.rng(13)
    viol = 0
    gaps = []
    for _ in range(50):
        x, y = rng.normal(size=2) * 2
        u = rng.normal() * 5
        p = hz.HeisenbergPoint(x, y, u)
        dc = hz.d_cc(p)
        dr = hz.d_riem(p, 1.0)
        gaps.append(dc - dr)
        if not (dr <= dc * (1 + 1e-12) and dc <= dr + ctx.tol["sandwich_gap"]):
            viol += 1
    return viol == 0, f"{viol} violations on 50 points; d_cc - d_Riem in [{min(gaps):.3f}, {max(gaps):.3f}]", \
        {"violations": viol, "gap_min": min(gaps), "gap_max": max(gaps)}


CRITERIA = {
    1: ("cone C(pi) radial coefficient", crit_1),
    2: ("cone C(pi) angular coefficient", crit_2),
    3: ("apex angle of C(pi)", crit_3),
    4: ("angle at infinity of C(pi)", crit_4),
    5: ("cone C(pi/2) asymptotics", crit_5),
    6: ("tangent chart", crit_6),
    7: ("scaling law", crit_7),
    8: ("chain inequality", crit_8),
    9: ("transport oracles", crit_9),
    10: ("Gaveau kernel", crit_10),
    11: ("gradient identity and elevator norm", crit_11),
    12: ("Heisenberg constants", crit_12),
    13: ("distance sandwich", crit_13),
}


def run_one(number, ctx: Context | None = None):
    ctx = ctx or Context()
    name, fn = CRITERIA[number]
    t0 = time.time()
    try:
        ok, summary, values = fn(ctx)
    except Exception as e:  # a crash is a failed criterion with diagnostics
        ok, summary, values = False, f"error: {type(e).__name__}: {e}", {}
    return CriterionResult(number, name, bool(ok), summary, values, time.time() - t0)


def run_all(ctx: Context | None = None, only=None, echo=None):
    ctx = ctx or Context()
    out = []
    for n in sorted(only or CRITERIA):
        res = run_one(n, ctx)
        if echo:
            echo(res.line())
        out.append(res)
    return out
