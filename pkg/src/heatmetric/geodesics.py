"""Length distance d_t of the warped metric

    g_t = R(r / sqrt t) dr^2 + r^2 A(r / sqrt t) dalpha^2

between cone points, by minimizing the discrete curve energy over curves
with pinned endpoints. The apex is handled combinatorially: the through-apex
path has length rho_t(r_p) + rho_t(r_q) and is always compared.

Every reported distance is the length of an explicit curve, so it is an
upper bound for the true d_t up to quadrature error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded
from scipy.optimize import minimize

from .cone import WarpedMetric, rho
from .measures import ConePoint, angular_separation, cone_distance

# 3-point Gauss-Legendre on [0, 1]
_GL_X = np.array([0.5 - math.sqrt(15) / 10, 0.5, 0.5 + math.sqrt(15) / 10])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0
BARRIER = 1e-6


@dataclass
class DiscreteCurve:
    """Samples (r_i, alpha_i), i = 0..N-1, at uniform parameters in [0, 1].
    alpha is unwrapped (it may leave the fundamental sector); the curve is
    linear in (r, alpha) between samples."""

    r: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, float)
        self.alpha = np.asarray(self.alpha, float)
        if self.r.shape != self.alpha.shape or self.r.ndim != 1 or self.r.size < 2:
            raise ValueError("curve needs matching 1-D arrays of at least two samples")
        if np.any(self.r < 0):
            raise ValueError("radii must be nonnegative")

    @property
    def N(self):
        return self.r.size

    def segment_lengths(self, metric: WarpedMetric, t=1.0):
        st = math.sqrt(t)
        dr = np.diff(self.r)
        da = np.diff(self.alpha)
        rs = self.r[:-1, None] + _GL_X[None, :] * dr[:, None]
        s = rs / st
        R = metric.coef_R(s.ravel()).reshape(s.shape)
        A = metric.coef_A(s.ravel()).reshape(s.shape)
        speed = np.sqrt(R * dr[:, None] ** 2 + rs ** 2 * A * da[:, None] ** 2)
        return speed @ _GL_W

    def speed_ratio(self, metric: WarpedMetric, t=1.0):
        seg = self.segment_lengths(metric, t)
        if seg.max() == 0:
            return 1.0
        return float(seg.max() / seg.min()) if seg.min() > 0 else math.inf

    def resample(self, n):
        s_old = np.linspace(0, 1, self.N)
        s_new = np.linspace(0, 1, n)
        return DiscreteCurve(np.interp(s_new, s_old, self.r), np.interp(s_new, s_old, self.alpha))

    def to_dict(self):
        return {"r": self.r.tolist(), "alpha": self.alpha.tolist()}


def length(curve: DiscreteCurve, metric: WarpedMetric, t=1.0):
    """g_t-length of the curve (three-point Gauss rule on each segment)."""
    return float(curve.segment_lengths(metric, t).sum())


def straight_radial(r0, r1, alpha=0.0, N=257):
    return DiscreteCurve(np.linspace(r0, r1, N), np.full(N, float(alpha)))


def arc(r, sweep, N=257):
    return DiscreteCurve(np.full(N, float(r)), np.linspace(0.0, sweep, N))


# ------------------------------------------------------------ optimizer

def _energy_and_grad(x, r0, r1, a0, a1, n_int, metric, t, scale):
    """Midpoint-rule energy (N - 1) sum_j [R dr^2 + m^2 A da^2] in scaled
    radius units, with its gradient in the interior nodes."""
    st = math.sqrt(t)
    r = np.concatenate([[r0], x[:n_int] * scale, [r1]])
    al = np.concatenate([[a0], x[n_int:], [a1]])
    n = r.size - 1
    dr = np.diff(r)
    da = np.diff(al)
    m = 0.5 * (r[:-1] + r[1:])
    R, dR, A, dA = metric.coef_with_derivatives(m / st)
    a = R
    b = m * m * A
    E = n * float(np.sum(a * dr * dr + b * da * da))
    dE_dm = n * (dR / st * dr * dr + (2 * m * A + m * m * dA / st) * da * da)
    dE_ddr = 2 * n * a * dr
    dE_dda = 2 * n * b * da
    gr = 0.5 * (dE_dm[:-1] + dE_dm[1:]) + dE_ddr[:-1] - dE_ddr[1:]
    ga = dE_dda[:-1] - dE_dda[1:]
    return E / (scale * scale), np.concatenate([gr * scale, ga]) / (scale * scale)


def _segment_terms(r, al, metric, t, hessian=True):
    """Energy E = n sum_j e_j with e_j = a(m) dr^2 + b(m) da^2, a = R,
    b = m^2 A, m the segment midpoint; also its gradient and banded Hessian
    in the interleaved node variables (r_0, alpha_0, r_1, alpha_1, ...)."""
    st = math.sqrt(t)
    n = r.size - 1
    dr = np.diff(r)
    da = np.diff(al)
    m = 0.5 * (r[:-1] + r[1:])
    R, R1, R2, A, A1, A2 = metric.coef_second_derivatives(m / st)
    R1, R2, A1, A2 = R1 / st, R2 / t, A1 / st, A2 / t
    b = m * m * A
    b1 = 2 * m * A + m * m * A1
    b2 = 2 * A + 4 * m * A1 + m * m * A2
    E = n * float(np.sum(R * dr * dr + b * da * da))
    e_m = n * (R1 * dr * dr + b1 * da * da)
    e_dr = 2 * n * R * dr
    e_da = 2 * n * b * da
    gm = np.array([0.5, 0.0, 0.5, 0.0])
    gdr = np.array([-1.0, 0.0, 1.0, 0.0])
    gda = np.array([0.0, -1.0, 0.0, 1.0])
    gloc = e_m[:, None] * gm + e_dr[:, None] * gdr + e_da[:, None] * gda
    grad = np.zeros(2 * (n + 1))
    for p in range(4):
        np.add.at(grad, 2 * np.arange(n) + p, gloc[:, p])
    if not hessian:
        return E, grad, None
    e_mm = n * (R2 * dr * dr + b2 * da * da)
    e_mdr = 2 * n * R1 * dr
    e_mda = 2 * n * b1 * da
    e_drdr = 2 * n * R
    e_dada = 2 * n * b
    H = (e_mm[:, None, None] * np.outer(gm, gm)
         + e_mdr[:, None, None] * (np.outer(gm, gdr) + np.outer(gdr, gm))
         + e_mda[:, None, None] * (np.outer(gm, gda) + np.outer(gda, gm))
         + e_drdr[:, None, None] * np.outer(gdr, gdr)
         + e_dada[:, None, None] * np.outer(gda, gda))
    size = 2 * (n + 1)
    diags = np.zeros((4, size))
    for p in range(4):
        for q in range(p, 4):
            np.add.at(diags[q - p], 2 * np.arange(n) + p, H[:, p, q])
    return E, grad, diags


def _banded_upper(diags):
    """Upper banded storage for scipy.linalg.solveh_banded."""
    size = diags.shape[1]
    ab = np.zeros((4, size))
    for d in range(4):
        ab[3 - d, d:] = diags[d, :size - d]
    return ab


def _newton(r, al, metric, t, floor, maxiter=200, rtol=1e-15):
    """Damped projected Newton on the interior nodes with a banded Hessian."""
    r, al = r.copy(), al.copy()
    E, g, D = _segment_terms(r, al, metric, t)
    lam = 0.0
    for it in range(1, maxiter + 1):
        gi = g[2:-2]
        ab = _banded_upper(D[:, 2:-2])
        scale = max(float(np.abs(ab[3]).mean()), 1e-300)
        step = None
        for _ in range(30):
            try:
                ab_try = ab.copy()
                ab_try[3] += lam * scale
                step = -solveh_banded(ab_try, gi)
                break
            except LinAlgError:
                lam = max(10 * lam, 1e-10)
        if step is None:
            return r, al, it, False
        dec = -float(gi @ step)
        if dec <= rtol * max(E, 1e-300):
            return r, al, it, True
        alpha = 1.0
        accepted = False
        while alpha > 1e-12:
            rn = r.copy()
            aln = al.copy()
            rn[1:-1] = np.maximum(r[1:-1] + alpha * step[0::2], floor)
            aln[1:-1] = al[1:-1] + alpha * step[1::2]
            En, gn, Dn = _segment_terms(rn, aln, metric, t)
            if En <= E - 1e-4 * alpha * dec:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            return r, al, it, abs(dec) <= 1e-10 * max(E, 1e-300)
        lam = lam / 10 if alpha == 1.0 else max(lam, 1e-8) * 10
        if lam < 1e-14:
            lam = 0.0
        r, al, E, g, D = rn, aln, En, gn, Dn
    return r, al, maxiter, False


def minimize_energy(curve: DiscreteCurve, metric: WarpedMetric, t=1.0, scale=None,
                    method="newton", maxiter=None):
    """Minimize the midpoint-rule curve energy over the interior nodes with
    the endpoints pinned and the barrier r >= 1e-6 * scale. method "newton"
    uses the exact banded Hessian; "lbfgs" uses L-BFGS-B with the analytic
    gradient. Returns (curve, iterations, converged)."""
    r, al = curve.r, curve.alpha
    scale = float(scale or max(r[0], r[-1], 1e-300))
    n_int = r.size - 2
    if n_int <= 0:
        return curve, 0, True
    floor = BARRIER * scale
    if method == "newton":
        rr = r.copy()
        rr[1:-1] = np.maximum(rr[1:-1], floor)
        rn, aln, it, ok = _newton(rr, al, metric, t, floor, maxiter or 200)
        return DiscreteCurve(rn, aln), it, ok
    if method != "lbfgs":
        raise ValueError("method must be 'newton' or 'lbfgs'")
    x0 = np.concatenate([np.maximum(r[1:-1], floor) / scale, al[1:-1]])
    bounds = [(BARRIER, None)] * n_int + [(None, None)] * n_int
    res = minimize(_energy_and_grad, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                   args=(r[0], r[-1], al[0], al[-1], n_int, metric, t, scale),
                   options={"maxiter": maxiter or 20000, "gtol": 1e-12, "ftol": 1e-15, "maxcor": 30})
    out = DiscreteCurve(np.concatenate([[r[0]], res.x[:n_int] * scale, [r[-1]]]),
                        np.concatenate([[al[0]], res.x[n_int:], [al[-1]]]))
    return out, int(res.nit), bool(res.success)


def chord_initializer(rp, rq, sweep, N):
    """The planar straight segment from (rp, 0) to rq e^{i sweep} written in
    polar coordinates with unwrapped angle; its g_t-length is at most its
    Euclidean length since R, A <= 1."""
    s = np.linspace(0, 1, N)
    x = (1 - s) * rp + s * rq * math.cos(sweep)
    y = s * rq * math.sin(sweep)
    r = np.hypot(x, y)
    al = np.unwrap(np.arctan2(y, x))
    al[0], al[-1] = 0.0, sweep
    # at the origin the polar angle is undefined; keep it monotone
    al = np.clip(np.maximum.accumulate(al), 0.0, sweep)
    return DiscreteCurve(r, al)


def loglinear_initializer(rp, rq, sweep, N):
    s = np.linspace(0, 1, N)
    r = np.exp((1 - s) * math.log(rp) + s * math.log(rq))
    return DiscreteCurve(r, s * sweep)


@dataclass
class GeodesicResult:
    p: ConePoint
    q: ConePoint
    t: float
    distance: float
    branch: str
    N: int
    iterations: int
    converged: bool  # optimizer status of the winning branch
    apex_length: float
    branch_lengths: dict = field(default_factory=dict)
    initializer_length: float = math.nan
    curve: DiscreteCurve | None = field(default=None, repr=False)
    speed_ratio: float = math.nan

    def to_dict(self):
        return {"p": [self.p.r, self.p.alpha], "q": [self.q.r, self.q.alpha], "t": self.t,
                "distance": self.distance, "branch": self.branch, "N": self.N,
                "iterations": self.iterations, "converged": self.converged}


def _branch(rp, rq, sweep, metric, t, N, levels, method="newton"):
    """Best curve sweeping the given angle, refined coarse to fine."""
    scale = max(rp, rq)
    best = None
    init_len = math.inf
    its = 0
    conv = True
    inits = [chord_initializer(rp, rq, sweep, levels[0])]
    if min(rp, rq) > 0:
        inits.append(loglinear_initializer(rp, rq, sweep, levels[0]))
    for c0 in inits:
        c = c0
        for lev in levels:
            c = c.resample(lev) if c.N != lev else c
            c, nit, ok = minimize_energy(c, metric, t, scale, method)
            its += nit
        L = length(c, metric, t)
        if best is None or L < best[0]:
            best = (L, c, ok)
        conv = conv and ok
    chord = chord_initializer(rp, rq, sweep, N)
    init_len = length(chord, metric, t)
    if init_len < best[0]:
        best = (init_len, chord, best[2])
    return best[0], best[1], its, best[2], init_len


def distance(p: ConePoint, q: ConePoint, metric: WarpedMetric, t=1.0, N=257, method="newton"):
    """d_t(p, q) as the shortest of the two direct branches (sweeping the
    angular separation delta or theta - delta) and the through-apex path."""
    if t <= 0:
        raise ValueError("t must be positive")
    if p.k != metric.k or q.k != metric.k:
        raise ValueError("points and metric live on different cones")
    if N < 3:
        raise ValueError("N must be at least 3")
    apex_len = rho(p.r, t, metric) + rho(q.r, t, metric)
    if p.is_apex or q.is_apex:
        return GeodesicResult(p, q, t, apex_len, "apex", N, 0, True, apex_len,
                              {"apex": apex_len}, apex_len)
    if p.r == q.r and angular_separation(p, q) == 0.0:
        return GeodesicResult(p, q, t, 0.0, "direct", N, 0, True, apex_len,
                              {"direct": 0.0}, 0.0)
    delta = angular_separation(p, q)
    theta = p.theta
    levels = [lv for lv in (17, 65) if lv < N] + [N]
    lengths = {"apex": apex_len}
    found = {}
    its = 0
    status = {"apex": True}
    init_len = math.inf
    for name, sweep in (("direct", delta), ("complement", theta - delta)):
        L, c, nit, ok, il = _branch(p.r, q.r, sweep, metric, t, N, levels, method)
        # orient the curve in the sense that takes p's angle to q's angle
        sign = 1.0 if ((q.alpha - p.alpha) % theta == delta) == (name == "direct") else -1.0
        c = DiscreteCurve(c.r, p.alpha + sign * c.alpha)
        lengths[name] = L
        found[name] = c
        its += nit
        status[name] = ok
        init_len = min(init_len, il)
    name = min(lengths, key=lengths.get)
    best_curve = found.get(name)
    ratio = best_curve.speed_ratio(metric, t) if best_curve is not None else math.nan
    return GeodesicResult(p, q, t, float(lengths[name]), name, N, its, status[name], apex_len,
                          lengths, init_len, best_curve, ratio)


def scaling_check(p: ConePoint, q: ConePoint, t, metric: WarpedMetric, N=257):
    """|d_t(p, q) - sqrt(t) d_1(p / sqrt t, q / sqrt t)| / d_t(p, q)."""
    st = math.sqrt(t)
    dt = distance(p, q, metric, t, N).distance
    d1 = distance(p.scaled(1 / st), q.scaled(1 / st), metric, 1.0, N).distance
    if dt == 0:
        return 0.0 if d1 == 0 else math.inf
    return abs(dt - st * d1) / dt


def convergence_sweep(p: ConePoint, q: ConePoint, ts, metric: WarpedMetric, N=257):
    """Rows (t, d_t, d, gap = d - d_t) along the given times."""
    d = cone_distance(p, q)
    rows = []
    for t in ts:
        dt = distance(p, q, metric, t, N).distance
        rows.append({"t": float(t), "d_t": dt, "d": d, "gap": d - dt,
                     "rel_gap": (d - dt) / d if d > 0 else 0.0})
    return rows
