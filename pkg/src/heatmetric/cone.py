"""Warped-product coefficients of the heat-kernel length metric on the cones
C(pi) = R^2 / (x -> -x)  (k = 2)  and  C(pi/2) = C / (z -> iz)  (k = 4):

    g_t = R(r / sqrt t) dr^2 + r^2 A(r / sqrt t) dalpha^2 .

R has a one-dimensional closed form; A comes from a Galerkin solve of the
continuity equation for the rotating symmetrized heat kernel. Everything is
tabulated once at t = 1; other times follow by rescaling r.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .elliptic import BasisSpec, solve_min_norm, translation_problem
from .measures import RotGaussMixture

CONE_ANGLE = {2: math.pi, 4: math.pi / 2}
# leading small-r exponents: R ~ r^2 for both cones, A ~ r^2 (k=2), r^6 (k=4)
A_EXPONENT = {2: 2, 4: 6}
SATURATION_TOL = 1e-12


def _check_k(k):
    if k not in (2, 4):
        raise ValueError("cone order k must be 2 or 4")


# ---------------------------------------------------------------- R(r)

def _radial_R2(r):
    """R(r) = 1/2 int (eta(y-r) - eta(y+r))^2 / (eta(y-r) + eta(y+r)) dy
            = int tanh(y r / 2)^2 eta(y - r) dy   (t = 1)."""
    if r == 0:
        return 0.0
    c = 1.0 / math.sqrt(4 * math.pi)

    def f(y):
        return math.tanh(0.5 * y * r) ** 2 * c * math.exp(-(y - r) ** 2 / 4)

    pts = sorted({r - 4.0, r, r + 4.0, 0.0})
    lo, hi = r - 40.0, r + 40.0
    pts = [p for p in pts if lo < p < hi]
    val, err = quad(f, lo, hi, points=pts, epsabs=0.0, epsrel=1e-12, limit=400)
    return val


def radial_R(r, k=2):
    """Radial coefficient at t = 1 (closed-form one-dimensional quadrature).
    For k = 4 the rotation by pi/4 splits the measure into a product of two
    one-dimensional two-point mixtures at +-r/sqrt2, giving R_4(r) = R_2(r/sqrt2)."""
    _check_k(k)
    if r < 0:
        raise ValueError("r must be nonnegative")
    return _radial_R2(r if k == 2 else r / math.sqrt(2.0))


def radial_R_gh(r, k=2, nodes=200):
    """Independent route: E[tanh^2(Y s / 2)], Y ~ N(s, 2), by Gauss-Hermite."""
    s = r if k == 2 else r / math.sqrt(2.0)
    z, w = hermegauss(nodes)
    y = s + math.sqrt(2.0) * z
    return float(np.dot(w, np.tanh(0.5 * y * s) ** 2) / math.sqrt(2 * math.pi))


# ---------------------------------------------------------------- A(r)

@dataclass
class CoefficientResult:
    value: float
    r: float
    k: int
    t: float
    direction: str
    degrees: list
    history: list
    family: str
    monotone: bool

    def to_dict(self):
        return {"value": self.value, "r": self.r, "k": self.k, "t": self.t,
                "direction": self.direction, "degrees": self.degrees,
                "history": self.history, "family": self.family, "monotone": self.monotone}


def auto_family(r_scaled):
    if r_scaled < 0.5:
        return "hermite"
    if r_scaled > 12.0:
        return "partition"
    return "union"


def coefficient_problem(r, k, direction="angular", t=1.0, order=48):
    """Continuity problem for moving the base point (r, 0) of the cone at unit
    speed, radially or tangentially. Each lifted Gaussian is translated."""
    _check_k(k)
    mix = RotGaussMixture((r, 0.0), t, k).mixture
    c = mix.centers
    if direction == "angular":
        vel = np.stack([-c[:, 1], c[:, 0]], axis=1) / r
    elif direction == "radial":
        vel = c / r
    else:
        raise ValueError("direction must be 'angular' or 'radial'")
    return translation_problem(mix, vel, order=order)


def _parity(direction):
    return (1, 1) if direction == "angular" else (0, 0)


def galerkin_coefficient(r, k, direction="angular", degrees=(24,), t=1.0, family=None,
                         partition_degree=6, order=48, cutoff=1e-10):
    if r <= 0:
        raise ValueError("r must be positive")
    fam = family or auto_family(r / math.sqrt(t))
    pr = coefficient_problem(r, k, direction, t, order=order)
    hist = []
    for d in degrees:
        spec = BasisSpec(2, d, scale=math.sqrt(2 * t),
                         parity=_parity(direction) if fam == "hermite" else None,
                         family=fam, partition_degree=partition_degree)
        hist.append(solve_min_norm(pr, spec, cutoff).q)
    mono = all(b >= a * (1 - 1e-12) - 1e-300 for a, b in zip(hist, hist[1:]))
    return CoefficientResult(hist[-1], r, k, t, direction, list(degrees), hist, fam, mono)


def angular_oracle(r, k):
    """Leading-order A from explicit potentials at t = 1. For k = 2 the
    potential r y1 y2 / 4 gives r^2 / 4. For k = 4 expanding the source in
    Hermite products gives the potential r^3 (y1^3 y2 - y1 y2^3) / 384, whose
    squared gradient norm is r^6 / 384."""
    return r * r / 4.0 if k == 2 else r ** 6 / 384.0


def oracle_potential(y, r, k, scale=1.0):
    """The leading-order potentials, up to the multiplicative constant
    (scale) so the shape can be compared separately from the constant."""
    y1, y2 = y[:, 0], y[:, 1]
    if k == 2:
        return scale * r * y1 * y2 / 4.0
    return scale * r ** 3 * (y1 ** 3 * y2 - y1 * y2 ** 3) / 384.0


def angular_A(r, k=2, degree=24, t=1.0, degrees=None, family=None):
    """Angular coefficient A at time t for the base radius r (Galerkin lower
    bound; the history over degrees is the refinement certificate)."""
    degs = tuple(degrees) if degrees is not None else (degree,)
    return galerkin_coefficient(r, k, "angular", degs, t, family)


# ------------------------------------------------------------ the metric

@dataclass
class WarpedMetric:
    """Tabulated (R, A) at t = 1 on log-spaced radii with monotone cubic
    interpolation of log R and log A against log r."""

    k: int
    radii: np.ndarray
    R: np.ndarray
    A: np.ndarray
    degree: int = 24
    _logR: PchipInterpolator = field(init=False, repr=False)
    _logA: PchipInterpolator = field(init=False, repr=False)
    _rho_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_k(self.k)
        self.radii = np.asarray(self.radii, float)
        self.R = np.asarray(self.R, float)
        self.A = np.asarray(self.A, float)
        if np.any(self.R <= 0) or np.any(self.A <= 0):
            raise ValueError("coefficients must be positive")
        lr = np.log(self.radii)
        self._logR = PchipInterpolator(lr, np.log(self.R))
        self._logA = PchipInterpolator(lr, np.log(self.A))
        self._dlogR = self._logR.derivative()
        self._dlogA = self._logA.derivative()
        self._d2logR = self._logR.derivative(2)
        self._d2logA = self._logA.derivative(2)
        self.saturated = (abs(1 - self.R[-1]) < SATURATION_TOL and abs(1 - self.A[-1]) < SATURATION_TOL)
        rho = [math.sqrt(self.R[0]) * self.radii[0] / 2.0]
        for a, b in zip(self.radii[:-1], self.radii[1:]):
            rho.append(rho[-1] + quad(lambda s: math.sqrt(self.coef_R(s)), a, b, epsrel=1e-13, epsabs=0)[0])
        self._rho_nodes = np.array(rho)

    @property
    def theta(self):
        return CONE_ANGLE[self.k]

    @property
    def rmin(self):
        return float(self.radii[0])

    @property
    def rmax(self):
        return float(self.radii[-1])

    def _eval(self, s, which, second=False):
        """Value and first derivative in s (and the second derivative when
        asked). Below rmin the leading power law continues the table; above
        rmax the saturated value 1 is used, and only if the table saturated."""
        s = np.asarray(s, float)
        lo = s < self.rmin
        hi = s > self.rmax
        mid = ~(lo | hi)
        if np.any(hi) and not self.saturated:
            raise ValueError(f"radius beyond tabulated range {self.rmax}")
        interp = self._logR if which == "R" else self._logA
        dinterp = self._dlogR if which == "R" else self._dlogA
        expo = 2 if which == "R" else A_EXPONENT[self.k]
        v0 = (self.R if which == "R" else self.A)[0]
        val = np.zeros_like(s)
        der = np.zeros_like(s)
        sec = np.zeros_like(s)
        if np.any(mid):
            sm = s[mid]
            ls = np.log(sm)
            val[mid] = np.exp(interp(ls))
            f1 = dinterp(ls)
            der[mid] = val[mid] * f1 / sm
            if second:
                f2 = (self._d2logR if which == "R" else self._d2logA)(ls)
                sec[mid] = val[mid] * (f1 * f1 + f2 - f1) / (sm * sm)
        if np.any(lo):
            x = s[lo] / self.rmin
            val[lo] = v0 * x ** expo
            der[lo] = v0 * expo * x ** (expo - 1) / self.rmin
            sec[lo] = v0 * expo * (expo - 1) * x ** (expo - 2) / self.rmin ** 2
        val[hi] = 1.0
        if second:
            return val, der, sec
        return val, der

    def coef_R(self, s):
        v, _ = self._eval(np.atleast_1d(s), "R")
        return v if np.ndim(s) else float(v[0])

    def coef_A(self, s):
        v, _ = self._eval(np.atleast_1d(s), "A")
        return v if np.ndim(s) else float(v[0])

    def coef_with_derivatives(self, s):
        R, dR = self._eval(s, "R")
        A, dA = self._eval(s, "A")
        return R, dR, A, dA

    def coef_second_derivatives(self, s):
        """(R, R', R'', A, A', A'') in the scaled radius s."""
        return self._eval(s, "R", True) + self._eval(s, "A", True)

    # ------------------------------------------------------- radial data
    def rho1(self, r):
        """rho at t = 1: integral of sqrt(R) from the apex."""
        if r < 0:
            raise ValueError("r must be nonnegative")
        if r <= self.rmin:
            return math.sqrt(self.R[0]) * r * r / (2 * self.rmin)
        if r > self.rmax:
            if not self.saturated:
                raise ValueError(f"radius beyond tabulated range {self.rmax}")
            return float(self._rho_nodes[-1] + (r - self.rmax))
        i = int(np.searchsorted(self.radii, r) - 1)
        i = max(0, min(i, self.radii.size - 2))
        extra = quad(lambda s: math.sqrt(self.coef_R(s)), self.radii[i], r, epsrel=1e-13, epsabs=0)[0]
        return float(self._rho_nodes[i] + extra)


def rho(r, t, metric: WarpedMetric):
    """d_t(apex, (r, .)) = int_0^r sqrt(R(s / sqrt t)) ds = sqrt(t) rho_1(r / sqrt t)."""
    st = math.sqrt(t)
    return st * metric.rho1(r / st)


def rho_inverse(rbar, t, metric: WarpedMetric):
    if rbar == 0:
        return 0.0
    hi = 1.0
    while rho(hi, t, metric) < rbar:
        hi *= 2.0
    return brentq(lambda r: rho(r, t, metric) - rbar, 0.0, hi, xtol=1e-15, rtol=1e-13)


def circumference(r, t, metric: WarpedMetric):
    """l_t(r) = theta r sqrt(A(r / sqrt t)) with theta = pi (k=2), pi/2 (k=4)."""
    return metric.theta * r * math.sqrt(metric.coef_A(r / math.sqrt(t)))


def log_radii(rmin=1e-3, rmax=50.0, n=64):
    if n < 2 or not (0 < rmin < rmax):
        raise ValueError("empty or invalid radial grid")
    return np.geomspace(rmin, rmax, n)


@lru_cache(maxsize=16)
def _tabulate_cached(k, rmin, rmax, n, degree):
    radii = log_radii(rmin, rmax, n)
    R = np.array([radial_R(r, k) for r in radii])
    A = np.array([galerkin_coefficient(r, k, "angular", (degree,)).value for r in radii])
    return radii, R, A


def tabulate(k, rmin=1e-3, rmax=50.0, n=64, degree=24):
    radii, R, A = _tabulate_cached(k, float(rmin), float(rmax), int(n), int(degree))
    return WarpedMetric(k, radii.copy(), R.copy(), A.copy(), degree)


# ------------------------------------------------------------ angles

@dataclass
class AngleReport:
    k: int
    t: float
    radii: list
    rho: list
    ell: list
    ratio: list
    limit: float
    fit_residual: float
    slope: float

    def to_dict(self):
        return {"k": self.k, "t": self.t, "radii": self.radii, "rho": self.rho, "ell": self.ell,
                "ratio": self.ratio, "limit": self.limit, "fit_residual": self.fit_residual,
                "slope": self.slope}


def ratio_at(r, t, metric: WarpedMetric):
    return circumference(r, t, metric) / rho(r, t, metric)


def apex_angle(k, t=1.0, metric=None, radii=None, n=8, tol=1e-2):
    """Extrapolate l_t / rho_t to r -> 0 with the linear model L + a r fitted
    on n log-spaced radii spanning [1e-3, 1e-2] sqrt(t)."""
    metric = metric or tabulate(k)
    st = math.sqrt(t)
    radii = np.geomspace(1e-3, 1e-2, n) * st if radii is None else np.asarray(radii, float)
    rh = np.array([rho(r, t, metric) for r in radii])
    el = np.array([circumference(r, t, metric) for r in radii])
    ra = el / rh
    Amat = np.stack([np.ones_like(radii), radii], axis=1)
    coef, *_ = np.linalg.lstsq(Amat, ra, rcond=None)
    resid = float(np.max(np.abs(Amat @ coef - ra)))
    return AngleReport(k, t, radii.tolist(), rh.tolist(), el.tolist(), ra.tolist(),
                       float(coef[0]), resid, float(coef[1]))


def infinity_ratio(r=50.0, t=1.0, metric=None):
    metric = metric or tabulate(2)
    return ratio_at(r, t, metric)


# ------------------------------------------------------- tangent chart

@dataclass
class TangentChart:
    k: int
    rbar: np.ndarray
    Abar: np.ndarray

    def sqrt_Abar_at(self, rb):
        return math.sqrt(float(np.exp(np.interp(math.log(rb), np.log(self.rbar), np.log(self.Abar)))))


def tangent_chart(metric: WarpedMetric, radii=None):
    """Coordinates rbar = rho(r) with Rbar = 1 and
    Abar(rbar) rbar^2 = A(r) r^2; rho must be strictly increasing."""
    radii = metric.radii if radii is None else np.asarray(radii, float)
    rb = np.array([metric.rho1(r) for r in radii])
    if np.any(np.diff(rb) <= 0):
        raise ValueError("rho is not strictly increasing on the tabulation")
    Ab = metric.coef_A(radii) * radii ** 2 / rb ** 2
    return TangentChart(metric.k, rb, Ab)


def sqrt_Abar(rbar, metric: WarpedMetric):
    r = rho_inverse(rbar, 1.0, metric)
    return math.sqrt(metric.coef_A(r)) * r / rbar


# ------------------------------------------------------------- output

def metric_rows(metric: WarpedMetric, t=1.0, radii=None):
    radii = metric.radii * math.sqrt(t) if radii is None else radii
    rows = []
    for r in radii:
        rh = rho(r, t, metric)
        el = circumference(r, t, metric)
        s = r / math.sqrt(t)
        rows.append((float(r), metric.coef_R(s), metric.coef_A(s), rh, el, el / rh))
    return rows


def metric_csv(metric: WarpedMetric, t=1.0, radii=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "R", "A", "rho", "ell", "ratio"])
    for row in metric_rows(metric, t, radii):
        w.writerow([f"{v:.12e}" for v in row])
    return buf.getvalue()
