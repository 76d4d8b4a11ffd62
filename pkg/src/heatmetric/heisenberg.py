"""The first Heisenberg group with the law

    (z, u) . (z', u') = (z + z', u + u' - Im(z conj(z')) / 2),

its heat kernel, the Carnot-Caratheodory and left-invariant Riemannian
distances, and numerical bounds for the constants K, kappa of the heat
metric d_t = K d_Riem(kappa sqrt t).

Left-invariant frame: X = d_x - (y/2) d_u, Y = d_y + (x/2) d_u, U = d_u, so
[X, Y] = U. Right-invariant: Xh = d_x + (y/2) d_u, Yh = d_y - (x/2) d_u.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad, solve_ivp
from scipy.linalg import qr
from scipy.optimize import brentq, minimize_scalar

# ------------------------------------------------------------------ group


@dataclass(frozen=True)
class HeisenbergPoint:
    x: float
    y: float
    u: float

    @property
    def z(self):
        return complex(self.x, self.y)

    @property
    def rho(self):
        return math.hypot(self.x, self.y)

    def __mul__(self, o: "HeisenbergPoint"):
        return HeisenbergPoint(self.x + o.x, self.y + o.y,
                               self.u + o.u + 0.5 * (self.x * o.y - o.x * self.y))

    def inverse(self):
        return HeisenbergPoint(-self.x, -self.y, -self.u)

    def dilate(self, lam):
        return HeisenbergPoint(lam * self.x, lam * self.y, lam * lam * self.u)

    def as_tuple(self):
        return (self.x, self.y, self.u)

    @classmethod
    def identity(cls):
        return cls(0.0, 0.0, 0.0)


@dataclass(frozen=True)
class FrameCoefficients:
    """Tangent vector aX + bY + cU in the left-invariant frame."""

    a: float
    b: float
    c: float

    def riem_norm(self, eps):
        if eps <= 0:
            raise ValueError("eps must be positive")
        return math.sqrt(self.a ** 2 + self.b ** 2 + (self.c / eps) ** 2)

    def cc_norm(self):
        return math.hypot(self.a, self.b) if self.c == 0 else math.inf


def frame_coefficients(p: HeisenbergPoint, velocity):
    """Coordinates of the velocity (dx, dy, du) at p in the frame (X, Y, U)."""
    dx, dy, du = velocity
    return FrameCoefficients(dx, dy, du + 0.5 * (p.y * dx - p.x * dy))


# ----------------------------------------------------------------- kernel

def lam_coth(lam):
    """lambda coth(lambda), with the series near 0 (complex arguments allowed)."""
    lam = np.asarray(lam)
    small = np.abs(lam) < 1e-4
    safe = np.where(small, 1.0, lam)
    out = safe / np.tanh(safe)
    l2 = lam * lam
    return np.where(small, 1 + l2 / 3 - l2 * l2 / 45, out)


def lam_csch(lam):
    """lambda / sinh(lambda), with the series near 0."""
    lam = np.asarray(lam)
    small = np.abs(lam) < 1e-4
    safe = np.where(small, 1.0, lam)
    # 2 lam e^{-lam} / (1 - e^{-2 lam}) avoids overflow for large Re(lam) >= 0
    big = np.abs(np.real(safe)) > 20
    sgn = np.where(np.real(safe) < 0, -1.0, 1.0)
    e = np.exp(-sgn * safe)
    out = np.where(big, 2 * sgn * safe * e / (1 - e * e), safe / np.sinh(np.where(big, 1.0, safe)))
    l2 = lam * lam
    return np.where(small, 1 - l2 / 6 + 7 * l2 * l2 / 360, out)


def _mu(theta):
    """(2 theta - sin 2 theta) / (2 sin^2 theta), increasing from 0 to inf on (0, pi)."""
    return (2 * theta - math.sin(2 * theta)) / (2 * math.sin(theta) ** 2)


CONTOUR_CAP = math.pi - 0.5


def contour_shift(a, u):
    """Height c of the horizontal integration line Im(lambda) = c: the saddle
    angle theta solving |u| = (a / 4) mu(theta), capped below the pole at i pi."""
    u = abs(u)
    if u == 0:
        return 0.0
    if a == 0:
        return CONTOUR_CAP
    target = 4 * u / a
    if _mu(CONTOUR_CAP) <= target:
        return CONTOUR_CAP
    return brentq(lambda th: _mu(th) - target, 1e-12, CONTOUR_CAP, xtol=1e-12)


def _integrand(s, a, u, t, c):
    """G(s + ic) = exp((lam/t)(iu - a coth(lam)/4)) lam / sinh(lam)
    together with lam coth lam."""
    lam = s + 1j * c
    lc = lam_coth(lam)
    return np.exp(1j * lam * u / t - a * lc / (4 * t)) * lam_csch(lam), lam, lc


@dataclass
class KernelEval:
    x: float
    y: float
    u: float
    t: float
    value: float
    X_log: float
    Y_log: float
    U_log: float
    flagged: bool = False
    abserr: float = 0.0

    @property
    def point(self):
        return HeisenbergPoint(self.x, self.y, self.u)


def _prefactor(t):
    return 2.0 / (4 * math.pi * t) ** 2


def gaveau_kernel(x, y, u, t=1.0, rtol=1e-10):
    """Heat kernel h_t(z, u) = 2/(4 pi t)^2 int exp((lam/t)(iu - |z|^2 coth(lam)/4)) lam/sinh(lam) dlam
    with its left-invariant log-derivatives, by adaptive quadrature along the
    shifted line Im(lam) = c (the integrand is analytic for |Im lam| < pi and
    G(-conj lam) = conj G(lam), so the integral is 2 Re int_0^inf)."""
    if t <= 0:
        raise ValueError("t must be positive")
    a = x * x + y * y
    sgn = 1.0 if u >= 0 else -1.0
    au = abs(u)
    c = contour_shift(a / t, au / t)

    S = 50.0  # |G| < 60 e^{-50} beyond, negligible at any relative level of interest
    scale = quad(lambda s_: abs(complex(_integrand(s_, a, au, t, c)[0])), 0, S, limit=400)[0]

    def part(kind):
        def f(s):
            g, lam, lc = _integrand(s, a, au, t, c)
            if kind == "a":
                g = g * (-lc / (4 * t))
            elif kind == "u":
                g = g * (1j * lam / t)
            return float(np.real(g))
        pts = np.linspace(0, S, 26)[1:-1]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            v, e = quad(f, 0.0, S, points=pts, epsabs=1e-15 * scale, epsrel=rtol, limit=2000)
        return v, e

    pref = 2 * _prefactor(t)
    h, eh = part("h")
    ha, ea = part("a")
    hu, eu = part("u")
    h, ha, hu = pref * h, pref * ha, sgn * pref * hu
    flagged = not (h > 0) or eh * pref > 1e-8 * abs(h)
    if flagged:
        warnings.warn(f"kernel quadrature unreliable at ({x}, {y}, {u}, t={t}); value withheld")
        return KernelEval(x, y, u, t, math.nan, math.nan, math.nan, math.nan, True, pref * eh)
    hx, hy = 2 * x * ha, 2 * y * ha
    return KernelEval(x, y, u, t, h, (hx - 0.5 * y * hu) / h, (hy + 0.5 * x * hu) / h, hu / h,
                      False, pref * eh)


def kernel_cosine(x, y, u, t=1.0):
    """Cross-check route: the even real form
    2/(4 pi t)^2 2 int_0^inf cos(lam u / t) exp(-|z|^2 lam coth(lam) / (4t)) lam/sinh(lam) dlam,
    using the Fourier-weighted quadrature for the oscillation."""
    a = x * x + y * y

    def f(lam):
        return float(np.exp(-a * lam_coth(lam) / (4 * t)) * lam_csch(lam))
    w = abs(u) / t
    if w < 1.0:
        # slow oscillation: the Fourier-weighted rule needs cycles of length
        # pi / w, so integrate directly; the integrand is below 1e-23 past 60
        v = quad(lambda lam: f(lam) * math.cos(w * lam), 0, 60, epsabs=0, epsrel=1e-12, limit=400)[0]
    else:
        v = quad(f, 0, np.inf, weight="cos", wvar=w, limlst=200)[0]
    return 2 * _prefactor(t) * v


def kernel_vertical(u, t=1.0):
    """Closed form on the center: h_t(0, u) = sech^2(pi u / 2t) / (16 t^2)."""
    return 1.0 / (16 * t * t * np.cosh(np.pi * np.asarray(u) / (2 * t)) ** 2)


def _lam_panels(L=40.0, panels=80, n=16):
    x, w = leggauss(n)
    edges = np.linspace(0, L, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    return (a + (b - a) * (x + 1) / 2).ravel(), ((b - a) / 2 * w).ravel()


def kernel_tables(a, u, t=1.0, second=False, chunk=1024):
    """Vectorized kernel and derivatives in (a = |z|^2, u) at paired arrays,
    by fixed Gauss-Legendre panels on the shifted line. Returns a dict with
    h, h_a, h_u and, if second, h_aa, h_au, h_uu."""
    a = np.asarray(a, float).ravel()
    u = np.asarray(u, float).ravel()
    s, ws = _lam_panels()
    sgn = np.where(u >= 0, 1.0, -1.0)
    au = np.abs(u)
    c = np.array([contour_shift(ai / t, ui / t) for ai, ui in zip(a, au)])
    keys = ["h", "h_a", "h_u"] + (["h_aa", "h_au", "h_uu"] if second else [])
    out = {k: np.empty(a.size) for k in keys}
    pref = 2 * _prefactor(t)
    for i0 in range(0, a.size, chunk):
        sl = slice(i0, i0 + chunk)
        lam = s[None, :] + 1j * c[sl, None]
        lc = lam_coth(lam)
        g = np.exp(1j * lam * au[sl, None] / t - a[sl, None] * lc / (4 * t)) * lam_csch(lam) * ws
        ma = -lc / (4 * t)
        mu = 1j * lam / t
        out["h"][sl] = pref * g.sum(1).real
        out["h_a"][sl] = pref * (g * ma).sum(1).real
        out["h_u"][sl] = sgn[sl] * pref * (g * mu).sum(1).real
        if second:
            out["h_aa"][sl] = pref * (g * ma * ma).sum(1).real
            out["h_au"][sl] = sgn[sl] * pref * (g * ma * mu).sum(1).real
            out["h_uu"][sl] = pref * (g * mu * mu).sum(1).real
    return out


# ------------------------------------------------------------------ grids

@dataclass
class HeisGrid:
    """Tensor grid: Gauss-Hermite in x and y (scale sqrt(2t)), trapezoid in
    u with step u_step * t on |u| <= u_max * t. w are Lebesgue weights."""

    t: float
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    w: np.ndarray
    shape: tuple

    @property
    def size(self):
        return self.w.size


def build_heis_grid(t=1.0, nxy=40, u_max=24.0, u_step=0.25):
    if t <= 0:
        raise ValueError("t must be positive")
    xi, wi = hermegauss(nxy)
    xs = math.sqrt(2 * t) * xi
    wx = wi * math.sqrt(2 * t) * np.exp(xi ** 2 / 2)
    nu = int(round(u_max / u_step))
    us = np.arange(-nu, nu + 1) * u_step * t
    wu = np.full(us.size, u_step * t)
    X, Y, Uu = np.meshgrid(xs, xs, us, indexing="ij")
    W = wx[:, None, None] * wx[None, :, None] * wu[None, None, :]
    return HeisGrid(t, X.ravel(), Y.ravel(), Uu.ravel(), W.ravel(), X.shape)


@dataclass
class KernelField:
    """Kernel and its frame derivatives at the grid nodes."""

    grid: HeisGrid
    h: np.ndarray
    hx: np.ndarray
    hy: np.ndarray
    hu: np.ndarray
    second: dict = field(default_factory=dict)

    @property
    def Xh(self):
        return self.hx - 0.5 * self.grid.y * self.hu

    @property
    def Yh(self):
        return self.hy + 0.5 * self.grid.x * self.hu

    @property
    def Xh_right(self):
        return self.hx + 0.5 * self.grid.y * self.hu

    @property
    def Yh_right(self):
        return self.hy - 0.5 * self.grid.x * self.hu

    def tail_ratio(self):
        """Largest kernel value on the boundary of the box over the peak."""
        H = self.h.reshape(self.grid.shape)
        edge = max(np.abs(H[[0, -1]]).max(), np.abs(H[:, [0, -1]]).max(), np.abs(H[:, :, [0, -1]]).max())
        return float(edge / H.max())


def kernel_field(grid: HeisGrid, second=False):
    t = grid.t
    a = grid.x ** 2 + grid.y ** 2
    key = np.round(a / t, 12) + 1j * np.round(np.abs(grid.u) / t, 12)
    uniq, inv = np.unique(key, return_inverse=True)
    tab = kernel_tables(uniq.real * t, uniq.imag * t, t, second)
    sgn = np.where(grid.u >= 0, 1.0, -1.0)
    h = tab["h"][inv]
    ha = tab["h_a"][inv]
    hu = sgn * tab["h_u"][inv]
    x, y = grid.x, grid.y
    sec = {}
    if second:
        haa, hau, huu = tab["h_aa"][inv], sgn * tab["h_au"][inv], tab["h_uu"][inv]
        sec = {"xx": 2 * ha + 4 * x * x * haa, "yy": 2 * ha + 4 * y * y * haa,
               "xy": 4 * x * y * haa, "xu": 2 * x * hau, "yu": 2 * y * hau, "uu": huu}
    return KernelField(grid, h, 2 * x * ha, 2 * y * ha, hu, sec)


@lru_cache(maxsize=8)
def _cached_field(t, nxy, u_max, u_step, second):
    return kernel_field(build_heis_grid(t, nxy, u_max, u_step), second)


def default_field(t=1.0, second=False):
    return _cached_field(float(t), 40, 24.0, 0.25, bool(second))


# ------------------------------------------------------------- identities

@dataclass
class IdentityReport:
    t: float
    mass: float
    horizontal: float
    horizontal_right: float
    vertical: float
    tail: float

    def to_dict(self):
        return self.__dict__.copy()


def grad_log_identity(t=1.0, kf: KernelField | None = None):
    """int (X log h)^2 + (Y log h)^2 h dL (expected 2/t), its right-invariant
    analogue, and int (U log h)^2 h dL."""
    kf = kf or default_field(t)
    w, h = kf.grid.w, kf.h
    ok = h > 0
    hor = float(np.sum(w[ok] * (kf.Xh[ok] ** 2 + kf.Yh[ok] ** 2) / h[ok]))
    hor_r = float(np.sum(w[ok] * (kf.Xh_right[ok] ** 2 + kf.Yh_right[ok] ** 2) / h[ok]))
    ver = float(np.sum(w[ok] * kf.hu[ok] ** 2 / h[ok]))
    tail = kf.tail_ratio()
    if tail > 1e-10:
        warnings.warn(f"kernel not resolved by the grid: boundary/peak = {tail:.2e}")
    return IdentityReport(kf.grid.t, float(np.sum(w * h)), hor, hor_r, ver, tail)


def elevator_norm(t=1.0, kf: KernelField | None = None):
    """L^2(h) norm of V = (Y log h) X - (X log h) Y, which moves the kernel
    vertically: div(h V) = X Y h - Y X h = U h."""
    kf = kf or default_field(t)
    ok = kf.h > 0
    w = kf.grid.w[ok]
    return math.sqrt(float(np.sum(w * (kf.Yh[ok] ** 2 + kf.Xh[ok] ** 2) / kf.h[ok])))


def _monomial_derivs(x, y, u, a, b, c):
    def pw(v, n):
        return v ** n if n >= 0 else np.zeros_like(v)
    f = pw(x, a) * pw(y, b) * pw(u, c)
    fx = a * pw(x, a - 1) * pw(y, b) * pw(u, c)
    fy = b * pw(x, a) * pw(y, b - 1) * pw(u, c)
    fu = c * pw(x, a) * pw(y, b) * pw(u, c - 1)
    return f, fx, fy, fu


def elevator_residual(t=1.0, degree=4, kf: KernelField | None = None):
    """max over monomial test functions f of
    |int (U f) h - int (Xf V_X + Yf V_Y) h| / ||grad_H f||_{L^2(h)}, the weak
    continuity equation for d/ds rho = -U rho carried by V."""
    kf = kf or default_field(t)
    g = kf.grid
    xs, ys, us = g.x / math.sqrt(t), g.y / math.sqrt(t), g.u / t
    w = g.w
    worst = 0.0
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            for c in range(degree + 1 - a - b):
                if a + b + c == 0:
                    continue
                _, fx, fy, fu = _monomial_derivs(xs, ys, us, a, b, c)
                fx, fy, fu = fx / math.sqrt(t), fy / math.sqrt(t), fu / t
                Xf = fx - 0.5 * g.y * fu
                Yf = fy + 0.5 * g.x * fu
                lhs = np.sum(w * fu * kf.h)
                rhs = np.sum(w * (Xf * kf.Yh - Yf * kf.Xh))
                nrm = math.sqrt(np.sum(w * (Xf ** 2 + Yf ** 2) * kf.h))
                if nrm > 0:
                    worst = max(worst, abs(lhs - rhs) / nrm)
    return float(worst)


# -------------------------------------------------------------- distances

def _cc_mu(phi):
    """u / rho^2 along the cc geodesic with angle parameter phi in (0, pi)."""
    if phi < 1e-4:
        return phi / 6 + phi ** 3 / 90
    return (2 * phi - math.sin(2 * phi)) / (8 * math.sin(phi) ** 2)


def d_cc(p: HeisenbergPoint):
    """Carnot-Caratheodory distance from the origin. The horizontal
    projection of a geodesic is a circular arc; with rho = |z| the angle
    parameter phi solves |u| / rho^2 = (2 phi - sin 2 phi) / (8 sin^2 phi)
    and the length is rho phi / sin(phi)."""
    rho = p.rho
    u = abs(p.u)
    if u == 0:
        return rho
    rr = rho * rho
    target = u / rr if rr > 1e-300 else math.inf
    if not math.isfinite(target):
        return 2 * math.sqrt(math.pi * u)
    if target <= _cc_mu(math.pi / 2):
        phi = brentq(lambda f: _cc_mu(f) - target, 0.0, math.pi / 2, xtol=1e-300, rtol=1e-15, maxiter=500)
        return rho * phi / math.sin(phi)
    # near phi = pi work with e = pi - phi, so that sin(phi) = sin(e) keeps
    # full relative precision when |u| >> rho^2
    e0 = math.sqrt(math.pi / (4 * target))
    e = brentq(lambda e: _cc_mu_comp(e) - target, min(0.5 * e0, math.pi / 2), math.pi / 2,
               xtol=1e-300, rtol=1e-15, maxiter=500)
    return rho * (math.pi - e) / math.sin(e)


def _cc_mu_comp(e):
    """_cc_mu(pi - e)."""
    return (2 * math.pi - 2 * e + math.sin(2 * e)) / (8 * math.sin(e) ** 2)


def cc_envelope(points):
    """Best constants with c (|z| + |u|^(1/2)) <= d_cc <= C (|z| + |u|^(1/2))
    on the sample."""
    ratios = [d_cc(p) / (p.rho + math.sqrt(abs(p.u))) for p in points if p.rho + abs(p.u) > 0]
    return min(ratios), max(ratios)


@dataclass
class RiemResult:
    distance: float
    theta: float
    winding: int
    straight_cap: float
    flagged: bool = False


def _riem_u(theta, rho, eps):
    """Vertical displacement of the unit-time geodesic whose horizontal
    velocity turns by theta and whose chord has length rho."""
    if abs(theta) < 1e-6:
        # (theta - sin theta) / (8 sin^2(theta/2)) ~ theta / 12
        return rho * rho * theta / 12 + eps * eps * theta
    return rho * rho * (theta - math.sin(theta)) / (8 * math.sin(theta / 2) ** 2) + eps * eps * theta


def _riem_len(theta, rho, eps):
    if abs(theta) < 1e-8:
        return math.sqrt(rho * rho + eps * eps * theta * theta)
    s = math.sin(theta / 2)
    return math.sqrt(rho * rho * theta * theta / (4 * s * s) + eps * eps * theta * theta)


def riem_geodesic(p: HeisenbergPoint, eps):
    """Left-invariant Riemannian distance for the norm a^2 + b^2 + (c/eps)^2
    from the origin to p, by shooting over the turning angle theta (the
    vertical covector) and enumerating winding branches theta in
    (2 pi m, 2 pi (m + 1)) while their length lower bound
    2 pi m sqrt(rho^2 / 4 + eps^2) can still win."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    rho, u = p.rho, abs(p.u)
    cap = math.hypot(rho, u / eps)
    if u == 0:
        return RiemResult(rho, 0.0, 0, cap)
    if rho * rho <= 1e-28 * u:
        # vertical points; a horizontal offset this small changes the
        # distance by O(rho), below round-off
        best, th, m_best = u / eps, u / (eps * eps), 0
        m_max = int(u / (2 * math.pi * eps * eps))
        for m in {1, m_max} - {0}:
            v = 4 * math.pi * m * u - 4 * math.pi ** 2 * m * m * eps * eps
            if v >= 0 and math.sqrt(v) < best:
                best, th, m_best = math.sqrt(v), 2 * math.pi * m, m
        return RiemResult(min(best, cap), math.copysign(th, p.u), m_best, cap)
    hi = 2 * math.pi * (1 - 1e-15)
    th0 = brentq(lambda th: _riem_u(th, rho, eps) - u, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    best, th_best, m_best = _riem_len(th0, rho, eps), th0, 0
    m = 1
    while 2 * math.pi * m * math.sqrt(rho * rho / 4 + eps * eps) < best:
        lo, hi = 2 * math.pi * m, 2 * math.pi * (m + 1)
        res = minimize_scalar(lambda th: _riem_u(th, rho, eps), bounds=(lo + 1e-9, hi - 1e-9),
                              method="bounded", options={"xatol": 1e-12})
        if res.fun < u:
            for a_, b_ in ((lo + 1e-15 * hi, res.x), (res.x, hi * (1 - 1e-16))):
                try:
                    th = brentq(lambda th: _riem_u(th, rho, eps) - u, a_, b_, xtol=1e-14)
                except ValueError:
                    continue
                L = _riem_len(th, rho, eps)
                if L < best:
                    best, th_best, m_best = L, th, m
        m += 1
    sgn = 1.0 if p.u >= 0 else -1.0
    return RiemResult(min(best, cap), sgn * th_best, m_best, cap, best > cap * (1 + 1e-12))


def d_riem(p: HeisenbergPoint, eps):
    return riem_geodesic(p, eps).distance


def shoot(p_target: HeisenbergPoint, theta, eps, rtol=1e-11):
    """Integrate the left-invariant geodesic equations for unit time with
    the covector fixed by (rho, theta): horizontal velocity of speed
    rho theta / (2 sin(theta/2)) turning at rate theta, vertical momentum
    theta. Returns the endpoint; an independent check of the closed form."""
    rho = p_target.rho
    if abs(theta) < 1e-12:
        v = rho
    else:
        v = rho * theta / (2 * math.sin(theta / 2))
    beta = math.atan2(p_target.y, p_target.x) - theta / 2
    pu = theta

    def rhs(_, s):
        x, y, u, hX, hY = s
        return [hX, hY, -0.5 * y * hX + 0.5 * x * hY + eps * eps * pu, -pu * hY, pu * hX]

    sol = solve_ivp(rhs, (0, 1), [0, 0, 0, v * math.cos(beta), v * math.sin(beta)],
                    method="DOP853", rtol=rtol, atol=1e-13)
    x, y, u = sol.y[:3, -1]
    return HeisenbergPoint(float(x), float(y), float(u))


def dt_distance(p: HeisenbergPoint, q: HeisenbergPoint, t, K, kappa):
    """Heat metric distance modelled as K d_Riem(kappa sqrt t)(p^-1 q)."""
    if t <= 0:
        raise ValueError("t must be positive")
    return K * d_riem(p.inverse() * q, kappa * math.sqrt(t))


# ----------------------------------------------------- exact moment route

import flint  # exact rationals for the moment recursion


@lru_cache(maxsize=None)
def heat_moment(a, b, c):
    """E[x^a y^b u^c] under h_1 dL, exactly, from the generator recursion
    E[m] = (2 / w) E[(X^2 + Y^2) m] with w = a + b + 2c the homogeneous degree."""
    w = a + b + 2 * c
    if w == 0:
        return flint.fmpq(1)
    if (a + b) % 2 == 1:
        return flint.fmpq(0)
    s = flint.fmpq(0)
    if a >= 2:
        s += a * (a - 1) * heat_moment(a - 2, b, c)
    if b >= 2:
        s += b * (b - 1) * heat_moment(a, b - 2, c)
    if b >= 1 and c >= 1:
        s += b * c * heat_moment(a + 1, b - 1, c - 1)
    if a >= 1 and c >= 1:
        s -= a * c * heat_moment(a - 1, b + 1, c - 1)
    if c >= 2:
        s += flint.fmpq(c * (c - 1), 4) * (heat_moment(a + 2, b, c - 2) + heat_moment(a, b + 2, c - 2))
    return s * flint.fmpq(2, w)


def _fill_moments(limit):
    # warm the cache bottom-up so the recursion stays shallow
    for w in range(0, limit + 1):
        for c in range(0, w // 2 + 1):
            for a in range(0, w - 2 * c + 1):
                heat_moment(a, w - 2 * c - a, c)


def _frame_terms(m):
    """X m, Y m and the right-invariant derivative as lists of (coef, monomial)."""
    a, b, c = m
    X, Y, Xr, Yr = [], [], [], []
    if a:
        X.append((flint.fmpq(a), (a - 1, b, c)))
        Xr.append((flint.fmpq(a), (a - 1, b, c)))
    if c:
        X.append((flint.fmpq(-c, 2), (a, b + 1, c - 1)))
        Xr.append((flint.fmpq(c, 2), (a, b + 1, c - 1)))
    if b:
        Y.append((flint.fmpq(b), (a, b - 1, c)))
        Yr.append((flint.fmpq(b), (a, b - 1, c)))
    if c:
        Y.append((flint.fmpq(c, 2), (a + 1, b, c - 1)))
        Yr.append((flint.fmpq(-c, 2), (a + 1, b, c - 1)))
    return X, Y, Xr, Yr


def _pair(P, Q):
    s = flint.fmpq(0)
    for k1, m1 in P:
        for k2, m2 in Q:
            s += k1 * k2 * heat_moment(m1[0] + m2[0], m1[1] + m2[1], m1[2] + m2[2])
    return s


def _single(P):
    s = flint.fmpq(0)
    for k, m in P:
        s += k * heat_moment(*m)
    return s


PARITY = {
    # symmetry classes of the solution under (x, y, u) -> (-x, y, -u) and (x, -y, -u)
    # and the half turn; the exact solution lies in these spans
    "X": lambda a, b, c: (a + c) % 2 == 1 and (b + c) % 2 == 0,
    "Y": lambda a, b, c: (a + c) % 2 == 0 and (b + c) % 2 == 1,
    "U": lambda a, b, c: (a + b) % 2 == 0 and c % 2 == 1,
}


def heis_indices(degree, which=None):
    idx = [(a, b, c) for a in range(degree + 1) for b in range(degree + 1 - a)
           for c in range(degree + 1 - a - b) if a + b + c > 0]
    if which is not None:
        idx = [m for m in idx if PARITY[which](*m)]
    return idx


@dataclass
class ExactSolve:
    which: str
    degree: int
    n_basis: int
    value: float
    radius: float
    prec: int


def exact_galerkin(degree, which="X", parity=True, prec=192):
    """Lower bound g_1(W) >= q_degree for W in {X, Y, U}: minimal-norm
    horizontal gradient field over polynomials of total degree <= degree,
    with the source given by the right-invariant derivative of h_1. The
    Gram matrix and load are exact rationals; the solve is done in ball
    arithmetic, doubling the precision until the radius is below 1e-30."""
    if flint is None:
        raise RuntimeError("python-flint is required for the exact moment route")
    if which not in PARITY:
        raise ValueError("which must be X, Y or U")
    _fill_moments(2 * degree + 2)
    idx = heis_indices(degree, which if parity else None)
    terms = [_frame_terms(m) for m in idx]
    n = len(idx)
    G = flint.fmpq_mat(n, n)
    B = flint.fmpq_mat(n, 1)
    for i in range(n):
        Xi, Yi, Xri, Yri = terms[i]
        for j in range(i, n):
            v = _pair(Xi, terms[j][0]) + _pair(Yi, terms[j][1])
            G[i, j] = v
            G[j, i] = v
        if which == "X":
            B[i, 0] = _single(Xri)
        elif which == "Y":
            B[i, 0] = _single(Yri)
        else:
            a, b, c = idx[i]
            B[i, 0] = c * heat_moment(a, b, c - 1)
    old = flint.ctx.prec
    try:
        while True:
            flint.ctx.prec = prec
            sol = flint.arb_mat(G).solve(flint.arb_mat(B))
            q = (flint.arb_mat(B).transpose() * sol)[0, 0]
            mid, rad = float(q.mid()), float(q.rad())
            if rad < 1e-30 * max(abs(mid), 1.0) or prec > 4096:
                break
            prec *= 2
    finally:
        flint.ctx.prec = old
    return ExactSolve(which, degree, n, mid, rad, prec)


# ------------------------------------------------- complementary bounds

def complementary_upper(which="X", degree=8, kf: KernelField | None = None, chunk=40000):
    """Upper bound for g_1(W), W in {X, U}: the squared norm of any horizontal
    field F with div(h F) equal to the source. Start from an explicit flux F0
    and subtract divergence-free corrections (YY(hp), -XY(hp) - U(hp)) / h
    for polynomials p, minimizing the L^2(h) norm by least squares. The
    integrals are quadratures on the kernel grid."""
    kf = kf or default_field(1.0, second=True)
    if not kf.second:
        raise ValueError("kernel field needs second derivatives")
    g = kf.grid
    keep = kf.h > 1e-13 * kf.h.max()
    x, y, u = g.x[keep], g.y[keep], g.u[keep]
    h = kf.h[keep]
    wq = g.w[keep] * h
    lX, lY, lU = kf.Xh[keep] / h, kf.Yh[keep] / h, kf.hu[keep] / h
    S = {k: v[keep] / h for k, v in kf.second.items()}
    lYY = S["yy"] + x * S["yu"] + x * x / 4 * S["uu"]
    lXY = S["xy"] + 0.5 * lU + x / 2 * S["xu"] - y / 2 * S["yu"] - x * y / 4 * S["uu"]
    if which == "U":
        F0a, F0b = lY, -lX
    elif which == "X":
        F0a, F0b = 2 + y * lY, -y * lX
    else:
        raise ValueError("which must be X or U")
    sx = math.sqrt(2.0)
    mons = [(a, b, c) for a in range(degree + 1) for b in range(degree + 1 - a)
            for c in range(degree + 1 - a - b)]
    sw = np.sqrt(wq)
    n = len(mons)
    Rs = []
    for i0 in range(0, x.size, chunk):
        sl = slice(i0, i0 + chunk)
        xt, yt, ut = x[sl] / sx, y[sl] / sx, u[sl]
        xx, yy = x[sl], y[sl]
        cols = np.empty((2 * xt.size, n))
        for j, (a, b, c) in enumerate(mons):
            def d(v, k, m):
                # m-th derivative of v^k
                if m > k:
                    return np.zeros_like(v)
                coef = math.perm(k, m)
                return coef * v ** (k - m)
            p = d(xt, a, 0) * d(yt, b, 0) * d(ut, c, 0)
            px = d(xt, a, 1) * d(yt, b, 0) * d(ut, c, 0) / sx
            py = d(xt, a, 0) * d(yt, b, 1) * d(ut, c, 0) / sx
            pu = d(xt, a, 0) * d(yt, b, 0) * d(ut, c, 1)
            pyy = d(xt, a, 0) * d(yt, b, 2) * d(ut, c, 0) / sx ** 2
            pxy = d(xt, a, 1) * d(yt, b, 1) * d(ut, c, 0) / sx ** 2
            pyu = d(xt, a, 0) * d(yt, b, 1) * d(ut, c, 1) / sx
            pxu = d(xt, a, 1) * d(yt, b, 0) * d(ut, c, 1) / sx
            puu = d(xt, a, 0) * d(yt, b, 0) * d(ut, c, 2)
            Xp = px - yy / 2 * pu
            Yp = py + xx / 2 * pu
            YYp = pyy + xx * pyu + xx * xx / 4 * puu
            XYp = pxy + 0.5 * pu + xx / 2 * pxu - yy / 2 * pyu - xx * yy / 4 * puu
            ca = p * lYY[sl] + 2 * Yp * lY[sl] + YYp
            cb = -(p * lXY[sl] + Xp * lY[sl] + Yp * lX[sl] + XYp) - (p * lU[sl] + pu)
            cols[:, j] = np.concatenate([ca, cb]) * np.concatenate([sw[sl], sw[sl]])
        rhs = -np.concatenate([F0a[sl], F0b[sl]]) * np.concatenate([sw[sl], sw[sl]])
        _, R = qr(np.column_stack([cols, rhs]), mode="economic")
        Rs.append(R)
    _, R = qr(np.vstack(Rs), mode="economic")
    base = float(np.dot(wq, F0a ** 2 + F0b ** 2))
    M, r = R[:, :n], R[:, n]
    U_, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep_s = s > 1e-13 * s[0]
    proj = U_[:, keep_s].T @ r
    residual = float(np.dot(r, r) - np.dot(proj, proj))
    return {"which": which, "degree": degree, "flux": base, "upper": residual,
            "n_corrections": n}


# ------------------------------------------------------------ constants

@dataclass
class ConstantsReport:
    """g_1(W) bounds. Following the definitions K = sqrt(g_1(X)) and
    K / kappa = sqrt(g_1(U)), with the unsquared readings reported alongside."""

    degrees: list
    gX: list
    gY: list
    gU: list
    gX_upper: float
    gU_upper: float
    upper_degree: int
    elevator_sq: float

    @property
    def K_lower(self):
        return math.sqrt(self.gX[-1])

    @property
    def K_upper(self):
        return math.sqrt(self.gX_upper)

    @property
    def Kk_ratio(self):
        """Upper bound for K / kappa = sqrt(g_1(U))."""
        return math.sqrt(min(self.gU_upper, self.elevator_sq))

    @property
    def Kk_lower(self):
        return math.sqrt(self.gU[-1])

    @property
    def kappa(self):
        """kappa estimate from the top-degree lower bounds."""
        return math.sqrt(self.gX[-1] / self.gU[-1])

    def monotone(self):
        return all(b >= a for a, b in zip(self.gX, self.gX[1:]))

    def to_dict(self):
        return {
            "degrees": self.degrees, "gX": self.gX, "gY": self.gY, "gU": self.gU,
            "gX_upper": self.gX_upper, "gU_upper": self.gU_upper, "upper_degree": self.upper_degree,
            "K_lower": self.K_lower, "K_upper": self.K_upper, "Kk_ratio": self.Kk_ratio,
            "Kk_lower": self.Kk_lower, "elevator_sq": self.elevator_sq,
            "unsquared": {"K_lower": self.gX[-1], "K_upper": self.gX_upper,
                          "Kk_lower": self.gU[-1], "Kk_upper": min(self.gU_upper, self.elevator_sq)},
        }


def estimate_constants(degrees=(4, 8, 12, 16, 20, 24), upper_degree=12, with_upper=True):
    degrees = list(degrees)
    gX = [exact_galerkin(d, "X").value for d in degrees]
    gY = [exact_galerkin(d, "Y").value for d in degrees]
    gU = [exact_galerkin(d, "U").value for d in degrees]
    elev = elevator_norm(1.0) ** 2
    if with_upper:
        kf = default_field(1.0, second=True)
        ux = complementary_upper("X", upper_degree, kf)["upper"]
        uu = complementary_upper("U", upper_degree, kf)["upper"]
    else:
        ux, uu = math.inf, elev
    return ConstantsReport(degrees, gX, gY, gU, ux, uu, upper_degree, elev)
