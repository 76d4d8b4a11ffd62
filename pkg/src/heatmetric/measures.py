"""Gaussian heat kernels on the line and plane, their rotational
symmetrizations, cone points, discrete measures and quadrature grids.

Every heat kernel here has covariance 2t * identity, which is the kernel of
the semigroup generated by the Laplacian (not half of it).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.special import logsumexp

LOG_2PI = math.log(2.0 * math.pi)


def _check_t(t):
    if not (np.isfinite(t) and t > 0):
        raise ValueError(f"time must be positive and finite, got {t!r}")


def rotation(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class GaussDensity1D:
    """eta_t(y) = (4 pi t)^(-1/2) exp(-y^2 / 4t)."""

    t: float = 1.0

    def __post_init__(self):
        _check_t(self.t)

    def log_pdf(self, y):
        y = np.asarray(y, dtype=float)
        return -0.5 * math.log(4.0 * math.pi * self.t) - y * y / (4.0 * self.t)

    def pdf(self, y):
        return np.exp(self.log_pdf(y))

    def dpdf(self, y):
        """Derivative, using eta' = -(y / 2t) eta."""
        y = np.asarray(y, dtype=float)
        return -(y / (2.0 * self.t)) * self.pdf(y)


@dataclass(frozen=True)
class GaussianMixture:
    """Finite mixture of isotropic Gaussians N(c_j, 2t I) in dimension d."""

    centers: np.ndarray
    weights: np.ndarray
    t: float = 1.0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        _check_t(self.t)
        if c.shape[0] != w.size:
            raise ValueError("one weight per center required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite center")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def sigma(self):
        return math.sqrt(2.0 * self.t)

    def _component_logs(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        if y.shape[-1] != self.dim:
            y = y.reshape(-1, self.dim)
        if not np.all(np.isfinite(y)):
            raise ValueError("non-finite evaluation point")
        d2 = ((y[:, None, :] - self.centers[None, :, :]) ** 2).sum(-1)
        norm = -0.5 * self.dim * math.log(4.0 * math.pi * self.t)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw[None, :] + norm - d2 / (4.0 * self.t)

    def log_density(self, y):
        return logsumexp(self._component_logs(y), axis=1)

    def density(self, y):
        return np.exp(self.log_density(y))

    def posterior(self, y):
        """Responsibilities lambda_j(y) = w_j gamma_j(y) / f(y), shape (n, m)."""
        lc = self._component_logs(y)
        return np.exp(lc - logsumexp(lc, axis=1, keepdims=True))

    def grad_log_density(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        lam = self.posterior(y)
        mean = lam @ self.centers
        return -(y - mean) / (2.0 * self.t)

    def grid(self, order=None, truncation=10.0):
        return build_grid(self.dim, self.t, self.centers, order=order,
                          truncation=truncation, mix_weights=self.weights,
                          density=self)


@dataclass(frozen=True)
class RotGaussMixture:
    """The k-fold rotational symmetrization of the heat kernel at x:
    f_x(y) = (1/k) sum_j eta (x) eta (y - R_{2 pi j / k} x)."""

    center: tuple
    t: float = 1.0
    k: int = 2

    def __post_init__(self):
        if self.k not in (2, 4):
            raise ValueError("order k must be 2 or 4")
        c = tuple(float(v) for v in np.asarray(self.center, dtype=float).ravel())
        if len(c) != 2 or not all(math.isfinite(v) for v in c):
            raise ValueError("center must be a finite planar point")
        _check_t(self.t)
        object.__setattr__(self, "center", c)

    @property
    def component_centers(self):
        x = np.array(self.center)
        return np.array([rotation(2.0 * math.pi * j / self.k) @ x for j in range(self.k)])

    @property
    def mixture(self):
        return GaussianMixture(self.component_centers, np.full(self.k, 1.0 / self.k), self.t)

    def eval_density(self, y):
        y = np.asarray(y, dtype=float)
        out = self.mixture.density(y.reshape(-1, 2))
        return out[0] if y.ndim == 1 else out


def eval_density(m: RotGaussMixture, y):
    return m.eval_density(y)


@dataclass(frozen=True)
class ConePoint:
    """A point of the quotient cone R^2 / (rotation by 2 pi / k).

    The cone angle is theta = 2 pi / k and alpha is the planar polar angle,
    reduced to [0, theta)."""

    r: float
    alpha: float = 0.0
    k: int = 2

    def __post_init__(self):
        if self.k not in (1, 2, 4):
            raise ValueError("order k must be 1, 2 or 4")
        if not (math.isfinite(self.r) and self.r >= 0 and math.isfinite(self.alpha)):
            raise ValueError("cone point needs finite r >= 0 and finite angle")
        a = 0.0 if self.r == 0 else float(self.alpha) % self.theta
        if a >= self.theta:
            a = 0.0
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "r", float(self.r))

    @property
    def theta(self):
        return 2.0 * math.pi / self.k

    @property
    def is_apex(self):
        return self.r == 0.0

    def planar(self):
        return np.array([self.r * math.cos(self.alpha), self.r * math.sin(self.alpha)])

    def lifts(self):
        return np.array([rotation(2 * math.pi * j / self.k) @ self.planar() for j in range(self.k)])

    def scaled(self, s):
        return ConePoint(self.r * s, self.alpha, self.k)

    @classmethod
    def from_planar(cls, y, k):
        y = np.asarray(y, dtype=float)
        return cls(float(np.hypot(*y)), float(math.atan2(y[1], y[0])), k)


def angular_separation(p: ConePoint, q: ConePoint):
    """Shortest angular gap between p and q on the cone, in [0, theta / 2]."""
    d = (q.alpha - p.alpha) % p.theta
    return min(d, p.theta - d)


def cone_distance(p: ConePoint, q: ConePoint):
    if p.k != q.k:
        raise ValueError("points live on different cones")
    if p.is_apex or q.is_apex:
        return p.r + q.r
    delta = angular_separation(p, q)
    d2 = p.r ** 2 + q.r ** 2 - 2 * p.r * q.r * math.cos(delta)
    return math.sqrt(max(d2, 0.0))


def quotient_cost(x, y, k):
    """Pairwise squared quotient distance min_j |x - R_j y|^2 for planar arrays."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    best = None
    for j in range(k):
        yr = y @ rotation(2 * math.pi * j / k).T
        c = ((x[:, None, :] - yr[None, :, :]) ** 2).sum(-1)
        best = c if best is None else np.minimum(best, c)
    return best


@dataclass(frozen=True)
class DiscreteMeasure:
    """Weighted point cloud. k > 1 marks points as representatives on the
    quotient cone R^2 / (rotation by 2 pi / k); k = 1 is the plain space."""

    points: np.ndarray
    weights: np.ndarray
    k: int = 1

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if pts.shape[0] == 0:
            raise ValueError("empty support")
        if pts.shape[0] != w.size:
            raise ValueError("one weight per point required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite support point")
        if self.k > 1:
            if pts.shape[1] != 2:
                raise ValueError("cone measures need planar representatives")
            pts = _canonical_cone(pts, self.k)
        pts, w = _merge_duplicates(pts, w)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def size(self):
        return self.weights.size

    @property
    def dim(self):
        return self.points.shape[1]

    def cost_matrix(self, other: "DiscreteMeasure"):
        if self.k != other.k:
            raise ValueError("measures on different spaces")
        if self.k > 1:
            return quotient_cost(self.points, other.points, self.k)
        return ((self.points[:, None, :] - other.points[None, :, :]) ** 2).sum(-1)

    def diameter(self):
        c = self.cost_matrix(self)
        return float(np.sqrt(c.max()))


def _canonical_cone(pts, k):
    r = np.hypot(pts[:, 0], pts[:, 1])
    a = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * math.pi / k)
    out = np.stack([r * np.cos(a), r * np.sin(a)], axis=1)
    out[r == 0] = 0.0
    return out


def _merge_duplicates(pts, w, decimals=13):
    key = np.round(pts, decimals)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    if first.size == pts.shape[0]:
        return pts, w
    inv = inv.ravel()
    merged = np.zeros(first.size)
    np.add.at(merged, inv, w)
    return pts[first], merged


def symmetric_lift(nu: DiscreteMeasure, k=None):
    """The rotation-invariant planar measure whose projection is nu."""
    k = nu.k if k is None else k
    if k not in (2, 4):
        raise ValueError("lift order must be 2 or 4")
    pts, ws = [], []
    for p, w in zip(nu.points, nu.weights):
        if np.hypot(*p) == 0:
            pts.append(p)
            ws.append(w)
            continue
        for j in range(k):
            pts.append(rotation(2 * math.pi * j / k) @ p)
            ws.append(w / k)
    return DiscreteMeasure(np.array(pts), np.array(ws), k=1)


def project(mu: DiscreteMeasure, k):
    """Push a planar measure forward to the quotient cone of order k."""
    return DiscreteMeasure(mu.points, mu.weights, k=k)


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights integrating against a probability measure mu:
    sum_i weights[i] F(nodes[i]) ~ int F dmu. When mu has a density f the
    values f(nodes) are kept so that Lebesgue integrals can be formed."""

    dimension: int
    nodes: np.ndarray
    weights: np.ndarray
    truncation_radius: float
    density_values: np.ndarray | None = field(default=None, repr=False)
    labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self):
        return self.weights.size

    def integrate(self, values):
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def lebesgue_weights(self):
        if self.density_values is None:
            raise ValueError("grid carries no density values")
        return self.weights / self.density_values

    def to_dict(self):
        return {"dimension": self.dimension, "size": int(self.size),
                "truncation": float(self.truncation_radius)}


def build_grid(dimension, t, centers=None, order=None, truncation=10.0,
               mix_weights=None, density=None):
    """Tensor probabilists' Gauss-Hermite grid for the mixture of
    N(c_j, 2t I): one scaled copy of the nodes per center. Nodes further than
    the truncation radius |c|_max + truncation * sqrt(2t) are dropped."""
    _check_t(t)
    if dimension not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2 or 3")
    if order is None:
        order = 48 if dimension == 3 else 128
    if order < 4:
        raise ValueError("quadrature order below 4")
    if truncation < 6:
        raise ValueError("truncation multiplier must be at least 6")
    centers = np.zeros((1, dimension)) if centers is None else np.atleast_2d(np.asarray(centers, float))
    if centers.shape[1] != dimension:
        centers = centers.reshape(-1, dimension)
    m = centers.shape[0]
    mix_weights = np.full(m, 1.0 / m) if mix_weights is None else np.asarray(mix_weights, float)
    sigma = math.sqrt(2.0 * t)
    xi, om = hermegauss(order)
    om = om / math.sqrt(2.0 * math.pi)
    mesh = np.meshgrid(*([xi] * dimension), indexing="ij")
    base = np.stack([g.ravel() for g in mesh], axis=1)
    wmesh = np.meshgrid(*([om] * dimension), indexing="ij")
    wbase = np.prod(np.stack([g.ravel() for g in wmesh], axis=1), axis=1)
    radius = float(np.max(np.linalg.norm(centers, axis=1))) + truncation * sigma
    nodes = np.concatenate([c + sigma * base for c in centers])
    weights = np.concatenate([w * wbase for w in mix_weights])
    labels = np.repeat(np.arange(m), base.shape[0])
    keep = (np.linalg.norm(nodes, axis=1) <= radius) & (weights > 0)
    nodes, weights, labels = nodes[keep], weights[keep], labels[keep]
    dens = None
    if density is not None:
        dens = density.density(nodes)
    return QuadratureGrid(dimension, nodes, weights, radius, dens, labels)
