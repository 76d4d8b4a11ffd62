"""Minimal-norm solutions of the weighted continuity equation

    s + div(mu V) = 0,   V = grad(phi),

by Galerkin projection onto finite families of gradients. The squared norm
q = int |V|^2 dmu of the projected solution is a lower bound for the true
squared norm and increases toward it as the basis grows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np
from scipy.linalg import eigh, qr, svd

from .measures import GaussianMixture, QuadratureGrid


# ------------------------------------------------------------------ basis

@dataclass(frozen=True)
class BasisSpec:
    """Polynomial Hermite basis He_a(y_1/s) He_b(y_2/s)... of total degree
    1..degree (constants excluded), optionally filtered by parity per axis
    (0 even, 1 odd, None free). family "partition" multiplies per-component
    Hermite polynomials centered at the mixture components by the posterior
    weights lambda_j; "union" takes both families."""

    dimension: int
    degree: int
    scale: float = math.sqrt(2.0)
    parity: tuple | None = None
    family: str = "hermite"
    partition_degree: int = 6

    def __post_init__(self):
        if self.family not in ("hermite", "partition", "union"):
            raise ValueError(f"unknown basis family {self.family!r}")
        if self.degree < 1 and self.family != "partition":
            raise ValueError("degree must be at least 1")

    def indices(self):
        return multi_indices(self.dimension, self.degree, self.parity)

    def to_dict(self):
        return {"dimension": self.dimension, "degree": self.degree, "family": self.family,
                "parity": self.parity, "partition_degree": self.partition_degree}


def multi_indices(dim, degree, parity=None, include_constant=False):
    out = []
    for idx in product(range(degree + 1), repeat=dim):
        s = sum(idx)
        if s > degree or (s == 0 and not include_constant):
            continue
        if parity is not None and any(p is not None and i % 2 != p for i, p in zip(idx, parity)):
            continue
        out.append(idx)
    out.sort(key=lambda m: (sum(m), m))
    return out


def hermite_table(x, n):
    """Normalized He_j(x)/sqrt(j!) and derivatives for j = 0..n."""
    x = np.asarray(x, float)
    H = np.empty((n + 1,) + x.shape)
    H[0] = 1.0
    if n >= 1:
        H[1] = x
    for j in range(1, n):
        H[j + 1] = x * H[j] - j * H[j - 1]
    D = np.zeros_like(H)
    for j in range(1, n + 1):
        D[j] = j * H[j - 1]
    norms = np.array([math.sqrt(math.factorial(j)) for j in range(n + 1)])
    shape = (n + 1,) + (1,) * x.ndim
    return H / norms.reshape(shape), D / norms.reshape(shape)


def _product_basis(points, indices, scale, center=None):
    y = np.asarray(points, float)
    if center is not None:
        y = y - center
    dim = y.shape[1]
    n = max((max(m) for m in indices), default=0)
    tabs = [hermite_table(y[:, a] / scale, n) for a in range(dim)]
    vals = np.empty((y.shape[0], len(indices)))
    grads = np.empty((y.shape[0], len(indices), dim))
    for c, m in enumerate(indices):
        v = np.ones(y.shape[0])
        for a in range(dim):
            v = v * tabs[a][0][m[a]]
        vals[:, c] = v
        for a in range(dim):
            g = tabs[a][1][m[a]] / scale
            for b in range(dim):
                if b != a:
                    g = g * tabs[b][0][m[b]]
            grads[:, c, a] = g
    return vals, grads


def evaluate_basis(spec: BasisSpec, points, mixture: GaussianMixture | None = None):
    """Values (N, n) and gradients (N, n, d) of the basis at the points."""
    parts_v, parts_g = [], []
    if spec.family in ("hermite", "union"):
        v, g = _product_basis(points, spec.indices(), spec.scale)
        parts_v.append(v)
        parts_g.append(g)
    if spec.family in ("partition", "union"):
        if mixture is None:
            raise ValueError("partition basis needs the mixture")
        y = np.asarray(points, float)
        lam = mixture.posterior(y)
        score = -(y[:, None, :] - mixture.centers[None, :, :]) / (2 * mixture.t)
        mean_score = np.einsum("nj,njd->nd", lam, score)
        local = multi_indices(spec.dimension, spec.partition_degree, None, include_constant=True)
        for j, c in enumerate(mixture.centers):
            pv, pg = _product_basis(y, local, spec.scale, center=c)
            dlam = lam[:, j, None] * (score[:, j, :] - mean_score)
            parts_v.append(lam[:, j, None] * pv)
            parts_g.append(lam[:, j, None, None] * pg + dlam[:, None, :] * pv[:, :, None])
    return np.concatenate(parts_v, axis=1), np.concatenate(parts_g, axis=1)


# ------------------------------------------------------------ the problem

@dataclass
class ContinuityProblem:
    """Weight mu given by a quadrature grid, and a source s given either by
    the ratio s/f at points (source_ratio) or by a load functional that maps
    (values, grads) at the grid nodes to int s phi dL (load_fn)."""

    grid: QuadratureGrid
    mixture: GaussianMixture | None = None
    source_ratio: Callable | None = None
    load_fn: Callable | None = None

    def load(self, values, grads):
        if self.load_fn is not None:
            return self.load_fn(values, grads)
        if self.source_ratio is None:
            raise ValueError("problem has no source")
        s = self.source_ratio(self.grid.nodes)
        return (self.grid.weights * s) @ values

    def source_mass(self):
        if self.source_ratio is None:
            return 0.0
        return float(np.dot(self.grid.weights, self.source_ratio(self.grid.nodes)))

    def source_energy(self):
        """int s^2 / f dL."""
        s = self.source_ratio(self.grid.nodes)
        return float(np.dot(self.grid.weights, s * s))


def translation_problem(mixture: GaussianMixture, velocities, order=48, truncation=10.0):
    """Source generated by moving component j of the mixture with velocity
    v_j: s = -sum_j p_j v_j . grad gamma_j. The load is integrated by parts,
    b_i = sum_j p_j E_j[v_j . grad phi_i]."""
    vel = np.atleast_2d(np.asarray(velocities, float))
    grid = mixture.grid(order=order, truncation=truncation)
    labels = grid.labels

    def load_fn(values, grads):
        v_at = vel[labels]
        return np.einsum("n,nid,nd->i", grid.weights, grads, v_at)

    def ratio(y):
        y = np.atleast_2d(y)
        lam = mixture.posterior(y)
        proj = np.einsum("njd,jd->nj", y[:, None, :] - mixture.centers[None], vel)
        return (lam * proj).sum(1) / (2 * mixture.t)

    return ContinuityProblem(grid, mixture, ratio, load_fn)


# ----------------------------------------------------------------- solves

@dataclass
class GalerkinSolve:
    gram: np.ndarray = field(repr=False)
    load: np.ndarray = field(repr=False)
    coeffs: np.ndarray = field(repr=False)
    q: float
    rank: int
    n_basis: int
    cutoff: float
    degree: int | None = None
    basis: BasisSpec | None = field(default=None, repr=False)
    problem: ContinuityProblem | None = field(default=None, repr=False)

    def to_dict(self):
        return {"degree": self.degree, "rank": self.rank, "n_basis": self.n_basis, "q": self.q}


def solve_gram(G, b, cutoff=1e-10):
    """Pseudo-inverse solve of G c = b keeping eigenvalues above
    cutoff * max. Returns (c, q, rank)."""
    G = 0.5 * (G + G.T)
    d = np.sqrt(np.clip(np.diag(G), 0, None))
    live = d > 0
    Gs = G[np.ix_(live, live)] / np.outer(d[live], d[live])
    bs = b[live] / d[live]
    lam, V = eigh(Gs)
    keep = lam > cutoff * lam.max()
    cs = V[:, keep] @ ((V[:, keep].T @ bs) / lam[keep])
    c = np.zeros_like(b, dtype=float)
    c[live] = cs / d[live]
    return c, float(np.dot(c, b)), int(keep.sum())


def solve_weighted(weights, grads, load, cutoff=1e-10):
    """Minimal-norm solve from gradients at quadrature nodes, working on the
    square-root-weighted design matrix so that small singular values are
    resolved to double precision. Returns (c, q, rank, G)."""
    N, n, d = grads.shape
    M = (np.sqrt(weights)[:, None, None] * grads).transpose(0, 2, 1).reshape(N * d, n)
    colnorm = np.linalg.norm(M, axis=0)
    live = colnorm > 0
    Ms = M[:, live] / colnorm[live]
    _, R = qr(Ms, mode="economic")
    _, s, Vt = svd(R)
    keep = s * s > cutoff * (s[0] ** 2)
    bs = load[live] / colnorm[live]
    proj = Vt[keep] @ bs
    cs = Vt[keep].T @ (proj / s[keep] ** 2)
    c = np.zeros(n)
    c[live] = cs / colnorm[live]
    G = M.T @ M
    return c, float(np.sum(proj ** 2 / s[keep] ** 2)), int(keep.sum()), G


def solve_min_norm(problem: ContinuityProblem, basis: BasisSpec, cutoff=1e-10):
    """Galerkin projection of the minimal-norm field onto span{grad phi_i}."""
    vals, grads = evaluate_basis(basis, problem.grid.nodes, problem.mixture)
    b = problem.load(vals, grads)
    c, q, rank, G = solve_weighted(problem.grid.weights, grads, b, cutoff)
    return GalerkinSolve(G, b, c, q, rank, b.size, cutoff, basis.degree, basis, problem)


def residual_check(solve: GalerkinSolve, test_basis: BasisSpec):
    """max_f |int s f - int grad phi_c . grad f dmu| / ||grad f||_{L2(mu)}
    over the test functions f."""
    pr = solve.problem
    _, g_sol = evaluate_basis(solve.basis, pr.grid.nodes, pr.mixture)
    v_test, g_test = evaluate_basis(test_basis, pr.grid.nodes, pr.mixture)
    field_ = np.einsum("nid,i->nd", g_sol, solve.coeffs)
    lhs = pr.load(v_test, g_test)
    rhs = np.einsum("n,nd,nid->i", pr.grid.weights, field_, g_test)
    norms = np.sqrt(np.einsum("n,nid,nid->i", pr.grid.weights, g_test, g_test))
    ok = norms > 0
    res = np.abs(lhs - rhs)[ok] / norms[ok]
    return {"max": float(res.max()), "mean": float(res.mean()), "n_tests": int(ok.sum())}


def poincare_constant(grid: QuadratureGrid, basis: BasisSpec, mixture=None, cutoff=1e-10):
    """Largest Rayleigh quotient Var(f) / int |grad f|^2 over the span of the
    basis (a lower estimate of the Poincare constant of the weight)."""
    vals, grads = evaluate_basis(basis, grid.nodes, mixture)
    w = grid.weights
    mean = w @ vals
    cen = vals - mean
    V = (cen * w[:, None]).T @ cen
    G = np.einsum("n,nid,njd->ij", w, grads, grads)
    d = np.sqrt(np.diag(G))
    Gs, Vs = G / np.outer(d, d), V / np.outer(d, d)
    lam, U = eigh(Gs)
    keep = lam > cutoff * lam.max()
    P = U[:, keep] / np.sqrt(lam[keep])
    return float(eigh(P.T @ Vs @ P, eigvals_only=True).max())


def poincare_bound(solve: GalerkinSolve, C):
    """Check q <= C int s^2 / f; a violation means a quadrature or basis bug."""
    energy = solve.problem.source_energy()
    bound = C * energy
    if solve.q > bound * (1 + 1e-9):
        raise AssertionError(f"Poincare bound violated: q={solve.q} > C*E={bound}")
    return {"q": solve.q, "bound": bound, "margin": bound - solve.q, "C": C}
