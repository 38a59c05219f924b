"""Distances to infeasibility, condition numbers and instance generators.

Both distances have a support-function form (``K`` is self-dual):

    rho_P(A) = min_{|v| = 1} |Pi_K(A^T v)|,
    rho_D(A) = min { |A d| : d in K, |d| = 1 }.

Any sampled or locally optimized feasible point of these minimizations gives
an upper bound. Lower bounds come from strict-feasibility certificates; when
one side has a certificate the other distance is exactly zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .embed import normalize_blocks
from .errors import Unbounded
from .lorentz import ConeStructure

# Starting points that receive local refinement; a prefix of the sample set so
# that adding samples never loses a refined value.
REFINE_STARTS = 16


@dataclass(frozen=True)
class Bracket:
    lower: float
    upper: float

    def __post_init__(self):
        if self.lower > self.upper * (1 + 1e-12) + 1e-300:
            raise ValueError(f"empty bracket [{self.lower}, {self.upper}]")

    def as_tuple(self) -> tuple[float, float]:
        return (self.lower, self.upper)


@dataclass(frozen=True)
class ConditionEstimate:
    rho_p_bracket: Bracket
    rho_d_bracket: Bracket
    c_bracket: Bracket
    samples: int
    seed: int


@dataclass
class Instance:
    """Data matrix, cone and an optional strict-feasibility certificate."""

    A: np.ndarray
    cone: ConeStructure
    kind: str | None = None  # "primal" or "dual" when a certificate is known
    certificate: np.ndarray | None = None  # x with A x = 0, or y with -A^T y interior
    seed: int | None = None
    margin: float | None = None


def project_cone(W: np.ndarray, cone: ConeStructure) -> np.ndarray:
    """Euclidean projection onto ``K`` of every row of ``W`` (or of a vector)."""
    W = np.asarray(W, dtype=float)
    single = W.ndim == 1
    W = np.atleast_2d(W)
    P = np.zeros_like(W)
    for sl in cone.slices:
        w0 = W[:, sl.start]
        wb = W[:, sl.start + 1 : sl.stop]
        nb = np.linalg.norm(wb, axis=1)
        inside = nb <= w0
        mixed = ~inside & (nb > -w0)
        P[inside, sl] = W[inside, sl]
        a = 0.5 * (w0[mixed] + nb[mixed])
        P[mixed, sl.start] = a
        P[mixed, sl.start + 1 : sl.stop] = (a / nb[mixed])[:, None] * wb[mixed]
    return P[0] if single else P


def _min_margin(v: np.ndarray, cone: ConeStructure) -> float:
    return min(v[sl][0] - np.linalg.norm(v[sl][1:]) for sl in cone.slices)


def _sample_rows(seed: int, count: int, dim: int, offset: int = 0) -> np.ndarray:
    """Unit directions; row ``j`` depends only on ``(seed, j)``."""
    rows = np.empty((count, dim))
    for j in range(count):
        g = np.random.default_rng([seed, offset + j]).normal(size=dim)
        rows[j] = g / np.linalg.norm(g)
    return rows


def _candidate_v(A: np.ndarray, samples: int, seed: int) -> np.ndarray:
    m = A.shape[0]
    fixed = np.vstack([np.eye(m), -np.eye(m)])
    U = np.linalg.svd(A, full_matrices=False)[0].T
    fixed = np.vstack([fixed, U, -U])
    return np.vstack([_sample_rows(seed, samples, m), fixed])


def _refine_p(A, cone, v0):
    def fun(u):
        nu = np.linalg.norm(u)
        v = u / nu
        p = project_cone(A.T @ v, cone)
        gv = A @ p
        return 0.5 * p @ p, (gv - v * (v @ gv)) / nu

    res = minimize(fun, v0, jac=True, method="L-BFGS-B", options={"maxiter": 500})
    v = res.x / np.linalg.norm(res.x)
    return float(np.linalg.norm(project_cone(A.T @ v, cone)))


def rho_p_upper(A, cone: ConeStructure, samples: int = 200, seed: int = 0) -> float:
    """Smallest ``|Pi_K(A^T v)|`` found over sampled and refined unit ``v``."""
    A = np.asarray(A, dtype=float)
    V = _candidate_v(A, samples, seed)
    vals = np.linalg.norm(project_cone(V @ A, cone), axis=1)
    best = float(vals.min())
    for v0 in V[: min(samples, REFINE_STARTS)]:
        best = min(best, _refine_p(A, cone, v0))
    return best


def _random_cone_points(cone: ConeStructure, seed: int, count: int, offset: int) -> np.ndarray:
    rows = np.empty((count, cone.ambient_dim))
    for j in range(count):
        rng = np.random.default_rng([seed, offset + j])
        d = rng.normal(size=cone.ambient_dim)
        # push heads up so that a fraction of blocks lands on or near the boundary
        for sl in cone.slices:
            d[sl.start] = np.linalg.norm(d[sl.start + 1 : sl.stop]) * rng.uniform(0.0, 2.0) if rng.uniform() < 0.5 else abs(d[sl.start])
        d = project_cone(d, cone)
        nd = np.linalg.norm(d)
        rows[j] = d / nd if nd > 0 else cone.identity() / math.sqrt(cone.r)
    return rows


def _refine_d(A, cone, d, iters: int = 400):
    step = 1.0 / max(np.linalg.norm(A, 2) ** 2, 1e-300)
    best = float(np.linalg.norm(A @ d))
    for _ in range(iters):
        p = project_cone(d - step * (A.T @ (A @ d)), cone)
        nrm = np.linalg.norm(p)
        if nrm == 0.0:
            break
        d = p / nrm
        best = min(best, float(np.linalg.norm(A @ d)))
    return best


def rho_d_upper(A, cone: ConeStructure, samples: int = 200, seed: int = 0) -> float:
    """Smallest ``|A d|`` found over sampled and refined unit ``d`` in ``K``."""
    A = np.asarray(A, dtype=float)
    D = _random_cone_points(cone, seed, samples, offset=10**6)
    # boundary rays of single blocks and the unit-head directions
    extra = []
    for sl in cone.slices:
        e = np.zeros(cone.ambient_dim)
        e[sl.start] = 1.0
        extra.append(e)
        for j in range(sl.start + 1, sl.stop):
            for sgn in (1.0, -1.0):
                b = np.zeros(cone.ambient_dim)
                b[sl.start], b[j] = 1.0 / math.sqrt(2), sgn / math.sqrt(2)
                extra.append(b)
    D = np.vstack([D, np.array(extra)])
    best = float(np.linalg.norm(D @ A.T, axis=1).min())
    for d0 in D[: min(samples, REFINE_STARTS)]:
        best = min(best, _refine_d(A, cone, d0))
    return best


def rho_p_lower_from_primal(A, cone: ConeStructure, x) -> float:
    """``sigma_min(A) / (1 + sqrt(2) |x| / margin(x))`` for interior ``x`` with ``A x = 0``."""
    x = np.asarray(x, dtype=float)
    mg = _min_margin(x, cone)
    if mg <= 0 or A.shape[0] >= A.shape[1]:
        return 0.0
    smin = float(np.linalg.svd(A, compute_uv=False).min())
    # an inexact null vector weakens the bound by its residual
    slack = float(np.linalg.norm(A @ x)) * math.sqrt(2) / mg
    return max(0.0, smin / (1.0 + math.sqrt(2) * np.linalg.norm(x) / mg) - slack)


def rho_d_lower_from_dual(A, cone: ConeStructure, y) -> float:
    """``margin(-A^T y) / (sqrt(2) |y|)`` for ``y`` with ``-A^T y`` interior."""
    y = np.asarray(y, dtype=float)
    mg = _min_margin(-(A.T @ y), cone)
    return max(0.0, mg / (math.sqrt(2) * np.linalg.norm(y)))


def _certificate_bounds(A, cone, certificates):
    """Lower bounds from certificates, and upper bounds for the opposite side.

    A primal certificate ``x`` gives ``rho_D <= |A x| / |x|``; a dual one gives
    ``rho_P <= |Pi_K(A^T y)| / |y|`` (zero when ``-A^T y`` is interior).
    """
    lp = ld = 0.0
    up_p = up_d = math.inf
    for kind, vec in certificates or ():
        vec = np.asarray(vec, dtype=float)
        if kind == "primal" and _min_margin(vec, cone) > 0:
            lp = max(lp, rho_p_lower_from_primal(A, cone, vec))
            up_d = min(up_d, float(np.linalg.norm(A @ vec) / np.linalg.norm(vec)))
        elif kind == "dual" and _min_margin(-(A.T @ vec), cone) > 0:
            ld = max(ld, rho_d_lower_from_dual(A, cone, vec))
            up_p = min(up_p, float(np.linalg.norm(project_cone(A.T @ vec, cone)) / np.linalg.norm(vec)))
    return lp, ld, up_p, up_d


def rho_p_estimate(A, cone: ConeStructure, samples: int = 200, seed: int = 0, certificates=None) -> Bracket:
    """Bracket for ``rho_P``; ``certificates`` is an iterable of ``(kind, vector)``."""
    A = np.asarray(A, dtype=float)
    lp, _, up, _ = _certificate_bounds(A, cone, certificates)
    up = min(up, rho_p_upper(A, cone, samples, seed)) if up > 0 else up
    return Bracket(min(lp, up), up)


def rho_d_estimate(A, cone: ConeStructure, samples: int = 200, seed: int = 0, certificates=None) -> Bracket:
    A = np.asarray(A, dtype=float)
    _, ld, _, up = _certificate_bounds(A, cone, certificates)
    up = min(up, rho_d_upper(A, cone, samples, seed)) if up > 0 else up
    return Bracket(min(ld, up), up)


def condition_number(A, cone: ConeStructure, samples: int = 200, seed: int = 0, certificates=None) -> ConditionEstimate:
    """Bracket ``C(A) = |A| / max(rho_P, rho_D)`` with ``|A|`` the spectral norm."""
    A = np.asarray(A, dtype=float)
    bp = rho_p_estimate(A, cone, samples, seed, certificates)
    bd = rho_d_estimate(A, cone, samples, seed, certificates)
    norm = float(np.linalg.norm(A, 2))
    top_up = max(bp.upper, bd.upper)
    if top_up <= 1e-9 * norm:
        raise Unbounded("both distances to infeasibility vanish")
    top_lo = max(bp.lower, bd.lower)
    c_hi = norm / top_lo if top_lo > 0 else math.inf
    return ConditionEstimate(bp, bd, Bracket(norm / top_up, c_hi), samples, seed)


def _interior_point(cone: ConeStructure, margin: float, rng) -> np.ndarray:
    v = np.zeros(cone.ambient_dim)
    for sl in cone.slices:
        u = rng.normal(size=sl.stop - sl.start - 1)
        u /= np.linalg.norm(u)
        v[sl.start] = 1.0
        v[sl.start + 1 : sl.stop] = u * rng.uniform(0.0, 1.0 - margin)
    return v


def gen_primal_instance(m: int, cone: ConeStructure, margin: float, seed: int) -> Instance:
    """Random normalized ``A`` with a known interior ``x`` such that ``A x = 0``."""
    N = cone.ambient_dim
    if not 1 <= m < N:
        raise ValueError(f"need 1 <= m < N = {N}")
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    x = _interior_point(cone, margin, rng)
    A0 = rng.normal(size=(m, N))
    A, scales = normalize_blocks(A0 - np.outer(A0 @ x, x) / (x @ x), cone)
    x_cert = x.copy()
    for lam, sl in zip(scales, cone.slices):
        x_cert[sl] /= lam
    return Instance(A, cone, "primal", x_cert, seed, margin)


def gen_dual_instance(m: int, cone: ConeStructure, margin: float, seed: int) -> Instance:
    """Random normalized ``A`` with a known ``y`` such that ``-A^T y`` is interior."""
    if m < 1:
        raise ValueError("m must be positive")
    if not 0.0 < margin < 1.0:
        raise ValueError("margin must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    s = _interior_point(cone, margin, rng)
    y = rng.normal(size=m)
    B0 = rng.normal(size=(cone.ambient_dim, m))
    At = B0 + np.outer(-s - B0 @ y, y) / (y @ y)
    A, _ = normalize_blocks(At.T, cone)
    return Instance(A, cone, "dual", y, seed, margin)


def generate(kind: str, m: int, cone: ConeStructure, margin: float, seed: int) -> Instance:
    if kind == "primal":
        return gen_primal_instance(m, cone, margin, seed)
    if kind == "dual":
        return gen_dual_instance(m, cone, margin, seed)
    raise ValueError(f"unknown instance kind {kind!r}")
