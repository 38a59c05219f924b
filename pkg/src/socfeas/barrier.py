"""Logarithmic barrier of a product of Lorentz cones and its NT scaling.

For a block ``x_i = (x_0, xbar)`` with ``d = x_0^2 - |xbar|^2`` the barrier is
``f_i = -ln d``, so that

    g_i = -2 J x_i / d,        H_i = (2/d) (2 (J x_i)(J x_i)^T / d - J),
    H_i^{-1} = x_i x_i^T - (d/2) J,

with ``J = diag(1, -1, ..., -1)``. The barrier parameter is 2 per block.

The NT scaling point ``w`` with ``H(w) x = s`` is never formed on the solver
path. Instead each block of ``H(w)^{-1/2}`` is built from the data
``(gamma, xi, alpha, zeta)`` of :class:`ScalingBlock`. The block routines take
an optional :class:`~socfeas.roundoff.RoundingContext`; when one is given,
every operation is rounded to its precision and simulated values (object
arrays) are returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import gmpy2
import numpy as np

from .errors import NotInterior
from .lorentz import BlockVec, block_det
from .roundoff import RoundingContext, to_mp, tree_reduce


def _native_ops():
    return (lambda a, b: float(a @ b)), np.sqrt


def _rounded_ops():
    return (lambda a, b: tree_reduce(a * b)), gmpy2.sqrt


class _Native:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _setup(ctx, *blocks):
    """Inputs, operator pair and context manager for native or rounded mode."""
    if ctx is None:
        arrays = [np.asarray(b, dtype=float) for b in blocks]
        return arrays, _native_ops(), _Native()
    return [to_mp(b) for b in blocks], _rounded_ops(), ctx.arith()


def _J(x):
    y = -x
    y[0] = x[0]
    return y


# Per-block native formulas


def gradient_block(xi: np.ndarray) -> np.ndarray:
    d = block_det(xi)
    if d <= 0 or xi[0] <= 0:
        raise NotInterior("block is not interior")
    return -2.0 * _J(np.asarray(xi, dtype=float)) / d


def hessian_block(xi: np.ndarray) -> np.ndarray:
    """Dense Hessian of ``-ln det`` at an interior block."""
    xi = np.asarray(xi, dtype=float)
    d = block_det(xi)
    if d <= 0 or xi[0] <= 0:
        raise NotInterior("block is not interior")
    jx = _J(xi)
    J = np.diag(np.r_[1.0, -np.ones(xi.shape[0] - 1)])
    return (2.0 / d) * (2.0 * np.outer(jx, jx) / d - J)


def hessian_inv_block(xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    d = block_det(xi)
    if d <= 0 or xi[0] <= 0:
        raise NotInterior("block is not interior")
    J = np.diag(np.r_[1.0, -np.ones(xi.shape[0] - 1)])
    return np.outer(xi, xi) - 0.5 * d * J


def inv_sqrt_hessian_block(xi, ctx: RoundingContext | None = None):
    """``H(x_i)^{-1/2}``, the symmetric square root of ``x x^T - (d/2) J``."""
    (x,), (dot, sqrt), mode = _setup(ctx, xi)
    with mode:
        x0, xb = x[0], x[1:]
        d = x0 * x0 - dot(xb, xb)
        if d <= 0 or x0 <= 0:
            raise NotInterior("block is not interior")
        rd = sqrt(d)
        k = x.shape[0]
        M = np.empty((k, k), dtype=x.dtype)
        M[0, 0] = x0
        M[0, 1:] = xb
        M[1:, 0] = xb
        M[1:, 1:] = np.outer(xb, xb) / (rd + x0)
        for i in range(1, k):
            M[i, i] = M[i, i] + rd
        return M / sqrt(2)


@dataclass
class ScalingBlock:
    """NT scaling data of one block pair ``(x_i, s_i)``."""

    gamma: object  # (det s / det x)^(1/4)
    xi: np.ndarray  # (s_0/gamma + gamma x_0, sbar/gamma - gamma xbar)
    det_xi: object
    alpha: object  # xi_0 / sqrt(det xi)
    zeta: np.ndarray  # xibar / sqrt(det xi)
    det_x: object
    det_s: object


def _scaling(x, s, dot, sqrt) -> ScalingBlock:
    dx = x[0] * x[0] - dot(x[1:], x[1:])
    ds = s[0] * s[0] - dot(s[1:], s[1:])
    if dx <= 0 or ds <= 0 or x[0] <= 0 or s[0] <= 0:
        raise NotInterior("scaling needs interior blocks")
    gam = sqrt(sqrt(ds / dx))
    xi = np.empty_like(x)
    xi[0] = s[0] / gam + gam * x[0]
    xi[1:] = s[1:] / gam - gam * x[1:]
    dxi = xi[0] * xi[0] - dot(xi[1:], xi[1:])
    rt = sqrt(dxi)
    return ScalingBlock(gam, xi, dxi, xi[0] / rt, xi[1:] / rt, dx, ds)


def scaling_block(xi, si, ctx: RoundingContext | None = None) -> ScalingBlock:
    (x, s), (dot, sqrt), mode = _setup(ctx, xi, si)
    with mode:
        return _scaling(x, s, dot, sqrt)


def _w_matrix(sb: ScalingBlock, dtype):
    k = sb.zeta.shape[0] + 1
    M = np.empty((k, k), dtype=dtype)
    M[0, 0] = sb.alpha
    M[0, 1:] = -sb.zeta
    M[1:, 0] = -sb.zeta
    M[1:, 1:] = np.outer(sb.zeta, sb.zeta) / (1 + sb.alpha)
    for i in range(1, k):
        M[i, i] = M[i, i] + 1
    return M / sb.gamma


def nt_inv_sqrt_block(xi, si, ctx: RoundingContext | None = None):
    """Block of ``H(w)^{-1/2}`` for the NT scaling point of ``(x_i, s_i)``."""
    (x, s), (dot, sqrt), mode = _setup(ctx, xi, si)
    with mode:
        return _w_matrix(_scaling(x, s, dot, sqrt), x.dtype)


def _q(x, s, sb: ScalingBlock, mu_bar, sqrt):
    rt = sqrt(sb.det_xi)
    q = np.empty_like(x)
    lam0 = rt / 2
    lam_bar = ((s[0] + sb.gamma * rt / 2) * x[1:] + (rt / (2 * sb.gamma) + x[0]) * s[1:]) / (rt + sb.xi[0])
    ratio = 2 * mu_bar / sqrt(sb.det_x * sb.det_s)
    q[0] = -lam0 * (1 - ratio)
    q[1:] = -lam_bar * (1 + ratio)
    return q


def nt_q_block(xi, si, mu_bar, ctx: RoundingContext | None = None):
    """Closed form of the block ``-H(w)^{-1/2} (mu_bar g(x) + s)``.

    With ``lam = H(w)^{-1/2} s`` one has ``det lam = sqrt(det x det s)`` and the
    block equals ``-(lam + mu_bar g(lam))``.
    """
    (x, s), (dot, sqrt), mode = _setup(ctx, xi, si)
    with mode:
        if ctx is not None and not isinstance(mu_bar, type(gmpy2.mpfr(0))):
            mu_bar = gmpy2.mpfr(float(mu_bar), 53)
        if mu_bar <= 0:
            raise ValueError("mu_bar must be positive")
        return _q(x, s, _scaling(x, s, dot, sqrt), mu_bar, sqrt)


def nt_block_pair(xi, si, mu_bar, ctx: RoundingContext | None = None):
    """Both ``H(w)^{-1/2}`` and the ``q`` block, sharing the scaling data."""
    (x, s), (dot, sqrt), mode = _setup(ctx, xi, si)
    with mode:
        if ctx is not None and not isinstance(mu_bar, type(gmpy2.mpfr(0))):
            mu_bar = gmpy2.mpfr(float(mu_bar), 53)
        sb = _scaling(x, s, dot, sqrt)
        return _w_matrix(sb, x.dtype), _q(x, s, sb, mu_bar, sqrt)


def scaling_point_block(xi, si) -> np.ndarray:
    """Explicit ``w_i`` with ``H(w_i) x_i = s_i`` (native precision)."""
    W = nt_inv_sqrt_block(xi, si)
    P = W @ W  # equals w w^T - (det w / 2) J
    b = P[0, 1:]
    nb = np.linalg.norm(b)
    plus = np.sqrt(2.0 * (P[0, 0] + nb))
    minus = np.sqrt(max(2.0 * (P[0, 0] - nb), 0.0))
    w = np.zeros_like(np.asarray(xi, dtype=float))
    w[0] = 0.5 * (plus + minus)
    if nb > 0:
        w[1:] = 0.5 * (plus - minus) * b / nb
    return w


# Vector level


@dataclass
class BarrierEval:
    value: float
    gradient: BlockVec
    dets: np.ndarray


def evaluate(x: BlockVec) -> BarrierEval:
    d = np.array([block_det(b) for b in x.blocks()])
    if np.any(d <= 0) or np.any(x.data[x.cone.heads] <= 0):
        raise NotInterior("point is not interior")
    return BarrierEval(float(-np.sum(np.log(d))), gradient(x), d)


def barrier_value(x: BlockVec) -> float:
    return evaluate(x).value


def gradient(x: BlockVec) -> BlockVec:
    return BlockVec(x.cone, np.concatenate([gradient_block(b) for b in x.blocks()]))


def hessian_apply(x: BlockVec, v: BlockVec) -> BlockVec:
    """``H(x) v`` without forming the Hessian."""
    out = []
    for xb, vb in zip(x.blocks(), v.blocks()):
        d = block_det(xb)
        if d <= 0 or xb[0] <= 0:
            raise NotInterior("point is not interior")
        jx, jv = _J(xb), _J(vb)
        out.append((2.0 / d) * (2.0 * jx * (jx @ vb) / d - jv))
    return BlockVec(x.cone, np.concatenate(out))


def hessian_inv_apply(x: BlockVec, v: BlockVec) -> BlockVec:
    out = []
    for xb, vb in zip(x.blocks(), v.blocks()):
        d = block_det(xb)
        if d <= 0 or xb[0] <= 0:
            raise NotInterior("point is not interior")
        out.append(xb * (xb @ vb) - 0.5 * d * _J(vb))
    return BlockVec(x.cone, np.concatenate(out))


def local_norm(v: BlockVec, x: BlockVec) -> float:
    """``sqrt(v^T H(x) v)``."""
    return float(np.sqrt(max(v.data @ hessian_apply(x, v).data, 0.0)))


def dual_local_norm(v: BlockVec, x: BlockVec) -> float:
    """``sqrt(v^T H(x)^{-1} v)``."""
    return float(np.sqrt(max(v.data @ hessian_inv_apply(x, v).data, 0.0)))


def scaling_point(x: BlockVec, s: BlockVec) -> BlockVec:
    return BlockVec(x.cone, np.concatenate([scaling_point_block(a, b) for a, b in zip(x.blocks(), s.blocks())]))


def identity_point(cone) -> BlockVec:
    """``e``: unit heads, zero tails."""
    return BlockVec(cone, cone.identity())
