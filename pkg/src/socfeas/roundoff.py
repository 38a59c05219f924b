"""Simulated p-bit floating point arithmetic.

Values are carried as MPFR numbers (through gmpy2) inside numpy object
arrays. Every arithmetic operation performed while a :class:`RoundingContext`
is active rounds its result to ``p`` significand bits with round-to-nearest-
even and an unbounded exponent range. Sums use pairwise (tree) reduction so
the accumulated error depth is ``ceil(log2 n)``.

Conversion of native floats into the simulation is exact: a double is stored
with 53 bits regardless of ``p`` and only rounded when it takes part in an
operation (or through :func:`round_scalar`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .errors import LengthMismatch, NegativeInput, PrecisionTooCoarse, RankDeficient, ShapeMismatch


@dataclass(frozen=True)
class RoundingContext:
    """Unit roundoff ``u = 2^-p`` for a ``p``-bit significand."""

    mantissa_bits: int

    def __post_init__(self):
        p = int(self.mantissa_bits)
        if p < 2:
            raise ValueError("need at least 2 significand bits")
        object.__setattr__(self, "mantissa_bits", p)

    @classmethod
    def from_unit_roundoff(cls, u: float) -> "RoundingContext":
        if not 0.0 < u < 1.0:
            raise ValueError("unit roundoff must lie in (0, 1)")
        return cls(max(2, math.ceil(-math.log2(u))))

    @property
    def unit_roundoff(self) -> float:
        return 2.0 ** (-self.mantissa_bits)

    def refined(self, extra_bits: int) -> "RoundingContext":
        return RoundingContext(self.mantissa_bits + int(extra_bits))

    def arith(self):
        """A gmpy2 context manager that rounds to this precision."""
        return gmpy2.context(precision=self.mantissa_bits, round=gmpy2.RoundToNearest)


_exact = np.frompyfunc(lambda v: mpfr(v, 53), 1, 1)
_to_float = np.frompyfunc(float, 1, 1)
_ZERO = mpfr(0)


def to_mp(a) -> np.ndarray:
    """Exact conversion of a float array (or scalar) into an object array."""
    a = np.asarray(a)
    if a.dtype == object:
        return a
    return _exact(a.astype(float)) if a.ndim else np.array(mpfr(float(a), 53), dtype=object)


def to_float(a) -> np.ndarray:
    """Round simulated values to the nearest double."""
    a = np.asarray(a)
    if a.dtype != object:
        return a.astype(float)
    return _to_float(a).astype(float) if a.ndim else np.asarray(float(a.item()))


def round_scalar(x, ctx: RoundingContext):
    """Round one number to ``ctx`` precision."""
    with ctx.arith():
        return gmpy2.mpfr(x) if not isinstance(x, type(_ZERO)) else +x


def tree_reduce(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """Pairwise sum along ``axis``; uses the active rounding."""
    a = np.asarray(a, dtype=object)
    if axis != 0:
        a = np.moveaxis(a, axis, 0)
    if a.shape[0] == 0:
        return np.full(a.shape[1:], _ZERO, dtype=object) if a.ndim > 1 else _ZERO
    while a.shape[0] > 1:
        paired = a[0:-1:2] + a[1::2]
        if a.shape[0] % 2:
            paired = np.concatenate([paired, a[-1:]], axis=0)
        a = paired
    return a[0]


def rsum(x, ctx: RoundingContext):
    """Rounded pairwise sum."""
    x = to_mp(np.ravel(x))
    with ctx.arith():
        return tree_reduce(x)


def rdot(x, y, ctx: RoundingContext):
    """Rounded inner product: rounded products followed by a pairwise sum."""
    x, y = to_mp(np.ravel(x)), to_mp(np.ravel(y))
    if x.shape != y.shape:
        raise LengthMismatch(f"lengths {x.shape[0]} and {y.shape[0]} differ")
    with ctx.arith():
        return tree_reduce(x * y)


def rmatvec(M, v, ctx: RoundingContext) -> np.ndarray:
    M, v = to_mp(M), to_mp(v)
    if M.ndim != 2 or v.ndim != 1 or M.shape[1] != v.shape[0]:
        raise ShapeMismatch(f"cannot multiply {M.shape} by {v.shape}")
    with ctx.arith():
        return tree_reduce(M * v[None, :], axis=1)


def rmatmul(M, N, ctx: RoundingContext) -> np.ndarray:
    M, N = to_mp(M), to_mp(N)
    if M.ndim != 2 or N.ndim != 2 or M.shape[1] != N.shape[0]:
        raise ShapeMismatch(f"cannot multiply {M.shape} by {N.shape}")
    with ctx.arith():
        return tree_reduce(M[:, :, None] * N[None, :, :], axis=1)


def rsqrt(x, ctx: RoundingContext):
    x = x if isinstance(x, type(_ZERO)) else mpfr(float(x), 53)
    if x < 0:
        raise NegativeInput(f"square root of {x}")
    with ctx.arith():
        return gmpy2.sqrt(x)


def gamma_of(n: int, ctx: RoundingContext) -> float:
    """``gamma_n = n u / (1 - n u)``."""
    nu = n * ctx.unit_roundoff
    if nu >= 0.5:
        raise PrecisionTooCoarse(f"n u = {nu} is not below 1/2")
    return nu / (1.0 - nu)


def log2_depth(n: int) -> int:
    """``ceil(log2 n)`` for ``n >= 1`` and 0 otherwise."""
    return 0 if n <= 1 else (int(n) - 1).bit_length()


@dataclass
class LeastSquaresResult:
    """Outcome of :func:`golub_lls`."""

    v: np.ndarray  # minimizer, simulated values
    r_diag: np.ndarray  # diagonal of R, simulated values
    R: np.ndarray  # upper triangular factor, simulated values


def householder_r(B, ctx: RoundingContext, q=None):
    """Rounded Householder triangularization of ``B`` (and ``q`` alongside).

    Returns the ``m x m`` upper triangle of ``R`` and ``Q^T q``.
    """
    R = to_mp(B).copy()
    if R.ndim != 2:
        raise ShapeMismatch("expected a matrix")
    n, m = R.shape
    if n < m:
        raise ShapeMismatch(f"need at least as many rows as columns, got {R.shape}")
    qt = None if q is None else to_mp(q).copy()
    if qt is not None and qt.shape != (n,):
        raise ShapeMismatch(f"right-hand side has shape {qt.shape}, expected ({n},)")
    with ctx.arith():
        for j in range(m):
            col = R[j:, j]
            nrm = gmpy2.sqrt(tree_reduce(col * col))
            if nrm == 0:
                continue
            alpha = -nrm if col[0] >= 0 else nrm
            v = col.copy()
            v[0] = col[0] - alpha
            scale = 2 / tree_reduce(v * v)
            if j + 1 < m:
                w = tree_reduce(v[:, None] * R[j:, j + 1 :], axis=0) * scale
                R[j:, j + 1 :] = R[j:, j + 1 :] - v[:, None] * w[None, :]
            if qt is not None:
                qt[j:] = qt[j:] - v * (tree_reduce(v * qt[j:]) * scale)
            R[j, j] = alpha
            R[j + 1 :, j] = _ZERO
    return R[:m, :], qt


def back_substitute(R, b, ctx: RoundingContext) -> np.ndarray:
    """Solve ``R v = b`` for upper triangular ``R`` under rounding."""
    m = R.shape[0]
    v = np.empty(m, dtype=object)
    with ctx.arith():
        for i in range(m - 1, -1, -1):
            acc = b[i] - tree_reduce(R[i, i + 1 :] * v[i + 1 :]) if i + 1 < m else +b[i]
            v[i] = acc / R[i, i]
    return v


def golub_lls(B, q, ctx: RoundingContext) -> LeastSquaresResult:
    """Minimize ``|B v + q|`` by Householder QR under rounding.

    Raises :class:`RankDeficient` when a pivot of ``R`` falls below
    ``u |B|_F max(B.shape)``.
    """
    B = to_mp(B)
    n, m = B.shape
    if np.asarray(q).shape != (n,):
        raise ShapeMismatch(f"right-hand side has shape {np.shape(q)}, expected ({n},)")
    bnorm = float(np.linalg.norm(to_float(B)))
    R, qt = householder_r(B, ctx, to_mp(q))
    diag = np.array([R[i, i] for i in range(m)], dtype=object)
    tol = ctx.unit_roundoff * bnorm * max(n, m)
    if m and min(abs(float(d)) for d in diag) <= tol:
        raise RankDeficient(f"pivot below {tol:.3e}")
    with ctx.arith():
        rhs = -qt[:m]
    v = back_substitute(R, rhs, ctx)
    return LeastSquaresResult(v=v, r_diag=diag, R=R)
