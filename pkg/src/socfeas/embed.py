"""Homogeneous embedding of the feasibility pair and certificate recovery.

For ``A`` of shape ``m x N`` (``N`` the ambient dimension of ``K``) the
embedding works over ``K x L_N x L_m`` with variables

    xvec = (x, t, x', tau, x''),  yvec = (y, y', -eta),  svec = (s, t_s, s', tau_s, s'')

and constraint matrix

    calA = [[ A,   0, 0,   0, I_m],
            [-I_N, 0, I_N, 0, 0  ],
            [ 0,   1, 0,   0, 0  ]]

with ``b = (0, ..., 0, 1)`` and ``c`` the indicator of the ``tau`` slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .barrier import hessian_inv_block
from .errors import DegenerateStart, SingularNormalMatrix, ZeroBlock
from .lorentz import BlockVec, ConeStructure, ExtendedConeStructure, interior_margin

BETA = 1.0 / 15.0


def normalize_blocks(A_raw, cone: ConeStructure):
    """Scale every block column group to Frobenius norm ``1/sqrt(r)``.

    Returns ``(A, scales)`` with ``A_i = scales[i] * A_raw_i``. A solution
    ``x`` of the scaled problem maps back through ``x_i -> scales[i] * x_i``
    (dual vectors ``y`` are unchanged).
    """
    A_raw = np.asarray(A_raw, dtype=float)
    if A_raw.ndim != 2 or A_raw.shape[1] != cone.ambient_dim:
        raise ValueError(f"A must have {cone.ambient_dim} columns, got shape {A_raw.shape}")
    A = A_raw.copy()
    scales = np.empty(cone.r)
    target = 1.0 / np.sqrt(cone.r)
    for i, sl in enumerate(cone.slices):
        nrm = np.linalg.norm(A_raw[:, sl])
        if nrm == 0.0:
            raise ZeroBlock(f"block {i} of A is zero")
        lam = 1.0 if abs(nrm - target) <= 1e-15 * target else target / nrm
        A[:, sl] *= lam
        scales[i] = lam
    return A, scales


def unscale_primal(x: np.ndarray, scales: np.ndarray, cone: ConeStructure) -> np.ndarray:
    out = np.array(x, dtype=float)
    for lam, sl in zip(scales, cone.slices):
        out[sl] *= lam
    return out


@dataclass
class Embedding:
    """``calA``, ``b``, ``c`` and index bookkeeping for one instance."""

    A: np.ndarray
    cone: ConeStructure
    ext: ExtendedConeStructure = field(init=False)
    calA: np.ndarray = field(init=False)
    b: np.ndarray = field(init=False)
    c: np.ndarray = field(init=False)

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        m, N = self.A.shape
        if N != self.cone.ambient_dim:
            raise ValueError("column count of A does not match the cone")
        self.ext = ExtendedConeStructure(self.cone, m)
        C = np.zeros((self.mm, self.nn))
        C[:m, :N] = self.A
        C[:m, 2 * N + 2 :] = np.eye(m)
        C[m : m + N, :N] = -np.eye(N)
        C[m : m + N, N + 1 : 2 * N + 1] = np.eye(N)
        C[m + N, N] = 1.0
        self.calA = C
        self.b = np.zeros(self.mm)
        self.b[-1] = 1.0
        self.c = np.zeros(self.nn)
        self.c[self.i_tau] = 1.0

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @property
    def mm(self) -> int:
        """Row count of ``calA``: ``m + N + 1``."""
        return self.m + self.N + 1

    @property
    def nn(self) -> int:
        """Column count of ``calA``: ``2N + m + 2``."""
        return 2 * self.N + self.m + 2

    @property
    def rr(self) -> int:
        return self.ext.rr

    @property
    def structure(self) -> ConeStructure:
        return self.ext.structure

    # positions inside xvec / svec
    @property
    def sl_x(self):
        return slice(0, self.N)

    @property
    def i_t(self):
        return self.N

    @property
    def sl_xp(self):
        return slice(self.N + 1, 2 * self.N + 1)

    @property
    def i_tau(self):
        return 2 * self.N + 1

    @property
    def sl_xpp(self):
        return slice(2 * self.N + 2, self.nn)

    # positions inside yvec
    @property
    def sl_y(self):
        return slice(0, self.m)

    @property
    def sl_yp(self):
        return slice(self.m, self.m + self.N)

    @property
    def e(self) -> np.ndarray:
        return self.cone.identity()


def build_embedding(A, cone: ConeStructure) -> Embedding:
    return Embedding(np.asarray(A, dtype=float), cone)


@dataclass
class Iterate:
    """A primal-dual point of the embedded pair."""

    emb: Embedding
    xvec: np.ndarray
    yvec: np.ndarray
    svec: np.ndarray

    def copy(self) -> "Iterate":
        return Iterate(self.emb, self.xvec.copy(), self.yvec.copy(), self.svec.copy())

    @property
    def x(self):
        return self.xvec[self.emb.sl_x]

    @property
    def t(self):
        return self.xvec[self.emb.i_t]

    @property
    def xp(self):
        return self.xvec[self.emb.sl_xp]

    @property
    def tau(self):
        return self.xvec[self.emb.i_tau]

    @property
    def xpp(self):
        return self.xvec[self.emb.sl_xpp]

    @property
    def y(self):
        return self.yvec[self.emb.sl_y]

    @property
    def yp(self):
        return self.yvec[self.emb.sl_yp]

    @property
    def eta(self):
        return -self.yvec[-1]

    @property
    def s(self):
        return self.svec[self.emb.sl_x]

    @property
    def ts(self):
        return self.svec[self.emb.i_t]

    @property
    def sp(self):
        return self.svec[self.emb.sl_xp]

    @property
    def taus(self):
        return self.svec[self.emb.i_tau]

    @property
    def spp(self):
        return self.svec[self.emb.sl_xpp]

    def x_block(self) -> BlockVec:
        return BlockVec(self.emb.structure, self.xvec)

    def s_block(self) -> BlockVec:
        return BlockVec(self.emb.structure, self.svec)

    def primal_residual(self) -> float:
        return float(np.linalg.norm(self.emb.calA @ self.xvec - self.emb.b))

    def dual_residual(self) -> float:
        E = self.emb
        return float(np.linalg.norm(E.calA.T @ self.yvec + self.svec - E.c))


def assemble(E: Embedding, x: np.ndarray, tau: float, yvec: np.ndarray) -> Iterate:
    """Complete an iterate from ``x``, ``tau`` and ``yvec``.

    The remaining entries follow from the linear constraints: ``t = 1``,
    ``x' = x``, ``x'' = -A x`` and ``svec = c - calA^T yvec``.
    """
    xvec = np.concatenate([x, [1.0], x, [tau], -(E.A @ x)])
    yvec = np.asarray(yvec, dtype=float)
    svec = E.c - E.calA.T @ yvec
    return Iterate(E, xvec, yvec, svec)


def initial_scale(E: Embedding, beta: float = BETA) -> tuple[float, float]:
    """Return ``(alpha, M)`` with ``alpha = 1/sqrt(r+1)`` and ``M = alpha |Ae| / beta``."""
    alpha = 1.0 / np.sqrt(E.cone.r + 1)
    M = alpha * float(np.linalg.norm(E.A @ E.e)) / beta
    return alpha, M


def initial_point(E: Embedding, beta: float = BETA) -> Iterate:
    """A feasible starting point in the central neighborhood.

    ``x = alpha e`` and ``x'' = -alpha A e`` make the (tau, x'') block
    dominated by ``tau = 2M``; the dual part ``y = 0, y' = (2M/alpha) e,
    eta = 2M/alpha^2`` makes every other block exactly centered, with
    ``mu = M``.
    """
    alpha, M = initial_scale(E, beta)
    if M == 0.0:
        raise DegenerateStart("A e = 0")
    e = E.e
    yvec = np.concatenate([np.zeros(E.m), (2.0 * M / alpha) * e, [-2.0 * M / alpha**2]])
    return assemble(E, alpha * e, 2.0 * M, yvec)


def recover_dual(z: Iterate) -> np.ndarray:
    return z.y.copy()


def associated_solution(A: np.ndarray, cone: ConeStructure, x: np.ndarray) -> np.ndarray:
    """``x - H(x)^{-1} A^T (A H(x)^{-1} A^T)^{-1} A x`` in native precision."""
    x = np.asarray(x, dtype=float)
    HiAt = np.empty((A.shape[1], A.shape[0]))
    for sl in cone.slices:
        HiAt[sl] = hessian_inv_block(x[sl]) @ A[:, sl].T
    G = A @ HiAt
    if not np.all(np.isfinite(G)) or np.linalg.cond(G) > 1e14:
        raise SingularNormalMatrix("A H(x)^{-1} A^T is singular")
    return x - HiAt @ np.linalg.solve(G, A @ x)


def recover_primal(z: Iterate) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x_hat, x_assoc)``: the iterate's ``x`` and its associated solution."""
    E = z.emb
    x_hat = z.x.copy()
    return x_hat, associated_solution(E.A, E.cone, x_hat)


@dataclass
class CertificateCheck:
    """Result of checking a certificate in native precision."""

    ok: bool
    margins: np.ndarray
    residual: float = 0.0
    forward_error: float = 0.0
    x_assoc: np.ndarray | None = None


def block_margins(v: np.ndarray, cone: ConeStructure) -> np.ndarray:
    return np.array([interior_margin(v[sl]) for sl in cone.slices])


def verify_dual(A, cone: ConeStructure, y) -> CertificateCheck:
    """Check that ``-A^T y`` is strictly inside ``K``."""
    mg = block_margins(-(np.asarray(A).T @ np.asarray(y, dtype=float)), cone)
    return CertificateCheck(bool(np.all(mg > 0)), mg)


def verify_primal(A, cone: ConeStructure, x_hat, gamma: float, rtol: float = 1e-10) -> CertificateCheck:
    """Check that ``x_hat`` is a strict ``gamma``-forward solution of ``A x = 0``.

    ``x_hat`` must be interior, its associated solution must be interior with
    ``|A x_assoc| <= rtol |A| |x_assoc|``, and ``|x_hat - x_assoc| <= gamma |x_hat|``.
    """
    A = np.asarray(A, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    mg = block_margins(x_hat, cone)
    if not np.all(mg > 0):
        return CertificateCheck(False, mg)
    try:
        xa = associated_solution(A, cone, x_hat)
    except SingularNormalMatrix:
        return CertificateCheck(False, mg)
    res = float(np.linalg.norm(A @ xa))
    fwd = float(np.linalg.norm(x_hat - xa))
    ok = (
        res <= rtol * np.linalg.norm(A, 2) * np.linalg.norm(xa)
        and np.all(block_margins(xa, cone) > 0)
        and fwd <= gamma * np.linalg.norm(x_hat)
    )
    return CertificateCheck(bool(ok), mg, res, fwd, xa)
