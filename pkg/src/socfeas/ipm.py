"""Short-step primal-dual interior-point method in simulated precision.

Each iteration sets the working precision from the current duality measure
``mu``, tests the dual and primal stopping rules, and takes one NT Newton
step toward ``mu_bar = (1 - delta / sqrt(2 rr)) mu``. The Newton system is
solved as the least-squares problem ``min |B dy + q|`` with
``B = H(w)^{-1/2} calA^T`` and ``q = -H(w)^{-1/2} (mu_bar g(x) + s)``, both
formed and solved with rounded arithmetic. The remaining updates run in
native double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import roundoff as ro
from .barrier import gradient_block, hessian_inv_block, inv_sqrt_hessian_block, nt_block_pair, nt_inv_sqrt_block
from .embed import (
    Embedding,
    Iterate,
    assemble,
    build_embedding,
    initial_point,
    normalize_blocks,
    recover_dual,
    recover_primal,
    unscale_primal,
    verify_dual,
    verify_primal,
)
from .errors import NotInterior, StepRejected
from .lorentz import ConeStructure
from .roundoff import RoundingContext, golub_lls, householder_r, rdot, rsqrt, to_float, to_mp

# Extra bits used when re-evaluating the normal-equation residual.
RESIDUAL_GUARD_BITS = 64


def constants_hold(beta: float, delta: float, rr: int) -> bool:
    """Whether ``(beta, delta)`` satisfy the short-step constant conditions for ``rr`` blocks."""
    lhs = 7.0 * (beta**2 + delta**2) / (1.0 - beta)
    return lhs < (1.0 - delta / math.sqrt(rr)) * beta and 2.0 * math.sqrt(2.0) * beta / (1.0 - beta) <= 1.0


@dataclass(frozen=True)
class SolverConfig:
    beta: float = 1.0 / 15.0
    delta: float = 1.0 / 45.0
    gamma_fw: float = 0.1
    schedule_constant: float = 1e6
    fixed_bits: int | None = None  # None selects the variable-precision schedule
    max_iterations: int = 20000
    refine_bits: int = 8
    keep_iterates: bool = False

    def __post_init__(self):
        # rr = r + 2 >= 3 and the right-hand side grows with rr
        if not constants_hold(self.beta, self.delta, 3):
            raise ValueError(f"beta={self.beta}, delta={self.delta} violate the step constants")
        if not 0.0 < self.gamma_fw < 1.0:
            raise ValueError("gamma_fw must lie in (0, 1)")
        if self.schedule_constant <= 0:
            raise ValueError("schedule_constant must be positive")
        if self.fixed_bits is not None and self.fixed_bits < 2:
            raise ValueError("fixed_bits must be at least 2")

    @property
    def mode(self) -> str:
        return "variable_precision" if self.fixed_bits is None else "fixed_precision"


@dataclass
class IterationRecord:
    index: int
    mu: float
    proximity: float
    unit_roundoff: float
    mantissa_bits: int
    min_dual_margin: float
    sigma_min_primal: float
    mu_bar: float = float("nan")
    residual_norm: float = float("nan")
    dy_norm: float = float("nan")
    retried: bool = False


@dataclass
class Outcome:
    status: str  # "primal", "dual", "precision_exceeded" or "iteration_limit"
    trace: list[IterationRecord]
    cone: ConeStructure
    A: np.ndarray  # block-normalized data
    scales: np.ndarray
    config: SolverConfig
    y: np.ndarray | None = None
    x_hat: np.ndarray | None = None  # normalized coordinates
    x_assoc: np.ndarray | None = None
    c_u: float | None = None
    unsound_stops: int = 0
    iterates: list[Iterate] | None = None

    @property
    def iterations(self) -> int:
        """Number of Newton steps taken."""
        return sum(1 for rec in self.trace if not math.isnan(rec.mu_bar))

    @property
    def max_bits(self) -> int:
        return max((rec.mantissa_bits for rec in self.trace), default=0)

    @property
    def x_hat_raw(self) -> np.ndarray | None:
        return None if self.x_hat is None else unscale_primal(self.x_hat, self.scales, self.cone)


def mu_of(z: Iterate) -> float:
    return float(z.xvec @ z.svec) / (2.0 * z.emb.rr)


def proximity(z: Iterate) -> float:
    """``|s + mu g(x)|`` in the ``H(x)^{-1}`` norm, divided by ``mu``."""
    mu = mu_of(z)
    total = 0.0
    for sl in z.emb.structure.slices:
        xb = z.xvec[sl]
        v = z.svec[sl] + mu * gradient_block(xb)
        total += v @ hessian_inv_block(xb) @ v
    return float(math.sqrt(max(total, 0.0)) / mu)


def schedule_value(mu: float, nn: int, rr: int, schedule_constant: float = 1e6) -> float:
    """``phi(mu) = mu^{7/2} / (c rr nn^{5/2} (2 rr mu + 1)^{11/2})``."""
    log_phi = 3.5 * math.log(mu) - (
        math.log(schedule_constant) + math.log(rr) + 2.5 * math.log(nn) + 5.5 * math.log1p(2.0 * rr * mu)
    )
    return math.exp(log_phi) if log_phi > -700 else 0.0


def precision_schedule(mu: float, E: Embedding, cfg: SolverConfig) -> tuple[RoundingContext, bool]:
    """Working precision for the current ``mu`` and whether a fixed precision is exhausted."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    log_phi = 3.5 * math.log(mu) - (
        math.log(cfg.schedule_constant) + math.log(E.rr) + 2.5 * math.log(E.nn) + 5.5 * math.log1p(2.0 * E.rr * mu)
    )
    log2_u = min(log_phi / math.log(2.0), -2.0)
    if cfg.fixed_bits is not None:
        return RoundingContext(cfg.fixed_bits), log2_u < -cfg.fixed_bits
    return RoundingContext(max(2, math.ceil(-log2_u - 1e-12))), False


def critical_unit_roundoff(C: float, n_plus_m: int, rr: int, schedule_constant: float = 1e6) -> float:
    """``u*(C) = 1 / (c (n+m)^{5/2} rr^{11.5} C^{7/2})``."""
    return 1.0 / (schedule_constant * n_plus_m**2.5 * rr**11.5 * C**3.5)


def condition_lower_bound(u_fixed: float, n_plus_m: int, rr: int, schedule_constant: float = 1e6) -> float:
    """``C_u = (c (n+m)^{5/2} rr^{11.5} u)^{-2/7}``: the inverse of :func:`critical_unit_roundoff`."""
    if not 0.0 < u_fixed < 1.0:
        raise ValueError("u_fixed must lie in (0, 1)")
    return (schedule_constant * n_plus_m**2.5 * rr**11.5 * u_fixed) ** (-2.0 / 7.0)


def _blocks_of_B(z: Iterate, mu_bar: float, ctx: RoundingContext):
    """``B = H(w)^{-1/2} calA^T`` and ``q`` under ``ctx``.

    Only the products ``W_i A_i^T`` need rounded arithmetic; every other entry
    of ``B`` is a copy or negation of an entry of ``W``.
    """
    E = z.emb
    m, N = E.m, E.N
    nn, mm = E.nn, E.mm
    B = np.full((nn, mm), ro._ZERO, dtype=object)
    q = np.empty(nn, dtype=object)
    A_mp = to_mp(E.A)
    slices = E.structure.slices
    r = E.cone.r
    for i, sl in enumerate(slices):
        W, qi = nt_block_pair(z.xvec[sl], z.svec[sl], mu_bar, ctx)
        q[sl] = qi
        if i < r:
            B[sl, :m] = ro.rmatmul(W, A_mp[:, sl].T, ctx)
            B[sl, m + sl.start : m + sl.stop] = -W
        elif i == r:  # (t, x') block: columns y' and the last entry of yvec
            B[sl, m : m + N] = W[:, 1:]
            B[sl, mm - 1] = W[:, 0]
        else:  # (tau, x'') block: columns y
            B[sl, :m] = W[:, 1:]
    return B, q


@dataclass
class StepInfo:
    dy_norm: float
    residual_norm: float
    mantissa_bits: int


def normal_residual(z: Iterate, mu_bar: float, dy, ctx: RoundingContext) -> float:
    """``|calA H(w)^{-1} calA^T dy - calA H(w)^{-1} (s + mu_bar g(x))|``.

    Evaluated with :data:`RESIDUAL_GUARD_BITS` extra bits so the value reflects
    the computed ``dy`` rather than the evaluation itself. It equals
    ``|B^T (B dy + q)|``.
    """
    hi = ctx.refined(RESIDUAL_GUARD_BITS)
    B, q = _blocks_of_B(z, mu_bar, hi)
    dy = to_mp(dy)
    with hi.arith():
        res = ro.rmatvec(B, dy, hi) + q
        out = ro.rmatvec(B.T.copy(), res, hi)
    return float(np.linalg.norm(to_float(out)))


def newton_step(z: Iterate, mu_bar: float, ctx: RoundingContext) -> tuple[Iterate, StepInfo]:
    """One NT step: rounded least squares for ``dy``, native updates afterwards."""
    E = z.emb
    B, q = _blocks_of_B(z, mu_bar, ctx)
    lls = golub_lls(B, q, ctx)
    res = normal_residual(z, mu_bar, lls.v, ctx)
    dy = to_float(lls.v)

    # native: dx = H(w)^{-1} calA^T dy - (mu_bar g(s) + x), keep the x and tau parts
    v = E.calA.T @ dy
    dx = np.empty(E.nn)
    for sl in E.structure.slices:
        W = nt_inv_sqrt_block(z.xvec[sl], z.svec[sl])
        dx[sl] = W @ (W @ v[sl]) - (mu_bar * gradient_block(z.svec[sl]) + z.xvec[sl])
    z_plus = assemble(E, z.x + dx[E.sl_x], z.tau + dx[E.i_tau], z.yvec + dy)
    return z_plus, StepInfo(float(np.linalg.norm(dy)), res, ctx.mantissa_bits)


def dual_margins(z: Iterate, ctx: RoundingContext) -> np.ndarray:
    """Rounded ``s_{i0} - |sbar_i|`` for the blocks of ``K``."""
    out = []
    for sl in z.emb.cone.slices:
        sb = z.s[sl]
        nrm = rsqrt(rdot(sb[1:], sb[1:], ctx), ctx)
        with ctx.arith():
            out.append(ro.mpfr(float(sb[0]), 53) - nrm)
    return np.array(out, dtype=object)


def dual_stop(z: Iterate, ctx: RoundingContext) -> bool:
    """``fl(s_{i0} - |sbar_i|) > fl(6 mu rr)`` for every block of ``K``."""
    margins = dual_margins(z, ctx)
    with ctx.arith():
        thresh = 6 * ro.mpfr(mu_of(z), 53) * z.emb.rr
    return bool(all(mg > thresh for mg in margins))


def primal_sigma_min(z: Iterate, ctx: RoundingContext) -> float:
    """``sigma_min(H(x)^{-1/2} A^T)`` from a rounded QR; 0 when ``m >= N``."""
    E = z.emb
    if E.m >= E.N:
        return 0.0
    A_mp = to_mp(E.A)
    D = np.empty((E.N, E.m), dtype=object)
    for sl in E.cone.slices:
        D[sl] = ro.rmatmul(inv_sqrt_hessian_block(z.x[sl], ctx), A_mp[:, sl].T, ctx)
    R, _ = householder_r(D, ctx)
    return float(np.linalg.svd(to_float(R), compute_uv=False).min())


def primal_stop(z: Iterate, ctx: RoundingContext, cfg: SolverConfig) -> bool:
    return _primal_test(primal_sigma_min(z, ctx), z, ctx, cfg)


def _primal_test(sigma: float, z: Iterate, ctx: RoundingContext, cfg: SolverConfig) -> bool:
    if sigma <= 0.0:
        return False
    with ctx.arith():
        thresh = 3 * z.emb.rr * ro.mpfr(mu_of(z), 53) / ro.mpfr(cfg.gamma_fw, 53)
    return bool(ro.mpfr(sigma, 53) >= thresh)


def solve(A_raw, cone: ConeStructure, cfg: SolverConfig | None = None) -> Outcome:
    """Decide which side of the homogeneous pair is strictly feasible."""
    cfg = cfg or SolverConfig()
    A, scales = normalize_blocks(A_raw, cone)
    E = build_embedding(A, cone)
    z = initial_point(E, cfg.beta)
    trace: list[IterationRecord] = []
    iterates: list[Iterate] | None = [] if cfg.keep_iterates else None
    out = Outcome("iteration_limit", trace, cone, A, scales, cfg, iterates=iterates)
    k = 0
    while True:
        mu = mu_of(z)
        ctx, exhausted = precision_schedule(mu, E, cfg)
        margins = dual_margins(z, ctx)
        sigma = primal_sigma_min(z, ctx)
        rec = IterationRecord(
            index=k,
            mu=mu,
            proximity=proximity(z),
            unit_roundoff=ctx.unit_roundoff,
            mantissa_bits=ctx.mantissa_bits,
            min_dual_margin=float(min(margins)),
            sigma_min_primal=sigma,
        )
        trace.append(rec)
        if iterates is not None:
            iterates.append(z.copy())
        if exhausted:
            out.status = "precision_exceeded"
            out.c_u = condition_lower_bound(ctx.unit_roundoff, E.N + E.m, E.rr, cfg.schedule_constant)
            return out
        if dual_stop(z, ctx):
            y = recover_dual(z)
            if verify_dual(A, cone, y).ok:
                out.status, out.y = "dual", y
                return out
            out.unsound_stops += 1
        if _primal_test(sigma, z, ctx, cfg):
            try:
                x_hat, x_assoc = recover_primal(z)
                ok = verify_primal(A, cone, x_hat, cfg.gamma_fw).ok
            except Exception:  # singular normal matrix counts as an unsound stop
                ok = False
            if ok:
                out.status, out.x_hat, out.x_assoc = "primal", x_hat, x_assoc
                return out
            out.unsound_stops += 1
        if k >= cfg.max_iterations:
            return out
        mu_bar = (1.0 - cfg.delta / math.sqrt(2.0 * E.rr)) * mu
        z, info, retried = _accepted_step(z, mu_bar, ctx, cfg)
        rec.mu_bar, rec.residual_norm, rec.dy_norm, rec.retried = mu_bar, info.residual_norm, info.dy_norm, retried
        k += 1


def _accepted_step(z, mu_bar, ctx, cfg):
    for attempt in range(2):
        try:
            z_plus, info = newton_step(z, mu_bar, ctx)
            ok = proximity(z_plus) <= cfg.beta
        except NotInterior:
            ok = False
        if ok:
            return z_plus, info, attempt > 0
        ctx = ctx.refined(cfg.refine_bits)
    raise StepRejected(f"step left the neighborhood at mu={mu_of(z):.3e}")


@dataclass
class MonitorReport:
    """Ratios ``value / bound`` of neighborhood bounds at one iterate; ``<= 1`` means satisfied."""

    ratios: dict[str, float] = field(default_factory=dict)

    def worst(self) -> tuple[str, float]:
        key = max(self.ratios, key=self.ratios.get)
        return key, self.ratios[key]


def lemma_monitors(z: Iterate, mu_bar: float, beta: float = 1.0 / 15.0) -> MonitorReport:
    """Evaluate the iterate bounds implied by membership in the neighborhood.

    Includes component bounds (slack 1.05), the duality-gap identity,
    complementarity lower bounds (slack 0.99), norms of ``H(w)^{+-1}``, the
    size of the scaled centering residual and the largest singular value of
    ``mu^{1/2} H(w)^{-1/2} calA^T``.
    """
    E = z.emb
    mu = mu_of(z)
    rr = E.rr
    nrm = np.linalg.norm
    R = {}
    R["x_norm"] = nrm(z.x) / 1.05
    R["xp_equals_x"] = nrm(z.x - z.xp) / (1e-12 * max(1.0, nrm(z.x)))
    R["xpp_le_tau"] = nrm(z.xpp) / (1.05 * z.tau)
    R["tau_le_2rmu"] = z.tau / (1.05 * 2 * rr * mu)
    R["spp_norm"] = nrm(z.spp) / 1.05
    R["sp_le_ts"] = nrm(z.sp) / (1.05 * z.ts)
    R["ts_le_2rmu"] = z.ts / (1.05 * 2 * rr * mu)
    R["s_norm"] = nrm(z.s) / (1.05 * (2 * rr * mu + 1))
    R["gap_identity"] = abs(z.tau + z.eta - 2 * rr * mu) / (1e-8 * 2 * rr * mu)
    R["tau_lower"] = 0.99 * (1 - beta) * mu / z.tau
    xs, dd = [], []
    W = np.zeros((E.nn, E.nn))
    for sl in E.structure.slices:
        xb, sb = z.xvec[sl], z.svec[sl]
        xs.append(xb @ sb)
        dd.append((xb[0] ** 2 - xb[1:] @ xb[1:]) * (sb[0] ** 2 - sb[1:] @ sb[1:]))
        W[sl, sl] = nt_inv_sqrt_block(xb, sb)
    R["block_complementarity"] = 0.99 * 2 * (1 - beta) * mu / min(xs)
    R["block_det_product"] = 0.99 * 4 * (1 - beta) ** 2 * mu**2 / min(dd)
    sv = np.linalg.svd(W, compute_uv=False)
    R["norm_Hinv"] = sv.max() ** 2 / ((2 + 3 * mu * rr) ** 2 / mu)
    R["norm_H"] = sv.min() ** -2 / (4 * (2 * rr * mu + 1) ** 2 / mu)
    gx = np.concatenate([gradient_block(z.xvec[sl]) for sl in E.structure.slices])
    R["scaled_centering"] = nrm(W @ (mu_bar * gx + z.svec)) / (0.5 * math.sqrt(mu))
    smax = np.linalg.svd(math.sqrt(mu) * W @ E.calA.T, compute_uv=False).max()
    R["sigma_max"] = smax / (2 + 3 * rr * mu)
    return MonitorReport({k: float(v) for k, v in R.items()})
