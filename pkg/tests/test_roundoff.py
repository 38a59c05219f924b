import math
from fractions import Fraction

import gmpy2
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socfeas.errors import LengthMismatch, NegativeInput, PrecisionTooCoarse, RankDeficient, ShapeMismatch
from socfeas.roundoff import (
    RoundingContext,
    gamma_of,
    golub_lls,
    log2_depth,
    rdot,
    rmatmul,
    rmatvec,
    round_scalar,
    rsqrt,
    rsum,
    to_float,
    to_mp,
)

# Frozen constant of the backward-stability smoke test, fitted once on
# 1000 random problems at p in {12, 16, 24, 40, 53} (largest ratio seen: 0.65).
GOLUB_C = 4.0

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def exact(v) -> Fraction:
    return Fraction(float(v)) if not isinstance(v, type(gmpy2.mpfr(0))) else Fraction(*v.as_integer_ratio())


def test_context_basics():
    ctx = RoundingContext(24)
    assert ctx.unit_roundoff == 2.0**-24
    assert RoundingContext.from_unit_roundoff(2.0**-30).mantissa_bits == 30
    assert ctx.refined(8).mantissa_bits == 32
    with pytest.raises(ValueError):
        RoundingContext(1)


def test_round_examples():
    ctx = RoundingContext(3)
    assert round_scalar(0.0, ctx) == 0
    assert round_scalar(1.25, ctx) == 1.25
    r = round_scalar(1.0625, ctx)
    grid = [1.0, 1.25, 1.5, 1.75]  # 3-bit grid on [1, 2)
    assert float(r) in grid and float(r) in (1.0, 1.125)
    assert abs(float(r) - 1.0625) <= 2.0**-3 * 1.0625


@settings(max_examples=200)
@given(finite, st.integers(2, 60))
def test_round_properties(x, p):
    ctx = RoundingContext(p)
    r = round_scalar(x, ctx)
    assert abs(exact(r) - Fraction(x)) <= Fraction(1, 2**p) * abs(Fraction(x))
    assert round_scalar(r, ctx) == r
    assert round_scalar(-x, ctx) == -r


@settings(max_examples=100)
@given(finite, finite, st.integers(2, 30))
def test_round_monotone(x, y, p):
    ctx = RoundingContext(p)
    lo, hi = sorted((x, y))
    assert round_scalar(lo, ctx) <= round_scalar(hi, ctx)


def test_conversion_is_exact():
    a = np.array([0.1, 1 / 3, -2.5e-300])
    assert np.array_equal(to_float(to_mp(a)), a)


def test_rdot_examples():
    ctx = RoundingContext(53)
    assert rdot([1.0, 0.0], [0.0, 1.0], ctx) == 0
    assert rdot(np.ones(4), np.ones(4), ctx) == 4
    with pytest.raises(LengthMismatch):
        rdot([1.0], [1.0, 2.0], ctx)


def test_rsum_examples():
    ctx = RoundingContext(8)
    assert rsum(np.zeros(5), ctx) == 0
    assert rsum([0.1], ctx) == gmpy2.mpfr(0.1, 53)


def test_rdot_norm_bound_p10():
    ctx = RoundingContext(10)
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        x = rng.normal(size=n)
        got = exact(rdot(x, x, ctx))
        true = sum(Fraction(v) ** 2 for v in x)
        assert abs(got - true) <= Fraction(gamma_of(log2_depth(n) + 1, ctx)) * true


def test_p53_matches_native():
    ctx = RoundingContext(53)
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.normal(size=2)
        with ctx.arith():
            ma, mb = gmpy2.mpfr(a, 53), gmpy2.mpfr(b, 53)
            assert float(ma * mb) == a * b
            assert float(ma + mb) == a + b
            assert float(ma / mb) == a / b
            assert float(gmpy2.sqrt(abs(ma))) == math.sqrt(abs(a))
    x, y = rng.normal(size=2), rng.normal(size=2)
    assert float(rdot(x, y, ctx)) == x[0] * y[0] + x[1] * y[1]


def test_matvec_and_matmul():
    ctx = RoundingContext(12)
    rng = np.random.default_rng(2)
    M = rng.normal(size=(5, 5))
    np.testing.assert_array_equal(to_float(rmatmul(M, np.eye(5), ctx)), to_float([[round_scalar(v, ctx) for v in row] for row in M]))
    assert not to_float(rmatmul(np.zeros((3, 2)), M[:2, :3], ctx)).any()
    for _ in range(20):
        M, N = rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
        err = np.linalg.norm(to_float(rmatmul(M, N, ctx)) - M @ N)
        assert err <= 5 * ctx.unit_roundoff * np.linalg.norm(M) * np.linalg.norm(N) * 4
    v = rng.normal(size=5)
    np.testing.assert_allclose(to_float(rmatvec(M, v, RoundingContext(53))), M @ v, rtol=1e-15, atol=1e-15)
    with pytest.raises(ShapeMismatch):
        rmatvec(M, np.ones(4), ctx)
    with pytest.raises(ShapeMismatch):
        rmatmul(M, np.ones((4, 2)), ctx)


def test_rsqrt():
    ctx = RoundingContext(10)
    assert rsqrt(1.0, ctx) == 1 and rsqrt(4.0, ctx) == 2
    with pytest.raises(NegativeInput):
        rsqrt(-1.0, ctx)
    rng = np.random.default_rng(3)
    for x in rng.uniform(1e-3, 1e3, size=1000):
        assert abs(float(rsqrt(x, ctx)) - math.sqrt(x)) <= ctx.unit_roundoff * math.sqrt(x) * (1 + 1e-12)


def test_gamma_calculus():
    ctx = RoundingContext(40)
    u = ctx.unit_roundoff
    assert gamma_of(0, ctx) == 0 and gamma_of(1, ctx) == u / (1 - u)
    vals = [gamma_of(n, ctx) for n in range(0, 10**6 + 1, 997)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    for k, j, i in [(3, 5, 2), (100, 7, 9), (10**4, 10**3, 5)]:
        gk, gj = gamma_of(k, ctx), gamma_of(j, ctx)
        assert i * gk <= gamma_of(i * k, ctx)
        assert gk + gj + gk * gj <= gamma_of(k + j, ctx) * (1 + 1e-12)
    with pytest.raises(PrecisionTooCoarse):
        gamma_of(2**39, ctx)


def test_log2_depth():
    assert [log2_depth(n) for n in (0, 1, 2, 3, 4, 5, 8, 9)] == [0, 0, 1, 2, 2, 3, 3, 4]


def test_golub_identity_and_consistent():
    ctx = RoundingContext(53)
    q = np.array([0.3, -1.2, 2.5])
    v = to_float(golub_lls(np.eye(3), q, ctx).v)
    np.testing.assert_allclose(v, -q, rtol=2 * ctx.unit_roundoff)
    rng = np.random.default_rng(4)
    B = rng.normal(size=(9, 4))
    v_star = rng.normal(size=4)
    res = golub_lls(B, -B @ v_star, ctx)
    np.testing.assert_allclose(to_float(res.v), v_star, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose(np.abs(to_float(res.r_diag)), np.abs(np.diag(np.linalg.qr(B)[1])), rtol=1e-12)


def test_golub_rank_deficient():
    B = np.ones((4, 2))
    with pytest.raises(RankDeficient):
        golub_lls(B, np.ones(4), RoundingContext(30))
    with pytest.raises(ShapeMismatch):
        golub_lls(np.ones((2, 3)), np.ones(2), RoundingContext(30))


@pytest.mark.parametrize("p", [16, 24, 40])
def test_golub_backward_stability(p):
    ctx = RoundingContext(p)
    rng = np.random.default_rng(p)
    for _ in range(10):
        n, m = int(rng.integers(4, 12)), int(rng.integers(1, 4))
        B = rng.normal(size=(n, m))
        q = rng.normal(size=n)
        v = to_float(golub_lls(B, q, ctx).v)
        nb = np.linalg.norm(B, 2)
        lhs = np.linalg.norm(B.T @ (B @ v + q))
        bound = GOLUB_C * ctx.unit_roundoff * n * m**1.5 * nb * (nb * np.linalg.norm(v) + np.linalg.norm(q))
        assert lhs <= bound


def test_determinism():
    rng = np.random.default_rng(6)
    B, q = rng.normal(size=(8, 3)), rng.normal(size=8)
    ctx = RoundingContext(20)
    a = to_float(golub_lls(B, q, ctx).v)
    b = to_float(golub_lls(B.copy(), q.copy(), ctx).v)
    assert np.array_equal(a, b)
