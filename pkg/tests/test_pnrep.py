"""(p,n)-representations: layout, cell evaluation, derivatives and norms."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rigdde.interval import Interval, enclose_fraction, parse_decimal
from rigdde.pnrep import (
    EpsilonOutOfRange,
    IndexOutOfRange,
    OrderTooLow,
    PnParams,
    PnVector,
    ck_norm_distance,
    derivative_bound,
    eval_ck,
    from_taylor_callback,
)
from rigdde.proof_cli import FourierApprox, fourier_derivatives


def encloses(a, q):
    return Fraction(a.lo) <= q <= Fraction(a.hi)


def poly_coeff(a, k, t):
    """k-th Taylor coefficient at t of Σ a_j t^j, exactly."""
    return sum(math.comb(j, k) * a[j] * t ** (j - k) for j in range(k, len(a)))


def poly_rep(P, a):
    """Exact-data representation of the polynomial with rational coefficients a."""
    h = Fraction(P.tau.lo) / P.p
    assert P.tau.lo == P.tau.hi and len(a) <= P.n + 2
    a = list(a) + [Fraction(0)] * (P.n + 2 - len(a))
    return from_taylor_callback(
        P,
        lambda i, k: enclose_fraction(poly_coeff(a, k, -i * h)),
        lambda i: enclose_fraction(a[P.n + 1]),
        enclose_fraction(a[0]),
    )


def t_squared():
    P = PnParams(1, 2, Interval(1.0))
    return poly_rep(P, [0, 0, 1])


# ----------------------------------------------------------------- layout


def test_size_and_step():
    P = PnParams(32, 4, parse_decimal("2"))
    assert P.m == 32 * 6 + 1
    assert (P.h * 32).contains(P.tau)


def test_index_examples():
    P = PnParams(32, 4, Interval(2.0))
    assert P.index(0, 0) == 1
    assert P.index(1, 0) == 2
    assert P.index(1, 5) == 1 + 32 * 5 + 1 == 162


@pytest.mark.parametrize("p,n", [(1, 0), (3, 2), (32, 4), (7, 1)])
def test_index_is_bijection(p, n):
    P = PnParams(p, n, Interval(1.0))
    seen = [P.index(0, 0)] + [P.index(i, k) for i in range(1, p + 1) for k in range(n + 2)]
    assert sorted(seen) == list(range(1, P.m + 1))


@pytest.mark.parametrize("ik", [(0, 1), (-1, 0), (4, 0), (1, 4)])
def test_index_out_of_range(ik):
    with pytest.raises(IndexOutOfRange):
        PnParams(3, 2, Interval(1.0)).index(*ik)


def test_invalid_params():
    with pytest.raises(ValueError):
        PnParams(0, 2, Interval(1.0))
    with pytest.raises(ValueError):
        PnParams(2, -1, Interval(1.0))


def test_file_round_trip(tmp_path):
    x = t_squared()
    path = tmp_path / "x.txt"
    x.save(path)
    y = PnVector.load(path)
    assert y.params == x.params and y.data == x.data


# ------------------------------------------------------------- evaluation


def test_eval_ck_polynomial_example():
    x = t_squared()
    assert [x[1, k].lo for k in range(3)] == [1.0, -2.0, 1.0]
    assert eval_ck(x, 1, 0, 0.5).contains(0.25)


def test_eval_ck_top_order_is_remainder():
    x = poly_rep(PnParams(2, 2, Interval(1.0)), [1, 2, 3, 4])
    for eps in (0.0, 0.2, Interval(0.0, 0.5)):
        assert eval_ck(x, 2, 3, eps) == x.remainder(2)


def test_eval_ck_at_zero_offset_is_identity():
    x = poly_rep(PnParams(2, 2, Interval(1.0)), [1, 2, 3, 4])
    for k in range(3):
        assert eval_ck(x, 1, k, 0.0) == x[1, k]


def test_eval_ck_rejects_bad_offsets():
    x = t_squared()
    with pytest.raises(EpsilonOutOfRange):
        eval_ck(x, 1, 0, Interval(-0.1, 0.0))
    with pytest.raises(EpsilonOutOfRange):
        eval_ck(x, 1, 0, 1.5)
    with pytest.raises(IndexOutOfRange):
        eval_ck(x, 2, 0, 0.0)


def test_eval_ck_random_polynomials():
    rng = random.Random(3)
    P = PnParams(4, 3, Interval(1.0))
    h = Fraction(1, 4)
    for _ in range(100):
        a = [Fraction(rng.randint(-50, 50), 8) for _ in range(P.n + 2)]
        x = poly_rep(P, a)
        for _ in range(3):
            i = rng.randint(1, P.p)
            k = rng.randint(0, P.n + 1)
            e = Fraction(rng.randint(0, 64), 256)
            got = eval_ck(x, i, k, float(e))
            assert encloses(got, poly_coeff(a, k, -i * h + e))


def test_convex_combination_of_members_is_member():
    rng = np.random.default_rng(0)
    P = PnParams(3, 2, Interval(1.0))
    lo = rng.normal(size=P.m)
    box = PnVector(P, Interval(lo, lo + 0.5))
    for _ in range(50):
        a = lo + rng.uniform(0, 0.5, P.m)
        b = lo + rng.uniform(0, 0.5, P.m)
        lam = rng.uniform()
        assert box.contains(Interval.point(np.clip(lam * a + (1 - lam) * b, lo, lo + 0.5)))
        assert box.contains(Interval.point(a)) and box.contains(Interval.point(b))


# ------------------------------------------------------------- derivatives


def test_derivative_of_t_squared():
    d = derivative_bound(t_squared())
    assert d.params.n == 1
    assert d[1, 0] == Interval(-2.0) and d[1, 1] == Interval(2.0)


def test_derivative_of_constant_and_line():
    P = PnParams(2, 2, Interval(1.0))
    d = derivative_bound(poly_rep(P, [3]))
    assert np.all(d.data.lo == 0.0) and np.all(d.data.hi == 0.0)
    d = derivative_bound(poly_rep(P, [1, 1]))
    assert d[1, 0] == Interval(1.0) and d[2, 0] == Interval(1.0)
    assert d.value == Interval(1.0)


def test_derivative_needs_order_one():
    with pytest.raises(OrderTooLow):
        derivative_bound(poly_rep(PnParams(2, 0, Interval(1.0)), [1]))


@given(st.lists(st.integers(-20, 20), min_size=5, max_size=5), st.integers(0, 16), st.integers(1, 4))
def test_derivative_commutes_with_evaluation(coeffs, e16, i):
    P = PnParams(4, 3, Interval(1.0))
    x = poly_rep(P, [Fraction(c, 4) for c in coeffs])
    d = derivative_bound(x)
    eps = e16 / 64.0
    for k in range(P.n):
        a = eval_ck(d, i, k, eps)
        b = eval_ck(x, i, k + 1, eps) * float(k + 1)
        assert a.overlaps(b)


# ------------------------------------------------------------------ norms


def constant_approx(c):
    def approx(t, j):
        z = t * 0.0
        return z + c if j == 0 else z

    return approx


def test_norm_of_constant_offset():
    P = PnParams(4, 2, Interval(1.0))
    x = poly_rep(P, [1])
    d = ck_norm_distance(x, constant_approx(1.5), 0)
    assert len(d) == 1
    assert d[0].hi >= 0.5 and d[0].hi <= 0.5 + 1e-15
    assert d[0].lo <= 0.5


def test_norm_self_distance_is_small():
    P = PnParams(4, 3, Interval(1.0))
    a = [Fraction(1), Fraction(-1, 2), Fraction(1, 3), Fraction(1, 4), Fraction(-1, 8)]
    x = poly_rep(P, a)
    fa = [float(c) for c in a]

    def approx(t, j):
        out = t * 0.0
        for l in range(j, len(fa)):
            c = math.factorial(l) // math.factorial(l - j) * fa[l]
            out = out + (t ** (l - j)) * c if l > j else out + c
        return out

    coarse = ck_norm_distance(x, approx, 3)
    fine = ck_norm_distance(x, approx, 3, subdiv=64)
    # only the evaluation slack remains, and it shrinks with the sub-cells
    assert all(v.lo <= 1e-15 for v in coarse + fine)
    assert coarse[-1].hi <= 0.05
    assert fine[-1].hi <= coarse[-1].hi / 10


def test_norm_rejects_too_high_order():
    x = t_squared()
    with pytest.raises(OrderTooLow):
        ck_norm_distance(x, constant_approx(0.0), 3)


def test_norm_is_running_sum():
    P = PnParams(4, 2, Interval(1.0))
    x = poly_rep(P, [0, 1])  # t on [-1, 0]

    def approx(t, j):
        z = t * 0.0
        return z if j > 0 else z + 0.0

    d = ck_norm_distance(x, approx, 2)
    # sup |t| = 1, sup |1| = 1, sup |0| = 0
    assert d[0].hi >= 1.0 and d[1].hi >= 2.0 and d[2].hi >= 2.0
    assert d[2].hi <= 2.0 + 1e-12


def test_norm_bounds_are_rigorous_for_all_variants():
    P = PnParams(4, 2, Interval(1.0))
    a = [0, 1, Fraction(1, 2), Fraction(1, 3)]
    x = poly_rep(P, a)
    ts = np.linspace(-1.0, 0.0, 4001)
    g = [sum(float(a[l]) * math.perm(l, j) * ts ** (l - j) for l in range(j, 4)) for j in range(3)]
    true = np.cumsum([np.max(np.abs(gj - 0.25 * (j == 0))) for j, gj in enumerate(g)])
    wide = None
    for centred in (True, False):
        for subdiv in (1, 4):
            d = ck_norm_distance(x, constant_approx(0.25), 2, subdiv=subdiv, centred=centred)
            assert all(v.hi >= t - 1e-12 for v, t in zip(d, true))
            if not centred and subdiv == 1:
                wide = d
    finer = ck_norm_distance(x, constant_approx(0.25), 2, subdiv=4, centred=False)
    assert all(u.hi <= v.hi + 1e-15 for u, v in zip(finer, wide))


# ----------------------------------------------------------- construction


def test_from_callback_constant():
    P = PnParams(3, 2, Interval(1.0))
    x = from_taylor_callback(P, lambda i, k: 1.0 if k == 0 else 0.0, lambda i: 0.0, 1.0)
    for i in range(1, 4):
        assert x[i, 0] == Interval(1.0)
        assert x[i, 1] == Interval(0.0) and x.remainder(i) == Interval(0.0)
    assert x.value == Interval(1.0)


def test_from_callback_fourier_encloses_function():
    fx = FourierApprox(
        "0.9773",
        [(2, "-0.0031", "0.2398"), (4, "0.0165", "-0.0043"), (6, "0.0102", "-0.0011"), (8, "-0.0007", "0.0014")],
        parse_decimal("10.9672"),
    )
    P = PnParams(32, 4, Interval(2.0))
    h = P.h
    nodes = -h * Interval(np.arange(1, P.p + 1, dtype=float))
    at_nodes = fourier_derivatives(fx, nodes, P.n)
    cells = nodes + Interval(0.0, h.hi)
    over = fourier_derivatives(fx, cells, P.n + 1)
    fact = [math.factorial(k) for k in range(P.n + 2)]
    x = from_taylor_callback(
        P,
        lambda i, k: at_nodes[k][i - 1] / float(fact[k]),
        lambda i: over[P.n + 1][i - 1] / float(fact[P.n + 1]),
        fourier_derivatives(fx, Interval(0.0), 0)[0],
    )
    rng = np.random.default_rng(0)
    for i in range(1, P.p + 1):
        e = float(rng.uniform(0, h.lo))
        val = fourier_derivatives(fx, Interval(-h.hi * i + e), 0)[0]
        assert eval_ck(x, i, 0, Interval(0.0, h.hi)).overlaps(val)
        assert eval_ck(x, i, 0, e).overlaps(val)
