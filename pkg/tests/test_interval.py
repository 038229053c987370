"""Interval arithmetic: exact examples, rational and mpmath oracles, properties."""

import math
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rigdde.interval import (
    DimensionMismatch,
    DivisionByZeroInterval,
    EmptyIntersection,
    Interval,
    ParseError,
    format_interval,
    from_hex,
    icos,
    isin,
    matmul,
    matmul_fast,
    parse_decimal,
    pi_interval,
    split,
    to_hex,
)

mpmath.mp.dps = 60

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False)
tiny = st.floats(min_value=-1e-300, max_value=1e-300, allow_nan=False)
endpoint = st.one_of(finite, tiny, st.integers(-50, 50).map(float))


@st.composite
def intervals(draw):
    a, b = draw(endpoint), draw(endpoint)
    return Interval(min(a, b), max(a, b))


@st.composite
def nested(draw):
    """A pair ``inner ⊆ outer``."""
    outer = draw(intervals())
    u, v = sorted(draw(st.floats(0.0, 1.0)) for _ in range(2))
    lo = outer.lo + (outer.hi - outer.lo) * u if math.isfinite(outer.hi - outer.lo) else outer.lo
    hi = outer.lo + (outer.hi - outer.lo) * v if math.isfinite(outer.hi - outer.lo) else outer.hi
    lo = min(max(lo, outer.lo), outer.hi)
    hi = min(max(hi, lo), outer.hi)
    return Interval(lo, hi), outer


def point_in(iv, u):
    x = iv.lo + (iv.hi - iv.lo) * u
    return min(max(x, iv.lo), iv.hi)


def fr(x):
    return Fraction(x)


def encloses(iv, q):
    return Fraction(iv.lo) <= q <= Fraction(iv.hi)


def mpf_fraction(v):
    """Exact rational value of an mpmath number."""
    sign, man, exp, _ = mpmath.mpf(v)._mpf_
    q = Fraction(int(man)) * Fraction(2) ** int(exp)
    return -q if sign else q


OPS = {
    "add": (lambda a, b: a + b, lambda x, y: x + y),
    "sub": (lambda a, b: a - b, lambda x, y: x - y),
    "mul": (lambda a, b: a * b, lambda x, y: x * y),
    "div": (lambda a, b: a / b, lambda x, y: x / y),
}


# ----------------------------------------------------------------- examples


def test_add_exact():
    assert Interval(1, 2) + Interval(3, 4) == Interval(4, 6)


def test_self_subtraction_keeps_dependency_width():
    assert Interval(-1, 1) - Interval(-1, 1) == Interval(-2, 2)


def test_division_by_interval_containing_zero():
    with pytest.raises(DivisionByZeroInterval):
        Interval(1, 1) / Interval(-1, 1)


def test_negative_power_rejected():
    with pytest.raises(ValueError):
        Interval(1, 2) ** -1


def test_even_power_of_straddling_interval():
    assert Interval(-2, 1) ** 2 == Interval(0, 4)
    assert Interval(-2, 1) ** 3 == Interval(-8, 1)


def test_invalid_interval_rejected():
    with pytest.raises(ValueError):
        Interval(2, 1)


def test_sin_of_zero_is_exact():
    assert isin(Interval(0.0)) == Interval(0.0)


def test_cos_on_half_turn_is_full_range():
    c = icos(Interval(0.0, math.pi))
    assert c.contains(Interval(-1.0, 1.0))
    assert c.lo >= -1.0 - 1e-15 and c.hi <= 1.0 + 1e-15


def test_sin_on_quarter_turn():
    s = isin(Interval(0.0, math.pi / 2))
    assert s.contains(Interval(0.0, 1.0))
    assert s.hi <= 1.0 + 1e-15 and s.lo >= -1e-300


def test_pi_enclosure():
    p = pi_interval()
    assert p.lo < p.hi
    assert encloses(p, mpf_fraction(mpmath.pi))
    assert math.nextafter(p.lo, math.inf) == p.hi


def test_hull_and_intersect():
    assert Interval(0, 1).hull(Interval(2, 3)) == Interval(0, 3)
    assert (Interval(0, 1) | Interval(2, 3)) == Interval(0, 3)
    assert Interval(0, 2).intersect(Interval(1, 3)) == Interval(1, 2)
    with pytest.raises(EmptyIntersection):
        Interval(0, 1) & Interval(2, 3)


def test_subset_interior_is_strict():
    assert Interval(1, 1.5).subset_interior(Interval(0.9, 2.1))
    assert not Interval(1, 1.5).subset_interior(Interval(1, 2.1))
    assert Interval(1, 1.5).subset(Interval(1, 1.5))


def test_parse_decimal_tightest():
    a = parse_decimal("0.3333")
    assert encloses(a, Fraction(3333, 10000))
    assert math.nextafter(a.lo, math.inf) == a.hi
    assert parse_decimal("1") == Interval(1.0)
    assert parse_decimal("-2.5") == Interval(-2.5)
    t = parse_decimal("0.1")
    assert encloses(t, Fraction(1, 10))
    assert math.nextafter(t.lo, math.inf) == t.hi


@pytest.mark.parametrize("bad", ["", "1e5", "abc", "1.2.3", "--1", ". 5", "0x10"])
def test_parse_decimal_rejects(bad):
    with pytest.raises(ParseError):
        parse_decimal(bad)


def test_parse_decimal_long_literal_uses_rational_path():
    s = "0." + "3" * 40
    iv = parse_decimal(s)
    assert encloses(iv, Fraction(s))
    assert math.nextafter(iv.lo, math.inf) == iv.hi


def test_split_examples():
    m, r = split(Interval(0.0, 2.0))
    assert m == 1.0 and r == Interval(-1.0, 1.0)
    v = Interval.point(np.array([1.0, -3.5]))
    m, r = split(v)
    assert np.array_equal(m, v.lo) and np.all(r.lo == 0) and np.all(r.hi == 0)


def test_split_random_vector_recombines():
    rng = np.random.default_rng(1)
    lo = rng.normal(size=10)
    X = Interval(lo, lo + rng.uniform(0, 1, 10))
    m, r = split(X)
    assert r.contains_zero()
    assert (Interval.point(m) + r).contains(X)


def test_matmul_identity():
    v = Interval(np.array([1.0, 2.0]), np.array([1.5, 2.25]))
    assert matmul(Interval.point(np.eye(2)), v) == v


def test_rotation_wraps_unit_box():
    c = math.sqrt(0.5)
    R = Interval.point(np.array([[c, -c], [c, c]]))
    box = Interval(np.array([-1.0, -1.0]), np.array([1.0, 1.0]))
    img = matmul(R, box)
    # the image of the unit box under a 45 degree turn has half-width sqrt(2)
    assert np.all(img.hi >= math.sqrt(2) - 1e-15)
    assert np.all(img.hi <= math.sqrt(2) + 1e-15)
    assert np.all(img.lo == -img.hi)


def test_matmul_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        matmul(Interval.zeros((2, 3)), Interval.zeros(2))
    with pytest.raises(DimensionMismatch):
        matmul_fast(Interval.zeros((2, 3)), Interval.zeros(2))


def test_matmul_random_against_rationals():
    rng = np.random.default_rng(7)
    for _ in range(5):
        A = rng.normal(size=(5, 5))
        B = rng.normal(size=(5, 5))
        for prod in (matmul(Interval.point(A), Interval.point(B)), matmul_fast(A, B)):
            for i in range(5):
                for j in range(5):
                    exact = sum(fr(A[i, k]) * fr(B[k, j]) for k in range(5))
                    assert encloses(prod[i, j], exact)
        tight = matmul(Interval.point(A), Interval.point(B))
        # a few roundings per inner term at most
        assert np.all(tight.hi - tight.lo <= 1e-15 * (np.abs(A) @ np.abs(B)))


def test_matmul_exact_on_small_integers():
    rng = np.random.default_rng(3)
    A = rng.integers(-9, 10, size=(6, 4)).astype(float)
    B = rng.integers(-9, 10, size=(4, 3)).astype(float)
    P = matmul(Interval.point(A), Interval.point(B))
    assert np.array_equal(P.lo, A @ B) and np.array_equal(P.hi, A @ B)
    # the mid-rad product only promises an enclosure
    assert matmul_fast(A, B).contains(A @ B)


def test_matmul_fast_encloses_interval_product():
    rng = np.random.default_rng(11)
    lo = rng.normal(size=(4, 4))
    A = Interval(lo, lo + rng.uniform(0, 0.1, (4, 4)))
    v = Interval(rng.normal(size=4), None)
    exact = matmul(A, v)
    fast = matmul_fast(A, v)
    assert fast.contains(exact)


def test_hex_and_decimal_formats_round_trip():
    iv = Interval(0.1, 0.30000000000000004)
    assert from_hex(*to_hex(iv).split()) == iv
    text = format_interval(Interval(1.0 / 3.0, 2.0 / 3.0), digits=8)
    lo, hi = text.strip("[]").split(", ")
    assert parse_decimal(lo).lo <= 1.0 / 3.0 and parse_decimal(hi).hi >= 2.0 / 3.0


# --------------------------------------------------------------- properties


@given(st.sampled_from(sorted(OPS)), nested(), nested())
def test_inclusion_monotonicity(op, ab, cd):
    a, a2 = ab
    b, b2 = cd
    fi, _ = OPS[op]
    if op == "div" and b2.contains_zero():
        return
    try:
        small = fi(a, b)
        big = fi(a2, b2)
    except OverflowError:
        return
    if not (math.isfinite(big.lo) and math.isfinite(big.hi)):
        return
    assert big.contains(small)


@given(st.sampled_from(sorted(OPS)), intervals(), intervals(), st.floats(0, 1), st.floats(0, 1))
def test_point_containment_rational(op, a, b, u, v):
    fi, fx = OPS[op]
    if op == "div" and b.contains_zero():
        return
    res = fi(a, b)
    if not (math.isfinite(res.lo) and math.isfinite(res.hi)):
        return
    x, y = point_in(a, u), point_in(b, v)
    assert encloses(res, fx(fr(x), fr(y)))


@given(intervals(), st.integers(0, 9), st.floats(0, 1))
def test_power_containment(a, k, u):
    if max(abs(a.lo), abs(a.hi)) > 1e30:
        return
    res = a ** k
    x = point_in(a, u)
    assert encloses(res, fr(x) ** k)


@given(st.integers(-(10**12), 10**12), st.integers(0, 15))
def test_parse_decimal_round_trip(num, digits):
    s = str(abs(num))
    if digits:
        s = s.rjust(digits + 1, "0")
        s = s[:-digits] + "." + s[-digits:]
    if num < 0:
        s = "-" + s
    iv = parse_decimal(s)
    assert encloses(iv, Fraction(s))


@given(st.floats(-1e6, 1e6), st.floats(0, 10))
def test_sin_cos_mpmath_oracle(a, w):
    x = Interval(a, a + w)
    s, c = isin(x), icos(x)
    for t in [a, a + w, a + 0.5 * w, a + 0.25 * w]:
        t = min(t, a + w)
        ts = mpmath.mpf(t)
        # 60 digits: the oracle error is far below one ulp of the bounds
        assert encloses(s, mpf_fraction(mpmath.sin(ts)))
        assert encloses(c, mpf_fraction(mpmath.cos(ts)))
    assert -1.0 <= s.lo and s.hi <= 1.0 and -1.0 <= c.lo and c.hi <= 1.0


def test_sin_on_random_intervals_matches_mpmath_range():
    rng = random.Random(5)
    for _ in range(1000):
        a = rng.uniform(-20, 20)
        b = a + rng.uniform(0, 3)
        s = isin(Interval(a, b))
        # exact range: endpoints plus interior extrema at pi/2 + k*pi
        lo = min(mpmath.sin(a), mpmath.sin(b))
        hi = max(mpmath.sin(a), mpmath.sin(b))
        k0 = math.ceil((a - math.pi / 2) / math.pi) - 1
        for k in range(k0, k0 + 4):
            t = mpmath.pi / 2 + k * mpmath.pi
            if a <= t <= b:
                lo = min(lo, mpmath.sin(t))
                hi = max(hi, mpmath.sin(t))
        assert Fraction(s.lo) <= mpf_fraction(lo)
        assert Fraction(s.hi) >= mpf_fraction(hi)
        # no wider than the true range plus a few ulps
        assert float(lo) - s.lo <= 1e-14 and s.hi - float(hi) <= 1e-14


def test_sin_cos_point_width_within_four_ulps():
    rng = np.random.default_rng(2)
    for t in rng.uniform(-1e3, 1e3, 500):
        for fn in (isin, icos):
            v = fn(Interval(float(t)))
            ulp = math.ulp(max(abs(v.lo), abs(v.hi), 1e-300))
            assert v.hi - v.lo <= 4 * ulp


def test_array_ops_match_scalar_ops():
    rng = np.random.default_rng(4)
    lo = rng.normal(size=50)
    a = Interval(lo, lo + rng.uniform(0, 1, 50))
    lo = rng.normal(size=50) + 3.0
    b = Interval(lo, lo + rng.uniform(0, 1, 50))
    for name, (fi, _) in OPS.items():
        arr = fi(a, b)
        for j in range(50):
            assert fi(a[j], b[j]) == arr[j], name


def test_interval_sum_is_enclosing():
    rng = np.random.default_rng(8)
    x = rng.normal(size=100)
    s = Interval.point(x).sum()
    assert encloses(s, sum(fr(v) for v in x))
