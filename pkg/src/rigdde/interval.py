"""Interval arithmetic with correctly directed rounding.

Endpoints are IEEE binary64 numbers. Every elementary operation is first
carried out in round-to-nearest and then corrected with an error-free
transformation (TwoSum, Veltkamp/Dekker TwoProduct, exact division
remainder): when the exact result lies below the rounded one the lower
endpoint is moved one ulp down, and symmetrically for the upper endpoint.
The result is therefore identical to what hardware directed rounding would
produce, and exact operations stay exact.

An :class:`Interval` holds either a scalar or an array of intervals; the
array form plays the role of interval vectors and matrices.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction

import numpy as np

__all__ = [
    "Interval",
    "IntervalError",
    "DivisionByZeroInterval",
    "EmptyIntersection",
    "ParseError",
    "DimensionMismatch",
    "parse_decimal",
    "split",
    "matmul",
    "matmul_fast",
    "dot",
    "point_matmul_enclosure",
    "isin",
    "icos",
    "pi_interval",
    "enclose_fraction",
    "to_hex",
    "from_hex",
    "format_interval",
]


class IntervalError(ArithmeticError):
    pass


class DivisionByZeroInterval(IntervalError, ZeroDivisionError):
    pass


class EmptyIntersection(IntervalError, ValueError):
    pass


class ParseError(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


_INF = math.inf
_SPLITTER = 134217729.0  # 2**27 + 1
# Below this magnitude products and quotients may lose bits to underflow and
# the error-free transformations are not trusted.
_TINY = 2.0 ** -960
_U = 2.0 ** -53
_ETA = 2.0 ** -1074


# --------------------------------------------------------------------------
# scalar kernels (plain Python floats)


def _add_dn(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return math.nextafter(s, -_INF) if e < 0 else s


def _add_up(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return math.nextafter(s, _INF) if e > 0 else s


def _prod_err(a, b, p):
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _tiny_bounds(p, negative):
    """Bounds one ulp out from a result near underflow, clamped at 0 by its exact sign."""
    dn, up = math.nextafter(p, -_INF), math.nextafter(p, _INF)
    if negative:
        return dn, min(up, 0.0)
    return max(dn, 0.0), up


def _a_tiny_bounds(p, negative):
    dn, up = np.nextafter(p, -_INF), np.nextafter(p, _INF)
    return np.where(negative, dn, np.maximum(dn, 0.0)), np.where(negative, np.minimum(up, 0.0), up)


def _mul_pair(a, b):
    """Return (round_down(a*b), round_up(a*b))."""
    p = a * b
    if -_TINY < p < _TINY:
        if a == 0.0 or b == 0.0:
            return 0.0, 0.0
        return _tiny_bounds(p, (a < 0) != (b < 0))
    if p == _INF or p == -_INF:
        return p, p
    e = _prod_err(a, b, p)
    if e < 0:
        return math.nextafter(p, -_INF), p
    if e > 0:
        return p, math.nextafter(p, _INF)
    return p, p


def _div_pair(a, b):
    """Return (round_down(a/b), round_up(a/b)) for b != 0."""
    q = a / b
    if a == 0.0:
        return 0.0, 0.0
    if -_TINY < q < _TINY or -_TINY < a < _TINY:
        return _tiny_bounds(q, (a < 0) != (b < 0))
    p = q * b
    e = _prod_err(q, b, p)
    r = (a - p) - e
    if r == 0.0:
        return q, q
    # sign of (a/b - q) equals sign(r) * sign(b)
    if (r < 0) != (b < 0):
        return math.nextafter(q, -_INF), q
    return q, math.nextafter(q, _INF)


# --------------------------------------------------------------------------
# array kernels (numpy)


def _a_add_dn(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return np.where(e < 0, np.nextafter(s, -_INF), s)


def _a_add_up(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return np.where(e > 0, np.nextafter(s, _INF), s)


def _a_prod_err(a, b, p):
    c = _SPLITTER * a
    ah = c - (c - a)
    al = a - ah
    c = _SPLITTER * b
    bh = c - (c - b)
    bl = b - bh
    return ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _a_mul_pair(a, b):
    with np.errstate(invalid="ignore", over="ignore"):
        p = a * b
        e = _a_prod_err(a, b, p)
    tiny = np.abs(p) < _TINY
    zero = (a == 0.0) | (b == 0.0)
    dn = np.where(e < 0, np.nextafter(p, -_INF), p)
    up = np.where(e > 0, np.nextafter(p, _INF), p)
    if tiny.any():
        tdn, tup = _a_tiny_bounds(p, (a < 0) != (b < 0))
        dn = np.where(tiny, np.where(zero, 0.0, tdn), dn)
        up = np.where(tiny, np.where(zero, 0.0, tup), up)
    return dn, up


def _a_div_pair(a, b):
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        q = a / b
        p = q * b
        e = _a_prod_err(q, b, p)
        r = (a - p) - e
    down = (r != 0) & ((r < 0) != (b < 0))
    up = (r != 0) & ~down
    dn = np.where(down, np.nextafter(q, -_INF), q)
    upv = np.where(up, np.nextafter(q, _INF), q)
    tiny = (np.abs(q) < _TINY) | (np.abs(a) < _TINY)
    if tiny.any():
        zero = a == 0.0
        tdn, tup = _a_tiny_bounds(q, (a < 0) != (b < 0))
        dn = np.where(tiny, np.where(zero, 0.0, tdn), dn)
        upv = np.where(tiny, np.where(zero, 0.0, tup), upv)
    return dn, upv


# --------------------------------------------------------------------------
# exact rational helpers


def _float_down(fr: Fraction) -> float:
    f = float(fr)
    if Fraction(f) > fr:
        f = math.nextafter(f, -_INF)
    return f


def _float_up(fr: Fraction) -> float:
    f = float(fr)
    if Fraction(f) < fr:
        f = math.nextafter(f, _INF)
    return f


def enclose_fraction(fr) -> "Interval":
    """Tightest interval around an exact rational (or integer)."""
    fr = Fraction(fr)
    return Interval(_float_down(fr), _float_up(fr))


def _as_float_scalar(v):
    if isinstance(v, float):
        return v
    if isinstance(v, (int, np.integer)):
        f = float(v)
        if int(f) != int(v):
            raise ValueError(f"integer {v} is not exactly representable; use enclose_fraction")
        return f
    if isinstance(v, np.floating):
        return float(v)
    raise TypeError(f"unsupported scalar {type(v)!r}")


class Interval:
    """Closed interval ``[lo, hi]`` (scalar) or an array of such intervals.

    Scalars keep their endpoints as Python floats; arrays as float64 numpy
    arrays of identical shape. Instances are treated as immutable.
    """

    __slots__ = ("lo", "hi")
    __array_priority__ = 100.0

    def __init__(self, lo, hi=None):
        if hi is None:
            hi = lo
        if isinstance(lo, np.ndarray) or isinstance(hi, np.ndarray) or isinstance(lo, (list, tuple)):
            lo = np.array(lo, dtype=np.float64)
            hi = np.array(hi, dtype=np.float64)
            if lo.shape != hi.shape:
                lo, hi = np.broadcast_arrays(lo, hi)
                lo, hi = lo.copy(), hi.copy()
            if lo.ndim == 0:
                lo, hi = float(lo), float(hi)
                if not lo <= hi:
                    raise ValueError(f"invalid interval [{lo}, {hi}]")
            elif not np.all(lo <= hi):
                raise ValueError("invalid interval array: lo > hi somewhere")
        else:
            lo = _as_float_scalar(lo)
            hi = _as_float_scalar(hi)
            if not lo <= hi:
                raise ValueError(f"invalid interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    # ------------------------------------------------------------------ basics
    @classmethod
    def _raw(cls, lo, hi):
        obj = object.__new__(cls)
        obj.lo = lo
        obj.hi = hi
        return obj

    @classmethod
    def zeros(cls, shape) -> "Interval":
        return cls._raw(np.zeros(shape), np.zeros(shape))

    @classmethod
    def point(cls, x) -> "Interval":
        if isinstance(x, np.ndarray):
            x = np.asarray(x, dtype=np.float64)
            return cls._raw(x.copy(), x.copy())
        x = _as_float_scalar(x)
        return cls._raw(x, x)

    @classmethod
    def stack(cls, items, axis=0) -> "Interval":
        items = [_coerce(v) for v in items]
        lo = np.stack([np.asarray(v.lo, dtype=np.float64) for v in items], axis=axis)
        hi = np.stack([np.asarray(v.hi, dtype=np.float64) for v in items], axis=axis)
        return cls._raw(lo, hi)

    @classmethod
    def concatenate(cls, items, axis=0) -> "Interval":
        items = [_coerce(v) for v in items]
        lo = np.concatenate([np.atleast_1d(v.lo) for v in items], axis=axis)
        hi = np.concatenate([np.atleast_1d(v.hi) for v in items], axis=axis)
        return cls._raw(lo, hi)

    @property
    def is_scalar(self) -> bool:
        return not isinstance(self.lo, np.ndarray)

    @property
    def shape(self):
        return () if self.is_scalar else self.lo.shape

    @property
    def ndim(self):
        return 0 if self.is_scalar else self.lo.ndim

    def __len__(self):
        if self.is_scalar:
            raise TypeError("scalar interval has no len()")
        return len(self.lo)

    def __getitem__(self, idx) -> "Interval":
        if self.is_scalar:
            raise TypeError("scalar interval is not subscriptable")
        lo = self.lo[idx]
        hi = self.hi[idx]
        if np.ndim(lo) == 0:
            return Interval._raw(float(lo), float(hi))
        return Interval._raw(lo, hi)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def with_entries(self, idx, value) -> "Interval":
        """Copy with ``self[idx]`` replaced by ``value``."""
        value = _coerce(value)
        lo = self.lo.copy()
        hi = self.hi.copy()
        lo[idx] = value.lo
        hi[idx] = value.hi
        return Interval._raw(lo, hi)

    def copy(self) -> "Interval":
        if self.is_scalar:
            return Interval._raw(self.lo, self.hi)
        return Interval._raw(self.lo.copy(), self.hi.copy())

    def reshape(self, *shape) -> "Interval":
        return Interval._raw(np.reshape(self.lo, shape), np.reshape(self.hi, shape))

    @property
    def T(self) -> "Interval":
        return Interval._raw(self.lo.T, self.hi.T)

    def __repr__(self):
        if self.is_scalar:
            return f"Interval({self.lo!r}, {self.hi!r})"
        return f"Interval(shape={self.shape})"

    def __str__(self):
        if self.is_scalar:
            return f"[{self.lo:.17g}, {self.hi:.17g}]"
        return "\n".join(
            f"[{lo:.17g}, {hi:.17g}]" for lo, hi in zip(self.lo.ravel(), self.hi.ravel())
        )

    # --------------------------------------------------------------- measures
    def mid(self):
        """A representable point inside the interval."""
        if self.is_scalar:
            if self.lo == self.hi:
                return self.lo
            return min(max(0.5 * self.lo + 0.5 * self.hi, self.lo), self.hi)
        m = 0.5 * self.lo + 0.5 * self.hi
        return np.where(self.lo == self.hi, self.lo, np.clip(m, self.lo, self.hi))

    def diam(self):
        """Upper bound on hi - lo."""
        if self.is_scalar:
            return _add_up(self.hi, -self.lo)
        return _a_add_up(self.hi, -self.lo)

    def rad(self):
        """Upper bound on the distance from mid() to both endpoints."""
        m = self.mid()
        if self.is_scalar:
            return max(_add_up(self.hi, -m), _add_up(m, -self.lo))
        return np.maximum(_a_add_up(self.hi, -m), _a_add_up(m, -self.lo))

    def mag(self):
        """max |x| over the interval (exact)."""
        if self.is_scalar:
            return max(abs(self.lo), abs(self.hi))
        return np.maximum(np.abs(self.lo), np.abs(self.hi))

    def mig(self):
        """min |x| over the interval (exact)."""
        if self.is_scalar:
            if self.lo <= 0.0 <= self.hi:
                return 0.0
            return min(abs(self.lo), abs(self.hi))
        inside = (self.lo <= 0.0) & (self.hi >= 0.0)
        return np.where(inside, 0.0, np.minimum(np.abs(self.lo), np.abs(self.hi)))

    # ------------------------------------------------------------ set algebra
    def contains(self, x) -> bool:
        """True if every point/interval of ``x`` lies in self (entrywise, all)."""
        if isinstance(x, Interval):
            return bool(np.all(self.lo <= x.lo) and np.all(x.hi <= self.hi))
        if isinstance(x, Fraction):
            return Fraction(float(self.lo)) <= x <= Fraction(float(self.hi))
        return bool(np.all(self.lo <= x) and np.all(x <= self.hi))

    def contains_zero(self) -> bool:
        return bool(np.all(self.lo <= 0.0) and np.all(self.hi >= 0.0))

    def subset(self, other: "Interval") -> bool:
        return _coerce(other).contains(self)

    def subset_interior(self, other: "Interval") -> bool:
        other = _coerce(other)
        return bool(np.all(other.lo < self.lo) and np.all(self.hi < other.hi))

    def overlaps(self, other) -> bool:
        other = _coerce(other)
        return bool(np.all(self.lo <= other.hi) and np.all(other.lo <= self.hi))

    def hull(self, other) -> "Interval":
        other = _coerce(other)
        if self.is_scalar and other.is_scalar:
            return Interval._raw(min(self.lo, other.lo), max(self.hi, other.hi))
        return Interval._raw(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    __or__ = hull
    __ror__ = hull

    def intersect(self, other) -> "Interval":
        other = _coerce(other)
        if self.is_scalar and other.is_scalar:
            lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
            if lo > hi:
                raise EmptyIntersection(f"{self} and {other} are disjoint")
            return Interval._raw(lo, hi)
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(lo > hi):
            raise EmptyIntersection("interval arrays are disjoint in some entry")
        return Interval._raw(lo, hi)

    __and__ = intersect
    __rand__ = intersect

    def inflate(self, abs_tol=0.0, factor=1.0) -> "Interval":
        """Widen about the midpoint by ``factor`` and then by ``abs_tol`` (outward)."""
        m = self.mid()
        r = self.rad() * factor + abs_tol
        if self.is_scalar:
            return Interval._raw(
                min(self.lo, math.nextafter(m - r, -_INF)), max(self.hi, math.nextafter(m + r, _INF))
            )
        return Interval._raw(
            np.minimum(self.lo, np.nextafter(m - r, -_INF)),
            np.maximum(self.hi, np.nextafter(m + r, _INF)),
        )

    # -------------------------------------------------------------- arithmetic
    def __neg__(self):
        return Interval._raw(-self.hi, -self.lo)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_scalar and other.is_scalar:
            return Interval._raw(_add_dn(self.lo, other.lo), _add_up(self.hi, other.hi))
        a, b = _arrays(self, other)
        return Interval._raw(_a_add_dn(a.lo, b.lo), _a_add_up(a.hi, b.hi))

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if self.is_scalar and other.is_scalar:
            return _smul(self.lo, self.hi, other.lo, other.hi)
        a, b = _arrays(self, other)
        if np.array_equal(b.lo, b.hi) and b.lo.ndim == 0:
            pass
        d1, u1 = _a_mul_pair(a.lo, b.lo)
        d2, u2 = _a_mul_pair(a.lo, b.hi)
        d3, u3 = _a_mul_pair(a.hi, b.lo)
        d4, u4 = _a_mul_pair(a.hi, b.hi)
        lo = np.minimum(np.minimum(d1, d2), np.minimum(d3, d4))
        hi = np.maximum(np.maximum(u1, u2), np.maximum(u3, u4))
        return Interval._raw(lo, hi)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return _div(self, other)

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return _div(other, self)

    def __pow__(self, n):
        if not isinstance(n, (int, np.integer)) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        n = int(n)
        if n == 0:
            return Interval._raw(*_ones_like(self))
        if n == 1:
            return self
        if self.is_scalar:
            return _spow(self.lo, self.hi, n)
        lo, hi = self.lo, self.hi
        out_lo = np.empty_like(lo)
        out_hi = np.empty_like(hi)
        for idx in np.ndindex(lo.shape):
            r = _spow(float(lo[idx]), float(hi[idx]), n)
            out_lo[idx] = r.lo
            out_hi[idx] = r.hi
        return Interval._raw(out_lo, out_hi)

    def __abs__(self):
        if self.is_scalar:
            return Interval._raw(self.mig(), self.mag())
        return Interval._raw(self.mig(), self.mag())

    def sum(self, axis=None) -> "Interval":
        """Sequential outward-rounded sum along ``axis`` (all entries if None)."""
        if self.is_scalar:
            return self
        lo, hi = self.lo, self.hi
        if axis is None:
            lo, hi = lo.ravel(), hi.ravel()
            axis = 0
        lo = np.moveaxis(lo, axis, 0)
        hi = np.moveaxis(hi, axis, 0)
        if lo.shape[0] == 0:
            return Interval._raw(np.zeros(lo.shape[1:]), np.zeros(hi.shape[1:])) if lo.ndim > 1 else Interval(0.0)
        slo, shi = lo[0], hi[0]
        for j in range(1, lo.shape[0]):
            slo = _a_add_dn(slo, lo[j])
            shi = _a_add_up(shi, hi[j])
        if np.ndim(slo) == 0:
            return Interval._raw(float(slo), float(shi))
        return Interval._raw(slo, shi)

    def dot(self, other) -> "Interval":
        """Exact-directed dot product of two interval vectors."""
        return (self * _coerce(other)).sum()

    # elementary functions
    def sin(self):
        return isin(self)

    def cos(self):
        return icos(self)

    # ------------------------------------------------------------------- misc
    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return bool(np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi))

    __hash__ = None


def _ones_like(x: Interval):
    if x.is_scalar:
        return 1.0, 1.0
    return np.ones_like(x.lo), np.ones_like(x.hi)


def _coerce(v):
    if isinstance(v, Interval):
        return v
    if isinstance(v, (float, int, np.floating, np.integer)):
        if isinstance(v, (int, np.integer)) and abs(int(v)) > 2**53:
            return enclose_fraction(int(v))
        f = float(v)
        return Interval._raw(f, f)
    if isinstance(v, Fraction):
        return enclose_fraction(v)
    if isinstance(v, np.ndarray):
        a = np.asarray(v, dtype=np.float64)
        return Interval._raw(a, a)
    return NotImplemented


def _arrays(a: Interval, b: Interval):
    alo, blo = np.broadcast_arrays(np.asarray(a.lo, dtype=np.float64), np.asarray(b.lo, dtype=np.float64))
    ahi, bhi = np.broadcast_arrays(np.asarray(a.hi, dtype=np.float64), np.asarray(b.hi, dtype=np.float64))
    return Interval._raw(alo, ahi), Interval._raw(blo, bhi)


def _smul(alo, ahi, blo, bhi):
    if alo >= 0.0 and blo >= 0.0:
        return Interval._raw(_mul_pair(alo, blo)[0], _mul_pair(ahi, bhi)[1])
    if alo == ahi and blo == bhi:
        d, u = _mul_pair(alo, blo)
        return Interval._raw(d, u)
    d1, u1 = _mul_pair(alo, blo)
    d2, u2 = _mul_pair(alo, bhi)
    d3, u3 = _mul_pair(ahi, blo)
    d4, u4 = _mul_pair(ahi, bhi)
    return Interval._raw(min(d1, d2, d3, d4), max(u1, u2, u3, u4))


def _div(a: Interval, b: Interval) -> Interval:
    if a.is_scalar and b.is_scalar:
        if b.lo <= 0.0 <= b.hi:
            raise DivisionByZeroInterval(f"division by {b}, which contains 0")
        d1, u1 = _div_pair(a.lo, b.lo)
        d2, u2 = _div_pair(a.lo, b.hi)
        d3, u3 = _div_pair(a.hi, b.lo)
        d4, u4 = _div_pair(a.hi, b.hi)
        return Interval._raw(min(d1, d2, d3, d4), max(u1, u2, u3, u4))
    a, b = _arrays(a, b)
    if np.any((b.lo <= 0.0) & (b.hi >= 0.0)):
        raise DivisionByZeroInterval("division by an interval containing 0")
    d1, u1 = _a_div_pair(a.lo, b.lo)
    d2, u2 = _a_div_pair(a.lo, b.hi)
    d3, u3 = _a_div_pair(a.hi, b.lo)
    d4, u4 = _a_div_pair(a.hi, b.hi)
    lo = np.minimum(np.minimum(d1, d2), np.minimum(d3, d4))
    hi = np.maximum(np.maximum(u1, u2), np.maximum(u3, u4))
    return Interval._raw(lo, hi)


def _pow_dn(x, n):
    # x >= 0; repeated multiplication rounded down
    r = 1.0
    for _ in range(n):
        r = _mul_pair(r, x)[0]
    return r


def _pow_up(x, n):
    r = 1.0
    for _ in range(n):
        r = _mul_pair(r, x)[1]
    return r


def _spow(lo, hi, n):
    if n % 2 == 1:
        lo_v = _pow_dn(lo, n) if lo >= 0 else -_pow_up(-lo, n)
        hi_v = _pow_up(hi, n) if hi >= 0 else -_pow_dn(-hi, n)
        return Interval._raw(lo_v, hi_v)
    if lo >= 0.0:
        return Interval._raw(_pow_dn(lo, n), _pow_up(hi, n))
    if hi <= 0.0:
        return Interval._raw(_pow_dn(-hi, n), _pow_up(-lo, n))
    return Interval._raw(0.0, _pow_up(max(-lo, hi), n))


# --------------------------------------------------------------------------
# decimal literals and serialisation

_DECIMAL_RE = re.compile(r"^\s*([+-]?)(\d+)(?:\.(\d+))?\s*$")


def parse_decimal(s: str) -> Interval:
    """Tightest enclosure of a decimal literal such as ``"-0.3333"``.

    The literal is read as ``numerator / 10**digits`` and the quotient is
    computed with directed division of the two exact integers.
    """
    m = _DECIMAL_RE.match(s) if isinstance(s, str) else None
    if m is None:
        raise ParseError(f"not a decimal literal: {s!r}")
    sign, whole, frac = m.groups()
    frac = frac or ""
    num = int(whole + frac)
    den = 10 ** len(frac)
    if sign == "-":
        num = -num
    if abs(num) <= 2**53 and den <= 2**53:
        return Interval(float(num)) / Interval(float(den))
    return enclose_fraction(Fraction(num, den))


def to_hex(iv: Interval) -> str:
    return f"{float(iv.lo).hex()} {float(iv.hi).hex()}"


def from_hex(lo_hex: str, hi_hex: str) -> Interval:
    return Interval(float.fromhex(lo_hex), float.fromhex(hi_hex))


def format_interval(iv: Interval, digits: int = 12) -> str:
    """Decimal rendering ``[lo, hi]`` rounded outward to ``digits`` significant digits."""
    from decimal import ROUND_CEILING, ROUND_FLOOR, Decimal

    def fmt(x, rounding):
        if x == 0.0:
            return "0"
        d = Decimal(x)
        exp = d.adjusted() - digits + 1
        q = d.quantize(Decimal(1).scaleb(exp), rounding=rounding)
        # plain positional notation so that parse_decimal can read it back
        return format(q, "f")

    return f"[{fmt(float(iv.lo), ROUND_FLOOR)}, {fmt(float(iv.hi), ROUND_CEILING)}]"


# --------------------------------------------------------------------------
# vector / matrix helpers


def split(x) -> tuple[np.ndarray, Interval]:
    """Return ``(mid, rad)`` with ``x ⊆ mid + rad`` and ``0 ∈ rad``."""
    x = _coerce(x)
    m = x.mid()
    return m, x - Interval.point(m) if not x.is_scalar else x - m


def matmul(a, b) -> Interval:
    """Interval product computed row by column with directed rounding.

    The accumulation order is j = 0, 1, ... over the inner dimension, so two
    routes that add the same nonzero terms in the same order agree bit for bit.
    """
    a = _coerce(a)
    b = _coerce(b)
    if a.ndim != 2 or b.ndim not in (1, 2):
        raise DimensionMismatch("matmul expects a matrix and a matrix or vector")
    vec = b.ndim == 1
    blo = b.lo[:, None] if vec else b.lo
    bhi = b.hi[:, None] if vec else b.hi
    k = a.shape[1]
    if blo.shape[0] != k:
        raise DimensionMismatch(f"inner dimensions differ: {a.shape} @ {b.shape}")
    slo = np.zeros((a.shape[0], blo.shape[1]))
    shi = np.zeros_like(slo)
    for j in range(k):
        term = Interval._raw(a.lo[:, j : j + 1], a.hi[:, j : j + 1]) * Interval._raw(
            blo[j : j + 1, :], bhi[j : j + 1, :]
        )
        slo = _a_add_dn(slo, term.lo)
        shi = _a_add_up(shi, term.hi)
    if vec:
        return Interval._raw(slo[:, 0], shi[:, 0])
    return Interval._raw(slo, shi)


def _up_scale(x, inner):
    """Rigorous upper bound of the exact value whose rounded BLAS result is x >= 0."""
    g = inner * _U
    return np.nextafter(x * (1.0 + 2.0 * g) + inner * _ETA * 4.0, _INF)


def point_matmul_enclosure(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(c, r)`` with ``|a@b - c| <= r`` entrywise, using BLAS.

    Based on the a priori bound ``|fl(a@b) - a@b| <= γ_k |a||b|``, valid for any
    summation order and for fused multiply-add.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    k = a.shape[-1]
    if b.shape[0] != k:
        raise DimensionMismatch(f"inner dimensions differ: {a.shape} @ {b.shape}")
    c = a @ b
    g = (k + 2) * _U
    absprod = np.abs(a) @ np.abs(b)
    r = np.nextafter(absprod * (g * (1.0 + 4.0 * g)) * (1.0 + 4.0 * g) + (k + 2) * _ETA * 4.0, _INF)
    return c, _exact_zeros(r, a, b)


def _exact_zeros(r, a, b):
    """Zero the bound where a row of ``a`` or a column of ``b`` vanishes (exact result 0)."""
    zero_rows = ~np.any(a, axis=-1)
    zero_cols = ~np.any(b, axis=0)
    if not (zero_rows.any() or zero_cols.any()):
        return r
    r = np.array(r, copy=True)
    if r.ndim == 1:
        r[zero_rows] = 0.0
        if np.ndim(zero_cols) == 0 and zero_cols:
            r[:] = 0.0
        return r
    r[zero_rows, :] = 0.0
    r[:, zero_cols] = 0.0
    return r


def _sum_directed(v: np.ndarray, up: bool) -> float:
    """Exact sum of ``v`` rounded down (or up), via two correctly rounded sums."""
    vals = [float(t) for t in v]
    try:
        s = math.fsum(vals)
    except (OverflowError, ValueError):
        return _INF if up else -_INF
    if not math.isfinite(s):
        return s
    # sign of the exact residual sum(v) - s
    r = math.fsum(vals + [-s])
    if up:
        return float(np.nextafter(s, _INF)) if r > 0 else s
    return float(np.nextafter(s, -_INF)) if r < 0 else s


def dot(a, b) -> Interval:
    """Tight enclosure of the dot product of two 1-D interval vectors.

    Products are rounded outward and the two sums are rounded exactly once,
    so exactly representable results come out as points.
    """
    a = _coerce(a)
    b = _coerce(b)
    if a.ndim != 1 or b.shape != a.shape:
        raise DimensionMismatch(f"dot expects two vectors of equal length: {a.shape}, {b.shape}")
    p = a * b
    return Interval(_sum_directed(p.lo, False), _sum_directed(p.hi, True))


def _to_midrad(x):
    if isinstance(x, Interval):
        m = np.asarray(x.mid(), dtype=np.float64)
        r = np.asarray(x.rad(), dtype=np.float64)
        return m, r
    x = np.asarray(x, dtype=np.float64)
    return x, None


def matmul_fast(a, b) -> Interval:
    """Enclosure of the product of interval/point matrices via mid-rad BLAS.

    Wider than :func:`matmul` by a few ulps but O(BLAS) fast; used for the
    large dense products of the Lohner algorithm and the frame transforms.
    """
    am, ar = _to_midrad(a)
    bm, br = _to_midrad(b)
    if am.ndim != 2 or bm.ndim not in (1, 2):
        raise DimensionMismatch("matmul_fast expects a matrix and a matrix or vector")
    if am.shape[1] != bm.shape[0]:
        raise DimensionMismatch(f"inner dimensions differ: {am.shape} @ {bm.shape}")
    k = am.shape[1]
    c, err = point_matmul_enclosure(am, bm)
    rad = err
    if br is not None:
        rad = _a_add_up(rad, _exact_zeros(_up_scale(np.abs(am) @ br, k), am, br))
    if ar is not None:
        rad = _a_add_up(rad, _exact_zeros(_up_scale(ar @ np.abs(bm), k), ar, bm))
        if br is not None:
            rad = _a_add_up(rad, _exact_zeros(_up_scale(ar @ br, k), ar, br))
    return Interval._raw(_a_add_dn(c, -rad), _a_add_up(c, rad))


# --------------------------------------------------------------------------
# sin / cos

_PI_DIGITS = (
    "3.14159265358979323846264338327950288419716939937510"
    "58209749445923078164062862089986280348253421170679"
)
_PI_LO = Fraction(_PI_DIGITS)
_PI_HI = _PI_LO + Fraction(1, 10**99)
_HALF_PI_LO = _PI_LO / 2
_HALF_PI_HI = _PI_HI / 2


def pi_interval() -> Interval:
    return Interval(_float_down(_PI_LO), _float_up(_PI_HI))


def _factorial_recips(count, start):
    out = []
    for j in range(count):
        k = start + 2 * j
        out.append(enclose_fraction(Fraction((-1) ** j, math.factorial(k))))
    return out


_N_TERMS = 12
_SIN_COEF = _factorial_recips(_N_TERMS, 1)  # 1, -1/3!, 1/5!, ...
_COS_COEF = _factorial_recips(_N_TERMS, 0)  # 1, -1/2!, 1/4!, ...


def _series(r: Interval, coefs, odd: bool, lead: Interval | None = None) -> Interval:
    """Truncated alternating Taylor series with a rigorous tail bound (|r| < 1).

    The leading term is added last (``r + r^3*P`` or ``1 + r^2*P``) so that
    only one rounding happens at the magnitude of the result. ``lead`` is an
    optional tighter form of ``r`` for that leading term, as a sum of a float
    and a tiny correction.
    """
    if lead is None:
        r2 = r * r
    else:
        # head^2 = p + e exactly (TwoProduct), the rest is tiny
        head, corr = lead
        hp = head * head
        he = _a_prod_err(head, head, hp)
        r2 = Interval.point(hp) + (Interval.point(he) + corr * (2.0 * head) + corr * corr)
        r2 = r2 & (r * r)
    acc = coefs[-1]
    for c in reversed(coefs[1:-1]):
        acc = c + r2 * acc
    deg = 2 * _N_TERMS + (1 if odd else 0)
    mag = Interval(0.0, float(np.max(r.mag())))
    tail = (mag**deg) * enclose_fraction(Fraction(1, math.factorial(deg)))
    small = (r * r2 if odd else r2) * acc + Interval(-tail.hi, tail.hi)
    if not odd:
        return coefs[0] + small
    if lead is None:
        return r + small
    return Interval.point(head) + (corr + small)


def _reduce_point(x: float):
    """``k`` and the residual ``x - k*pi/2`` (``|residual| <= pi/4`` roughly).

    The residual is returned as an enclosure ``[lo, hi]`` and as a nearest
    float plus an enclosure of the difference.
    """
    fx = Fraction(x)
    k = round(x / (math.pi / 2))
    if k >= 0:
        lo = fx - k * _HALF_PI_HI
        hi = fx - k * _HALF_PI_LO
    else:
        lo = fx - k * _HALF_PI_LO
        hi = fx - k * _HALF_PI_HI
    head = float(lo)
    fh = Fraction(head)
    return k, _float_down(lo), _float_up(hi), head, _float_down(lo - fh), _float_up(hi - fh)


def _sincos_points(xs: np.ndarray):
    """Enclosures of sin and cos at the points xs (float array)."""
    xs = np.asarray(xs, dtype=np.float64)
    flat = xs.ravel()
    ks = np.empty(flat.shape, dtype=np.int64)
    rlo = np.empty(flat.shape)
    rhi = np.empty(flat.shape)
    head = np.empty(flat.shape)
    clo = np.empty(flat.shape)
    chi = np.empty(flat.shape)
    for j, x in enumerate(flat):
        if not math.isfinite(x):
            raise IntervalError("sin/cos of a non-finite value")
        ks[j], rlo[j], rhi[j], head[j], clo[j], chi[j] = _reduce_point(float(x))
    r = Interval._raw(rlo, rhi)
    s = _series(r, _SIN_COEF, odd=True, lead=(head, Interval._raw(clo, chi)))
    c = _series(r, _COS_COEF, odd=False, lead=(head, Interval._raw(clo, chi)))
    q = ks % 4
    sin_lo = np.select([q == 0, q == 1, q == 2, q == 3], [s.lo, c.lo, -s.hi, -c.hi])
    sin_hi = np.select([q == 0, q == 1, q == 2, q == 3], [s.hi, c.hi, -s.lo, -c.lo])
    cos_lo = np.select([q == 0, q == 1, q == 2, q == 3], [c.lo, -s.hi, -c.hi, s.lo])
    cos_hi = np.select([q == 0, q == 1, q == 2, q == 3], [c.hi, -s.lo, -c.lo, s.hi])
    clip = lambda v: np.clip(v, -1.0, 1.0)
    shape = xs.shape
    return (
        (clip(sin_lo).reshape(shape), clip(sin_hi).reshape(shape)),
        (clip(cos_lo).reshape(shape), clip(cos_hi).reshape(shape)),
    )


def _may_contain(lo: float, hi: float, offset_halfpis: int, period_halfpis: int = 4) -> bool:
    """Whether [lo, hi] may contain a point (offset + period*j) * pi/2 for integer j."""
    # candidate j range from a float estimate, then exact rational checks
    step = period_halfpis * math.pi / 2
    base = offset_halfpis * math.pi / 2
    j0 = math.floor((lo - base) / step) - 1
    j1 = math.ceil((hi - base) / step) + 1
    flo, fhi = Fraction(lo), Fraction(hi)
    for j in range(j0, j1 + 1):
        mult = offset_halfpis + period_halfpis * j
        a, b = mult * _HALF_PI_LO, mult * _HALF_PI_HI
        if a > b:
            a, b = b, a
        if b >= flo and a <= fhi:
            return True
    return False


def _sincos_interval(x: Interval, which: str) -> Interval:
    scalar = x.is_scalar
    lo = np.atleast_1d(np.asarray(x.lo, dtype=np.float64))
    hi = np.atleast_1d(np.asarray(x.hi, dtype=np.float64))
    (slo_a, shi_a), (clo_a, chi_a) = _sincos_points(lo)
    (slo_b, shi_b), (clo_b, chi_b) = _sincos_points(hi)
    if which == "sin":
        out_lo, out_hi = np.minimum(slo_a, slo_b), np.maximum(shi_a, shi_b)
        max_off, min_off = 1, 3  # sin max at pi/2 + 2pi j, min at 3pi/2 + 2pi j
    else:
        out_lo, out_hi = np.minimum(clo_a, clo_b), np.maximum(chi_a, chi_b)
        max_off, min_off = 0, 2
    for idx in range(lo.size):
        a, b = float(lo.flat[idx]), float(hi.flat[idx])
        if a == b:
            continue
        if b - a >= 6.3:
            out_lo.flat[idx], out_hi.flat[idx] = -1.0, 1.0
            continue
        if _may_contain(a, b, max_off):
            out_hi.flat[idx] = 1.0
        if _may_contain(a, b, min_off):
            out_lo.flat[idx] = -1.0
    if scalar:
        return Interval._raw(float(out_lo[0]), float(out_hi[0]))
    return Interval._raw(out_lo.reshape(x.shape), out_hi.reshape(x.shape))


def isin(x) -> Interval:
    """Rigorous enclosure of sin over an interval (or array of intervals)."""
    return _sincos_interval(_coerce(x), "sin")


def icos(x) -> Interval:
    """Rigorous enclosure of cos over an interval (or array of intervals)."""
    return _sincos_interval(_coerce(x), "cos")
