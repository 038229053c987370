"""(p,n)-representations of functions on [-tau, 0].

A function ``x`` is described on the uniform grid ``-i*h`` (``i = 1..p``,
``h = tau/p``) by its Taylor coefficients ``x^[k](-i*h)`` for ``k <= n``,
a bound on ``x^[n+1]`` over each cell ``(-i*h, -i*h + h)`` and the value
``x(0)``. All of it fits into one interval vector of length
``m = p*(n+2) + 1``, laid out by the index function

    I(0, 0)   = 1
    I(i, k)   = 1 + (i-1)*(n+1) + k        k <= n
    I(i, n+1) = 1 + p*(n+1) + i

Positions are 1-based in :meth:`PnParams.index` and 0-based in
:meth:`PnParams.pos`, which is what the arrays use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .interval import Interval, from_hex, parse_decimal, to_hex

__all__ = [
    "PnParams",
    "PnVector",
    "IndexOutOfRange",
    "OrderTooLow",
    "EpsilonOutOfRange",
    "eval_ck",
    "derivative_bound",
    "ck_norm_distance",
    "from_taylor_callback",
    "binomial_table",
]


class IndexOutOfRange(IndexError):
    pass


class OrderTooLow(ValueError):
    pass


class EpsilonOutOfRange(ValueError):
    pass


def binomial_table(size):
    """Integer table ``B[l, k] = C(l, k)`` as floats (exact for small l)."""
    b = np.zeros((size, size))
    for l in range(size):
        for k in range(l + 1):
            b[l, k] = math.comb(l, k)
    return b


@dataclass(frozen=True, eq=False)
class PnParams:
    p: int
    n: int
    tau: Interval

    def __post_init__(self):
        if self.p < 1 or self.n < 0:
            raise ValueError("need p >= 1 and n >= 0")
        if not isinstance(self.tau, Interval):
            object.__setattr__(self, "tau", parse_decimal(str(self.tau)))

    def __eq__(self, other):
        return (
            isinstance(other, PnParams)
            and self.p == other.p
            and self.n == other.n
            and self.tau == other.tau
        )

    def __hash__(self):
        return hash((self.p, self.n, self.tau.lo, self.tau.hi))

    @property
    def m(self) -> int:
        return self.p * (self.n + 2) + 1

    @cached_property
    def h(self) -> Interval:
        return self.tau / self.p

    def index(self, i: int, k: int) -> int:
        """1-based position of coefficient ``(i, k)``."""
        return self.pos(i, k) + 1

    def pos(self, i: int, k: int) -> int:
        p, n = self.p, self.n
        if i == 0 and k == 0:
            return 0
        if not (1 <= i <= p and 0 <= k <= n + 1):
            raise IndexOutOfRange(f"no entry ({i}, {k}) for p={p}, n={n}")
        if k <= n:
            return 1 + (i - 1) * (n + 1) + k
        return p * (n + 1) + i

    def node_slice(self, i: int) -> slice:
        """0-based slice of the coefficients ``k = 0..n`` of node ``i``."""
        start = 1 + (i - 1) * (self.n + 1)
        return slice(start, start + self.n + 1)

    @cached_property
    def coeff_positions(self) -> np.ndarray:
        """0-based positions as a ``(p, n+1)`` table, row ``i-1``."""
        return 1 + np.arange(self.p * (self.n + 1)).reshape(self.p, self.n + 1)

    @cached_property
    def remainder_positions(self) -> np.ndarray:
        return self.p * (self.n + 1) + 1 + np.arange(self.p)

    @cached_property
    def is_remainder(self) -> np.ndarray:
        mask = np.zeros(self.m, dtype=bool)
        mask[self.remainder_positions] = True
        return mask

    def full_table(self, data):
        """``(p, n+2)`` table of node coefficients with remainders in the last column."""
        cols = np.concatenate([self.coeff_positions, self.remainder_positions[:, None]], axis=1)
        return data[cols]


class PnVector:
    """A point of representation space: ``params`` plus an interval vector."""

    __slots__ = ("params", "data")

    def __init__(self, params: PnParams, data: Interval):
        if data.shape != (params.m,):
            raise ValueError(f"expected {params.m} entries, got shape {data.shape}")
        self.params = params
        self.data = data

    def __repr__(self):
        return f"PnVector(p={self.params.p}, n={self.params.n})"

    def __getitem__(self, ik) -> Interval:
        i, k = ik
        return self.data[self.params.pos(i, k)]

    @property
    def value(self) -> Interval:
        return self.data[0]

    def node(self, i: int) -> Interval:
        return self.data[self.params.node_slice(i)]

    def remainder(self, i: int) -> Interval:
        return self.data[self.params.pos(i, self.params.n + 1)]

    def node_table(self) -> Interval:
        """All nodes as a ``(p, n+2)`` interval table (remainder last)."""
        P = self.params
        return Interval._raw(P.full_table(self.data.lo), P.full_table(self.data.hi))

    def hull(self, other: "PnVector") -> "PnVector":
        return PnVector(self.params, self.data | other.data)

    def contains(self, other) -> bool:
        d = other.data if isinstance(other, PnVector) else other
        return self.data.contains(d)

    def eval_ck(self, i: int, k: int, eps) -> Interval:
        return eval_ck(self, i, k, eps)

    # -------------------------------------------------------------- file I/O
    def dumps(self) -> str:
        P = self.params
        lines = [f"{P.p} {P.n} {P.tau.lo.hex()} {P.tau.hi.hex()}"]
        for j in range(P.m):
            lines.append(f"{j + 1} {to_hex(self.data[j])}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "PnVector":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        p, n = int(rows[0][0]), int(rows[0][1])
        params = PnParams(p, n, from_hex(rows[0][2], rows[0][3]))
        if len(rows) - 1 != params.m:
            raise ValueError(f"expected {params.m} entries, found {len(rows) - 1}")
        lo = np.empty(params.m)
        hi = np.empty(params.m)
        for row in rows[1:]:
            j = int(row[0]) - 1
            lo[j] = float.fromhex(row[1])
            hi[j] = float.fromhex(row[2])
        return cls(params, Interval(lo, hi))

    @classmethod
    def load(cls, path) -> "PnVector":
        with open(path) as fh:
            return cls.loads(fh.read())


def _check_eps(params: PnParams, eps: Interval):
    # with an inexact h, eps may reach h.hi: evaluating on a slightly larger
    # set of offsets still encloses the values on the true cell
    if eps.lo < 0.0 or eps.hi > params.h.hi:
        raise EpsilonOutOfRange(f"eps={eps} is not inside [0, h]")


def _horner(table: Interval, k: int, eps: Interval, n: int) -> Interval:
    """Σ_{l=k}^{n+1} C(l,k) eps^{l-k} table[..., l] by Horner's scheme."""
    acc = table[..., n + 1] * float(math.comb(n + 1, k))
    for l in range(n, k - 1, -1):
        acc = acc * eps + table[..., l] * float(math.comb(l, k))
    return acc


def eval_ck(x: PnVector, i, k: int, eps) -> Interval:
    """Enclosure of ``x^[k](-i*h + eps)``; ``i`` may be an int or ``None`` for all nodes."""
    P = x.params
    eps = eps if isinstance(eps, Interval) else Interval(float(eps))
    _check_eps(P, eps)
    if not 0 <= k <= P.n + 1:
        raise IndexOutOfRange(f"order {k} outside 0..{P.n + 1}")
    table = x.node_table()
    if i is None:
        return _horner(table, k, eps, P.n)
    if not 1 <= i <= P.p:
        raise IndexOutOfRange(f"node {i} outside 1..{P.p}")
    return _horner(table[i - 1], k, eps, P.n)


def derivative_bound(x: PnVector) -> PnVector:
    """(p, n-1)-representation of the derivative of every function in ``x``.

    Node coefficient ``k`` of the derivative is ``(k+1) * x^[k+1]``; the
    remainder becomes ``(n+1) * x^[n+1]``. The value entry is the derivative
    at ``0`` read off the last cell.
    """
    P = x.params
    if P.n < 1:
        raise OrderTooLow("derivative needs n >= 1")
    Q = PnParams(P.p, P.n - 1, P.tau)
    t = x.node_table()
    scale = np.arange(1, P.n + 2, dtype=float)
    dt = Interval._raw(t.lo[:, 1:], t.hi[:, 1:]) * scale
    lo = np.zeros(Q.m)
    hi = np.zeros(Q.m)
    lo[Q.coeff_positions] = dt.lo[:, :-1]
    hi[Q.coeff_positions] = dt.hi[:, :-1]
    lo[Q.remainder_positions] = dt.lo[:, -1]
    hi[Q.remainder_positions] = dt.hi[:, -1]
    d = PnVector(Q, Interval(lo, hi))
    v = _horner(dt[0], 0, P.h, Q.n)
    d.data.lo[0], d.data.hi[0] = v.lo, v.hi
    return d


def ck_norm_distance(x, approx, r: int, t0=0.0, subdiv: int = 4, centred: bool = True) -> list[Interval]:
    """Bounds on ``sup_t |approx^(j)(t) - x^(j)(t)|`` summed over ``j = 0..r``.

    ``x`` is a PnVector (or a list of them) describing functions on
    ``[t0 - tau, t0]``; ``t0`` is one time for all of them or one per entry,
    so a list of windows along a trajectory can be measured in one call.
    ``approx(t, j)`` must return an enclosure of the j-th derivative of the
    approximant over the time interval ``t`` (orders up to ``r+1`` are asked
    for when ``centred``). Each cell is cut into ``subdiv`` sub-cells.

    With ``centred`` the difference ``g = approx^(j) - x^(j)`` on a sub-cell
    with centre ``c`` and radius ``rho`` is bounded by the mean value form
    ``|g(c)| + rho*|g'|``, which keeps the true variation of both functions
    over the sub-cell from adding up; otherwise ``|g|`` is evaluated over the
    whole sub-cell.

    Returns the running sums for ``r' = 0..r`` as intervals ``[lower,
    upper]``: the sup over all windows is taken per order before summing, as
    the C^r norm requires.
    """
    xs = list(x) if isinstance(x, (list, tuple)) else [x]
    P = xs[0].params
    if r > P.n:
        raise OrderTooLow(f"r={r} exceeds n={P.n}")
    t0s = list(t0) if isinstance(t0, (list, tuple)) else [t0] * len(xs)
    if len(t0s) != len(xs):
        raise ValueError("need one t0 per representation")
    t0s = [t if isinstance(t, Interval) else Interval(float(t)) for t in t0s]
    h = P.h
    nodes = np.arange(1, P.p + 1, dtype=float)
    sup_lo = np.zeros(r + 1)
    sup_hi = np.zeros(r + 1)
    fact = [float(math.factorial(j)) for j in range(r + 2)]
    for s in range(subdiv):
        e_lo = (h * s) / subdiv
        e_hi = (h * (s + 1)) / subdiv
        eps = Interval(e_lo.lo, min(e_hi.hi, h.hi))
        if centred:
            ec = 0.5 * (eps.lo + eps.hi)
            centre = Interval(ec)
            rho = max(ec - eps.lo, eps.hi - ec)
        for xv, tw in zip(xs, t0s):
            # times of the sub-cells for all nodes at once
            times = tw - h * Interval(nodes) + eps
            if centred:
                tc = tw - h * Interval(nodes) + centre
                for j in range(r + 1):
                    g = approx(tc, j) - eval_ck(xv, None, j, centre) * fact[j]
                    dg = approx(times, j + 1) - eval_ck(xv, None, j + 1, eps) * fact[j + 1]
                    d = abs(g) + abs(dg) * rho
                    sup_lo[j] = max(sup_lo[j], float(np.max(abs(g).lo)))
                    sup_hi[j] = max(sup_hi[j], float(np.max(d.hi)))
                continue
            for j in range(r + 1):
                a = approx(times, j)
                xj = eval_ck(xv, None, j, eps) * fact[j]
                d = abs(a - xj)
                sup_lo[j] = max(sup_lo[j], float(np.max(d.lo)))
                sup_hi[j] = max(sup_hi[j], float(np.max(d.hi)))
    out = []
    acc = Interval(0.0)
    for j in range(r + 1):
        acc = acc + Interval(sup_lo[j], sup_hi[j])
        out.append(acc)
    return out


def from_taylor_callback(params: PnParams, coeff_source, remainder_source, value0) -> PnVector:
    """Assemble a PnVector from callbacks ``(i, k) -> Interval`` and ``i -> Interval``."""
    lo = np.empty(params.m)
    hi = np.empty(params.m)
    v = value0 if isinstance(value0, Interval) else Interval(float(value0))
    lo[0], hi[0] = v.lo, v.hi
    for i in range(1, params.p + 1):
        for k in range(params.n + 1):
            c = coeff_source(i, k)
            c = c if isinstance(c, Interval) else Interval(float(c))
            j = params.pos(i, k)
            lo[j], hi[j] = c.lo, c.hi
        rem = remainder_source(i)
        rem = rem if isinstance(rem, Interval) else Interval(float(rem))
        j = params.pos(i, params.n + 1)
        lo[j], hi[j] = rem.lo, rem.hi
    return PnVector(params, Interval(lo, hi))
