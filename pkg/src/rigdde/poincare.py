"""(p,n)-sections and the rigorous Poincaré map.

A section is an affine functional ``s(x) = l(x) - a`` on the coefficient
entries of a representation. The map integrates full steps, counts the
strict sign changes of ``s`` from negative to positive, and once the
requested crossing is bracketed between two consecutive grid steps it
narrows the crossing offset ``[eps1, eps2]`` by bisection on strict sign
tests and returns the set produced by the partial step over that range.

Maps are only reported for return times of at least ``(n+1)*tau``. Before
that the solutions need not be smooth enough for the representation to make
sense, so such results raise :class:`RegularityGateViolated`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .interval import Interval, dot, from_hex, matmul_fast, to_hex
from .integrator import StepDecomposition, decompose, epsilon_parts, epsilon_step, propagate
from .lohner import DoubletonSet, hull_of
from .pnrep import PnParams, PnVector
from .taylor_ad import RhsSpec

__all__ = [
    "Section",
    "PoincareResult",
    "NoCrossing",
    "TransversalityFailure",
    "RegularityGateViolated",
    "section_eval",
    "section_sign",
    "check_transversality",
    "poincare_map",
    "recentre",
    "inverse_defect_bound",
]


class NoCrossing(RuntimeError):
    pass


class TransversalityFailure(RuntimeError):
    pass


class RegularityGateViolated(RuntimeError):
    pass


class Section:
    """``s(x) = Σ l_{i,k} x^[k](-i*h) + l_{0,0} x(0) - a`` with no remainder weights."""

    def __init__(self, params: PnParams, l: Interval, a: Interval):
        if l.shape != (params.m,):
            raise ValueError("section weights must have one entry per coordinate")
        rem = params.remainder_positions
        if np.any(l.lo[rem] != 0.0) or np.any(l.hi[rem] != 0.0):
            raise ValueError("sections carry no weight on remainder entries")
        if np.all(l.lo == 0.0) and np.all(l.hi == 0.0):
            raise ValueError("section weights are all zero")
        self.params = params
        self.l = l
        self.a = a
        self._row = l.reshape(1, -1)

    @classmethod
    def from_terms(cls, params: PnParams, terms: dict, a=0.0) -> "Section":
        lo = np.zeros(params.m)
        hi = np.zeros(params.m)
        for (i, k), v in terms.items():
            if k > params.n:
                raise ValueError("sections carry no weight on remainder entries")
            v = v if isinstance(v, Interval) else Interval(float(v))
            j = params.pos(i, k)
            lo[j], hi[j] = v.lo, v.hi
        a = a if isinstance(a, Interval) else Interval(float(a))
        return cls(params, Interval(lo, hi), a)

    @classmethod
    def from_frame(cls, frame) -> "Section":
        """Section through ``frame.x0`` spanned by the columns ``2..m`` of ``frame.C``.

        The weights enclose the first row of ``C^-1`` and ``a`` encloses
        ``l(x0)``, so the section is exactly ``{x0 + C*(0, u)}`` and a point on
        it has first frame coordinate 0.
        """
        P = frame.params
        C = np.asarray(frame.C, dtype=float)
        rem = P.remainder_positions
        unit = np.zeros((rem.size, P.m))
        unit[np.arange(rem.size), rem] = 1.0
        if np.any(C[rem] != unit) or np.any(C[:, rem].T != unit):
            raise ValueError("frame must leave the remainder coordinates fixed")
        delta = inverse_defect_bound(C)
        # row 0 of C^-1 - C^T is row 0 of ((C^T C)^-1 - I) times C^T
        w = np.max(np.abs(C), axis=1) * delta
        w = np.nextafter(w * (1 + 1e-12), np.inf)
        l = Interval(C[:, 0]) + Interval(-w, w)
        l = Interval(np.where(P.is_remainder, 0.0, l.lo), np.where(P.is_remainder, 0.0, l.hi))
        a = matmul_fast(l.reshape(1, -1), np.asarray(frame.x0, dtype=float))[0]
        return cls(P, l, a)

    @classmethod
    def value_section(cls, params: PnParams, c=0.0) -> "Section":
        """``x(0) = c``."""
        return cls.from_terms(params, {(0, 0): 1.0}, c)

    def linear(self, v) -> Interval:
        """``l(v)`` for a point or interval vector ``v``."""
        return matmul_fast(self._row, v)[0]

    # ------------------------------------------------------------- file I/O
    def dumps(self) -> str:
        P = self.params
        lines = [f"{P.p} {P.n} {P.tau.lo.hex()} {P.tau.hi.hex()}"]
        nz = np.nonzero((self.l.lo != 0.0) | (self.l.hi != 0.0))[0]
        inv = {P.pos(i, k): (i, k) for i in range(1, P.p + 1) for k in range(P.n + 1)}
        inv[0] = (0, 0)
        for j in nz:
            i, k = inv[int(j)]
            lines.append(f"{i} {k} {to_hex(self.l[int(j)])}")
        lines.append(f"offset {to_hex(self.a)}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Section":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        params = PnParams(int(rows[0][0]), int(rows[0][1]), from_hex(rows[0][2], rows[0][3]))
        lo = np.zeros(params.m)
        hi = np.zeros(params.m)
        a = None
        for row in rows[1:]:
            if row[0] == "offset":
                a = from_hex(row[1], row[2])
                continue
            j = params.pos(int(row[0]), int(row[1]))
            lo[j], hi[j] = float.fromhex(row[2]), float.fromhex(row[3])
        if a is None:
            raise ValueError("section file lacks an offset line")
        return cls(params, Interval(lo, hi), a)

    @classmethod
    def load(cls, path) -> "Section":
        with open(path) as fh:
            return cls.loads(fh.read())


def inverse_defect_bound(C: np.ndarray) -> float:
    """``delta`` with ``||C^-1 - C^T||`` controlled by ``||(C^T C)^-1 - I||_inf <= delta``."""
    CtC = matmul_fast(C.T, C)
    E = Interval.point(np.eye(C.shape[0])) - CtC
    e = float(np.max(np.sum(E.mag(), axis=1)))
    e = float(np.nextafter(e * (1 + 1e-12), np.inf))
    if not e < 0.5:
        raise ValueError("frame is too far from orthonormal")
    return float(np.nextafter(e / (1.0 - e) * (1 + 1e-12), np.inf))


def _eval_linear_on_set(row: Interval, s, shift: Interval | None = None) -> Interval:
    """``w(y)`` over the set ``s`` for an interval row ``w`` (1 x m)."""
    w = row[0]
    if isinstance(s, DoubletonSet):
        val = dot(w, Interval.point(s.x))
        wc = matmul_fast(row, s.C)[0]
        val = val + dot(wc, s.r0) + dot(w, s.r_tilde)
    else:
        data = s.data if isinstance(s, PnVector) else s
        val = dot(w, data)
    return val if shift is None else val - shift


def section_eval(sec: Section, x) -> Interval:
    """Enclosure of ``s`` over a set (doubleton structure used when available)."""
    return _eval_linear_on_set(sec._row, x, sec.a)


def section_sign(v: Interval) -> int:
    """-1 or +1 when the sign is certain, 0 otherwise."""
    if v.hi < 0.0:
        return -1
    if v.lo > 0.0:
        return 1
    return 0


def _transversality_row(sec: Section) -> Interval:
    """Weights ``w`` with ``l(x') = w(x) + l_{0,0} x'(0)`` for the node terms.

    The derivative's node coefficient ``k`` is ``(k+1) x^[k+1]``; for
    ``k = n`` that coefficient lies in the remainder bound.
    """
    P = sec.params
    n = P.n
    lo = np.zeros(P.m)
    hi = np.zeros(P.m)
    cp = P.coeff_positions
    l = sec.l
    for k in range(n):
        w = l[cp[:, k]] * float(k + 1)
        lo[cp[:, k + 1]], hi[cp[:, k + 1]] = w.lo, w.hi
    w = l[cp[:, n]] * float(n + 1)
    rp = P.remainder_positions
    lo[rp], hi[rp] = w.lo, w.hi
    return Interval._raw(lo.reshape(1, -1), hi.reshape(1, -1))


def check_transversality(sec: Section, sets, f: RhsSpec, raise_on_failure: bool = True) -> Interval:
    """Enclosure of ``l(x')`` over all given sets; its ``lo`` is the bound.

    Raises :class:`TransversalityFailure` unless the lower bound is positive.
    """
    P = sec.params
    if P.n < 1:
        raise TransversalityFailure("transversality needs n >= 1")
    if not isinstance(sets, (list, tuple)):
        sets = [sets]
    row = _transversality_row(sec)
    l00 = sec.l[0]
    out = None
    for s in sets:
        v = _eval_linear_on_set(row, s)
        if not (l00.lo == 0.0 and l00.hi == 0.0):
            hull = hull_of(s) if isinstance(s, DoubletonSet) else (s.data if isinstance(s, PnVector) else s)
            xdot0 = f.evaluate(hull[P.pos(P.p, 0)], hull[0])
            v = v + l00 * xdot0
        out = v if out is None else out | v
    if raise_on_failure and not out.lo > 0.0:
        raise TransversalityFailure(f"l(x') is not bounded away from 0: {out}")
    return out


def recentre(s: DoubletonSet) -> DoubletonSet:
    """Move ``C*mid(r0)`` into ``x`` so that ``r0`` becomes symmetric."""
    return s.recentred()


@dataclass
class PoincareResult:
    q: int
    eps: Interval
    t_S: Interval
    image: DoubletonSet
    transversality_lb: Interval
    crossings: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    bisection_rounds: int = 0
    # the set after q full steps, for callers that integrate further
    last_step: DoubletonSet | None = None

    @property
    def regular(self) -> bool:
        P = self.image.params
        return self.q >= (P.n + 1) * P.p


def _sec_eps_eval(sec: Section, s: DoubletonSet, dec: StepDecomposition, eps: Interval) -> Interval:
    """``s(I_eps(X))`` through the linearisation, without forming the image."""
    phi, A, R = epsilon_parts(s, dec, eps)
    lA = matmul_fast(sec._row, A)
    val = sec.linear(phi) + sec.linear(R)
    val = val + matmul_fast(matmul_fast(lA, s.C), s.r0)[0] + matmul_fast(lA, s.r_tilde)[0]
    return val - sec.a


def _bisect(sec, s, dec, h, max_rounds=60, log=None):
    """Narrow ``[e1, e2]`` with ``s < 0`` at ``e1`` and ``s > 0`` at ``e2``."""
    def sign_at(e):
        return section_sign(_sec_eps_eval(sec, s, dec, Interval(e)))

    e1, e2 = 0.0, h
    a_hi = e2  # e1 search interval [e1, a_hi]
    b_lo = e1  # e2 search interval [b_lo, e2]
    rounds = 0
    stale = 0
    while rounds < max_rounds:
        rounds += 1
        before = e2 - e1
        if a_hi - e1 > 0:
            mid = 0.5 * (e1 + a_hi)
            sg = sign_at(mid)
            if sg < 0:
                e1 = mid
            else:
                a_hi = mid
                if sg > 0 and mid < e2:
                    e2 = mid
        b_lo = max(b_lo, e1)
        if e2 - b_lo > 0:
            mid = 0.5 * (b_lo + e2)
            sg = sign_at(mid)
            if sg > 0:
                e2 = mid
            else:
                b_lo = mid
                if sg < 0 and mid > e1:
                    e1 = mid
        a_hi = min(a_hi, e2)
        gain = before - (e2 - e1)
        if log is not None:
            log(f"bisection round {rounds}: eps=[{e1!r}, {e2!r}]")
        if gain <= 1e-6 * (e2 - e1):
            stale += 1
            if stale >= 2:
                break
        else:
            stale = 0
    return e1, e2, rounds


def poincare_map(x0, sec: Section, f: RhsSpec, min_return: int = 1, max_steps: int | None = None,
                 keep_trajectory: bool = False, log=None, check_transversal: bool = True) -> PoincareResult:
    """Rigorous ``P_{>=omega}`` on the set ``x0`` (a DoubletonSet or box).

    Counts strict negative-to-positive sign changes of the section from
    ``t = 0``; the ``min_return``-th one is bracketed and refined.
    """
    s = x0 if isinstance(x0, DoubletonSet) else DoubletonSet.from_box(x0)
    s = recentre(s)
    P = s.params
    h = P.h
    q_min = (P.n + 1) * P.p
    if max_steps is None:
        max_steps = 20 * q_min
    crossings = []
    trajectory = [hull_of(s)] if keep_trajectory else []
    last_definite = section_sign(section_eval(sec, s))
    last_neg_step = 0 if last_definite < 0 else None
    dec = None
    k = 0
    while True:
        if k >= max_steps:
            raise NoCrossing(f"no bracketed crossing within {max_steps} steps")
        dec = decompose(s, f)
        s_next = propagate(s, dec.A, dec.phi, dec.r_part)
        sg = section_sign(section_eval(sec, s_next))
        if sg > 0 and last_definite < 0:
            crossings.append(k)
            if log is not None:
                log(f"crossing {len(crossings)} between steps {last_neg_step} and {k + 1}")
            if len(crossings) == min_return:
                if k < q_min:
                    raise RegularityGateViolated(
                        f"crossing after {k} steps, i.e. before omega=(n+1)*tau which needs {q_min} steps"
                    )
                if last_neg_step != k:
                    raise NoCrossing(
                        f"crossing not bracketed within one step (steps {last_neg_step}..{k + 1})"
                    )
                break
        if sg != 0:
            last_definite = sg
            if sg < 0:
                last_neg_step = k + 1
        s = s_next
        k += 1
        if keep_trajectory:
            trajectory.append(hull_of(s))
    q = k
    if q < q_min:
        raise RegularityGateViolated(
            f"crossing after {q} steps, i.e. before omega=(n+1)*tau which needs {q_min} steps"
        )
    e1, e2, rounds = _bisect(sec, s, dec, h.lo, log=log)
    eps = Interval(e1, e2)
    image = epsilon_step(s, dec, eps)
    tr = check_transversality(sec, [image], f, raise_on_failure=check_transversal)
    t_S = Interval(float(q)) * h + eps
    if keep_trajectory:
        trajectory.append(hull_of(image))
    return PoincareResult(q, eps, t_S, image, tr, crossings, trajectory, rounds, s)
