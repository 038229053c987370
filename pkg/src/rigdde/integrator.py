"""One rigorous integration step of a (p,n)-representation.

A step of length ``h = tau/p`` moves the grid: nodes ``2..p`` of the new
representation are nodes ``1..p-1`` of the old one, and node 1 is computed
from the old node ``p`` (the delayed slab) and the old value ``x(0)``:

* coefficients by the jet recursion ``x^[k+1] = F^[k] / (k+1)``,
* the remainder from a validated rough enclosure ``Z`` of ``x([0, h])``,
* the new value by the Taylor sum up to ``h^(n+1)``.

The result is split into the smooth part ``Φ`` (coefficients, acting on the
point ``x``) and the remainder part ``R`` (evaluated over the whole set),
which is what the Lohner propagation in :mod:`rigdde.lohner` consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .interval import IntervalError, Interval
from .lohner import (
    BlockMatrix,
    DoubletonSet,
    _block_from_duals,
    _taylor_sum,
    hull_of,
    propagate,
    sensitivity_jet,
)
from .pnrep import EpsilonOutOfRange, PnParams, PnVector, _horner, eval_ck
from .taylor_ad import JetEvaluator, RhsSpec, advance_solution_jet

__all__ = [
    "EnclosureFailure",
    "RoughEnclosureResult",
    "StepDecomposition",
    "rough_enclosure",
    "forward_coeffs",
    "forward_remainder",
    "forward_value",
    "decompose",
    "step",
    "integrate",
    "epsilon_parts",
    "epsilon_step",
]


class EnclosureFailure(ArithmeticError):
    pass


@dataclass
class RoughEnclosureResult:
    Z: Interval
    Y: Interval
    attempts: int


def rough_enclosure(x: PnVector, f: RhsSpec, h: Interval | None = None, guess: Interval | None = None,
                    max_attempts: int = 30) -> RoughEnclosureResult:
    """Validated enclosure ``Z ⊇ x([0, h])`` with ``Z ⊂ int(Y)``.

    ``Z = x(0) + [0,h] * f(x(-tau + [0,h]), Y)``; if it lies in the interior
    of ``Y`` then every solution stays in ``Z`` over the step.
    """
    P = x.params
    h = P.h if h is None else h
    slab = eval_ck(x, P.p, 0, Interval(0.0, P.h.hi))
    x0 = x.value
    t = Interval(0.0, h.hi)
    try:
        if guess is None:
            z0 = x0 + t * f.evaluate(slab, x0)
            Y = z0.inflate(1e-15, 1.5)
        else:
            Y = guess
    except IntervalError as exc:
        raise EnclosureFailure(f"cannot evaluate the right-hand side: {exc}") from None
    for attempt in range(1, max_attempts + 1):
        try:
            Z = x0 + t * f.evaluate(slab, Y)
        except IntervalError:
            Z = None
        if Z is not None and Z.subset_interior(Y):
            return RoughEnclosureResult(Z, Y, attempt)
        Y = (Y if Z is None else Y | Z).inflate(1e-15, 2.0)
        if not math.isfinite(Y.lo) or not math.isfinite(Y.hi):
            break
    raise EnclosureFailure(f"no rough enclosure after {max_attempts} attempts")


def forward_coeffs(x: PnVector, f: RhsSpec) -> list[Interval]:
    """Coefficients ``k = 0..n`` of the new node 1."""
    P = x.params
    u = list(x.node(P.p))
    return advance_solution_jet(f, u, x.value, P.n).coeffs


def forward_remainder(x: PnVector, coeffs, Z: Interval, f: RhsSpec, refine: int = 2, subdiv: int = 4) -> Interval:
    """Bound on ``x^[n+1]`` over the new cell: ``a* + b*·[0,h]``.

    The first pass bounds the new solution's jet on the cell by the chain
    ``d^[0] = Z``, ``d^[k] = F^[k-1](c, d)/k``, which wraps badly. Each of the
    ``refine`` further passes bounds ``d^[k]`` on a sub-cell by the Taylor
    polynomial of the new node with the previous remainder in the Lagrange
    term, takes ``b*`` as the hull over ``subdiv`` sub-cells and intersects.
    """
    P = x.params
    n = P.n
    h = P.h
    cell = Interval(0.0, h.hi)
    # a*: the exact (n+1)-th coefficient at the new node
    u = list(x.node(P.p))
    ev = JetEvaluator(f, u, list(coeffs))
    a_star = ev.coefficient(n) / (n + 1)
    # b*: bound on the derivative of x^[n+1] over the cell
    c = [eval_ck(x, P.p, k, cell) for k in range(n + 2)]
    d = [Z]
    ev2 = JetEvaluator(f, c, d)
    for k in range(n + 1):
        d.append(ev2.coefficient(k) / (k + 1))
    rem = a_star + ev2.coefficient(n + 1) * cell
    for _ in range(refine):
        b_star = None
        for j in range(subdiv):
            t = Interval((h * j / subdiv).lo, min((h * (j + 1) / subdiv).hi, h.hi))
            c = [eval_ck(x, P.p, k, t) for k in range(n + 2)]
            table = Interval.stack(list(coeffs) + [rem])
            d = [_horner(table, k, t, n) for k in range(n + 2)]
            d[0] = _meet(d[0], Z)
            ev2 = JetEvaluator(f, c, d)
            b = ev2.coefficient(n + 1)
            b_star = b if b_star is None else b_star | b
        rem = _meet(rem, a_star + b_star * cell)
    return rem


def _meet(a: Interval, b: Interval) -> Interval:
    # both enclose the same quantity, so they cannot be disjoint
    return Interval(max(a.lo, b.lo), min(a.hi, b.hi))


def forward_value(coeffs, remainder: Interval, h: Interval) -> Interval:
    """``Σ_{k<=n} coeffs[k] h^k + remainder h^(n+1)``."""
    n = len(coeffs) - 1
    return _taylor_sum(list(coeffs), h) + remainder * h ** (n + 1)


@dataclass
class StepDecomposition:
    """Everything one step produces.

    ``phi`` encloses ``Φ`` at the set's centre, ``A`` encloses ``DΦ`` over
    the set and ``r_part`` encloses ``R`` over the set. The hull data are
    kept for the partial ε-step.
    """

    phi: Interval
    A: BlockMatrix
    r_part: Interval
    hull: PnVector
    coeffs_hull: list
    remainder: Interval
    rough: RoughEnclosureResult

    @property
    def phi_mid(self) -> np.ndarray:
        return np.asarray(self.phi.mid(), dtype=np.float64)


def _as_set(x) -> DoubletonSet:
    if isinstance(x, DoubletonSet):
        return x
    return DoubletonSet.from_box(x)


def decompose(s, f: RhsSpec) -> StepDecomposition:
    """Φ/R split of one step applied to a doubleton (or box) ``s``."""
    s = _as_set(s)
    P = s.params
    n = P.n
    m = P.m
    X = PnVector(P, hull_of(s))
    rough = rough_enclosure(X, f)
    v_d, value_d = sensitivity_jet(X, f)
    A = _block_from_duals(P, v_d, value_d)
    coeffs_hull = [d.val for d in v_d]
    rem = forward_remainder(X, coeffs_hull, rough.Z, f)

    xm = PnVector(P, Interval.point(s.x))
    v_pt = forward_coeffs(xm, f)
    shift = (P.p - 1) * (n + 1)
    plo = np.zeros(m)
    phi_hi = np.zeros(m)
    val = _taylor_sum(v_pt, P.h)
    plo[0], phi_hi[0] = val.lo, val.hi
    for k, c in enumerate(v_pt):
        plo[1 + k], phi_hi[1 + k] = c.lo, c.hi
    plo[n + 2 : n + 2 + shift] = s.x[1 : 1 + shift]
    phi_hi[n + 2 : n + 2 + shift] = s.x[1 : 1 + shift]
    phi = Interval._raw(plo, phi_hi)

    rlo = np.zeros(m)
    rhi = np.zeros(m)
    rv = rem * P.h ** (n + 1)
    rlo[0], rhi[0] = rv.lo, rv.hi
    rpos = P.remainder_positions
    rlo[rpos[0]], rhi[rpos[0]] = rem.lo, rem.hi
    rlo[rpos[1:]] = X.data.lo[rpos[:-1]]
    rhi[rpos[1:]] = X.data.hi[rpos[:-1]]
    r_part = Interval._raw(rlo, rhi)
    return StepDecomposition(phi, A, r_part, X, coeffs_hull, rem, rough)


def step(s, f: RhsSpec, dec: StepDecomposition | None = None) -> DoubletonSet:
    """``I_h`` applied to the set ``s`` (doubleton or box)."""
    s = _as_set(s)
    if dec is None:
        dec = decompose(s, f)
    return propagate(s, dec.A, dec.phi, dec.r_part)


def integrate(s, f: RhsSpec, steps: int, callback=None) -> DoubletonSet:
    """``steps`` full steps; ``callback(k, set)`` sees every intermediate set."""
    s = _as_set(s)
    for k in range(steps):
        s = step(s, f)
        if callback is not None:
            callback(k + 1, s)
    return s


# --------------------------------------------------------------------------
# partial step


def _check_eps(P: PnParams, eps: Interval):
    if eps.lo < 0.0 or eps.hi > P.h.hi:
        raise EpsilonOutOfRange(f"eps={eps} is not inside [0, h]")


def epsilon_parts(s: DoubletonSet, dec: StepDecomposition, eps: Interval):
    """``(Φ_ε(x), [DΦ_ε], R_ε)`` of the shift by ``eps``.

    Node coefficients become ``c^{i,[k]}(eps)``, remainders the hull of the
    two cells the shifted cell overlaps, and the value the Taylor sum of the
    new node to ``eps^(n+1)``.
    """
    P = s.params
    _check_eps(P, eps)
    n, p, m = P.n, P.p, P.m
    X = dec.hull
    # T[k, l] = C(l, k) eps^(l-k) for k <= l <= n
    epow = [Interval(1.0)]
    for _ in range(n + 1):
        epow.append(epow[-1] * eps)
    T_lo = np.zeros((n + 1, n + 1))
    T_hi = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        for l in range(k, n + 1):
            t = epow[l - k] * float(math.comb(l, k))
            T_lo[k, l], T_hi[k, l] = t.lo, t.hi
    T = Interval._raw(T_lo, T_hi)

    # Φ_ε at the centre
    cp = P.coeff_positions
    nodes_x = Interval.point(s.x[cp])  # (p, n+1)
    nodes_new = _small_matmul_rows(nodes_x, T)
    phi_lo = np.zeros(m)
    phi_hi = np.zeros(m)
    phi_lo[cp] = nodes_new.lo
    phi_hi[cp] = nodes_new.hi
    v_pt = list(dec.phi[1 : n + 2])
    val = _taylor_sum(v_pt, eps)
    phi_lo[0], phi_hi[0] = val.lo, val.hi
    phi = Interval._raw(phi_lo, phi_hi)

    # R_ε over the set
    rpos = P.remainder_positions
    rem_old = X.data[rpos]
    r_lo = np.zeros(m)
    r_hi = np.zeros(m)
    coef = Interval._raw(
        np.array([epow[n + 1 - k].lo * math.comb(n + 1, k) for k in range(n + 1)]),
        np.array([epow[n + 1 - k].hi * math.comb(n + 1, k) for k in range(n + 1)]),
    )
    # C(n+1,k) is exact and small, so scaling endpoints is exact up to one rounding
    coef = Interval._raw(np.nextafter(coef.lo, -np.inf), np.nextafter(coef.hi, np.inf))
    tail = rem_old.reshape(p, 1) * coef.reshape(1, n + 1)
    r_lo[cp], r_hi[cp] = tail.lo, tail.hi
    rv = dec.remainder * epow[n + 1]
    r_lo[0], r_hi[0] = rv.lo, rv.hi
    prev = Interval.concatenate([dec.remainder, rem_old[: p - 1]])
    hull_rem = rem_old | prev
    r_lo[rpos], r_hi[rpos] = hull_rem.lo, hull_rem.hi
    R = Interval._raw(r_lo, r_hi)

    # [DΦ_ε] over the set, dense
    A_lo = np.zeros((m, m))
    A_hi = np.zeros((m, m))
    for i in range(p):
        sl = cp[i]
        A_lo[np.ix_(sl, sl)] = T_lo
        A_hi[np.ix_(sl, sl)] = T_hi
    top = dec.A.top  # rows [value, v_0..v_n]
    vrow = top[n + 1]
    for k in range(n - 1, -1, -1):
        vrow = vrow * eps + top[1 + k]
    cols = dec.A.top_columns
    A_lo[0, cols] = vrow.lo
    A_hi[0, cols] = vrow.hi
    A = Interval._raw(A_lo, A_hi)
    return phi, A, R


def _small_matmul_rows(X: Interval, T: Interval) -> Interval:
    """Rows of ``X`` times ``T^T``: out[i, k] = Σ_l T[k, l] X[i, l]."""
    n1 = T.shape[0]
    acc = None
    for l in range(n1):
        term = X[:, l : l + 1] * T[:, l].reshape(1, n1)
        acc = term if acc is None else acc + term
    return acc


def epsilon_step(s: DoubletonSet, dec: StepDecomposition, eps: Interval) -> DoubletonSet:
    """``I_ε`` applied to ``s`` with the data ``dec`` of the step from ``s``."""
    phi, A, R = epsilon_parts(s, dec, eps)
    return propagate(s, A, phi, R)
