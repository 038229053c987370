"""Doubleton sets and Lohner propagation.

A set of representations is stored as ``x + C*r0 + r_tilde``: ``x`` a point,
``C`` a point matrix, ``r0`` the initial box (kept fixed for the whole run)
and ``r_tilde`` the accumulated local errors as a plain box. One step with
the linear part ``[A] = DΦ([X])`` reads

    y       = Φ(x) + R([X])
    x'      = mid(y)
    z       = y - x'
    C'      = mid([A] C)
    r_tilde' = [A] r_tilde + z + ([A] C - C') r0

With ``r0 = 0`` the same update is the plain interval-set method, which is
how the two are compared.

For one integration step ``DΦ`` is mostly a shift. Only the rows of the new
value and of node 1 depend on the state, and only through ``x(0)`` and node
``p``, so :class:`BlockMatrix` stores that ``(n+2) x (n+2)`` block and applies
the rest as an index shift.
"""

from __future__ import annotations

import numpy as np

from .interval import DimensionMismatch, Interval, matmul, matmul_fast
from .pnrep import PnParams, PnVector
from .taylor_ad import Dual, RhsSpec, advance_solution_jet

__all__ = [
    "BlockMatrix",
    "DoubletonSet",
    "block_mul",
    "propagate",
    "hull_of",
    "d_phi",
    "sensitivity_jet",
]


class BlockMatrix:
    """``DΦ`` of one step in block form.

    ``A11`` is the column of derivatives of ``[value, node-1 coefficients]``
    with respect to ``x(0)``; ``A13`` holds the derivatives of the same rows
    with respect to the node-``p`` coefficients ``k = 0..n``.
    """

    __slots__ = ("params", "A11", "A13")

    def __init__(self, params: PnParams, A11: Interval, A13: Interval):
        n = params.n
        if A11.shape != (n + 2,) or A13.shape != (n + 2, n + 1):
            raise DimensionMismatch(f"blocks must be ({n + 2},) and ({n + 2}, {n + 1})")
        self.params = params
        self.A11 = A11
        self.A13 = A13

    @property
    def top(self) -> Interval:
        """The nonzero ``(n+2) x (n+2)`` block, columns ``[x(0), node p]``."""
        return Interval.concatenate([self.A11.reshape(-1, 1), self.A13], axis=1)

    @property
    def top_columns(self) -> np.ndarray:
        P = self.params
        return np.concatenate([[0], P.coeff_positions[-1]])

    def to_dense(self) -> Interval:
        P = self.params
        m, n = P.m, P.n
        lo = np.zeros((m, m))
        hi = np.zeros((m, m))
        top = self.top
        cols = self.top_columns
        lo[: n + 2, cols] = top.lo
        hi[: n + 2, cols] = top.hi
        shift = (P.p - 1) * (n + 1)
        r = np.arange(shift)
        lo[n + 2 + r, 1 + r] = 1.0
        hi[n + 2 + r, 1 + r] = 1.0
        return Interval(lo, hi)

    @classmethod
    def identity_like(cls, params: PnParams, A11=None, A13=None):
        n = params.n
        A11 = Interval.zeros(n + 2) if A11 is None else A11
        A13 = Interval.zeros((n + 2, n + 1)) if A13 is None else A13
        return cls(params, A11, A13)


def _as_interval(M):
    return M if isinstance(M, Interval) else Interval.point(np.asarray(M, dtype=np.float64))


def block_mul(A: BlockMatrix, M) -> Interval:
    """``A @ M`` without touching the zero blocks.

    Bit-identical to :func:`rigdde.interval.matmul` on ``A.to_dense()``: the
    top rows add the same nonzero terms in the same order and the shifted
    rows are exact copies.
    """
    P = A.params
    M = _as_interval(M)
    if M.shape[0] != P.m:
        raise DimensionMismatch(f"expected {P.m} rows, got {M.shape[0]}")
    n = P.n
    vec = M.ndim == 1
    lo = np.zeros(M.shape)
    hi = np.zeros(M.shape)
    sub = M[A.top_columns]
    top = matmul(A.top, sub)
    lo[: n + 2] = top.lo
    hi[: n + 2] = top.hi
    shift = (P.p - 1) * (n + 1)
    lo[n + 2 : n + 2 + shift] = M.lo[1 : 1 + shift]
    hi[n + 2 : n + 2 + shift] = M.hi[1 : 1 + shift]
    out = Interval._raw(lo, hi)
    return out if not vec else Interval._raw(lo.reshape(-1), hi.reshape(-1))


class DoubletonSet:
    """The set ``x + C*r0 + r_tilde`` in representation space."""

    __slots__ = ("params", "x", "C", "r0", "r_tilde")

    def __init__(self, x, C, r0: Interval, r_tilde: Interval, params: PnParams | None = None):
        x = np.asarray(x, dtype=np.float64)
        C = np.asarray(C, dtype=np.float64)
        m = x.shape[0]
        if C.shape != (m, r0.shape[0]) or r_tilde.shape != (m,):
            raise DimensionMismatch("inconsistent doubleton dimensions")
        if not (r0.contains_zero() and r_tilde.contains_zero()):
            raise ValueError("r0 and r_tilde must contain 0 in every entry")
        self.params = params
        self.x = x
        self.C = C
        self.r0 = r0
        self.r_tilde = r_tilde

    @classmethod
    def from_box(cls, box, params: PnParams | None = None, method: int = 3) -> "DoubletonSet":
        """Set representing an interval box (``C = I``, ``r_tilde = 0``).

        ``method=0`` puts the whole box into ``r_tilde`` instead, which turns
        :func:`propagate` into the plain interval-set method.
        """
        data = box.data if isinstance(box, PnVector) else box
        if params is None and isinstance(box, PnVector):
            params = box.params
        x = np.asarray(data.mid(), dtype=np.float64)
        r = data - Interval.point(x)
        m = x.shape[0]
        if method == 0:
            return cls(x, np.eye(m), Interval.zeros(m), r, params)
        return cls(x, np.eye(m), r, Interval.zeros(m), params)

    @classmethod
    def centred(cls, x, C, r0: Interval, params: PnParams | None = None) -> "DoubletonSet":
        """The set ``x + C*r0`` for any box ``r0``, re-centred so that ``0 ∈ r0``.

        ``C*mid(r0)`` is moved into the centre and its rounding error into
        ``r_tilde``.
        """
        x = np.asarray(x, dtype=np.float64)
        c = np.asarray(r0.mid(), dtype=np.float64)
        m = x.shape[0]
        if not np.any(c):
            return cls(x, C, r0, Interval.zeros(m), params)
        shifted = Interval.point(x) + matmul_fast(C, c)
        x_new = np.asarray(shifted.mid(), dtype=np.float64)
        err = shifted - Interval.point(x_new)
        return cls(x_new, C, r0 - Interval.point(c), err, params)

    def recentred(self) -> "DoubletonSet":
        c = np.asarray(self.r0.mid(), dtype=np.float64)
        if not np.any(c):
            return self
        s = DoubletonSet.centred(self.x, self.C, self.r0, self.params)
        return DoubletonSet(s.x, s.C, s.r0, s.r_tilde + self.r_tilde, self.params)

    def hull(self) -> Interval:
        return hull_of(self)

    def as_pnvector(self) -> PnVector:
        return PnVector(self.params, hull_of(self))

    def diam(self) -> float:
        return float(np.max(hull_of(self).diam()))

    def contains_point(self, y, tol: float = 0.0) -> bool:
        """Sampling helper: is ``y`` inside the hull?"""
        hull = hull_of(self)
        y = np.asarray(y, dtype=np.float64)
        return bool(np.all(hull.lo - tol <= y) and np.all(y <= hull.hi + tol))


def hull_of(s: DoubletonSet) -> Interval:
    """Entrywise interval hull of ``x + C*r0 + r_tilde``."""
    return Interval.point(s.x) + matmul_fast(s.C, s.r0) + s.r_tilde


def _mul(A, M):
    if isinstance(A, BlockMatrix):
        return block_mul(A, M)
    return matmul_fast(A, M)


def propagate(s: DoubletonSet, A, phi_x: Interval, r_new: Interval, params: PnParams | None = None) -> DoubletonSet:
    """One Lohner step (doubleton with a box interior).

    ``phi_x`` encloses ``Φ`` at the point ``s.x``; ``r_new`` encloses the
    remainder part ``R`` over the whole set; ``A`` encloses ``DΦ`` over the
    set and is a :class:`BlockMatrix` or a dense interval matrix.
    """
    y = phi_x + r_new
    x_new = np.asarray(y.mid(), dtype=np.float64)
    z = y - Interval.point(x_new)
    if isinstance(A, BlockMatrix):
        P = A.params
        n = P.n
        cols = A.top_columns
        # rows below the top block are exact shifts of C
        top = matmul(A.top, Interval.point(s.C[cols]))
        top_mid = np.asarray(top.mid(), dtype=np.float64)
        C_new = np.zeros_like(s.C)
        C_new[: n + 2] = top_mid
        shift = (P.p - 1) * (n + 1)
        C_new[n + 2 : n + 2 + shift] = s.C[1 : 1 + shift]
        defect = top - Interval.point(top_mid)
        dr = matmul_fast(defect, s.r0)
        corr_lo = np.zeros(P.m)
        corr_hi = np.zeros(P.m)
        corr_lo[: n + 2] = dr.lo
        corr_hi[: n + 2] = dr.hi
        corr = Interval._raw(corr_lo, corr_hi)
    else:
        AC = matmul_fast(A, s.C)
        C_new = np.asarray(AC.mid(), dtype=np.float64)
        corr = matmul_fast(AC - Interval.point(C_new), s.r0)
    r_tilde = _mul(A, s.r_tilde) + z + corr
    return DoubletonSet(x_new, C_new, s.r0, r_tilde, params if params is not None else s.params)


def sensitivity_jet(x: PnVector, f: RhsSpec):
    """Dual-number run of the forward recursion over the box ``x``.

    Returns the new node coefficients ``v_0..v_n`` and the Taylor part of
    the new value, each as a :class:`Dual` whose gradient is taken with
    respect to ``(x(0), x{p,0}, ..., x{p,n})``.
    """
    P = x.params
    n = P.n
    size = n + 2
    node = x.node(P.p)
    u = [Dual.variable(node[k], k + 1, size) for k in range(n + 1)]
    v0 = Dual.variable(x.value, 0, size)
    v = advance_solution_jet(f, u, v0, n).coeffs
    value = _taylor_sum(v, P.h)
    return v, value


def _taylor_sum(v, h):
    """Σ v_k h^k by Horner's scheme."""
    acc = v[-1]
    for c in reversed(v[:-1]):
        acc = acc * h + c
    return acc


def d_phi(x: PnVector, f: RhsSpec) -> BlockMatrix:
    """Enclosure of ``DΦ`` over the box ``x`` as a :class:`BlockMatrix`."""
    v, value = sensitivity_jet(x, f)
    return _block_from_duals(x.params, v, value)


def _block_from_duals(P: PnParams, v, value) -> BlockMatrix:
    n = P.n
    rows = [value] + list(v)
    lo = np.zeros((n + 2, n + 2))
    hi = np.zeros((n + 2, n + 2))
    for r, d in enumerate(rows):
        if d.grad is not None:
            lo[r] = d.grad.lo
            hi[r] = d.grad.hi
    return BlockMatrix(P, Interval._raw(lo[:, 0].copy(), hi[:, 0].copy()), Interval._raw(lo[:, 1:].copy(), hi[:, 1:].copy()))
