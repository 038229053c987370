"""Independent exact oracles shared by the unit and acceptance tests."""

import math
from fractions import Fraction

import numpy as np
import sympy as sp

from rigdde.interval import Interval
from rigdde.lohner import DoubletonSet
from rigdde.pnrep import PnParams, PnVector


def poly_eval(c, t):
    return sum(a * t**j for j, a in enumerate(c))


def poly_taylor(c, k, t):
    """k-th Taylor coefficient of Σ c_j s^j at s = t."""
    return sum(math.comb(j, k) * c[j] * t ** (j - k) for j in range(k, len(c)))


class DelayLineSolution:
    """Exact solution of x'(t) = x(t - 1) with x = 1 on [-1, 0].

    Segment ``j`` is the polynomial valid on ``[j-1, j]`` (segment 0 is the
    initial function), built by integrating the previous segment.
    """

    def __init__(self, segments: int):
        segs = [[Fraction(1)]]
        for j in range(1, segments + 1):
            prev = segs[-1]
            # shifted previous segment q(s) = prev(s - 1) in monomials of s
            shifted = [Fraction(0)] * len(prev)
            for a_idx, a in enumerate(prev):
                for r in range(a_idx + 1):
                    shifted[r] += a * math.comb(a_idx, r) * (-1) ** (a_idx - r)
            integ = [Fraction(0)] + [c / (r + 1) for r, c in enumerate(shifted)]
            start = poly_eval(segs[-1], Fraction(j - 1))
            integ[0] = start - poly_eval(integ, Fraction(j - 1))
            segs.append(integ)
        self.segs = segs

    def segment(self, t, right=True):
        """Index of the segment valid at ``t`` (right-sided at grid points)."""
        j = math.floor(t) + 1 if right else math.ceil(t)
        return max(0, min(j, len(self.segs) - 1))

    def coeff(self, k, t, right=True):
        return poly_taylor(self.segs[self.segment(t, right)], k, t)


def representation_contains(x: PnVector, sol: DelayLineSolution, t_now: Fraction, tol=0.0) -> bool:
    """Does the box ``x`` (a hull at time t_now) contain the exact solution data?"""
    P = x.params
    h = Fraction(P.tau.lo) / P.p
    ok = Fraction(x.value.lo) - tol <= sol.coeff(0, t_now, right=False) <= Fraction(x.value.hi) + tol
    for i in range(1, P.p + 1):
        t = t_now - i * h
        for k in range(P.n + 1):
            c = sol.coeff(k, t)
            iv = x[i, k]
            ok &= Fraction(iv.lo) - tol <= c <= Fraction(iv.hi) + tol
        seg = sol.segs[sol.segment(t)]
        top = [poly_taylor(seg, P.n + 1, t + h * s / 8) for s in range(9)]
        rem = x.remainder(i)
        ok &= Fraction(rem.lo) <= min(top) and max(top) <= Fraction(rem.hi)
    return bool(ok)


def exact_constant_rep(P: PnParams, value: float) -> PnVector:
    lo = np.zeros(P.m)
    lo[0] = value
    lo[P.coeff_positions[:, 0]] = value
    return PnVector(P, Interval(lo, lo.copy()))


def point_set(P: PnParams, value: float) -> DoubletonSet:
    return DoubletonSet.from_box(exact_constant_rep(P, value))


def symbolic_mg_coeffs(order: int, n_exp: int = 6):
    """Exact ``F^[k]``, ``k = 0..order``, of ``beta*z1/(1+z1^n_exp) - gamma*z2``.

    Built once by differentiating the composition with generic polynomial
    arguments; evaluated with Fractions the result is exact. Returns
    ``coeffs(beta, gamma, u, v)`` for jets ``u`` (of z1) and ``v`` (of z2).
    """
    t = sp.symbols("t")
    a = sp.symbols(f"a0:{order + 1}")
    b = sp.symbols(f"b0:{order + 1}")
    beta, gamma = sp.symbols("beta gamma")
    U = sum(a[k] * t**k for k in range(order + 1))
    V = sum(b[k] * t**k for k in range(order + 1))
    expr = beta * U / (1 + U**n_exp) - gamma * V
    fns = []
    d = expr
    for k in range(order + 1):
        fns.append(sp.lambdify((beta, gamma) + a + b, sp.together(d.subs(t, 0)), "math"))
        d = sp.diff(d, t)

    def coeffs(beta_v, gamma_v, u, v):
        out = []
        for k, fn in enumerate(fns):
            val = fn(beta_v, gamma_v, *u, *v)
            assert isinstance(val, (Fraction, int))
            out.append(Fraction(val) / math.factorial(k))
        return out

    return coeffs
