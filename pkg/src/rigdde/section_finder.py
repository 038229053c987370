"""Non-rigorous search for proof inputs.

Everything here runs in plain floating point. Remainder entries are
ignored (set to zero) and only the node coefficients are propagated, with
the same formulas as the rigorous step. States are float arrays of shape
``(m,)`` or ``(m, B)`` for a batch of ``B`` functions.

Pipeline: simulate from a constant function until the transient is gone,
Newton-refine a fixed point of the return map to ``x(0) = c``, take the left
eigenvector of the monodromy matrix as section normal, build an orthonormal
frame around it and grow a box in frame coordinates that the rigorous map
sends into itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .interval import EmptyIntersection, Interval, matmul_fast
from .lohner import DoubletonSet
from .pnrep import PnParams, PnVector
from .poincare import inverse_defect_bound
from .taylor_ad import JetEvaluator, RhsSpec, advance_solution_jet

__all__ = [
    "NoConvergence",
    "SingularJacobian",
    "EigSolverFailure",
    "Eigenvalue1Missing",
    "DegenerateNormal",
    "NoInvariance",
    "FloatIntegrator",
    "simulate",
    "newton_refine",
    "NewtonResult",
    "monodromy_left_eigvec",
    "MonodromyResult",
    "Frame",
    "build_frame",
    "radii_law",
    "build_candidate",
    "remainder_centres",
    "grow_candidate",
    "frame_coordinates",
    "shrink_to_invariant",
    "ShrinkResult",
]


class NoConvergence(RuntimeError):
    pass


class SingularJacobian(RuntimeError):
    pass


class EigSolverFailure(RuntimeError):
    pass


class Eigenvalue1Missing(RuntimeError):
    pass


class DegenerateNormal(ValueError):
    pass


class NoInvariance(RuntimeError):
    pass


class FloatIntegrator:
    """Point-arithmetic analogue of the rigorous step."""

    def __init__(self, params: PnParams, f: RhsSpec):
        self.params = params
        self.f = f
        self.h = float(params.h.mid())
        self.omega_steps = (params.n + 1) * params.p
        n = params.n
        self._binom = np.array([[math.comb(l, k) for l in range(n + 1)] for k in range(n + 1)], dtype=float)

    def constant(self, c: float) -> np.ndarray:
        P = self.params
        x = np.zeros(P.m)
        x[0] = c
        x[P.coeff_positions[:, 0]] = c
        return x

    def new_node(self, X, order=None):
        """Taylor coefficients at the new node 1, orders ``0..order`` (default n+1).

        Order ``n+1`` is not stored; it only enters the value update, which
        keeps the point path within ``O(h^(n+2))`` of the rigorous one.
        """
        P = self.params
        order = P.n + 1 if order is None else order
        cp = P.coeff_positions[-1]
        u = [X[j] for j in cp]
        if order > P.n:
            # one extra coefficient from F^[n] (the remainder estimate)
            v = list(advance_solution_jet(self.f, u, X[0], P.n, rigorous=False).coeffs)
            ev = JetEvaluator(self.f, u, v, rigorous=False)
            v.append(ev.coefficient(P.n) / (P.n + 1))
            return v
        return advance_solution_jet(self.f, u, X[0], order, rigorous=False).coeffs

    def step(self, X, v=None):
        P = self.params
        n = P.n
        if v is None:
            v = self.new_node(X)
        Y = np.zeros_like(X)
        val = v[-1]
        for k in range(len(v) - 2, -1, -1):
            val = val * self.h + v[k]
        Y[0] = val
        for k in range(n + 1):
            Y[1 + k] = v[k]
        shift = (P.p - 1) * (n + 1)
        Y[n + 2 : n + 2 + shift] = X[1 : 1 + shift]
        return Y

    def shift_eps(self, X, v, eps):
        """Partial step by ``eps`` (scalar or one value per batch column)."""
        P = self.params
        n = P.n
        eps = np.asarray(eps, dtype=float)
        Y = np.zeros_like(X)
        cp = P.coeff_positions
        nodes = X[cp]  # (p, n+1[, B])
        epow = [np.ones_like(eps)]
        for _ in range(n):
            epow.append(epow[-1] * eps)
        for k in range(n + 1):
            acc = 0.0
            for l in range(k, n + 1):
                acc = acc + self._binom[k, l] * epow[l - k] * nodes[:, l]
            Y[cp[:, k]] = acc
        val = v[-1]
        for k in range(len(v) - 2, -1, -1):
            val = val * eps + v[k]
        Y[0] = val
        return Y

    def flow(self, X, t: float):
        """``phi(t, X)`` for a common time ``t >= 0``."""
        if t < 0:
            raise ValueError("t must be non-negative")
        q = int(math.floor(t / self.h + 1e-12))
        eps = t - q * self.h
        if eps < 0:
            eps = 0.0
        for _ in range(q):
            X = self.step(X)
        if eps > 0:
            X = self.shift_eps(X, self.new_node(X), eps)
        if not np.all(np.isfinite(X)):
            raise FloatingPointError("non-finite state during simulation")
        return X

    def return_map(self, X, c: float, direction: float, min_steps: int | None = None, max_steps: int = 100000):
        """First crossing of ``x(0) = c`` in ``direction`` after ``min_steps`` steps.

        Works on batches; returns ``(states, times)``.
        """
        P = self.params
        min_steps = self.omega_steps if min_steps is None else min_steps
        batch = X.ndim == 2
        if not batch:
            X = X[:, None]
        B = X.shape[1]
        out = np.zeros_like(X)
        times = np.full(B, np.nan)
        done = np.zeros(B, dtype=bool)
        g_prev = direction * (X[0] - c)
        for k in range(max_steps):
            v = self.new_node(X)
            Xn = self.step(X, v)
            g = direction * (Xn[0] - c)
            if k + 1 >= min_steps:
                hit = (~done) & (g_prev < 0) & (g >= 0)
                if np.any(hit):
                    vh = [vk[hit] for vk in v]
                    eps = _poly_root(vh, c, direction, self.h)
                    out[:, hit] = self.shift_eps(X[:, hit], vh, eps)
                    times[hit] = k * self.h + eps
                    done |= hit
                    if np.all(done):
                        break
            g_prev = g
            X = Xn
        if not np.all(done):
            raise NoConvergence("return map: no crossing found")
        if not batch:
            return out[:, 0], float(times[0])
        return out, times


def _poly_root(v, c, direction, h, iters=80):
    """Root of ``direction*(Σ v_k e^k - c)`` in ``[0, h]`` by bisection (vectorised)."""
    lo = np.zeros_like(v[0])
    hi = np.full_like(v[0], h)

    def g(e):
        acc = v[-1]
        for vk in reversed(v[:-1]):
            acc = acc * e + vk
        return direction * (acc - c)

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        neg = g(mid) < 0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    return 0.5 * (lo + hi)


def simulate(x, f: RhsSpec, t: float, params: PnParams | None = None) -> np.ndarray:
    """Non-rigorous flow ``phi(t, x)`` of a point state (remainders ignored)."""
    if isinstance(x, PnVector):
        params = x.params
        x = np.asarray(x.data.mid(), dtype=float)
    if params is None:
        raise ValueError("params needed for a plain array state")
    fi = FloatIntegrator(params, f)
    X = np.array(x, dtype=float)
    X[params.remainder_positions] = 0.0
    return fi.flow(X, t)


# --------------------------------------------------------------------------
# Newton on the return map


@dataclass
class NewtonResult:
    x: np.ndarray
    period: float
    residual: float
    iterations: int
    section_value: float
    direction: float


def newton_refine(x, f: RhsSpec, params: PnParams, c: float | None = None, direction: float | None = None,
                  tol: float = 1e-10, max_iter: int = 50, fd_step: float = 1e-7, log=None) -> NewtonResult:
    """Fixed point of the return map to ``{x(0) = c}`` restricted to the section.

    The unknowns are all node coefficients (``x(0) = c`` is fixed). The
    Jacobian is formed by finite differences in one batched simulation.
    """
    fi = FloatIntegrator(params, f)
    P = params
    x = np.array(x, dtype=float)
    x[P.remainder_positions] = 0.0
    if c is None:
        c = float(x[0])
    x[0] = c
    if direction is None:
        xdot0 = _feval(f, x[P.pos(P.p, 0)], x[0])
        direction = 1.0 if xdot0 >= 0 else -1.0
    free = P.coeff_positions.reshape(-1)
    res = np.inf
    period = float("nan")
    for it in range(1, max_iter + 1):
        y, period = fi.return_map(x, c, direction)
        F = y[free] - x[free]
        res = float(np.max(np.abs(F)))
        if log is not None:
            log(f"newton {it}: residual {res:.3e}, period {period:.10f}")
        if not np.isfinite(res):
            raise NoConvergence("non-finite residual")
        if res <= tol:
            return NewtonResult(x, period, res, it - 1, c, direction)
        Xb = np.repeat(x[:, None], free.size, axis=1)
        Xb[free, np.arange(free.size)] += fd_step
        Yb, _ = fi.return_map(Xb, c, direction)
        J = (Yb[free] - y[free][:, None]) / fd_step - np.eye(free.size)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from None
        if not np.all(np.isfinite(dx)):
            raise SingularJacobian("non-finite Newton update")
        x = x.copy()
        x[free] += dx
        if np.max(np.abs(dx)) > 10.0:
            raise NoConvergence("Newton update diverged")
    y, period = fi.return_map(x, c, direction)
    res = float(np.max(np.abs(y[free] - x[free])))
    if res <= tol:
        return NewtonResult(x, period, res, max_iter, c, direction)
    raise NoConvergence(f"residual {res:.3e} after {max_iter} iterations")


def _feval(f, a, b):
    ev = JetEvaluator(f, [a], [b], rigorous=False)
    return ev.coefficient(0)


# --------------------------------------------------------------------------
# monodromy and section normal


@dataclass
class MonodromyResult:
    l_hat: np.ndarray
    eigenvalue: complex
    return_eigenvalues: np.ndarray
    residual: float
    xdot: np.ndarray


def monodromy_left_eigvec(x_star, f: RhsSpec, T: float, params: PnParams | None = None,
                          fd_step: float = 1e-7, count: int = 10, matrix=None) -> MonodromyResult:
    """Left eigenvector of the monodromy matrix for the eigenvalue nearest 1.

    ``matrix`` may be passed directly (used for small linear toys); then
    ``xdot`` is taken to be the right eigenvector of that eigenvalue.
    The normal is scaled so that ``l_hat . xdot = 1``. The other
    eigenvalue magnitudes are those of the return map.
    """
    if matrix is None:
        P = params
        fi = FloatIntegrator(P, f)
        x = np.array(x_star, dtype=float)
        x[P.remainder_positions] = 0.0
        cols = P.coeff_positions.reshape(-1)
        cols = np.concatenate([[0], cols])
        base = fi.flow(x, T)
        Xb = np.repeat(x[:, None], cols.size, axis=1)
        Xb[cols, np.arange(cols.size)] += fd_step
        Yb = fi.flow(Xb, T)
        M = np.zeros((P.m, P.m))
        M[:, cols] = (Yb - base[:, None]) / fd_step
        dt = 1e-6
        xdot = (fi.flow(x, T + dt) - fi.flow(x, T - dt)) / (2 * dt)
    else:
        M = np.asarray(matrix, dtype=float)
        xdot = None
    try:
        w, vl = np.linalg.eig(M.T)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from None
    j = int(np.argmin(np.abs(w - 1.0)))
    if abs(w[j] - 1.0) > 0.2:
        raise Eigenvalue1Missing(f"closest eigenvalue to 1 is {w[j]}")
    l_hat = np.real(vl[:, j])
    if xdot is None:
        wr, vr = np.linalg.eig(M)
        xdot = np.real(vr[:, int(np.argmin(np.abs(wr - 1.0)))])
    scale = float(l_hat @ xdot)
    if scale == 0.0:
        raise EigSolverFailure("left eigenvector orthogonal to the flow direction")
    l_hat = l_hat / scale
    if params is not None:
        l_hat[params.remainder_positions] = 0.0
    others = np.delete(w, j)
    mags = np.sort(np.abs(others))[::-1][:count]
    lm = l_hat @ M
    residual = float(np.max(np.abs(lm - np.real(w[j]) * l_hat)) / max(np.max(np.abs(l_hat)), 1e-300))
    return MonodromyResult(l_hat, complex(w[j]), mags, residual, xdot)


# --------------------------------------------------------------------------
# frame and candidate sets


@dataclass
class Frame:
    """Orthonormal frame ``C`` whose first column is the unit section normal."""

    C: np.ndarray
    x0: np.ndarray
    normal: np.ndarray
    params: PnParams

    def dumps(self) -> str:
        P = self.params
        lines = [f"{P.p} {P.n} {P.tau.lo.hex()} {P.tau.hi.hex()}"]
        for j in range(P.m):
            lines.append(f"{j + 1} {float(self.normal[j]).hex()} {float(self.x0[j]).hex()}")
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Frame":
        from .interval import from_hex

        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        params = PnParams(int(rows[0][0]), int(rows[0][1]), from_hex(rows[0][2], rows[0][3]))
        normal = np.zeros(params.m)
        x0 = np.zeros(params.m)
        for row in rows[1:]:
            j = int(row[0]) - 1
            normal[j] = float.fromhex(row[1])
            x0[j] = float.fromhex(row[2])
        return build_frame(normal, x0, params, normalised=True)

    @classmethod
    def load(cls, path) -> "Frame":
        with open(path) as fh:
            return cls.loads(fh.read())


def build_frame(l_hat, x_star, params: PnParams, normalised: bool = False) -> Frame:
    """Frame from the normal ``l_hat``: first column ``l_hat/|l_hat|``.

    The remaining columns come from orthonormalising ``e_2, ..., e_m``
    against it; this is done with the single Householder reflection that maps
    ``e_1`` to the unit normal, which gives the same span as Gram-Schmidt,
    is symmetric and is reproducible bit for bit from the normal alone.
    Remainder coordinates are left untouched. The orientation of ``l_hat``
    is kept, so the flow crosses the section from negative to positive.
    """
    P = params
    l_hat = np.asarray(l_hat, dtype=float).copy()
    l_hat[P.remainder_positions] = 0.0
    norm = math.sqrt(math.fsum(v * v for v in l_hat))
    if not norm > 1e-300 or not math.isfinite(norm):
        raise DegenerateNormal("section normal is (numerically) zero")
    nv = l_hat if normalised else l_hat / norm
    v = -nv.copy()
    v[0] += 1.0
    vv = math.fsum(t * t for t in v)
    C = np.eye(P.m)
    if vv > 0.0:
        C -= (2.0 / vv) * np.outer(v, v)
    x0 = np.asarray(x_star, dtype=float).copy()
    return Frame(C, x0, nv, P)


def radii_law(params: PnParams, base: float = 1e-4, ratio: float = 0.1, remainder: float = 1e-2) -> np.ndarray:
    """Half-widths ``base * ratio**k`` for order ``k``, ``remainder`` for remainders, 0 for the normal."""
    P = params
    r = np.zeros(P.m)
    for k in range(P.n + 1):
        r[P.coeff_positions[:, k]] = base * ratio**k
    r[P.remainder_positions] = remainder
    r[0] = 0.0
    return r


def remainder_centres(x, params: PnParams) -> np.ndarray:
    """Copy of ``x`` with remainder entries set to estimates of ``x^[n+1]``.

    ``d/dt x^[n] = (n+1) x^[n+1]``, so the estimate is a finite difference of
    the order-``n`` coefficients along the grid.
    """
    P = params
    n = P.n
    x = np.array(x, dtype=float)
    xn = x[P.coeff_positions[:, n]]
    if P.p > 1:
        # node i sits at -i*h, so time runs against the node index
        d = -np.gradient(xn, float(P.h.mid()))
    else:
        d = np.zeros(1)
    x[P.remainder_positions] = d / (n + 1)
    return x


def grow_candidate(frame: Frame, pmap, radii=None, inflate: float = 2.0, floor: float = 1e-7,
                   max_iters: int = 6, log=None):
    """Grow a frame box until the map sends it into its own interior.

    Starts from ``radii`` (tiny by default), and replaces the box by the hull
    of itself and the image inflated about its centre. Returns
    ``(V, r0, result)`` for the first box whose image lies strictly inside,
    or raises :class:`NoInvariance`.
    """
    P = frame.params
    if radii is None:
        radii = radii_law(P, floor, 1.0, floor)
    V = build_candidate(frame, radii)
    r0 = V.r0
    for it in range(max_iters):
        res = pmap(V)
        y = frame_coordinates(frame, res.image)
        inside = bool(y[1:].subset_interior(r0[1:]))
        if log is not None:
            ratio = np.max(y[1:].rad() / np.maximum(r0[1:].rad(), 1e-300))
            log(f"grow {it}: inside={inside} worst rad(y)/rad(r0)={ratio:.3g}")
        if inside:
            return V, r0, res
        c = y.mid()
        w = y.rad() * inflate + floor
        r0 = (Interval(c - w, c + w) | r0).with_entries(0, Interval(0.0))
        V = build_candidate(frame, r0)
    raise NoInvariance(f"candidate still not invariant after {max_iters} growth rounds")


def build_candidate(frame: Frame, radii) -> DoubletonSet:
    """``x0 + C*[r0]`` with ``r0 = [-radii, radii]`` (or an interval box)."""
    if isinstance(radii, Interval):
        r0 = radii
    else:
        radii = np.asarray(radii, dtype=float)
        r0 = Interval(-radii, radii)
    if r0.lo[0] != 0.0 or r0.hi[0] != 0.0:
        raise ValueError("the normal coordinate of the box must be [0, 0]")
    return DoubletonSet.centred(frame.x0, frame.C, r0, frame.params)


def _frame_inverse_bound(C: np.ndarray) -> float:
    """Upper bound ``delta`` with ``|C^-1 w - C^T w| <= delta*|C^T w|_inf``."""
    try:
        return inverse_defect_bound(C)
    except ValueError as exc:
        raise DegenerateNormal(str(exc)) from None


def frame_coordinates(frame: Frame, s) -> Interval:
    """Rigorous enclosure of ``C^{-1}(y - x0)`` over the set ``s``."""
    C = frame.C
    Ct = C.T
    if isinstance(s, DoubletonSet):
        u = matmul_fast(Ct, Interval.point(s.x) - Interval.point(frame.x0))
        u = u + matmul_fast(matmul_fast(Ct, s.C), s.r0) + matmul_fast(Ct, s.r_tilde)
    else:
        data = s.data if isinstance(s, PnVector) else s
        u = matmul_fast(Ct, data - Interval.point(frame.x0))
    delta = _frame_inverse_bound(C)
    w = float(np.nextafter(delta * float(np.max(u.mag())) * (1 + 1e-12), np.inf))
    return u + Interval(-w, w)


@dataclass
class ShrinkResult:
    V: DoubletonSet
    r0: Interval
    iterations: int
    image_coords: Interval
    result: object


def shrink_to_invariant(V0: DoubletonSet, frame: Frame, pmap, max_iters: int = 20, log=None,
                        box: Interval | None = None) -> ShrinkResult:
    """Iterate ``V <- P(V) ∩ V`` in frame coordinates until ``P(V) ⊂ int V``.

    ``box`` is the frame box of ``V0``; it defaults to ``V0.r0``, which is
    only the box when ``V0`` is centred at ``frame.x0``.
    """
    if box is None:
        if not np.array_equal(V0.x, frame.x0):
            raise ValueError("V0 is not centred at the frame origin; pass its box")
        box = V0.r0
    r0 = box
    V = V0
    for it in range(max_iters + 1):
        res = pmap(V)
        y = frame_coordinates(frame, res.image)
        inner = y[1:].subset_interior(r0[1:])
        if log is not None:
            ratio = np.max(y[1:].mag() / np.maximum(r0[1:].mag(), 1e-300))
            log(f"shrink {it}: inside={inner} worst |y|/|r0|={ratio:.3g}")
        if inner:
            return ShrinkResult(V, r0, it, y, res)
        try:
            nr = y.intersect(r0)
        except EmptyIntersection:
            raise NoInvariance(f"image misses the candidate set at iteration {it}") from None
        r0 = nr.with_entries(0, Interval(0.0))
        V = DoubletonSet.centred(frame.x0, frame.C, r0, frame.params)
    raise NoInvariance(f"no invariant set after {max_iters} iterations")
