"""Taylor-jet automatic differentiation for DDE right-hand sides.

A right-hand side ``f(z1, z2)`` (``z1`` the delayed value, ``z2`` the
current one) is an expression tree. It is compiled once into a flat list of
operations and then evaluated level by level: computing Taylor coefficient
``k`` of every node only needs coefficients ``0..k`` of its children. This is
what allows the interleaved recursion ``x^[k+1] = F^[k](...) / (k+1)`` where
each new solution coefficient feeds the next level.

The evaluator is generic in the coefficient type. Intervals give rigorous
jets, floats or numpy arrays give fast non-rigorous batches, and
:class:`Dual` numbers carry first derivatives with respect to chosen inputs.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import numpy as np

from .interval import DivisionByZeroInterval, Interval, ParseError, parse_decimal

__all__ = [
    "RhsSpec",
    "Jet",
    "Dual",
    "z1",
    "z2",
    "const",
    "mg_rhs",
    "parse_rhs",
    "rhs_jet",
    "advance_solution_jet",
    "JetEvaluator",
]


# --------------------------------------------------------------------------
# expression trees


class RhsSpec:
    """Node of a right-hand side expression over ``z1`` and ``z2``."""

    __slots__ = ("op", "args")

    def __init__(self, op, *args):
        self.op = op
        self.args = args

    def __add__(self, other):
        return RhsSpec("add", self, _wrap(other))

    def __radd__(self, other):
        return RhsSpec("add", _wrap(other), self)

    def __sub__(self, other):
        return RhsSpec("sub", self, _wrap(other))

    def __rsub__(self, other):
        return RhsSpec("sub", _wrap(other), self)

    def __mul__(self, other):
        return RhsSpec("mul", self, _wrap(other))

    def __rmul__(self, other):
        return RhsSpec("mul", _wrap(other), self)

    def __truediv__(self, other):
        return RhsSpec("div", self, _wrap(other))

    def __rtruediv__(self, other):
        return RhsSpec("div", _wrap(other), self)

    def __neg__(self):
        return RhsSpec("neg", self)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise ValueError("RhsSpec powers must be non-negative integers")
        return RhsSpec("pow", self, n)

    def __repr__(self):
        op, a = self.op, self.args
        if op == "var":
            return f"z{a[0]}"
        if op == "const":
            iv = a[0]
            return str(iv.lo) if iv.lo == iv.hi else f"[{iv.lo}, {iv.hi}]"
        if op == "neg":
            return f"(-{a[0]!r})"
        if op == "pow":
            return f"({a[0]!r}^{a[1]})"
        sym = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[op]
        return f"({a[0]!r} {sym} {a[1]!r})"

    def evaluate(self, z1v, z2v):
        """Plain evaluation (order-0 jet) at values of any supported type."""
        ev = JetEvaluator(self, [z1v], [z2v])
        return ev.coefficient(0)


def _wrap(v):
    if isinstance(v, RhsSpec):
        return v
    return const(v)


def const(v) -> RhsSpec:
    if isinstance(v, str):
        v = parse_decimal(v)
    elif not isinstance(v, Interval):
        v = Interval(float(v))
    return RhsSpec("const", v)


z1 = RhsSpec("var", 1)
z2 = RhsSpec("var", 2)


def mg_rhs(beta, gamma, n_exp: int) -> RhsSpec:
    """Mackey-Glass right-hand side ``beta*z1/(1+z1^n_exp) - gamma*z2``."""
    if not isinstance(n_exp, (int, np.integer)) or n_exp < 1:
        raise ValueError("n_exp must be a positive integer")
    b = const(beta)
    g = const(gamma)
    return b * z1 / (1 + z1 ** int(n_exp)) - g * z2


_BINOPS = {ast.Add: "add", ast.Sub: "sub", ast.Mult: "mul", ast.Div: "div"}


def parse_rhs(text: str) -> RhsSpec:
    """Parse the infix text form, e.g. ``"2*z1/(1+z1^6) - 1*z2"``.

    Literals are read as decimal strings with :func:`parse_decimal` so that
    e.g. ``0.1`` becomes a rigorous enclosure.
    """
    # '^' is exponentiation here; Python's '^' would bind looser than '+'
    src = text.strip().replace("**", "^").replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse right-hand side {text!r}: {exc.msg}") from None

    def conv(node):
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                exp = node.right
                if not (isinstance(exp, ast.Constant) and isinstance(exp.value, int)):
                    raise ParseError("exponent must be a non-negative integer literal")
                return conv(node.left) ** exp.value
            op = _BINOPS.get(type(node.op))
            if op is None:
                raise ParseError(f"unsupported operator in {text!r}")
            return RhsSpec(op, conv(node.left), conv(node.right))
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -conv(node.operand)
            if isinstance(node.op, ast.UAdd):
                return conv(node.operand)
        if isinstance(node, ast.Name) and node.id in ("z1", "z2"):
            return z1 if node.id == "z1" else z2
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return const(parse_decimal(ast.get_source_segment(src, node)))
        raise ParseError(f"unsupported token in {text!r}")

    return conv(tree.body)


# --------------------------------------------------------------------------
# coefficient types


class Dual:
    """First-order dual number: ``val`` plus gradient ``grad``.

    ``val`` is a scalar (Interval or float) and ``grad`` an array of the same
    kind (Interval array or ndarray); ``grad is None`` means zero gradient.
    """

    __slots__ = ("val", "grad")

    def __init__(self, val, grad=None):
        self.val = val
        self.grad = grad

    @staticmethod
    def variable(val, index, size):
        g = np.zeros(size)
        g[index] = 1.0
        if isinstance(val, Interval):
            return Dual(val, Interval.point(g))
        return Dual(val, g)

    def __repr__(self):
        return f"Dual({self.val!r}, {self.grad!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, _gadd(self.grad, other.grad))
        return Dual(self.val + other, self.grad)

    __radd__ = __add__

    def __neg__(self):
        return Dual(-self.val, None if self.grad is None else -self.grad)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            g = _gadd(_gscale(self.grad, other.val), _gscale(other.grad, self.val))
            return Dual(self.val * other.val, g)
        return Dual(self.val * other, _gscale(self.grad, other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            q = self.val / other.val
            g = _gadd(self.grad, None if other.grad is None else -_gscale(other.grad, q))
            return Dual(q, None if g is None else g / other.val)
        q = self.val / other
        return Dual(q, None if self.grad is None else self.grad / other)

    def __rtruediv__(self, other):
        return Dual(other) / self


def _gadd(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _gscale(g, s):
    if g is None:
        return None
    return g * s


# --------------------------------------------------------------------------
# compiled evaluation


def _compile(spec: RhsSpec):
    """Flatten the tree into SSA operations; powers become product chains."""
    ops = []
    memo = {}

    def emit(op):
        ops.append(op)
        return len(ops) - 1

    def visit(node):
        key = id(node)
        if key in memo:
            return memo[key]
        op = node.op
        if op == "const":
            idx = emit(("const", node.args[0]))
        elif op == "var":
            idx = emit(("var", node.args[0]))
        elif op == "neg":
            idx = emit(("neg", visit(node.args[0])))
        elif op == "pow":
            base = visit(node.args[0])
            n = node.args[1]
            if n == 0:
                idx = emit(("const", Interval(1.0)))
            else:
                # binary powering, x^n with O(log n) products
                result = None
                sq = base
                while True:
                    if n & 1:
                        result = sq if result is None else emit(("mul", result, sq))
                    n >>= 1
                    if not n:
                        break
                    sq = emit(("mul", sq, sq))
                idx = result
        else:
            a = visit(node.args[0])
            b = visit(node.args[1])
            idx = emit((op, a, b))
        memo[key] = idx
        return idx

    root = visit(spec)
    return ops, root


_COMPILED = {}


def _compiled(spec):
    key = id(spec)
    hit = _COMPILED.get(key)
    if hit is None or hit[0] is not spec:
        hit = (spec, *_compile(spec))
        _COMPILED[key] = hit
    return hit[1], hit[2]


def _identity(v):
    return v


def _mid_const(iv):
    return iv.mid()


class JetEvaluator:
    """Incremental Taylor-coefficient evaluation of an RhsSpec.

    ``u`` and ``v`` are coefficient lists for ``z1`` and ``z2``; they may be
    appended to between calls (this is how the solution recursion feeds new
    coefficients back). ``rigorous=False`` replaces constants by midpoints so
    that plain float/ndarray coefficients can be used.
    """

    def __init__(self, spec: RhsSpec, u, v, rigorous: bool = True):
        self.ops, self.root = _compiled(spec)
        self.u = u
        self.v = v
        self.conv = _identity if rigorous else _mid_const
        self.coefs = [[] for _ in self.ops]
        self.level = 0

    def coefficient(self, k):
        while self.level <= k:
            self._compute_level(self.level)
            self.level += 1
        return self.coefs[self.root][k]

    def _compute_level(self, k):
        coefs = self.coefs
        for idx, op in enumerate(self.ops):
            kind = op[0]
            if kind == "var":
                src = self.u if op[1] == 1 else self.v
                if k >= len(src):
                    raise ValueError(f"z{op[1]} jet has no coefficient of order {k}")
                c = src[k]
            elif kind == "const":
                c = self.conv(op[1]) if k == 0 else None
            elif kind == "add":
                c = _add(coefs[op[1]][k], coefs[op[2]][k])
            elif kind == "sub":
                c = _sub(coefs[op[1]][k], coefs[op[2]][k])
            elif kind == "neg":
                a = coefs[op[1]][k]
                c = None if a is None else -a
            elif kind == "mul":
                a, b = coefs[op[1]], coefs[op[2]]
                c = None
                for j in range(k + 1):
                    c = _add(c, _mul(a[j], b[k - j]))
            elif kind == "div":
                a, b = coefs[op[1]], coefs[op[2]]
                q = coefs[idx]
                acc = a[k]
                for j in range(1, k + 1):
                    acc = _sub(acc, _mul(b[j], q[k - j]))
                if b[0] is None:
                    raise DivisionByZeroInterval("division by an identically zero jet")
                c = None if acc is None else acc / b[0]
            else:  # pragma: no cover
                raise AssertionError(kind)
            coefs[idx].append(c)


def _add(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


def _sub(a, b):
    if b is None:
        return a
    if a is None:
        return -b
    return a - b


def _mul(a, b):
    if a is None or b is None:
        return None
    return a * b


def _zero_like(ref):
    if isinstance(ref, Interval):
        if ref.is_scalar:
            return Interval(0.0)
        return Interval.zeros(ref.shape)
    if isinstance(ref, Dual):
        return Dual(_zero_like(ref.val))
    if isinstance(ref, np.ndarray):
        return np.zeros_like(ref)
    return 0.0


def _fill(coeffs, ref):
    out = list(coeffs)
    for j, c in enumerate(out):
        if c is None:
            out[j] = _zero_like(ref)
    return out


# --------------------------------------------------------------------------
# public jet API


@dataclass
class Jet:
    """Taylor coefficients ``coeffs[k] = x^(k)/k!``."""

    coeffs: list = field(default_factory=list)

    @property
    def order(self):
        return len(self.coeffs) - 1

    def __getitem__(self, k):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    @classmethod
    def constant(cls, value, order):
        value = value if isinstance(value, Interval) else Interval(float(value))
        return cls([value] + [Interval(0.0) for _ in range(order)])


def _coeff_list(j):
    return list(j.coeffs) if isinstance(j, Jet) else list(j)


def rhs_jet(f: RhsSpec, u, v, order: int, rigorous: bool = True) -> Jet:
    """Jet of ``t -> f(u(t), v(t))`` through ``order``; entry j is F^[j]."""
    u = _coeff_list(u)
    v = _coeff_list(v)
    if len(u) <= order or len(v) <= order:
        raise ValueError("input jets are shorter than the requested order")
    ev = JetEvaluator(f, u, v, rigorous=rigorous)
    out = [ev.coefficient(k) for k in range(order + 1)]
    return Jet(_fill(out, u[0]))


def advance_solution_jet(f: RhsSpec, u, v0, order: int, rigorous: bool = True) -> Jet:
    """Solution jet ``v`` with ``v[0] = v0`` and ``v[k+1] = F^[k](u, v)/(k+1)``.

    ``u`` is the jet of the delayed argument; it needs ``order`` entries.
    """
    u = _coeff_list(u)
    if len(u) < order:
        raise ValueError("delayed jet is shorter than order")
    v = [v0]
    ev = JetEvaluator(f, u, v, rigorous=rigorous)
    for k in range(order):
        fk = ev.coefficient(k)
        if fk is None:
            fk = _zero_like(v0)
        v.append(fk / (k + 1))
    return Jet(v)
