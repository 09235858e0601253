"""Truncated multivariate Taylor jets in (x, y) and a finite-difference oracle.

A :class:`Jet` carries the Taylor coefficients of a scalar in the 2n
variables ``(x1..xn, y1..yn)`` truncated to the set

    (|alpha| <= 4, beta = 0)  union  (|alpha| <= 3, |beta| = 1)

where ``beta`` counts x-derivatives and ``alpha`` y-derivatives.  That set is
an ideal quotient of the polynomial ring, so + - * / and smooth univariate
functions are closed on it.  Coefficients are stored Taylor-normalised
(``d^k f / k!``) which turns multiplication into a plain convolution.

:func:`fd_oracle` is the independent check: tensor-product central
differences of F^2 evaluated with plain floats, refined by Richardson
extrapolation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from finsler import expr as ex
from finsler.errors import DimensionError, DomainError, StepUnderflowError

MAX_TOTAL = 4
MAX_X = 1

MultiIndex = tuple[int, ...]


def _check_dims(node: ex.Expr, x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise DimensionError(f"x has {x.size} components but y has {y.size}")
    n = x.size
    if ex.max_index(node, "x") > n or ex.max_index(node, "y") > n:
        raise DimensionError(f"expression references coordinates beyond dimension {n}")
    return x, y


class JetSpace:
    """Index bookkeeping for jets in ``n`` chart and ``n`` fibre variables."""

    def __init__(self, n: int, max_total: int = MAX_TOTAL, max_x: int = MAX_X):
        self.n = n
        self.max_total = max_total
        self.max_x = max_x
        monos = []
        for total in range(max_total + 1):
            for e in _compositions(total, 2 * n):
                if sum(e[:n]) <= max_x:
                    monos.append(e)
        self.monomials: list[MultiIndex] = monos
        self.index = {e: i for i, e in enumerate(monos)}
        self.size = len(monos)
        self.factorial = np.array([math.prod(math.factorial(k) for k in e) for e in monos], dtype=float)

        ia, ib, tgt = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                k = self.index.get(tuple(p + q for p, q in zip(a, b)))
                if k is not None:
                    ia.append(i)
                    ib.append(j)
                    tgt.append(k)
        self._ia = np.array(ia, dtype=np.intp)
        self._ib = np.array(ib, dtype=np.intp)
        self._tgt = np.array(tgt, dtype=np.intp)

    def key(self, beta: Sequence[int], alpha: Sequence[int]) -> MultiIndex:
        if len(beta) != self.n or len(alpha) != self.n:
            raise DimensionError(f"multi-indices must have length {self.n}")
        return tuple(beta) + tuple(alpha)

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.bincount(self._tgt, weights=a[self._ia] * b[self._ib], minlength=self.size)

    def constant(self, value: float) -> "Jet":
        c = np.zeros(self.size)
        c[0] = value
        return Jet(self, c)

    def variable(self, kind: str, i: int, value: float) -> "Jet":
        """Seed coordinate ``kind``-``i`` (0-based) at ``value``."""
        c = np.zeros(self.size)
        c[0] = value
        e = [0] * (2 * self.n)
        e[i if kind == "x" else self.n + i] = 1
        pos = self.index.get(tuple(e))
        if pos is not None:
            c[pos] = 1.0
        return Jet(self, c)

    def gather(self, pattern: str) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
        """Positions and factorials filling a dense derivative tensor.

        ``pattern`` is a string over {'x', 'y'}, e.g. ``'xyy'`` for
        d_{x_a} d_{y_b} d_{y_c}; the result reshapes to ``(n,)*len(pattern)``.
        """
        return _gather(self, pattern)


@lru_cache(maxsize=None)
def jet_space(n: int, max_total: int = MAX_TOTAL, max_x: int = MAX_X) -> JetSpace:
    return JetSpace(n, max_total, max_x)


@lru_cache(maxsize=None)
def _gather_cached(n: int, max_total: int, max_x: int, pattern: str):
    space = jet_space(n, max_total, max_x)
    pos, fac = [], []
    for idx in itertools.product(range(n), repeat=len(pattern)):
        e = [0] * (2 * n)
        for kind, i in zip(pattern, idx):
            e[i if kind == "x" else n + i] += 1
        k = space.index[tuple(e)]
        pos.append(k)
        fac.append(space.factorial[k])
    return np.array(pos, dtype=np.intp), np.array(fac), (n,) * len(pattern)


def _gather(space: JetSpace, pattern: str):
    return _gather_cached(space.n, space.max_total, space.max_x, pattern)


def _compositions(total: int, parts: int) -> Iterable[MultiIndex]:
    """All non-negative integer tuples of length ``parts`` summing to ``total``."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class Jet:
    """Truncated Taylor expansion of a scalar about one support element."""

    __slots__ = ("space", "c")
    __array_ufunc__ = None  # numpy operands defer to the Jet operators

    def __init__(self, space: JetSpace, c: np.ndarray):
        self.space = space
        self.c = c

    @property
    def value(self) -> float:
        return float(self.c[0])

    @property
    def dim(self) -> int:
        return self.space.n

    def derivative(self, beta: Sequence[int], alpha: Sequence[int]) -> float:
        """Mixed partial d^beta_x d^alpha_y at the expansion point."""
        k = self.space.index[self.space.key(beta, alpha)]
        return float(self.c[k] * self.space.factorial[k])

    @property
    def coeffs(self) -> dict[tuple[MultiIndex, MultiIndex], float]:
        """Map ``(beta, alpha) -> mixed partial`` over the truncation set."""
        n = self.space.n
        d = self.c * self.space.factorial
        return {(e[:n], e[n:]): float(v) for e, v in zip(self.space.monomials, d)}

    def tensor(self, pattern: str) -> np.ndarray:
        pos, fac, shape = self.space.gather(pattern)
        return (self.c[pos] * fac).reshape(shape)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.c + other.c)
        c = self.c.copy()
        c[0] += float(other)
        return Jet(self.space, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.space.mul(self.c, other.c))
        return Jet(self.space, self.c * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        if float(other) == 0.0:
            raise DomainError("division by zero")
        return Jet(self.space, self.c / float(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * float(other)

    def reciprocal(self) -> "Jet":
        if self.value == 0.0:
            raise DomainError("division by zero")
        return self.power(Fraction(-1))

    def compose(self, derivs: Sequence[float]) -> "Jet":
        """Apply a univariate function given its derivatives at ``self.value``.

        ``derivs[k]`` is the k-th derivative; the Taylor series in the
        nilpotent increment is summed with Horner's rule.
        """
        K = self.space.max_total
        d = self.c.copy()
        d[0] = 0.0
        out = np.zeros(self.space.size)
        out[0] = derivs[K] / math.factorial(K)
        for k in range(K - 1, -1, -1):
            out = self.space.mul(out, d)
            out[0] += derivs[k] / math.factorial(k)
        return Jet(self.space, out)

    def power(self, p: Fraction) -> "Jet":
        p = Fraction(p)
        t = self.value
        if p.denominator == 1 and p >= 0:
            return _int_power(self, int(p))
        if p.denominator != 1 and t <= 0:
            raise DomainError(f"non-integer power {p} of non-positive value")
        if t == 0:
            raise DomainError("negative power of zero")
        K = self.space.max_total
        derivs, coef = [], 1.0
        for k in range(K + 1):
            derivs.append(coef * t ** (float(p) - k))
            coef *= float(p) - k
        return self.compose(derivs)

    def __pow__(self, p):
        return self.power(Fraction(p))

    def sqrt(self) -> "Jet":
        if self.value <= 0:
            raise DomainError("sqrt of non-positive value")
        return self.power(Fraction(1, 2))

    def exp(self) -> "Jet":
        e = math.exp(self.value)
        return self.compose([e] * (self.space.max_total + 1))

    def log(self) -> "Jet":
        t = self.value
        if t <= 0:
            raise DomainError("log of non-positive value")
        derivs = [math.log(t)] + [(-1) ** (k - 1) * math.factorial(k - 1) / t**k for k in range(1, self.space.max_total + 1)]
        return self.compose(derivs)

    def sin(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        cycle = [s, c, -s, -c]
        return self.compose([cycle[k % 4] for k in range(self.space.max_total + 1)])

    def cos(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        cycle = [c, -s, -c, s]
        return self.compose([cycle[k % 4] for k in range(self.space.max_total + 1)])

    def __repr__(self) -> str:
        return f"Jet(n={self.space.n}, value={self.value!r})"


def _int_power(base: Jet, k: int) -> Jet:
    result = base.space.constant(1.0)
    sq = base
    while k:
        if k & 1:
            result = result * sq
        k >>= 1
        if k:
            sq = sq * sq
    return result


class JetBackend(ex.Backend):
    def __init__(self, space: JetSpace):
        self.space = space

    def const(self, value):
        return value

    def sqrt(self, v):
        return _lift(self.space, v).sqrt()

    def exp(self, v):
        return _lift(self.space, v).exp()

    def log(self, v):
        return _lift(self.space, v).log()

    def sin(self, v):
        return _lift(self.space, v).sin()

    def cos(self, v):
        return _lift(self.space, v).cos()

    def power(self, v, exponent):
        return _lift(self.space, v).power(exponent)

    def divide(self, a, b):
        if isinstance(b, Jet):
            return a * b.reciprocal()
        if b == 0:
            raise DomainError("division by zero")
        return a / b


def _lift(space: JetSpace, v) -> Jet:
    return v if isinstance(v, Jet) else space.constant(float(v))


def eval_jet(
    node: ex.Expr,
    x,
    y,
    params: Mapping[str, float] | None = None,
    space: JetSpace | None = None,
) -> Jet:
    """Jet of F(x, y) over the default truncation set.

    Square the result (``J * J``) for the jet of F^2 = 2E.
    """
    x, y = _check_dims(node, x, y)
    n = x.size
    if not np.any(y):
        raise DomainError("support element has y = 0")
    space = space or jet_space(n)
    xs = [space.variable("x", i, x[i]) for i in range(n)]
    ys = [space.variable("y", i, y[i]) for i in range(n)]
    out = ex.evaluate(node, xs, ys, params, JetBackend(space))
    return _lift(space, out)


# --------------------------------------------------------------------------
# Finite-difference oracle

# Central stencils (offset, weight) for the k-th derivative, all O(h^2).
_STENCILS = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


@dataclass(frozen=True)
class FDSettings:
    """Central-difference configuration.

    ``step_scale`` is the relative step; ``None`` selects
    ``eps ** (1 / (k + 2 + 2 * richardson_levels))`` for a derivative of total
    order ``k``, so higher orders and deeper tableaus take larger steps.
    ``richardson_levels`` counts extrapolation stages over successively halved
    steps.
    """

    step_scale: float | None = None
    richardson_levels: int = 2

    def __post_init__(self):
        if self.step_scale is not None and not self.step_scale > 0:
            raise ValueError("step_scale must be > 0")
        if self.richardson_levels < 1:
            raise ValueError("richardson_levels must be >= 1")

    def base_step(self, order: int) -> float:
        if self.step_scale is not None:
            return self.step_scale
        eps = np.finfo(float).eps
        return eps ** (1.0 / (order + 2 + 2 * self.richardson_levels))


def _stencil(e: MultiIndex, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tensor-product stencil: offsets (m, 2n) and weights (m,)."""
    per_var = []
    for v, k in enumerate(e):
        if k:
            per_var.append([(v, off * h[v], w / h[v] ** k) for off, w in _STENCILS[k]])
    if not per_var:
        return np.zeros((1, len(e))), np.ones(1)
    offsets, weights = [], []
    for combo in itertools.product(*per_var):
        o = np.zeros(len(e))
        w = 1.0
        for v, off, wt in combo:
            o[v] = off
            w *= wt
        offsets.append(o)
        weights.append(w)
    return np.array(offsets), np.array(weights)


def fd_derivatives(
    node: ex.Expr,
    x,
    y,
    which: Sequence[tuple[Sequence[int], Sequence[int]]],
    settings: FDSettings = FDSettings(),
    params: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Batched :func:`fd_oracle`: one vectorised evaluation for all requests."""
    x, y = _check_dims(node, x, y)
    n = x.size
    point = np.concatenate([x, y])
    ynorm = float(np.linalg.norm(y))
    levels = settings.richardson_levels

    all_offsets, plans = [], []
    for beta, alpha in which:
        if len(beta) != n or len(alpha) != n:
            raise DimensionError(f"multi-indices must have length {n}")
        if sum(beta) > 1 or sum(alpha) > 4:
            raise ValueError("fd_oracle supports |beta| <= 1 and |alpha| <= 4")
        e = tuple(beta) + tuple(alpha)
        order = sum(e)
        h0 = settings.base_step(order) * (1.0 + np.abs(point))
        reach = 2.0 * float(np.max(h0[n:] * (np.array(alpha) > 0), initial=0.0))
        if order and reach >= 0.5 * ynorm:
            raise StepUnderflowError(f"step {reach:.3g} too large for |y| = {ynorm:.3g}")
        level_plan = []
        for lev in range(levels + 1):
            offs, wts = _stencil(e, h0 / 2**lev)
            level_plan.append((len(all_offsets), len(offs), wts))
            all_offsets.append(offs)
        plans.append((order, level_plan))

    pts = point + np.concatenate(all_offsets) if all_offsets else np.zeros((0, 2 * n))
    # stash offsets start indices
    starts = np.cumsum([0] + [len(o) for o in all_offsets])
    vals = ex.evaluate(node, [pts[:, i] for i in range(n)], [pts[:, n + i] for i in range(n)], params)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (len(pts),)) ** 2

    out = np.empty(len(plans))
    for r, (order, level_plan) in enumerate(plans):
        est = []
        for slot, _, wts in level_plan:
            seg = vals[starts[slot]: starts[slot + 1]]
            est.append(float(np.dot(wts, seg)))
        if order == 0:
            out[r] = est[0]
            continue
        # Richardson tableau on step ratio 2 with even error powers.
        table = est
        for j in range(1, levels + 1):
            f = 4.0**j
            table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
        out[r] = table[0]
    return out


def fd_oracle(
    node: ex.Expr,
    x,
    y,
    which: tuple[Sequence[int], Sequence[int]],
    settings: FDSettings = FDSettings(),
    params: Mapping[str, float] | None = None,
) -> float:
    """Central-difference estimate of d^beta_x d^alpha_y F^2 with Richardson refinement."""
    return float(fd_derivatives(node, x, y, [which], settings, params)[0])
