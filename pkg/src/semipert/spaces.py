"""Discretized Banach spaces and induced operator norms.

A :class:`DiscreteSpace` is a coordinate space carrying either the sup-norm or
a weighted p-norm.  Besides the norm itself every space knows its dual pairing
(plain bilinear sum ``sum_i z_i x_i``): norming functionals, dual norms and
maximizers of linear functionals over the unit ball.  These three maps are all
that the power-type lower bounds for operator norms need, so the same code
serves grid spaces, product spaces and time-mixed (Bochner) spaces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, DomainError

__all__ = [
    "DiscreteSpace",
    "BochnerSpace",
    "NormBracket",
    "norm",
    "operator_norm",
    "power_lower_bound",
]

_REL_SUM_TOL = 1e-12


def _phase(x):
    """Unimodular factor s with s * x = |x| (s = 1 where x = 0)."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        mag = np.abs(x)
        out = np.ones_like(x)
        nz = mag > 0
        out[nz] = np.conj(x[nz]) / mag[nz]
        return out
    out = np.sign(x)
    out[out == 0] = 1.0
    return out


def _weighted_pnorm(x, w, p, axis=-1):
    a = np.abs(x)
    if p == 1:
        return np.sum(w * a, axis=axis)
    if p == 2:
        return np.sqrt(np.sum(w * a * a, axis=axis))
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(amax > 0, amax, 1.0)
    # scale before powering to avoid overflow
    s = np.sum(w * (a / amax) ** p, axis=axis) ** (1.0 / p)
    return s * np.squeeze(amax, axis=axis)


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Coordinate space with a sup-norm or a weighted p-norm.

    Parameters
    ----------
    grid : ndarray
        Node locations (strictly increasing for interval spaces; coordinate
        labels for boundary and product spaces).
    p : float
        Norm exponent; ``math.inf`` selects the sup-norm.
    weights : ndarray or None
        Quadrature weights, present iff ``p`` is finite.
    parts : tuple of int
        Block sizes when the space is a product.
    name : str
        Label used in reports.
    """

    grid: np.ndarray
    p: float
    weights: Optional[np.ndarray] = None
    parts: tuple = ()
    name: str = ""
    _length: Optional[float] = field(default=None, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        object.__setattr__(self, "grid", grid)
        if grid.ndim != 1 or grid.size < 1:
            raise DimensionError("grid must be a non-empty vector")
        p = float(self.p)
        if not p >= 1:
            raise DomainError(f"norm exponent must be >= 1, got {p}")
        object.__setattr__(self, "p", p)
        if math.isinf(p):
            if self.weights is not None:
                raise DomainError("sup-norm spaces carry no quadrature weights")
        else:
            if self.weights is None:
                raise DomainError("weighted p-norm spaces need quadrature weights")
            w = np.asarray(self.weights, dtype=float)
            if w.shape != grid.shape:
                raise DimensionError("weights and grid differ in length")
            if np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise DomainError("quadrature weights must be positive and finite")
            object.__setattr__(self, "weights", w)
        if not self.parts:
            object.__setattr__(self, "parts", (grid.size,))
        if sum(self.parts) != grid.size:
            raise DimensionError("product part sizes do not add up to the dimension")

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_nodes(cls, nodes, p=math.inf, weights=None, interval=None, name=""):
        """Space on given nodes of an interval.

        Parameters
        ----------
        nodes : array_like
            Strictly increasing nodes, at least two.
        p : float
            Norm exponent (``math.inf`` for the sup-norm).
        weights : array_like, optional
            Quadrature weights; required for finite ``p``.
        interval : tuple of float, optional
            Interval ``(a, b)``; when given, weights must sum to ``b - a``.
        """
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DimensionError("an interval space needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid points must be strictly increasing")
        if math.isinf(p):
            weights = None
        elif weights is not None and interval is not None:
            length = interval[1] - interval[0]
            total = float(np.sum(weights))
            if abs(total - length) > _REL_SUM_TOL * 10 * max(1.0, abs(length)):
                raise DomainError(
                    f"weights sum to {total!r}, expected the interval length {length!r}"
                )
        length = None if interval is None else float(interval[1] - interval[0])
        return cls(nodes, p, weights, name=name, _length=length)

    @classmethod
    def interval(cls, a, b, n, p=math.inf, name=""):
        """Uniform nodes on ``[a, b]`` including the endpoints, trapezoid weights."""
        if n < 2:
            raise DimensionError("an interval space needs at least two nodes")
        nodes = np.linspace(a, b, n)
        w = None
        if not math.isinf(p):
            h = (b - a) / (n - 1)
            w = np.full(n, h)
            w[0] = w[-1] = h / 2
        return cls.from_nodes(nodes, p, w, interval=(a, b), name=name)

    @classmethod
    def coordinates(cls, k, p=math.inf, weights=None, name=""):
        """Plain coordinate space of dimension ``k`` (boundary spaces)."""
        if k < 1:
            raise DimensionError("dimension must be positive")
        if not math.isinf(p) and weights is None:
            weights = np.ones(k)
        if math.isinf(p):
            weights = None
        return cls(np.arange(k, dtype=float), p, weights, name=name)

    @staticmethod
    def product(*spaces, name=""):
        """Product space with the matching l^p (or max) combination of norms."""
        if not spaces:
            raise DimensionError("empty product")
        p = spaces[0].p
        if any(s.p != p for s in spaces):
            raise DomainError("product factors must share the norm exponent")
        w = None if math.isinf(p) else np.concatenate([s.weights for s in spaces])
        parts = tuple(part for s in spaces for part in s.parts)
        dim = sum(s.dim for s in spaces)
        return DiscreteSpace(np.arange(dim, dtype=float), p, w, parts=parts, name=name)

    @staticmethod
    def tensor(outer_weights, inner, name=""):
        """Space of fields v(r, s) stored row-major as (outer index, inner index)."""
        ow = np.asarray(outer_weights, dtype=float)
        dim = ow.size * inner.dim
        w = None if math.isinf(inner.p) else np.kron(ow, inner.weights)
        return DiscreteSpace(np.arange(dim, dtype=float), inner.p, w, name=name)

    def with_p(self, p):
        """Same nodes and weights under another exponent (weights needed)."""
        if math.isinf(p):
            return DiscreteSpace(self.grid, p, None, self.parts, self.name, self._length)
        if self.weights is None:
            raise DomainError("no quadrature weights to build a p-norm from")
        return DiscreteSpace(self.grid, p, self.weights, self.parts, self.name, self._length)

    # -- basic data -------------------------------------------------------
    @property
    def dim(self) -> int:
        return int(self.grid.size)

    @property
    def is_sup(self) -> bool:
        return math.isinf(self.p)

    @property
    def measure(self) -> float:
        """Total mass of the weights (1 per coordinate for the sup-norm)."""
        return float(np.sum(self.weights)) if self.weights is not None else float(self.dim)

    def _check(self, x):
        x = np.asarray(x)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"expected trailing length {self.dim}, got {x.shape[-1]}")
        return x

    # -- norm and duality -------------------------------------------------
    def norm(self, x):
        """Norm of ``x`` along the last axis."""
        x = self._check(x)
        if self.is_sup:
            return np.max(np.abs(x), axis=-1)
        return _weighted_pnorm(x, self.weights, self.p)

    def dual_norm(self, g):
        """``sup |sum_i g_i u_i|`` over the unit ball (last axis)."""
        g = self._check(g)
        a = np.abs(g)
        if self.is_sup:
            return np.sum(a, axis=-1)
        w = self.weights
        if self.p == 1:
            return np.max(a / w, axis=-1)
        q = self.p / (self.p - 1.0)
        return _weighted_pnorm(a / w, w, q)

    def norming_functional(self, y):
        """Functional ``z`` of unit dual norm with ``sum z_i y_i = ||y||``."""
        y = self._check(np.asarray(y))
        if y.ndim != 1:
            raise DimensionError("norming_functional acts on single vectors")
        nrm = float(self.norm(y))
        s = _phase(y)
        if self.is_sup:
            z = np.zeros_like(s)
            k = int(np.argmax(np.abs(y)))
            z[k] = s[k]
            return z
        w = self.weights
        if self.p == 1 or nrm == 0:
            return w * s if self.p == 1 else np.zeros_like(s)
        return w * (np.abs(y) / nrm) ** (self.p - 1) * s

    def maximizer(self, g):
        """Unit vector ``u`` with ``sum g_i u_i = dual_norm(g)``."""
        g = self._check(np.asarray(g))
        if g.ndim != 1:
            raise DimensionError("maximizer acts on single vectors")
        s = _phase(g)
        if self.is_sup:
            return s
        w = self.weights
        if self.p == 1:
            k = int(np.argmax(np.abs(g) / w))
            u = np.zeros_like(s)
            u[k] = s[k] / w[k]
            return u
        q = self.p / (self.p - 1.0)
        a = np.abs(g) / w
        amax = a.max()
        if amax == 0:
            u = np.ones_like(s) / self.measure ** (1.0 / self.p)
            return u
        u = (a / amax) ** (q - 1) * s
        return u / self.norm(u)

    def unit_extreme_points(self):
        """Scaled basis vectors e_j / ||e_j||; the extreme points when p = 1."""
        eye = np.eye(self.dim)
        return eye / self.norm(eye)[:, None]


@dataclass(frozen=True, eq=False)
class BochnerSpace:
    """Time-discretized space L^p(0, t; V) on piecewise-constant cells.

    Elements are arrays of shape ``(m, V.dim)``; row ``k`` is the value on
    cell ``k`` with length ``time_weights[k]``.
    """

    inner: DiscreteSpace
    time_weights: np.ndarray
    p: float

    def __post_init__(self):
        tw = np.asarray(self.time_weights, dtype=float)
        object.__setattr__(self, "time_weights", tw)
        object.__setattr__(self, "p", float(self.p))
        if not self.p >= 1:
            raise DomainError("time exponent must be >= 1")
        if np.any(tw < 0):
            raise DomainError("time weights must be nonnegative")

    @property
    def shape(self):
        return (self.time_weights.size, self.inner.dim)

    @property
    def dim(self):
        return self.time_weights.size * self.inner.dim

    def _outer(self, a):
        if math.isinf(self.p):
            return np.max(a, axis=-1)
        return _weighted_pnorm(a, self.time_weights, self.p)

    def norm(self, U):
        U = np.asarray(U)
        return self._outer(self.inner.norm(U))

    def dual_norm(self, G):
        G = np.asarray(G)
        b = self.inner.dual_norm(G)
        if math.isinf(self.p):
            return np.sum(b, axis=-1)
        w = self.time_weights
        pos = w > 0
        if self.p == 1:
            return np.max(b[..., pos] / w[pos], axis=-1)
        q = self.p / (self.p - 1.0)
        return _weighted_pnorm(b[..., pos] / w[pos], w[pos], q)

    def norming_functional(self, Y):
        Y = np.asarray(Y)
        a = self.inner.norm(Y)
        nrm = float(self._outer(a))
        Z = np.zeros_like(Y, dtype=np.result_type(Y, float))
        if nrm == 0:
            return Z
        if math.isinf(self.p):
            k = int(np.argmax(a))
            Z[k] = self.inner.norming_functional(Y[k])
            return Z
        w = self.time_weights
        zeta = w if self.p == 1 else w * (a / nrm) ** (self.p - 1)
        for k in np.nonzero((a > 0) & (w > 0))[0]:
            Z[k] = zeta[k] * self.inner.norming_functional(Y[k])
        return Z

    def maximizer(self, G):
        G = np.asarray(G)
        b = self.inner.dual_norm(G)
        w = self.time_weights
        m = w.size
        pos = w > 0
        U = np.zeros_like(G, dtype=np.result_type(G, float))
        if math.isinf(self.p):
            c = np.ones(m)
        elif self.p == 1:
            ratio = np.where(pos, b / np.where(pos, w, 1.0), -np.inf)
            k = int(np.argmax(ratio))
            c = np.zeros(m)
            c[k] = 1.0 / w[k]
        else:
            q = self.p / (self.p - 1.0)
            a = np.where(pos, b / np.where(pos, w, 1.0), 0.0)
            amax = a.max()
            c = (a / amax) ** (q - 1) if amax > 0 else np.where(pos, 1.0, 0.0)
            c = c / _weighted_pnorm(c, w, self.p)
        for k in range(m):
            if c[k] != 0:
                U[k] = c[k] * self.inner.maximizer(G[k])
        return U


@dataclass(frozen=True)
class NormBracket:
    """Certified bracket ``lower <= ||M|| <= upper``."""

    lower: float
    upper: float
    method: str = ""

    @property
    def exact(self) -> bool:
        return self.upper - self.lower <= 1e-12 * max(1.0, self.upper)

    @property
    def value(self) -> float:
        """Upper end; the conservative value for bound checks."""
        return self.upper

    def __float__(self):
        return float(self.upper)


def norm(space: DiscreteSpace, x) -> float:
    """Norm of a single vector in ``space``.

    Examples
    --------
    >>> import numpy as np, math
    >>> X = DiscreteSpace.interval(0.0, 1.0, 5, p=math.inf)
    >>> float(norm(X, np.array([0.0, -2.0, 1.0, 0.0, 0.5])))
    2.0
    """
    x = np.asarray(x)
    if x.ndim != 1 or x.size != space.dim:
        raise DimensionError(f"vector of length {x.size} does not live in a space of dimension {space.dim}")
    return float(space.norm(x))


def power_lower_bound(apply, apply_t, dom, cod, starts, iters=12, rng=None):
    """Lower bound on ``||M||_{dom -> cod}`` by dual power iteration.

    Each step maps u to the maximizer of ``<M^T z, .>`` with z the norming
    functional of ``M u``; the ratio ``||Mu|| / ||u||`` never decreases.

    Parameters
    ----------
    apply, apply_t : callable
        ``u -> M u`` and the transpose map ``z -> M^T z`` for the bilinear
        pairing.
    dom, cod : DiscreteSpace or BochnerSpace
    starts : sequence of ndarray
        Starting vectors (need not be normalized).
    iters : int
        Iterations per start.
    """
    best = 0.0
    for u in starts:
        nu = float(dom.norm(u))
        if nu == 0:
            continue
        u = u / nu
        prev = -1.0
        for _ in range(iters):
            y = apply(u)
            val = float(cod.norm(y))
            best = max(best, val)
            if val == 0 or val <= prev * (1 + 1e-10):
                break
            prev = val
            g = apply_t(cod.norming_functional(y))
            u_new = dom.maximizer(g)
            nn = float(dom.norm(u_new))
            if nn == 0:
                break
            u = u_new / nn
    return best


def _default_starts(M, dom, rng, count):
    starts = []
    # columns and top rows give good seeds for the extreme-point structure
    col_norms = np.abs(M).sum(axis=0)
    for j in np.argsort(col_norms)[::-1][: min(4, M.shape[1])]:
        e = np.zeros(M.shape[1], dtype=M.dtype)
        e[j] = 1.0
        starts.append(e)
    row_norms = np.abs(M).sum(axis=1)
    for i in np.argsort(row_norms)[::-1][: min(4, M.shape[0])]:
        starts.append(dom.maximizer(M[i]))
    for _ in range(count):
        v = rng.standard_normal(M.shape[1])
        if np.iscomplexobj(M):
            v = v + 1j * rng.standard_normal(M.shape[1])
        starts.append(v)
    return starts


def operator_norm(M, dom: DiscreteSpace, cod: DiscreteSpace, *, rng=None, starts=8, upper_only=False) -> NormBracket:
    """Induced norm of the matrix ``M : dom -> cod`` as a certified bracket.

    Exact formulas are used where they exist (sup target, l^1-type domain,
    weighted Hilbert pair); otherwise the upper end is the smallest of a
    Riesz-Thorin interpolation bound and two embedding bounds, and the lower
    end comes from dual power iteration.

    Parameters
    ----------
    M : ndarray, shape (cod.dim, dom.dim)
    dom, cod : DiscreteSpace
    rng : numpy.random.Generator, optional
        Source for random starts; a fixed seed is used when omitted.
    starts : int
        Number of random starts for the lower bound.
    upper_only : bool
        Skip the power iteration and report ``lower = 0`` for inexact cases.
    """
    M = np.atleast_2d(np.asarray(M))
    if M.shape != (cod.dim, dom.dim):
        raise DimensionError(f"matrix shape {M.shape} does not map {dom.dim} -> {cod.dim}")
    if M.size == 0 or not np.any(M):
        return NormBracket(0.0, 0.0, "zero")
    if cod.is_sup:
        val = float(np.max(dom.dual_norm(M)))
        return NormBracket(val, val, "row-dual")
    if not dom.is_sup and dom.p == 1:
        val = float(np.max(cod.norm(M.T) / dom.weights))
        return NormBracket(val, val, "extreme-columns")
    if dom.dim == 1:
        val = float(cod.norm(M[:, 0]) / dom.norm(np.ones(1)))
        return NormBracket(val, val, "rank-one")
    if not dom.is_sup and dom.p == 2 and cod.p == 2:
        W = np.sqrt(cod.weights)[:, None] * M / np.sqrt(dom.weights)[None, :]
        val = float(np.linalg.norm(W, 2))
        return NormBracket(val, val, "weighted-svd")

    uppers = []
    # M maps into sup with the exact norm, then the sup -> L^p embedding
    to_sup = float(np.max(dom.dual_norm(M)))
    uppers.append(to_sup * cod.measure ** (1.0 / cod.p))
    if not dom.is_sup:
        from_l1 = float(np.max(cod.norm(M.T) / dom.weights))
        uppers.append(from_l1 * dom.measure ** (1.0 - 1.0 / dom.p))
        if dom.p == cod.p:
            # Riesz-Thorin between the L^1 and L^inf endpoints
            n1 = float(np.max((cod.weights[:, None] * np.abs(M)).sum(axis=0) / dom.weights))
            ninf = float(np.max(np.abs(M).sum(axis=1)))
            uppers.append(n1 ** (1.0 / dom.p) * ninf ** (1.0 - 1.0 / dom.p))
    upper = min(uppers)
    if upper_only:
        return NormBracket(0.0, upper, "upper")
    rng = np.random.default_rng(0) if rng is None else rng
    lower = power_lower_bound(
        lambda u: M @ u, lambda z: M.T @ z, dom, cod, _default_starts(M, dom, rng, starts)
    )
    lower = min(lower, upper)
    return NormBracket(lower, upper, "bracket")
