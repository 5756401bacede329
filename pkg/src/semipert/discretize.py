"""Grids, differentiation matrices, quadrature and random probe fields."""
from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as npcheb
from numpy.polynomial import legendre as npleg

from .errors import DimensionError, DomainError

__all__ = [
    "chebyshev_nodes",
    "barycentric_weights",
    "diff_matrix",
    "interp_matrix",
    "interpolatory_weights",
    "clenshaw_curtis_weights",
    "trapezoid_weights",
    "fd_second_derivative",
    "fd_first_derivative",
    "graded_gauss",
    "gauss_on",
    "smooth_field",
    "ProbeFactory",
]


def chebyshev_nodes(a, b, N):
    """Chebyshev-Lobatto nodes on ``[a, b]`` in increasing order (N+1 points)."""
    if N < 1:
        raise DimensionError("need at least one interval")
    x = -np.cos(np.pi * np.arange(N + 1) / N)
    nodes = a + (b - a) * (x + 1.0) / 2.0
    nodes[0], nodes[-1] = a, b
    return nodes


def barycentric_weights(nodes):
    """Barycentric weights of arbitrary distinct nodes, scaled to max 1."""
    x = np.asarray(nodes, dtype=float)
    scale = 4.0 / (x.max() - x.min())
    diff = (x[:, None] - x[None, :]) * scale
    np.fill_diagonal(diff, 1.0)
    # sum of logs keeps the product in range for a few hundred nodes
    logw = -np.sum(np.log(np.abs(diff)), axis=1)
    sign = np.prod(np.sign(diff), axis=1)
    w = sign * np.exp(logw - logw.max())
    return w


def _cheb_bary(N):
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def diff_matrix(nodes, weights=None):
    """First-derivative collocation matrix on ``nodes`` (barycentric form).

    Diagonal entries use the negative-sum trick so constants are
    differentiated exactly.
    """
    x = np.asarray(nodes, dtype=float)
    w = barycentric_weights(x) if weights is None else np.asarray(weights, dtype=float)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    D[np.diag_indices_from(D)] = -D.sum(axis=1)
    return D


def chebyshev_diff(a, b, N):
    """Nodes and first-derivative matrix for Chebyshev-Lobatto points."""
    s = chebyshev_nodes(a, b, N)
    return s, diff_matrix(s, _cheb_bary(N))


def interp_matrix(nodes, targets, weights=None):
    """Barycentric interpolation matrix from ``nodes`` to ``targets``."""
    x = np.asarray(nodes, dtype=float)
    t = np.atleast_1d(np.asarray(targets, dtype=float))
    w = barycentric_weights(x) if weights is None else np.asarray(weights, dtype=float)
    diff = t[:, None] - x[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-14 * max(1.0, np.abs(x).max()))
    diff[exact] = 1.0
    C = w[None, :] / diff
    C /= C.sum(axis=1, keepdims=True)
    rows = np.nonzero(exact.any(axis=1))[0]
    for r in rows:
        C[r] = exact[r].astype(float)
    return C


def interpolatory_weights(nodes, a, b):
    """Quadrature weights exact for polynomials of degree ``len(nodes) - 1``."""
    x = 2.0 * (np.asarray(nodes, dtype=float) - a) / (b - a) - 1.0
    m = x.size
    V = npcheb.chebvander(x, m - 1).T
    k = np.arange(m)
    mom = np.zeros(m)
    even = k % 2 == 0
    mom[even] = 2.0 / (1.0 - k[even] ** 2.0)
    return np.linalg.solve(V, mom) * (b - a) / 2.0


def clenshaw_curtis_weights(a, b, N):
    """Clenshaw-Curtis weights for the N+1 Chebyshev-Lobatto nodes on [a, b]."""
    theta = np.pi * np.arange(N + 1) / N
    w = np.zeros(N + 1)
    v = np.ones(N - 1)
    inner = np.arange(1, N)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
        v -= np.cos(N * theta[inner]) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k * k - 1)
    w[inner] = 2.0 * v / N
    return w[::-1] * (b - a) / 2.0


def trapezoid_weights(nodes):
    x = np.asarray(nodes, dtype=float)
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


def fd_second_derivative(n, h):
    """Three-point second difference on n uniform nodes (boundary rows zero)."""
    D2 = np.zeros((n, n))
    i = np.arange(1, n - 1)
    D2[i, i - 1] = 1.0
    D2[i, i] = -2.0
    D2[i, i + 1] = 1.0
    return D2 / h**2


def fd_first_derivative(n, h):
    """Second-order first derivative: central inside, one-sided at the ends."""
    if n < 3:
        raise DimensionError("one-sided second-order stencils need three nodes")
    D1 = np.zeros((n, n))
    i = np.arange(1, n - 1)
    D1[i, i - 1] = -0.5
    D1[i, i + 1] = 0.5
    D1[0, :3] = [-1.5, 2.0, -0.5]
    D1[-1, -3:] = [0.5, -2.0, 1.5]
    return D1 / h


def gauss_on(a, b, k):
    """k-point Gauss-Legendre nodes and weights on [a, b]."""
    x, w = npleg.leggauss(k)
    return a + (b - a) * (x + 1) / 2, w * (b - a) / 2


def graded_gauss(a, b, levels=40, order=12, toward="a"):
    """Composite Gauss rule on panels shrinking geometrically toward one end.

    Panels are ``[a + L 2^{-j-1}, a + L 2^{-j}]`` for ``j < levels`` plus the
    innermost ``[a, a + L 2^{-levels}]``; mirrored when ``toward == "b"``.
    Returns nodes, weights and the width of the innermost panel.
    """
    L = b - a
    if L <= 0:
        raise DomainError("empty interval")
    edges = L * 2.0 ** -np.arange(levels + 1)
    edges = np.concatenate([[0.0], edges[::-1]])
    xs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_on(lo, hi, order)
        xs.append(x)
        ws.append(w)
    x = np.concatenate(xs)
    w = np.concatenate(ws)
    if toward == "a":
        return a + x, w, edges[1]
    return b - x[::-1], w[::-1], edges[1]


def smooth_field(coeffs, x, a, b, kind="cos"):
    """Evaluate ``sum_k c_k basis_k`` with the basis mapped to [a, b]."""
    x = np.asarray(x, dtype=float)
    k = np.arange(len(coeffs))
    theta = np.pi * (x - a) / (b - a)
    if kind == "cos":
        B = np.cos(np.outer(theta, k))
    elif kind == "sin":
        B = np.sin(np.outer(theta, k + 1))
    else:
        raise DomainError(f"unknown basis {kind!r}")
    return B @ np.asarray(coeffs)


class ProbeFactory:
    """Seeded random fields that do not depend on the mesh.

    Coefficients are drawn from a generator keyed by ``(seed, probe index)``,
    so probe ``j`` is the same continuous function on every grid; only its
    sampling changes.  Spectra decay like ``k^-2``.

    Parameters
    ----------
    seed : int
    modes : int
        Number of basis functions (band limit).
    decay : float
        Coefficient decay exponent.
    """

    def __init__(self, seed=0, modes=16, decay=2.0):
        self.seed = int(seed)
        self.modes = int(modes)
        self.decay = float(decay)

    def coefficients(self, j, stream=0, modes=None):
        modes = self.modes if modes is None else modes
        rng = np.random.default_rng([self.seed, int(stream), int(j)])
        k = np.arange(1, modes + 1)
        return rng.standard_normal(modes) * k ** (-self.decay)

    def field(self, j, x, a, b, stream=0, kind="cos"):
        """Probe ``j`` sampled at ``x`` in [a, b]."""
        return smooth_field(self.coefficients(j, stream), x, a, b, kind)

    def vector(self, j, space, stream=0):
        """Probe ``j`` as a coordinate vector of ``space``.

        Interval spaces get a smooth field over their node span; product and
        coordinate spaces get one field per part, evaluated on the part's
        index range, so the draw is still mesh independent for the parts that
        stay fixed under refinement.
        """
        if len(space.parts) == 1 and space._length is not None:
            a, b = space.grid[0], space.grid[-1]
            return self.field(j, space.grid, a, b, stream)
        out = []
        for i, size in enumerate(space.parts):
            rng = np.random.default_rng([self.seed, int(stream), int(j), i + 1])
            out.append(rng.standard_normal(size))
        return np.concatenate(out)

    def time_profile(self, j, tau, t, stream=0, modes=8):
        """Band-limited scalar signal on [0, t] with u(0) = u'(0) = 0."""
        c = self.coefficients(j, stream=1000 + stream, modes=modes)
        k = np.arange(1, modes + 1)
        tau = np.asarray(tau, dtype=float)
        return (1.0 - np.cos(np.outer(tau / t, k) * np.pi)) @ c
