"""Convolution harness for ``||K * v||_r <= ||k||_q ||v||_p``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .discretize import gauss_on, graded_gauss
from .errors import DomainError

__all__ = ["YoungReport", "young_convolution_check", "kernel_lq_norm", "random_young_configuration"]

SLACK = 0.02


@dataclass
class YoungReport:
    """Both sides of the convolution inequality."""

    p: float
    q: float
    r: float
    lhs: float
    rhs: float
    k_norm: float
    v_norm: float
    holds: bool

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def _lp(values, weights, p):
    values = np.abs(values)
    top = float(np.max(values))
    if math.isinf(p) or top == 0:
        return top
    # scale before powering so large exponents do not overflow
    return top * float(np.sum(weights * (values / top) ** p) ** (1.0 / p))


def kernel_lq_norm(k: Callable, q, levels=40, order=16):
    """``||k||_{L^q(0,1)}`` for a scalar profile that may blow up at 0.

    Graded Gauss panels resolve the singularity down to ``2^-levels``; the
    innermost panel is replaced by the integral of the power law
    ``c t^-b`` fitted to the two adjacent panels.
    """
    if math.isinf(q):
        t = np.logspace(-levels * math.log10(2), 0, 4000)
        return float(np.max(np.abs(k(t))))
    x, w, eps = graded_gauss(0.0, 1.0, levels, order)
    keep = x > eps
    vals = np.abs(k(x[keep])) ** q
    total = float(np.sum(w[keep] * vals))
    # power-law tail on [0, eps]
    t1, t2 = eps, 2 * eps
    g1, g2 = abs(float(k(np.array([t1]))[0])) ** q, abs(float(k(np.array([t2]))[0])) ** q
    if g1 > 0 and g2 > 0:
        e = math.log(g1 / g2) / math.log(2.0)  # g ~ t^-e
        if e < 1:
            total += g1 * t1**e * eps ** (1 - e) / (1 - e)
        else:
            return math.inf
    return total ** (1.0 / q)


def young_convolution_check(K: Callable, v: Callable, p, q, r, k_norm: Callable = None,
                            x_norm: Callable = None, y_norm: Callable = None,
                            outer_panels=24, outer_order=8, levels=30, inner_order=10) -> YoungReport:
    """Compare ``||K * v||_{L^r(0,1)}`` with ``||k||_q ||v||_p``.

    Parameters
    ----------
    K : callable
        ``t -> K(t)`` for an array of times; returns an array of shape
        ``(len(t), dX, dY)`` (matrices) or ``(len(t),)`` (scalars).
    v : callable
        ``s -> v(s)``; returns shape ``(len(s), dY)`` or ``(len(s),)``.
    p, q, r : float
        Exponents with ``1/p + 1/q = 1 + 1/r``.
    k_norm : callable, optional
        ``t -> ||K(t)||``; defaults to the largest singular value (matrices)
        or the absolute value (scalars).
    x_norm, y_norm : callable, optional
        Norms of the target and source vectors (Euclidean by default).
    """
    inv = lambda a: 0.0 if math.isinf(a) else 1.0 / a
    if min(p, q, r) < 1:
        raise DomainError("exponents must be at least 1")
    if abs(inv(p) + inv(q) - 1.0 - inv(r)) > 1e-12:
        raise DomainError("exponents violate 1/p + 1/q = 1 + 1/r")
    x_norm = x_norm or (lambda z: np.linalg.norm(np.atleast_2d(z), axis=-1))
    y_norm = y_norm or (lambda z: np.linalg.norm(np.atleast_2d(z), axis=-1))
    if k_norm is None:
        def k_norm(t):
            Kt = np.asarray(K(np.atleast_1d(t)))
            if Kt.ndim == 1:
                return np.abs(Kt)
            return np.linalg.norm(Kt, 2, axis=(1, 2))

    # outer Gauss grid on (0, 1]; composite panels cluster mildly toward 0
    edges = np.linspace(0.0, 1.0, outer_panels + 1) ** 1.5
    ts, tw = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = gauss_on(a, b, outer_order)
        ts.append(x)
        tw.append(w)
    ts = np.concatenate(ts)
    tw = np.concatenate(tw)
    conv = []
    # reference rule on [0, 1] graded toward 0, the kernel singularity
    sig1, w1, _ = graded_gauss(0.0, 1.0, levels, inner_order)
    for t in ts:
        sig, w = t * sig1, t * w1
        Kt = np.asarray(K(sig))
        vs = np.asarray(v(t - sig))
        if Kt.ndim == 1:
            vs = vs if vs.ndim == 1 else vs[:, 0]
            conv.append(np.atleast_1d(np.sum(w * Kt * vs)))
        else:
            vs = vs if vs.ndim == 2 else vs[:, None]
            conv.append(np.einsum("k,kij,kj->i", w, Kt, vs))
    conv = np.array(conv)
    lhs = _lp(x_norm(conv), tw, r)
    # ||v||_p on a fine Gauss grid
    vx, vw = [], []
    for a, b in zip(np.linspace(0, 1, 65)[:-1], np.linspace(0, 1, 65)[1:]):
        x, w = gauss_on(a, b, 8)
        vx.append(x)
        vw.append(w)
    vx, vw = np.concatenate(vx), np.concatenate(vw)
    vv = np.asarray(v(vx))
    vnorm = _lp(y_norm(vv if vv.ndim == 2 else vv[:, None]), vw, p)
    knorm = kernel_lq_norm(lambda t: k_norm(t), q)
    rhs = knorm * vnorm
    return YoungReport(p, q, r, lhs, rhs, knorm, vnorm, bool(lhs <= rhs * (1 + SLACK)))


def random_young_configuration(rng, dim=None):
    """Random exponents and a singular kernel ``c t^-beta`` with ``beta q <= 0.9``.

    Returns ``(K, v, p, q, r, beta)``; matrix kernels are ``t^-beta M`` with a
    random matrix ``M`` when ``dim`` is given.
    """
    q = float(rng.uniform(1.0, 3.0))
    # pick p in [1, q') so that r = 1 / (1/p + 1/q - 1) is in [1, inf]
    pmax = q / (q - 1.0) if q > 1 else math.inf
    p = float(rng.uniform(1.0, min(pmax, 6.0)))
    s = 1.0 / p + 1.0 / q - 1.0
    r = math.inf if s <= 1e-12 else 1.0 / s
    if s <= 1e-12:
        p = q / (q - 1.0)
    beta = float(rng.uniform(0.0, 0.9 / q))
    c = float(rng.uniform(0.5, 2.0))
    freqs = rng.uniform(0.5, 6.0, size=3)
    amps = rng.standard_normal(3)
    phases = rng.uniform(0, 2 * np.pi, size=3)

    def scalar_v(s_):
        s_ = np.asarray(s_, dtype=float)
        return sum(a * np.cos(f * s_ + ph) for a, f, ph in zip(amps, freqs, phases))

    if dim is None:
        K = lambda t: c * np.asarray(t, dtype=float) ** (-beta)
        v = scalar_v
    else:
        M = rng.standard_normal((dim, dim))
        dirs = rng.standard_normal(dim)
        K = lambda t: c * np.asarray(t, dtype=float)[:, None, None] ** (-beta) * M[None]
        v = lambda s_: scalar_v(s_)[:, None] * dirs[None, :]
    return K, v, p, q, r, beta
