"""Degenerate diffusion on C[0, 1] with generalized Wentzell boundary conditions.

The problem is ``u_t = a u'' + b u' + c u`` on ``(0, 1)`` with
``(a u'')(t, j) = phi_j(u(t))`` at ``j = 0, 1``.  The coefficient ``a`` may
vanish at the endpoints as long as ``1/a`` is integrable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy import integrate

from .admissibility import ControlObsTriple, ZDescriptor
from .boundary import BoundarySystem, DirichletOperator, block_encoding, dirichlet_solve
from .core import OperatorBlock, _check_proximity
from .discretize import fd_first_derivative, fd_second_derivative, trapezoid_weights
from .errors import DomainError, PreconditionError
from .spaces import DiscreteSpace

__all__ = [
    "BoundaryFunctional",
    "WentzellProblem",
    "wentzell_build",
    "wentzell_dirichlet",
    "wentzell_triple",
    "boundary_extrapolation",
    "project_to_domain",
    "Trajectory",
    "solve_de",
    "canonical_problem",
    "INTEGRABILITY_TOL",
    "HOLDER_SLACK",
]

INTEGRABILITY_TOL = 0.01
HOLDER_SLACK = 0.05


def _ones(s):
    return np.ones_like(np.asarray(s, dtype=float))


def _zeros(s):
    return np.zeros_like(np.asarray(s, dtype=float))


@dataclass
class BoundaryFunctional:
    """``phi(f) = sum c f(s) + sum d f'(s) + int_0^1 w(s) f(s) ds``.

    Parameters
    ----------
    points : list of (location, coefficient)
    derivatives : list of (location, coefficient)
    density : callable, optional
    """

    points: list = field(default_factory=list)
    derivatives: list = field(default_factory=list)
    density: Optional[Callable] = None

    def row(self, s):
        """Discrete functional on the uniform nodes ``s`` (local cubic stencils)."""
        s = np.asarray(s, dtype=float)
        row = np.zeros(s.size)
        for loc, coef in self.points:
            idx, w = _lagrange_stencil(s, loc, 0)
            row[idx] += coef * w
        for loc, coef in self.derivatives:
            idx, w = _lagrange_stencil(s, loc, 1)
            row[idx] += coef * w
        if self.density is not None:
            row += trapezoid_weights(s) * np.asarray(self.density(s), dtype=float)
        return row

    @property
    def is_zero(self) -> bool:
        return not self.points and not self.derivatives and self.density is None


def _lagrange_stencil(s, x, order):
    """Weights of the 4-point Lagrange interpolant (or its derivative) at ``x``."""
    if not s[0] <= x <= s[-1]:
        raise DomainError(f"functional location {x} lies outside [0, 1]")
    j = int(np.clip(np.searchsorted(s, x) - 2, 0, s.size - 4))
    idx = np.arange(j, j + 4)
    nodes = s[idx]
    w = np.zeros(4)
    for i in range(4):
        others = np.delete(nodes, i)
        den = np.prod(nodes[i] - others)
        if order == 0:
            w[i] = np.prod(x - others) / den
        else:
            w[i] = sum(np.prod(np.delete(x - others, k)) for k in range(3)) / den
    return idx, w


@dataclass
class WentzellProblem:
    """Coefficients, boundary functionals and the claimed Hoelder exponent.

    Parameters
    ----------
    a : callable
        Diffusion coefficient, positive on ``(0, 1)``; may vanish at 0 and 1.
    b, c : callable, optional
        Drift and reaction coefficients (zero by default).
    phi0, phi1 : BoundaryFunctional, optional
        Boundary feedback at ``s = 0`` and ``s = 1``.
    holder_delta : float
        Claimed Hoelder exponent of ``s -> int_0^s dr / a(r)``.
    """

    a: Callable
    b: Callable = _zeros
    c: Callable = _zeros
    phi0: BoundaryFunctional = field(default_factory=BoundaryFunctional)
    phi1: BoundaryFunctional = field(default_factory=BoundaryFunctional)
    holder_delta: float = 1.0
    name: str = "wentzell"

    def validate(self, interior_samples=4097):
        """Check positivity, integrability of ``1/a`` and the Hoelder exponent.

        Returns
        -------
        dict
            ``integral_coarse``, ``integral_fine``, ``relative_change`` and
            ``holder_estimate``.

        Raises
        ------
        DomainError
            If ``a`` vanishes inside ``(0, 1)``, ``1/a`` is not integrable or
            the Hoelder exponent is below the claim.
        """
        if not 0 < self.holder_delta <= 1:
            raise DomainError("holder_delta must lie in (0, 1]")
        s = np.linspace(0.0, 1.0, interior_samples)[1:-1]
        av = np.asarray(self.a(s), dtype=float)
        if np.any(~np.isfinite(av)) or np.any(av <= 0):
            raise DomainError("a must be positive on the open interval (0, 1)")
        vals = []
        for N in (2**15, 2**16):
            mid = (np.arange(N) + 0.5) / N
            vals.append(float(np.sum(1.0 / np.asarray(self.a(mid), dtype=float)) / N))
        change = abs(vals[1] - vals[0]) / abs(vals[1])
        if change > INTEGRABILITY_TOL:
            raise DomainError(
                f"1/a is not integrable: midpoint integrals change by {change:.3%} under refinement"
            )
        est = self.holder_estimate()
        if est < self.holder_delta - HOLDER_SLACK:
            raise DomainError(
                f"Hoelder exponent of the antiderivative of 1/a is about {est:.3f}, "
                f"below the claimed {self.holder_delta}"
            )
        return {"integral_coarse": vals[0], "integral_fine": vals[1], "relative_change": change,
                "holder_estimate": est}

    def holder_estimate(self, hs=None):
        """Smallest log-log slope of ``|G(x + h) - G(x)|`` over sampled base points."""
        hs = np.logspace(-6, -2, 9) if hs is None else np.asarray(hs)
        inv = lambda r: 1.0 / float(self.a(np.array([r]))[0])
        slopes = []
        for x0, sign in ((0.0, 1), (1.0, -1), (0.5, 1), (0.25, 1)):
            inc = []
            for h in hs:
                lo, hi = sorted((x0, x0 + sign * h))
                val, _ = integrate.quad(inv, lo, hi, limit=200)
                inc.append(abs(val))
            slopes.append(float(np.polyfit(np.log(hs), np.log(inc), 1)[0]))
        return min(min(slopes), 1.0)


def canonical_problem() -> WentzellProblem:
    """``a = sqrt(s(1 - s))``, ``b = 0``, ``c = cos 3s`` and bounded integral feedback."""
    return WentzellProblem(
        a=lambda s: np.sqrt(np.clip(np.asarray(s) * (1 - np.asarray(s)), 0.0, None)),
        c=lambda s: np.cos(3.0 * np.asarray(s)),
        phi0=BoundaryFunctional(density=lambda s: 0.5 * np.sin(np.pi * np.asarray(s))),
        phi1=BoundaryFunctional(points=[(0.5, -0.25)]),
        holder_delta=0.5,
        name="wentzell-canonical",
    )


def wentzell_build(prob: WentzellProblem, n, validate=True) -> BoundarySystem:
    """Finite differences on ``n`` uniform nodes of ``[0, 1]`` (endpoints included).

    Extended coordinates carry the two boundary values of ``a f''``: interior
    rows of the maximal operator are ``a_i (f_{i-1} - 2 f_i + f_{i+1}) / h^2``,
    boundary rows return the auxiliary values, and ``L`` reads them off.
    """
    if n < 5:
        raise DomainError("need at least five nodes")
    if validate:
        prob.validate()
    s = np.linspace(0.0, 1.0, n)
    h = 1.0 / (n - 1)
    X = DiscreteSpace.interval(0.0, 1.0, n, name="C[0,1]")
    dX = DiscreteSpace.coordinates(2, name="C^2")
    av = np.asarray(prob.a(s), dtype=float)
    Am_x = av[:, None] * fd_second_derivative(n, h)
    Am_x[[0, -1]] = 0.0
    Am_g = np.zeros((n, 2))
    Am_g[0, 0] = Am_g[-1, 1] = 1.0
    L_x = np.zeros((2, n))
    L_g = np.eye(2)
    bv = np.asarray(prob.b(s), dtype=float)
    cv = np.asarray(prob.c(s), dtype=float)
    P = bv[:, None] * fd_first_derivative(n, h) + np.diag(cv)
    Phi = np.vstack([prob.phi0.row(s), prob.phi1.row(s)])
    return BoundarySystem(X, dX, Am_x, Am_g, L_x, L_g, P, Phi, mu=1.0, name=prob.name,
                          meta={"a": av, "h": h, "s": s})


def wentzell_dirichlet(sys: BoundarySystem, lam) -> DirichletOperator:
    """``L_lam = -(1/lam) A_0 R(lam, A_0) L0~`` with the linear interpolant ``L0~``.

    ``A_0`` is the Dirichlet realization ``f(0) = f(1) = 0``; with
    ``z = R(lam, A_0) L0~ d`` the formula reads ``L_lam d = L0~ d / lam - z``.
    """
    if not np.isreal(lam) or float(np.real(lam)) <= 0:
        raise DomainError("lambda must be positive")
    lam = float(np.real(lam))
    _check_proximity(sys.A, lam)
    s = sys.meta["s"]
    n = s.size
    eps = np.stack([1.0 - s, s], axis=1)  # L0~ as an n x 2 matrix
    A0 = sys.Am_x[1:-1, 1:-1]
    z = np.zeros((n, 2))
    z[1:-1] = np.linalg.solve(lam * np.eye(n - 2) - A0, eps[1:-1])
    X = eps / lam - z
    block = OperatorBlock(X, sys.boundary_space, sys.space, f"L_{lam}")
    aux = sys.Am_x[[0, -1]] @ X  # zero rows; the auxiliary values are fixed below
    aux = np.eye(2) + aux
    return DirichletOperator(lam, block, aux, "wentzell-formula")


def wentzell_triple(prob: WentzellProblem, n) -> ControlObsTriple:
    """Block triple ``(A, (Id, L_A), (P; Phi))`` with ``Z = X`` (bounded feedback)."""
    tr = block_encoding(wentzell_build(prob, n))
    tr.Z = ZDescriptor("full")
    tr.name = f"wentzell(n={n})"
    return tr


def boundary_extrapolation(sys: BoundarySystem) -> np.ndarray:
    """Rows evaluating ``(a f'')(j)`` by quadratic extrapolation of interior values."""
    n = sys.n
    E = np.zeros((2, n))
    E[0] = 3 * sys.Am_x[1] - 3 * sys.Am_x[2] + sys.Am_x[3]
    E[1] = 3 * sys.Am_x[n - 2] - 3 * sys.Am_x[n - 3] + sys.Am_x[n - 4]
    return E


def _constraint_residual(sys, E, f):
    r = np.abs(E @ f - sys.Phi @ f)
    scale = max(1.0, float(np.abs(f).max()), float(np.abs(E @ f).max()))
    return float(r.max() / scale)


def project_to_domain(sys: BoundarySystem, g) -> np.ndarray:
    """Add a combination of ``L_1`` columns so the boundary constraint holds.

    The constraint is ``E f = Phi f`` with ``E`` from :func:`boundary_extrapolation`.
    """
    g = np.asarray(g, dtype=float)
    E = boundary_extrapolation(sys)
    Psi = dirichlet_solve(sys, 1.0).matrix
    M = (E - sys.Phi) @ Psi
    kappa = np.linalg.solve(M, sys.Phi @ g - E @ g)
    return g + Psi @ kappa


@dataclass
class Trajectory:
    """Snapshots of a linear evolution."""

    times: np.ndarray
    states: np.ndarray
    grid: np.ndarray
    constraint_residual: float
    growth_M: float
    growth_omega: float
    extra: dict = field(default_factory=dict)

    def rows(self):
        """``(time, value_0, value_1, ...)`` rows for tabular output."""
        return [[float(t), *map(float, np.real(x))] for t, x in zip(self.times, self.states)]


def _growth_fit(times, norms, n0):
    if n0 == 0:
        return 1.0, 0.0
    ratio = np.maximum(norms / n0, 1e-300)
    if times.size > 2:
        omega = float(np.polyfit(times[1:], np.log(ratio[1:]), 1)[0])
    else:
        omega = 0.0
    M = float(np.max(ratio * np.exp(-omega * times)))
    return M, omega


def solve_de(prob: WentzellProblem, f0, t_final, steps, n=None, constraint_tol=1e-8, sys=None,
             probe_tau=1e-6) -> Trajectory:
    """Evolve ``u' = G u`` with the matrix exponential on a uniform time grid.

    Parameters
    ----------
    f0 : array_like or callable
        Initial state on the nodes (or a function of ``s``, which is then
        projected onto the discrete domain).
    t_final : float
    steps : int
    n : int, optional
        Number of nodes when ``f0`` is a callable.
    constraint_tol : float
        Tolerance for ``|(a f0'')(j) - phi_j(f0)|`` (relative).

    Raises
    ------
    DomainError
        If a vector ``f0`` violates the boundary constraint.
    """
    from .boundary import assemble_G

    if t_final <= 0 or steps < 1:
        raise DomainError("t_final and steps must be positive")
    if callable(f0):
        if n is None:
            raise PreconditionError("n is required when f0 is a function")
        sys = sys or wentzell_build(prob, n)
        x0 = project_to_domain(sys, f0(sys.meta["s"]))
    else:
        x0 = np.asarray(f0, dtype=float)
        sys = sys or wentzell_build(prob, x0.size)
        if np.any(x0):
            res = _constraint_residual(sys, boundary_extrapolation(sys), x0)
            if res > constraint_tol:
                raise DomainError(f"initial state violates the boundary constraint (residual {res:.2e})")
    G = assemble_G(sys).matrix
    dt = t_final / steps
    E = sla.expm(dt * G)
    states = [x0]
    for _ in range(steps):
        states.append(E @ states[-1])
    states = np.array(states)
    times = np.linspace(0.0, t_final, steps + 1)
    # boundary rows of u' - P u must reproduce Phi u along the trajectory
    Ep, Em = sla.expm(probe_tau * G), sla.expm(-probe_tau * G)
    worst = 0.0
    for x in states[1:]:
        du = (Ep @ x - Em @ x) / (2 * probe_tau)
        lhs = du[[0, -1]] - (sys.P @ x)[[0, -1]]
        rhs = sys.Phi @ x
        scale = max(1.0, float(np.abs(x).max()))
        worst = max(worst, float(np.abs(lhs - rhs).max() / scale))
    norms = np.abs(states).max(axis=1)
    M, omega = _growth_fit(times, norms, float(np.abs(x0).max()))
    return Trajectory(times, states, sys.meta["s"], worst, M, omega)
