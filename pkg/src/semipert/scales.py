"""Graph and extrapolation norms, fractional powers, Favard norms and rotations."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .core import GeneratorRep, OperatorBlock, resolvent_matrix, _EIG_CHECK_MAX
from .discretize import ProbeFactory
from .errors import DimensionError, DomainError, NumericError, PreconditionError
from .spaces import operator_norm

__all__ = [
    "graph_norm",
    "xminus1_norm",
    "FractionalPower",
    "fractional_power",
    "FavardEstimate",
    "favard_norm",
    "default_lambda_grid",
    "check_embedding_chain",
    "EmbeddingChainReport",
    "rotate_generator",
    "rotation_resolvent_residual",
    "split_sector_point",
    "rotated_semigroup_product",
    "complex_time_expm",
    "rotation_power_identity",
    "smoothing_fit",
    "SLOPE_FLAG",
]

SLOPE_FLAG = 0.05
PLATEAU_DRIFT = 0.20


def graph_norm(A: GeneratorRep, x) -> float:
    """``||x|| + ||Ax||``."""
    x = np.asarray(x)
    return float(A.space.norm(x) + A.space.norm(A.matrix @ x))


def xminus1_norm(A: GeneratorRep, x, lam0=None) -> float:
    """Extrapolation norm ``||R(lam0, A) x||``, ``lam0`` the base point by default."""
    lam0 = A.base_lambda if lam0 is None else lam0
    return float(A.space.norm(resolvent_matrix(A, lam0, np.asarray(x))))


# -- fractional powers ---------------------------------------------------------


@dataclass
class FractionalPower:
    """Matrix of ``(lambda - A)^gamma`` (principal branch).

    Attributes
    ----------
    base : GeneratorRep
    lambda_shift : float
    gamma : float
    matrix : ndarray
    route : str
        ``"identity"``, ``"eigen"`` or ``"balakrishnan"``.
    achieved : float
        Last relative change of the quadrature (0 for closed routes).
    """

    base: GeneratorRep
    lambda_shift: float
    gamma: float
    matrix: np.ndarray
    route: str
    achieved: float = 0.0

    def apply(self, x):
        return self.matrix @ x


def _shifted(A, lam):
    return lam * np.eye(A.n) - A.matrix


def _eigen_power(A: GeneratorRep, lam, gamma):
    w, V = A.eig
    d = (lam - w).astype(complex) ** gamma
    M = (V * d) @ np.linalg.solve(V, np.eye(A.n))
    return M


def _balakrishnan_negative(B, a, spec, tol, max_halvings=7):
    """``B^{-a}`` for ``0 < a < 1`` via the substituted Balakrishnan integral.

    With ``s = e^u`` the integrand ``e^{(1-a)u} (e^u + B)^{-1}`` decays
    exponentially at both ends, so the trapezoid rule converges
    geometrically; the step is halved until two levels agree to ``tol``.
    """
    n = B.shape[0]
    eye = np.eye(n)
    mags = np.abs(spec)
    m_lo, m_hi = max(mags.min(), 1e-300), max(mags.max(), 1e-300)
    u_lo = math.log(m_lo) - 40.0 / (1.0 - a)
    u_hi = math.log(m_hi) + 40.0 / a

    def f(u):
        s = math.exp(u)
        return math.exp((1.0 - a) * u) * np.linalg.solve(s * eye + B, eye)

    h = 1.0
    nodes = np.arange(u_lo, u_hi + h / 2, h)
    total = sum(f(u) for u in nodes)
    est = h * total
    change = math.inf
    for _ in range(max_halvings):
        mids = nodes[:-1] + h / 2
        total = total + sum(f(u) for u in mids)
        nodes = np.sort(np.concatenate([nodes, mids]))
        h /= 2
        new = h * total
        change = np.linalg.norm(new - est) / max(np.linalg.norm(new), 1e-300)
        est = new
        if change <= tol:
            return math.sin(math.pi * a) / math.pi * est, change
    raise NumericError(f"Balakrishnan quadrature stalled at relative change {change:.2e}", achieved=change)


def fractional_power(A: GeneratorRep, lam, gamma, route="auto", tol=1e-11) -> FractionalPower:
    """``(lam - A)^gamma`` for ``gamma`` in ``(-1, 1]`` without zero.

    Parameters
    ----------
    A : GeneratorRep
    lam : float
        Shift with ``gb(A - lam) < 0``.
    gamma : float
    route : {"auto", "eigen", "balakrishnan"}
        ``"auto"`` picks the spectral route for near-normal matrices.
    tol : float
        Relative tolerance of the quadrature route.

    Raises
    ------
    PreconditionError
        If ``gb(A - lam) >= 0``.
    NumericError
        If the quadrature does not reach ``tol``.
    """
    if not (-1.0 < gamma <= 1.0) or gamma == 0:
        raise DomainError("gamma must lie in (-1, 1] and differ from zero")
    if A.growth_bound - lam >= 0:
        raise PreconditionError(f"gb(A - lambda) = {A.growth_bound - lam:.3e} is not negative")
    B = _shifted(A, lam)
    if gamma == 1.0:
        return FractionalPower(A, lam, gamma, B, "identity")
    if route == "auto":
        route = "eigen" if (A.n <= _EIG_CHECK_MAX and A.is_near_normal) else "balakrishnan"
    if route == "eigen":
        M = _eigen_power(A, lam, gamma)
        if np.isrealobj(A.matrix):
            M = M.real
        return FractionalPower(A, lam, gamma, M, "eigen")
    if route != "balakrishnan":
        raise DomainError(f"unknown route {route!r}")
    spec = lam - A.eigenvalues
    if gamma < 0:
        M, ach = _balakrishnan_negative(B, -gamma, spec, tol)
    else:
        neg, ach = _balakrishnan_negative(B, 1.0 - gamma, spec, tol)
        M = B @ neg
    return FractionalPower(A, lam, gamma, M, "balakrishnan", achieved=ach)


# -- Favard norms --------------------------------------------------------------


def default_lambda_grid(A: GeneratorRep, points=48, top=1e6):
    """48 log-spaced points on ``[max(1, 2 gb+), 1e6]``."""
    lo = max(1.0, 2.0 * max(A.growth_bound, 0.0))
    return np.logspace(math.log10(lo), math.log10(top), points)


def _top_decade_slope(grid, running):
    lg = np.log10(grid)
    if lg[-1] - lg[0] < 1.0:
        return 0.0
    lr = np.log10(np.maximum(running, 1e-300))
    start = np.interp(lg[-1] - 1.0, lg, lr)
    return float(lr[-1] - start)


@dataclass
class FavardEstimate:
    """Sampled ``sup_lambda ||lambda^alpha A R(lambda, A) target||``.

    Attributes
    ----------
    alpha : float
    lambda_grid : ndarray
    values : ndarray
        Sampled quantity per grid point.
    value : float
        Largest sample.
    argmax_lambda : float
    slope : float
        Increase of ``log10`` of the running maximum over the top decade.
    unbounded_suspect : bool
        True when ``slope > 0.05``.
    """

    alpha: float
    lambda_grid: np.ndarray
    values: np.ndarray
    value: float
    argmax_lambda: float
    slope: float
    unbounded_suspect: bool

    @property
    def flag(self) -> str:
        return "UNBOUNDED-SUSPECT" if self.unbounded_suspect else "BOUNDED"


def favard_norm(A: GeneratorRep, alpha, target, lambda_grid=None, domain=None, slope_flag=SLOPE_FLAG) -> FavardEstimate:
    """Sampled Favard quantity of a vector or an operator.

    Parameters
    ----------
    A : GeneratorRep
    alpha : float
        Order in ``(0, 1]``.
    target : ndarray or OperatorBlock
        A vector, or an operator (the induced norm is used).
    lambda_grid : array_like, optional
        Defaults to :func:`default_lambda_grid`.
    domain : DiscreteSpace, optional
        Domain space when ``target`` is a plain matrix.
    """
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    grid = default_lambda_grid(A) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    if grid.min() <= A.growth_bound:
        raise PreconditionError("lambda grid reaches below the growth bound")
    if isinstance(target, OperatorBlock):
        T, dom, is_op = target.matrix, target.domain, True
    else:
        T = np.asarray(target)
        is_op = T.ndim == 2
        dom = domain
        if is_op and dom is None:
            raise DimensionError("an operator target needs its domain space")
    if T.shape[0] != A.n:
        raise DimensionError("target does not map into the generator's space")
    AT = A.matrix @ T
    vals = np.empty(grid.size)
    for i, lam in enumerate(grid):
        Y = lam**alpha * resolvent_matrix(A, lam, AT)
        if is_op:
            vals[i] = operator_norm(Y, dom, A.space, upper_only=True).value
        else:
            vals[i] = float(A.space.norm(Y))
    running = np.maximum.accumulate(vals)
    k = int(np.argmax(vals))
    slope = _top_decade_slope(grid, running)
    return FavardEstimate(alpha, grid, vals, float(vals[k]), float(grid[k]), slope, slope > slope_flag)


# -- embedding chain -----------------------------------------------------------


@dataclass
class EmbeddingChainReport:
    """Empirical constants of ``D((-A)^alpha) -> Fav_alpha -> D((-A)^delta)``."""

    alpha: float
    delta: float
    sizes: list
    c1: list
    c2: list
    drift_c1: float
    drift_c2: float
    verdict: str


def _drift(values):
    if len(values) < 2:
        return math.inf
    a, b = values[-2], values[-1]
    return abs(b - a) / max(abs(a), 1e-300)


def check_embedding_chain(family, alpha, delta, samples=16, seed=0, kind="sin", lambda_grid=None):
    """Constants of the Favard sandwich on random smooth samples.

    ``C1 = max fav_alpha(x) / (||(-A)^alpha x|| + ||x||)`` and
    ``C2 = max ||(-A)^delta x|| / (fav_alpha(x) + ||x||)`` are computed for
    each generator in ``family`` (coarse to fine); the verdict is PASS when
    both drift by at most 20% between the two finest members.
    """
    if not 1 > alpha > delta > 0:
        raise PreconditionError("need 1 > alpha > delta > 0")
    if isinstance(family, GeneratorRep):
        family = [family]
    probes = ProbeFactory(seed)
    sizes, c1s, c2s = [], [], []
    for A in family:
        if A.growth_bound >= 0:
            raise PreconditionError("the chain needs gb(A) < 0")
        Pa = fractional_power(A, 0.0, alpha).matrix
        Pd = fractional_power(A, 0.0, delta).matrix
        X = A.space
        c1 = c2 = 0.0
        for j in range(samples):
            if A.n == 1:
                x = np.array([1.0 + j])
            else:
                x = probes.field(j, X.grid, X.grid[0] - _pad(X), X.grid[-1] + _pad(X), kind=kind)
            nx = float(X.norm(x))
            fav = favard_norm(A, alpha, x, lambda_grid).value
            c1 = max(c1, fav / (float(X.norm(Pa @ x)) + nx))
            c2 = max(c2, float(X.norm(Pd @ x)) / (fav + nx))
        sizes.append(A.n)
        c1s.append(c1)
        c2s.append(c2)
    d1, d2 = _drift(c1s), _drift(c2s)
    verdict = "PASS" if len(family) >= 2 and max(d1, d2) <= PLATEAU_DRIFT else ("SUSPECT" if len(family) < 2 else "FAIL")
    return EmbeddingChainReport(alpha, delta, sizes, c1s, c2s, d1, d2, verdict)


def _pad(X):
    """Half a node spacing: interior grids of Dirichlet problems miss the ends."""
    return (X.grid[1] - X.grid[0]) if X.dim > 1 else 0.0


# -- rotations -----------------------------------------------------------------


def rotate_generator(A: GeneratorRep, phi) -> GeneratorRep:
    """``A_phi = e^{i phi} A`` for ``|phi|`` below the certified sector angle."""
    theta = A.sector_angle
    if theta is None or abs(phi) >= theta:
        raise DomainError(f"|phi| = {abs(phi):.4f} is not inside the certified sector ({theta})")
    if phi == 0:
        return A
    return GeneratorRep(A.space, np.exp(1j * phi) * A.matrix, name=f"{A.name}_rot")


def rotation_resolvent_residual(A: GeneratorRep, phi, lam) -> float:
    """Relative residual of ``R(lam, A_phi) = e^{-i phi} R(e^{-i phi} lam, A)``."""
    Aphi = rotate_generator(A, phi)
    left = resolvent_matrix(Aphi, lam)
    right = np.exp(-1j * phi) * resolvent_matrix(A, np.exp(-1j * phi) * lam)
    return float(np.linalg.norm(left - right) / np.linalg.norm(right))


def split_sector_point(phi, z):
    """Coefficients ``r+, r-`` with ``z = r+ e^{i phi} + r- e^{-i phi}``.

    Solves the real 2x2 system given by the oblique projections onto the two
    boundary rays.
    """
    c, s = math.cos(phi), math.sin(phi)
    M = np.array([[c, c], [s, -s]])
    rp, rm = np.linalg.solve(M, np.array([complex(z).real, complex(z).imag]))
    return float(rp), float(rm)


def complex_time_expm(A: GeneratorRep, z) -> np.ndarray:
    """``exp(zA)`` for complex ``z``."""
    z = complex(z)
    if z == 0:
        return np.eye(A.n, dtype=complex)
    if A.n <= _EIG_CHECK_MAX and A.is_near_normal:
        w, V = A.eig
        return (V * np.exp(z * w)) @ np.linalg.solve(V, np.eye(A.n))
    return sla.expm(z * A.matrix)


def rotated_semigroup_product(A: GeneratorRep, phi, z):
    """``T_phi(r+) T_{-phi}(r-)`` for ``z`` in the closed sector of half-angle ``phi``.

    Returns
    -------
    product : ndarray
    residual : float
        Relative distance to ``exp(zA)``.
    """
    if not 0 < phi < math.pi / 2:
        raise DomainError("phi must lie in (0, pi/2)")
    rp, rm = split_sector_point(phi, z)
    if rp < -1e-12 or rm < -1e-12:
        raise DomainError(f"z = {z} lies outside the sector of half-angle {phi}")
    rp, rm = max(rp, 0.0), max(rm, 0.0)
    P = complex_time_expm(A, rp * np.exp(1j * phi)) @ complex_time_expm(A, rm * np.exp(-1j * phi))
    ref = complex_time_expm(A, z)
    res = float(np.linalg.norm(P - ref) / max(np.linalg.norm(ref), 1e-300))
    return P, res


def rotation_power_identity(A: GeneratorRep, phi, alpha) -> float:
    """Relative residual of ``(-A_phi)^{-alpha} = e^{-i phi alpha} (-A)^{-alpha}``."""
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if A.growth_bound >= 0:
        raise PreconditionError("gb(A) must be negative")
    rot = np.exp(1j * phi)
    if np.max((rot * A.eigenvalues).real) >= 0:
        raise PreconditionError("gb(A_phi) must be negative")
    if phi == 0:
        return 0.0
    Aphi = GeneratorRep(A.space, rot * A.matrix)
    left = fractional_power(Aphi, 0.0, -alpha).matrix
    base = fractional_power(A, 0.0, -alpha).matrix
    right = np.exp(-1j * phi * alpha) * base
    return float(np.linalg.norm(left - right) / np.linalg.norm(base))


@dataclass
class SmoothingFit:
    """Fit of ``log ||(-A)^gamma T(t)||`` against ``log t``."""

    gamma: float
    times: np.ndarray
    norms: np.ndarray
    slope: float
    constant: float
    holds: bool
    verdict: str


def smoothing_fit(A: GeneratorRep, gamma, times=None, slack=0.1):
    """Check ``||(-A)^gamma T(t)|| <= M t^{-gamma}`` on ``t`` in ``[1e-4, 1]``.

    PASS when the fitted slope is at least ``-gamma - slack`` and the bound
    with ``M = max norm * t^gamma`` holds at every sample.
    """
    if A.growth_bound >= 0:
        raise PreconditionError("gb(A) must be negative")
    times = np.logspace(-4, 0, 17) if times is None else np.asarray(times, dtype=float)
    P = fractional_power(A, 0.0, gamma).matrix
    norms = np.array([operator_norm(P @ A.expm(t), A.space, A.space, upper_only=True).value for t in times])
    slope = float(np.polyfit(np.log(times), np.log(norms), 1)[0])
    M = float(np.max(norms * times**gamma))
    holds = bool(np.all(norms <= M * times ** (-gamma) * (1 + 1e-12)))
    ok = slope >= -gamma - slack and holds
    return SmoothingFit(gamma, times, norms, slope, M, holds, "PASS" if ok else "FAIL")
