"""Dense generator realizations: resolvents, semigroups, spectra and sectors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, DomainError, NumericError, SpectralProximityError
from .spaces import DiscreteSpace, NormBracket, operator_norm

__all__ = [
    "OperatorBlock",
    "GeneratorRep",
    "SectorCertificate",
    "resolvent",
    "semigroup_apply",
    "growth_bound",
    "certify_sector",
    "expm_action",
    "PROXIMITY_TOL",
    "NORMAL_TOL",
]

PROXIMITY_TOL = 1e-10
NORMAL_TOL = 1e-8
# eigen-based proximity checks are skipped above this size unless cached
_EIG_CHECK_MAX = 1500


class OperatorBlock:
    """Matrix together with the spaces it maps between.

    Parameters
    ----------
    matrix : array_like, shape (codomain.dim, domain.dim)
    domain, codomain : DiscreteSpace
    name : str
    """

    __slots__ = ("matrix", "domain", "codomain", "name", "_norm")

    def __init__(self, matrix, domain: DiscreteSpace, codomain: DiscreteSpace, name=""):
        M = np.atleast_2d(np.asarray(matrix))
        if M.shape != (codomain.dim, domain.dim):
            raise DimensionError(
                f"block {name or ''} has shape {M.shape}, spaces need {(codomain.dim, domain.dim)}"
            )
        self.matrix = M
        self.domain = domain
        self.codomain = codomain
        self.name = name
        self._norm = None

    @property
    def shape(self):
        return self.matrix.shape

    def __call__(self, x):
        return self.matrix @ x

    def __matmul__(self, other):
        if isinstance(other, OperatorBlock):
            if other.codomain.dim != self.domain.dim:
                raise DimensionError("inner dimensions differ")
            return OperatorBlock(self.matrix @ other.matrix, other.domain, self.codomain)
        return self.matrix @ other

    def norm(self) -> NormBracket:
        """Induced operator norm bracket (cached)."""
        if self._norm is None:
            self._norm = operator_norm(self.matrix, self.domain, self.codomain)
        return self._norm

    def is_zero(self) -> bool:
        return not np.any(self.matrix)


class GeneratorRep:
    """Dense realization of a generator ``A`` on a discrete space.

    Spectral data are computed lazily and cached; the object is otherwise
    immutable, so it can be shared between threads and processes.

    Parameters
    ----------
    space : DiscreteSpace
    matrix : array_like, shape (n, n)
    sector_angle : float, optional
        Certified analyticity half-angle.
    base_lambda : float, optional
        Reference resolvent point; defaults to ``max(gb, 0) + 1``.
    """

    def __init__(self, space: DiscreteSpace, matrix, sector_angle=None, base_lambda=None, name=""):
        M = np.asarray(matrix)
        if M.ndim != 2 or M.shape != (space.dim, space.dim):
            raise DimensionError(f"generator of shape {M.shape} on a space of dimension {space.dim}")
        self.space = space
        self.matrix = M
        self.name = name
        if sector_angle is not None and not 0 < sector_angle <= math.pi / 2:
            raise DomainError("sector angle must lie in (0, pi/2]")
        self.sector_angle = sector_angle
        self._base_lambda = base_lambda
        self._expm_cache = {}

    @property
    def n(self):
        return self.matrix.shape[0]

    @cached_property
    def scale(self) -> float:
        """Max-row-sum norm, the yardstick for spectral tolerances."""
        return float(max(np.abs(self.matrix).sum(axis=1).max(), 1e-300))

    @cached_property
    def eigenvalues(self):
        try:
            return np.linalg.eigvals(self.matrix)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericError(f"eigensolver failed: {exc}") from exc

    @cached_property
    def eig(self):
        """Eigenvalues and eigenvectors (cached)."""
        try:
            w, V = np.linalg.eig(self.matrix)
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise NumericError(f"eigensolver failed: {exc}") from exc
        self.__dict__.setdefault("eigenvalues", w)
        return w, V

    @cached_property
    def growth_bound(self) -> float:
        return float(np.max(self.eigenvalues.real))

    @cached_property
    def departure(self) -> float:
        """Departure from normality ``||AA* - A*A|| / ||A||^2`` (Frobenius)."""
        A = self.matrix
        nA = np.linalg.norm(A)
        if nA == 0:
            return 0.0
        Ah = A.conj().T
        return float(np.linalg.norm(A @ Ah - Ah @ A) / nA**2)

    @property
    def is_near_normal(self) -> bool:
        return self.departure < NORMAL_TOL

    @property
    def base_lambda(self) -> float:
        if self._base_lambda is not None:
            return float(self._base_lambda)
        return max(self.growth_bound, 0.0) + 1.0

    def shifted(self, lam) -> "GeneratorRep":
        """Generator ``A - lam``."""
        return GeneratorRep(self.space, self.matrix - lam * np.eye(self.n), name=self.name)

    def with_sector(self, angle) -> "GeneratorRep":
        g = GeneratorRep(self.space, self.matrix, angle, self._base_lambda, self.name)
        for key in ("eigenvalues", "eig", "growth_bound", "departure", "scale"):
            if key in self.__dict__:
                g.__dict__[key] = self.__dict__[key]
        return g

    def expm(self, t) -> np.ndarray:
        """Matrix ``exp(tA)`` (spectral route when near normal, cached by t)."""
        t = float(t)
        if t < 0:
            raise DomainError("semigroup time must be nonnegative")
        key = t
        if key not in self._expm_cache:
            if t == 0:
                E = np.eye(self.n, dtype=self.matrix.dtype)
            elif self.n <= _EIG_CHECK_MAX and self.is_near_normal:
                w, V = self.eig
                E = (V * np.exp(t * w)) @ np.linalg.solve(V, np.eye(self.n))
                if np.isrealobj(self.matrix):
                    E = E.real
            else:
                E = sla.expm(t * self.matrix)
            if len(self._expm_cache) > 64:
                self._expm_cache.clear()
            self._expm_cache[key] = E
        return self._expm_cache[key]

    def norm_of(self, M, dom=None, cod=None) -> float:
        """Operator norm of ``M`` on this generator's space (upper end)."""
        dom = self.space if dom is None else dom
        cod = self.space if cod is None else cod
        return operator_norm(M, dom, cod).value


def _check_proximity(A: GeneratorRep, lam):
    if A.n > _EIG_CHECK_MAX and "eigenvalues" not in A.__dict__:
        return
    ev = A.eigenvalues
    d = np.abs(ev - lam)
    k = int(np.argmin(d))
    if d[k] <= PROXIMITY_TOL * A.scale:
        raise SpectralProximityError(
            f"lambda={lam} lies within {d[k]:.3e} of the eigenvalue {ev[k]}", ev[k], float(d[k])
        )


def resolvent_matrix(A: GeneratorRep, lam, rhs=None):
    """``(lam - A)^{-1}`` or ``(lam - A)^{-1} rhs`` after a proximity check."""
    _check_proximity(A, lam)
    M = lam * np.eye(A.n) - A.matrix
    if rhs is None:
        rhs = np.eye(A.n)
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        ev = A.eigenvalues
        k = int(np.argmin(np.abs(ev - lam)))
        raise SpectralProximityError(str(exc), ev[k], float(abs(ev[k] - lam))) from exc


def resolvent(A: GeneratorRep, lam) -> OperatorBlock:
    """Resolvent ``R(lam, A)`` as an operator on the generator's space.

    Raises
    ------
    SpectralProximityError
        If ``lam`` is within ``1e-10 ||A||`` of an eigenvalue.
    """
    return OperatorBlock(resolvent_matrix(A, lam), A.space, A.space, name="R")


def semigroup_apply(A: GeneratorRep, t, x):
    """``T(t) x = exp(tA) x``."""
    if t < 0:
        raise DomainError("semigroup time must be nonnegative")
    x = np.asarray(x)
    if x.shape[0] != A.n:
        raise DimensionError("vector length does not match the generator")
    if t == 0:
        return x.copy()
    return A.expm(t) @ x


def expm_action(M, x0, times, chunk=None, gamma=None, tol=1e-10, maxiter=150):
    """``exp(t M) x0`` at increasing ``times`` by shift-and-invert Krylov.

    The Krylov space of ``(I - gamma M)^{-1}`` is built from the current
    state and restarted every ``chunk`` time units; one LU factorization is
    shared by all chunks.  Suited to large stiff matrices whose spectrum
    lies in a left half-plane.

    Raises
    ------
    NumericError
        If the projected exponential does not settle within ``maxiter``.
    """
    M = np.asarray(M)
    times = np.asarray(times, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0:
        raise DomainError("times must be nonnegative and increasing")
    chunk = float(times[-1]) if chunk is None else float(chunk)
    chunk = chunk if chunk > 0 else 1.0
    gamma = chunk / 10.0 if gamma is None else float(gamma)
    n = M.shape[0]
    lu = sla.lu_factor(np.eye(n) - gamma * M)
    out = np.empty((times.size, n), dtype=np.result_type(M, x0, float))
    x, t_now, i = np.asarray(x0, dtype=out.dtype), 0.0, 0
    while i < times.size:
        t_end = min(t_now + chunk, times[-1])
        sel = [j for j in range(i, times.size) if times[j] <= t_end + 1e-14 * max(1.0, t_end)]
        taus = times[sel] - t_now
        beta = float(np.linalg.norm(x))
        if beta == 0:
            out[sel] = 0.0
            i = sel[-1] + 1
            t_now = t_end
            continue
        V = np.zeros((n, maxiter + 1), dtype=out.dtype)
        H = np.zeros((maxiter + 1, maxiter), dtype=out.dtype)
        V[:, 0] = x / beta
        prev, done = None, False
        for k in range(maxiter):
            w = sla.lu_solve(lu, V[:, k])
            for _ in range(2):  # repeated Gram-Schmidt
                h = V[:, : k + 1].conj().T @ w
                w = w - V[:, : k + 1] @ h
                H[: k + 1, k] += h
            H[k + 1, k] = np.linalg.norm(w)
            breakdown = H[k + 1, k] < 1e-14 * np.abs(H[: k + 1, k]).max()
            if not breakdown:
                V[:, k + 1] = w / H[k + 1, k]
            if (k + 1) % 4 == 0 or breakdown or k == maxiter - 1:
                Hk = H[: k + 1, : k + 1]
                Gk = (np.eye(k + 1) - np.linalg.inv(Hk)) / gamma
                coef = np.array([sla.expm(tau * Gk)[:, 0] for tau in taus]) * beta
                if prev is not None and prev.shape[1] < coef.shape[1]:
                    prev = np.hstack([prev, np.zeros((prev.shape[0], coef.shape[1] - prev.shape[1]))])
                if breakdown or (prev is not None and np.abs(coef - prev).max() <= tol * beta):
                    out[sel] = coef @ V[:, : k + 1].T
                    done = True
                    break
                prev = coef
        if not done:
            raise NumericError("Krylov exponential did not converge", float(np.abs(coef - prev).max() / beta))
        if abs(times[sel[-1]] - t_end) < 1e-14 * max(1.0, t_end):
            x = out[sel[-1]]
        else:
            x = V[:, : k + 1] @ (sla.expm((t_end - t_now) * Gk)[:, 0] * beta)
        i = sel[-1] + 1
        t_now = t_end
    return out


def growth_bound(A: GeneratorRep) -> float:
    """Spectral abscissa ``max Re sigma(A)``."""
    return A.growth_bound


@dataclass
class SectorCertificate:
    """Sampled sectoriality evidence for ``exp(i phi)(A - lambda0)``.

    Attributes
    ----------
    theta : float
        Requested half-angle.
    constant : float
        Largest sampled ``||lambda R(lambda, A_phi)||``.
    per_phi : dict
        Constant for each sampled angle.
    passed : bool
        True when every sample stays below ``cap`` and every rotated shifted
        operator has negative spectral abscissa.
    """

    theta: float
    shift: float
    constant: float
    per_phi: dict
    phi_samples: np.ndarray
    lambda_samples: np.ndarray
    cap: float
    passed: bool
    reason: str = ""
    rotated_abscissa: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"


def default_phi_samples(theta, edge=0.05):
    inner = np.linspace(-theta, theta, 9)[1:-1]
    e = min(edge, theta / 10)
    return np.unique(np.concatenate([inner, [-(theta - e), theta - e]]))


def certify_sector(A: GeneratorRep, theta, lambda_samples=None, phi_samples=None, cap=1e4, shift=None):
    """Sampled check that ``A`` generates an analytic semigroup of angle ``theta``.

    The operator is shifted by ``lambda0 = max(gb, 0) + 1`` (or ``shift``),
    rotated by each sampled ``phi`` and the Hille-Yosida quantity
    ``sup ||lambda R(lambda, e^{i phi}(A - lambda0))||`` is sampled on a
    logarithmic grid of positive ``lambda``.

    Parameters
    ----------
    theta : float
        Half-angle in (0, pi/2].
    lambda_samples : array_like, optional
        Defaults to 80 points on ``[1e-3, 1e3 ||A||]``.
    phi_samples : array_like, optional
        Angles strictly inside ``(-theta, theta)``; defaults include
        ``+-(theta - 0.05)``.
    cap : float
        Largest admissible sampled constant.
    """
    if not 0 < theta <= math.pi / 2:
        raise DomainError("theta must lie in (0, pi/2]")
    lam0 = A.base_lambda if shift is None else float(shift)
    As = A.matrix - lam0 * np.eye(A.n)
    if lambda_samples is None:
        lambda_samples = np.logspace(-3, math.log10(1e3 * (A.scale + lam0)), 80)
    lambda_samples = np.asarray(lambda_samples, dtype=float)
    if phi_samples is None:
        phi_samples = default_phi_samples(theta)
    phi_samples = np.asarray(phi_samples, dtype=float)
    if np.any(np.abs(phi_samples) >= theta + 1e-15):
        raise DomainError("sampled angles must lie strictly inside the sector")
    ev = A.eigenvalues - lam0
    eye = np.eye(A.n)
    per_phi, absc = {}, {}
    passed, reason = True, ""
    for phi in phi_samples:
        rot = np.exp(1j * phi)
        a = float(np.max((rot * ev).real))
        absc[float(phi)] = a
        if a >= 0:
            passed = False
            reason = f"rotated spectrum reaches the right half-plane at phi={phi:.4f}"
        Aphi = rot * As
        best = 0.0
        for lam in lambda_samples:
            if np.min(np.abs(lam - rot * ev)) <= PROXIMITY_TOL * A.scale:
                best = math.inf
                break
            R = np.linalg.solve(lam * eye - Aphi, eye)
            best = max(best, lam * operator_norm(R, A.space, A.space, upper_only=True).value)
        per_phi[float(phi)] = best
        if best > cap:
            passed = False
            reason = reason or f"sampled constant {best:.3e} exceeds cap at phi={phi:.4f}"
    const = max(per_phi.values()) if per_phi else 0.0
    return SectorCertificate(
        theta=float(theta), shift=lam0, constant=const, per_phi=per_phi, phi_samples=phi_samples,
        lambda_samples=lambda_samples, cap=cap, passed=passed, reason=reason, rotated_abscissa=absc,
    )


def dirichlet_laplacian(n, length=math.pi, p=math.inf):
    """Three-point Laplacian on ``n`` interior nodes of ``[0, length]``.

    With ``length = pi`` the leading eigenvalue tends to ``-1``.
    """
    h = length / (n + 1)
    s = h * np.arange(1, n + 1)
    M = (np.diag(np.full(n - 1, 1.0), -1) + np.diag(np.full(n - 1, 1.0), 1) - 2 * np.eye(n)) / h**2
    w = None if math.isinf(p) else np.full(n, h)
    return GeneratorRep(DiscreteSpace.from_nodes(s, p, w, name="X"), M, name="laplacian")
