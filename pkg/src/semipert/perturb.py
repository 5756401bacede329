"""Analytic perturbation certificates and perturbed generators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .admissibility import (
    ControlObsTriple,
    ScalingFit,
    build_io_map,
    fit_power,
    io_norm,
    plateau_verdict,
)
from .core import GeneratorRep, OperatorBlock, SectorCertificate, certify_sector, resolvent_matrix
from .discretize import ProbeFactory
from .errors import DimensionError, DomainError, PreconditionError
from .scales import FavardEstimate, favard_norm, fractional_power
from .spaces import operator_norm

__all__ = [
    "AnalyticCertificate",
    "certify",
    "admissible_p_range",
    "embedding_via_interpolation_estimate",
    "EmbeddingEstimate",
    "fit_io_scaling",
    "PerturbedGenerator",
    "build_perturbed",
    "verify_vop_formula",
    "VopResult",
    "verify_perturbed_analytic",
    "Propagator",
]

EXPONENT_SLACK = 0.05


# -- certificate ---------------------------------------------------------------


@dataclass(frozen=True)
class PRange:
    """Open interval ``(lower, upper)`` of exponents, optionally with ``p = 1``."""

    lower: float
    upper: float
    includes_one: bool

    def __contains__(self, p) -> bool:
        if self.includes_one and p == 1:
            return True
        return self.lower < p < self.upper

    def as_dict(self):
        return {"lower": self.lower, "upper": self.upper, "includes_one": self.includes_one}


def admissible_p_range(beta, gamma) -> PRange:
    """Joint admissibility range ``(1/(1-beta), 1/gamma)``, plus ``p = 1`` when beta = 0."""
    lo = 1.0 / (1.0 - beta) if beta < 1 else math.inf
    hi = 1.0 / gamma
    return PRange(lo, hi, beta == 0 and hi > 1)


@dataclass
class AnalyticCertificate:
    """Evidence for the hypotheses of the analytic perturbation theorem.

    Attributes
    ----------
    beta, gamma, lam : float
    range_check : list of FavardEstimate
        Favard estimate of ``R(lam, A) B`` of order ``1 - beta`` per mesh.
    range_verdict : str
    domain_check : list of float
        Embedding constants of ``D((lam - A)^gamma)`` into Z per mesh.
    domain_verdict : str
    sum_ok : bool
    admissible_p_range : PRange
    """

    beta: float
    gamma: float
    lam: float
    range_check: list
    range_verdict: str
    domain_check: list
    domain_verdict: str
    sum_ok: bool
    admissible_p_range: PRange
    sizes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.sum_ok and self.range_verdict == "PASS" and self.domain_verdict == "PASS"

    @property
    def verdict(self) -> str:
        if not self.sum_ok:
            return "FAIL"
        return "PASS" if self.passed else "SUSPECT"

    def as_dict(self):
        return {
            "beta": self.beta, "gamma": self.gamma, "lambda": self.lam, "sum_ok": self.sum_ok,
            "range_values": [r.value for r in self.range_check], "range_verdict": self.range_verdict,
            "domain_values": list(self.domain_check), "domain_verdict": self.domain_verdict,
            "p_range": self.admissible_p_range.as_dict(), "sizes": list(self.sizes),
        }


def _z_norm(triple: ControlObsTriple, X):
    Z = triple.Z
    if Z.kind == "full":
        return lambda x: float(X.norm(x))
    if Z.kind == "graph":
        K = Z.K
        return lambda x: float(X.norm(x) + K.codomain.norm(K.matrix @ x))
    P = fractional_power(triple.A, triple.A.base_lambda, Z.gamma).matrix
    return lambda x: float(X.norm(x) + X.norm(P @ x))


def _domain_constant(triple: ControlObsTriple, gamma, lam, probes, count):
    A, X = triple.A, triple.A.space
    Pg = fractional_power(A, lam, gamma).matrix
    Pinv = fractional_power(A, lam, -gamma).matrix if gamma < 1 else np.linalg.inv(Pg)
    znorm = _z_norm(triple, X)
    best = 0.0
    for j in range(count):
        g = probes.vector(j, X, stream=23)
        x = Pinv @ g
        den = float(X.norm(Pg @ x) + X.norm(x))
        if den > 0:
            best = max(best, znorm(x) / den)
    return best


def certify(triple, beta, gamma, lam=None, probe_count=16, seed=0, lambda_grid=None) -> AnalyticCertificate:
    """Certify range, domain and sum conditions on one triple or a mesh family.

    Parameters
    ----------
    triple : ControlObsTriple or sequence of them (coarse to fine)
    beta : float
        Claimed Favard defect (range of ``R(lam, A) B`` in ``Fav_{1-beta}``).
    gamma : float
        Claimed fractional order with ``D((lam - A)^gamma) -> Z``.
    lam : float, optional
        Resolvent point; defaults to each generator's base point.
    """
    if beta < 0:
        raise PreconditionError("beta must be nonnegative")
    if gamma <= 0:
        raise PreconditionError("gamma must be positive")
    family = list(triple) if isinstance(triple, (list, tuple)) else [triple]
    probes = ProbeFactory(seed)
    favs, doms, sizes = [], [], []
    lam_used = None
    for tr in family:
        A = tr.A
        lam_i = A.base_lambda if lam is None else float(lam)
        if lam_i <= A.growth_bound:
            raise PreconditionError("lambda must exceed the growth bound")
        lam_used = lam_i
        sizes.append(A.n)
        if 1.0 - beta > 0:
            RB = OperatorBlock(resolvent_matrix(A, lam_i, tr.B.matrix), tr.U, A.space)
            favs.append(favard_norm(A, 1.0 - beta, RB, lambda_grid))
        doms.append(_domain_constant(tr, gamma, lam_i, probes, probe_count))
    if favs:
        rv, _ = plateau_verdict([f.value for f in favs])
        if any(f.unbounded_suspect for f in favs[-1:]):
            rv = "SUSPECT" if rv == "PASS" else rv
    else:
        rv = "PASS"  # beta >= 1 asks for nothing beyond X_{-1}
    dv, _ = plateau_verdict(doms)
    sum_ok = bool(beta + gamma < 1)
    return AnalyticCertificate(beta, gamma, lam_used, favs, rv, doms, dv, sum_ok,
                               admissible_p_range(beta, gamma), sizes)


# -- interpolation estimate ----------------------------------------------------


@dataclass
class EmbeddingEstimate:
    """Constants ``M(n)`` of ``||Kx|| <= M (rho^a ||x|| + rho^(a-1) ||Ax||)``."""

    alpha: float
    constants: list
    sizes: list
    verdict: str
    drift: float
    implied_gamma_floor: float

    @property
    def M(self):
        return self.constants[-1]


def _interp_probes(A: GeneratorRep, probes: ProbeFactory, count, rough):
    X = A.space
    cols = [probes.vector(j, X, stream=31) for j in range(count)]
    if rough:
        # high-frequency directions: eigenvectors at the top of the spectrum
        w, V = A.eig
        idx = np.argsort(np.abs(w))[::-1][:rough]
        cols += [V[:, i] for i in idx]
        cols += [V[:, i] for i in np.argsort(np.abs(w))[: max(1, rough // 2)]]
    return cols


def embedding_via_interpolation_estimate(family, alpha=0.5, rho_grid=None, rho0=1.0,
                                         probe_count=16, rough=8, seed=0) -> EmbeddingEstimate:
    """Uniform constant in the interpolation estimate, per mesh.

    ``family`` is a list of pairs ``(A, K)`` (or a single pair).  For every
    probe the worst ratio ``||Kx|| / (rho^a ||x|| + rho^(a-1) ||Ax||)`` over
    the rho grid is taken, then the worst probe; this is the smallest ``M``
    for which the estimate holds at every sampled rho.  PASS when ``M``
    plateaus under refinement; then ``D((lam - A)^gamma) -> Z`` for every
    ``gamma > alpha``.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if isinstance(family, tuple) and isinstance(family[0], GeneratorRep):
        family = [family]
    probes = ProbeFactory(seed)
    consts, sizes = [], []
    for A, K in family:
        if isinstance(K, OperatorBlock):
            Kmat, Kcod = K.matrix, K.codomain
        else:
            Kmat, Kcod = np.asarray(K), A.space
        if Kmat.shape[1] != A.n:
            raise DimensionError("K must act on the state coordinates")
        top = max(1e6, 10.0 * A.scale)
        grid = np.logspace(math.log10(rho0), math.log10(top), 200) if rho_grid is None else np.asarray(rho_grid)
        X = A.space
        best = 0.0
        for x in _interp_probes(A, probes, probe_count, rough):
            nx = float(X.norm(x))
            nax = float(X.norm(A.matrix @ x))
            nkx = float(Kcod.norm(Kmat @ x))
            den = grid**alpha * nx + grid ** (alpha - 1.0) * nax
            best = max(best, float(np.max(nkx / den)))
        consts.append(best)
        sizes.append(A.n)
    v, d = plateau_verdict(consts)
    return EmbeddingEstimate(alpha, consts, sizes, v, d, alpha)


# -- io scaling ----------------------------------------------------------------


def fit_io_scaling(triple: ControlObsTriple, p, eps, t_grid=None, m=64, beta=None, gamma=None,
                   use="upper") -> ScalingFit:
    """Fit ``||F_t|| <= M t^eps`` on ``t`` in ``[1e-3, 1]``.

    PASS iff the fitted exponent is at least ``eps - 0.05`` and the bound
    with the fitted ``M`` holds at every sample.  When ``beta`` and
    ``gamma`` are given, ``eps`` must lie in ``(0, 1 - beta - gamma)``.
    ``use`` selects the bracket end (``"upper"`` or ``"lower"``).
    """
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if beta is not None and gamma is not None and not eps < 1 - (beta + gamma):
        raise DomainError("eps must be below 1 - (beta + gamma)")
    times = np.logspace(-3, 0, 7) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(times <= 0):
        raise DomainError("t = 0 is not part of the fit")
    vals = []
    for t in times:
        br = io_norm(build_io_map(triple, t, m, p), lower=(use == "lower"))
        vals.append(br.lower if use == "lower" else br.upper)
    vals = np.array(vals)
    e, M = fit_power(times, vals)
    holds = bool(np.all(vals <= M * times**e * (1 + 1e-12)))
    ok = e >= eps - EXPONENT_SLACK and holds
    return ScalingFit(times, vals, e, M, eps - EXPONENT_SLACK, holds, "PASS" if ok else "FAIL")


# -- perturbed generators ------------------------------------------------------


@dataclass
class PerturbedGenerator:
    """Discrete ``(A_{-1} + BC)|_X``.

    Attributes
    ----------
    triple : ControlObsTriple or None
    generator : GeneratorRep
    domain : str
        Description of the constraint defining the domain.
    extension : ndarray or None
        For boundary systems, the map ``x -> (x, g)`` into extended coordinates
        (``g`` solves the boundary constraint).
    """

    triple: Optional[ControlObsTriple]
    generator: GeneratorRep
    domain: str = ""
    extension: Optional[np.ndarray] = None

    @property
    def matrix(self):
        return self.generator.matrix

    @property
    def base(self) -> GeneratorRep:
        return self.triple.A


def build_perturbed(triple: ControlObsTriple) -> PerturbedGenerator:
    """``A + BC`` on the state coordinates."""
    comp = triple.compatibility_constant()
    if not np.isfinite(comp):
        raise PreconditionError("the triple is not compatible")
    M = triple.A.matrix + triple.B.matrix @ triple.C.matrix
    gen = GeneratorRep(triple.A.space, M, name="A_BC")
    return PerturbedGenerator(triple, gen, "x in Z with (A_{-1} + BC) x in X")


class Propagator:
    """``t -> exp(tM)`` for many times.

    Uses the eigendecomposition when the eigenvector matrix is well
    conditioned, otherwise a cached matrix exponential per time.
    """

    def __init__(self, M, cond_max=1e8):
        self.M = np.asarray(M)
        self._cache = {}
        try:
            w, V = np.linalg.eig(self.M)
            c = np.linalg.cond(V)
        except np.linalg.LinAlgError:  # pragma: no cover
            c = math.inf
        if np.isfinite(c) and c < cond_max:
            self.w, self.V = w, V
            self.Vinv = np.linalg.inv(V)
            self.spectral = True
        else:
            self.spectral = False

    def apply(self, t, x):
        if self.spectral:
            y = self.V @ (np.exp(t * self.w)[:, None] * (self.Vinv @ x.reshape(x.shape[0], -1)))
            y = y.reshape(x.shape) if x.ndim == 1 else y
            return y.real if np.isrealobj(self.M) and np.isrealobj(x) else y
        key = float(t)
        if key not in self._cache:
            self._cache[key] = sla.expm(t * self.M)
        return self._cache[key] @ x


@dataclass
class VopResult:
    """Residuals of the variation-of-parameters formula."""

    residual: float
    per_time: dict
    m: int


def verify_vop_formula(pg: PerturbedGenerator, t_grid=(0.05, 0.1), probes=None, m=256, grading=2.0,
                       seed=0) -> VopResult:
    """Max relative residual of ``T_BC(t)x = T(t)x + int_0^t T(t-s) BC T_BC(s) x ds``.

    The integral uses a trapezoid rule on nodes ``s_k = t (1 - (1 - k/m)^g)``
    graded toward ``s = t`` where the kernel is least smooth.
    """
    A = pg.triple.A
    X = A.space
    BC = pg.triple.B.matrix @ pg.triple.C.matrix
    if probes is None:
        pf = ProbeFactory(seed)
        probes = [pf.vector(j, X, stream=41) for j in range(4)]
    P = np.stack([np.asarray(x) for x in probes], axis=1)
    TA = Propagator(A.matrix)
    TG = Propagator(pg.matrix)
    per = {}
    worst = 0.0
    nx = X.norm(P.T)
    if not np.any(BC):
        return VopResult(0.0, {float(t): 0.0 for t in t_grid}, m)
    for t in t_grid:
        k = np.arange(m + 1)
        s = t * (1.0 - (1.0 - k / m) ** grading)
        vals = np.stack([TA.apply(t - sk, BC @ TG.apply(sk, P)) for sk in s])
        h = np.diff(s)
        integral = np.einsum("k,kij->ij", h / 2, vals[:-1] + vals[1:])
        lhs = TG.apply(t, P)
        rhs = TA.apply(t, P) + integral
        r = float(np.max(X.norm((lhs - rhs).T) / nx))
        per[float(t)] = r
        worst = max(worst, r)
    return VopResult(worst, per, m)


def verify_perturbed_analytic(pg: PerturbedGenerator, theta, phi_samples=None, **kw) -> SectorCertificate:
    """Sampled sector certificate for the perturbed generator."""
    base = pg.triple.A if pg.triple is not None else None
    if base is not None and base.sector_angle is not None and theta > base.sector_angle + 1e-15:
        raise PreconditionError("theta exceeds the base generator's certified angle")
    return certify_sector(pg.generator, theta, phi_samples=phi_samples, **kw)
