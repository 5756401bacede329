"""Boundary systems: Dirichlet operators, boundary-perturbed generators and checks.

Elements of the maximal domain are stored in extended coordinates
``y = (x, g)``: ``x`` are the ``n`` state coordinates in X and ``g`` are ``k``
auxiliary values that the state coordinates do not determine (boundary values
of the maximal operator, or values at eliminated nodes).  The maximal operator
acts as ``A_m y = Am_x x + Am_g g`` and the boundary operator as
``L y = L_x x + L_g g`` with ``L_g`` invertible.  Then

* ``A = Am_x - Am_g L_g^{-1} L_x`` is the restriction to ``ker L``,
* ``L_A = Am_g L_g^{-1}`` maps boundary data into the extrapolated space,
* ``G = A + P + L_A Phi`` realizes the domain condition ``L y = Phi x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .admissibility import (
    ControlObsTriple,
    InputOutputMap,
    build_io_map,
    feedback_check,
    io_norm,
)
from .core import GeneratorRep, OperatorBlock, resolvent_matrix, _check_proximity
from .errors import AssemblyError, DimensionError, PreconditionError, SurjectivityError
from .perturb import PerturbedGenerator
from .scales import SLOPE_FLAG, _top_decade_slope, default_lambda_grid, favard_norm
from .spaces import DiscreteSpace, operator_norm

__all__ = [
    "BoundarySystem",
    "DirichletOperator",
    "dirichlet_solve",
    "dirichlet_from_resolvent",
    "la_independence",
    "assemble_G",
    "block_encoding",
    "sub_triple",
    "BlockInvertibilityReport",
    "block_invertibility_check",
    "block_invertibility_from_blocks",
    "FavardEquivalenceReport",
    "favard_equivalences",
    "lifted_domain_residual",
    "SOLVE_COND_MAX",
]

SOLVE_COND_MAX = 1e10
_RANK_COND = 1e13


@dataclass
class BoundarySystem:
    """Maximal operator, boundary operator and the perturbations P and Phi.

    Parameters
    ----------
    space : DiscreteSpace
        State space X (dimension n).
    boundary_space : DiscreteSpace
        Boundary space (dimension k).
    Am_x, Am_g : ndarray
        Maximal operator blocks, shapes (n, n) and (n, k).
    L_x, L_g : ndarray
        Boundary operator blocks, shapes (k, n) and (k, k).
    P : ndarray, optional
        Bounded-type perturbation on the state coordinates (n, n).
    Phi : ndarray, optional
        Boundary feedback functionals (k, n).
    mu : complex
        Reference point with ``L`` invertible on ``ker(mu - A_m)``.
    P_g : ndarray, optional
        Part of P acting on the auxiliary coordinates (n, k), for
        perturbations such as ``b f'`` whose stencils reach eliminated nodes.
    """

    space: DiscreteSpace
    boundary_space: DiscreteSpace
    Am_x: np.ndarray
    Am_g: np.ndarray
    L_x: np.ndarray
    L_g: np.ndarray
    P: Optional[np.ndarray] = None
    Phi: Optional[np.ndarray] = None
    mu: complex = 0.0
    name: str = ""
    meta: dict = field(default_factory=dict)
    P_g: Optional[np.ndarray] = None

    def __post_init__(self):
        n, k = self.space.dim, self.boundary_space.dim
        self.Am_x = np.asarray(self.Am_x)
        self.Am_g = np.asarray(self.Am_g).reshape(n, k)
        self.L_x = np.asarray(self.L_x).reshape(k, n)
        self.L_g = np.asarray(self.L_g).reshape(k, k)
        if self.Am_x.shape != (n, n):
            raise DimensionError("Am_x must be n x n")
        self.P = np.zeros((n, n)) if self.P is None else np.asarray(self.P)
        self.Phi = np.zeros((k, n)) if self.Phi is None else np.asarray(self.Phi).reshape(k, n)
        if self.P.shape != (n, n):
            raise DimensionError("P must be n x n")
        self.P_g = np.zeros((n, k)) if self.P_g is None else np.asarray(self.P_g).reshape(n, k)

    @property
    def n(self):
        return self.space.dim

    @property
    def k(self):
        return self.boundary_space.dim

    @property
    def extended_space(self) -> DiscreteSpace:
        return DiscreteSpace.coordinates(self.n + self.k, name="D(A_m)")

    @property
    def Am(self) -> OperatorBlock:
        return OperatorBlock(np.hstack([self.Am_x, self.Am_g]), self.extended_space, self.space, "A_m")

    @property
    def L(self) -> OperatorBlock:
        return OperatorBlock(np.hstack([self.L_x, self.L_g]), self.extended_space, self.boundary_space, "L")

    @cached_property
    def _Lg_inv(self):
        if np.linalg.cond(self.L_g) > _RANK_COND:
            raise AssemblyError("boundary rows are rank deficient on the auxiliary coordinates")
        return np.linalg.inv(self.L_g)

    @cached_property
    def A(self) -> GeneratorRep:
        """Generator ``A_m`` restricted to ``ker L``."""
        M = self.Am_x - self.Am_g @ self._Lg_inv @ self.L_x
        return GeneratorRep(self.space, M, name="A")

    @cached_property
    def L_A(self) -> np.ndarray:
        """``L_A = Am_g L_g^{-1}`` (boundary data into extrapolated coordinates)."""
        return self.Am_g @ self._Lg_inv

    @cached_property
    def P_A(self) -> np.ndarray:
        """P on ``ker L`` in state coordinates."""
        return self.P - self.P_g @ self._Lg_inv @ self.L_x

    @cached_property
    def control_boundary(self) -> np.ndarray:
        """``L_A + P_g L_g^{-1}``: boundary data enter through A_m and through P."""
        return self.L_A + self.P_g @ self._Lg_inv

    @property
    def am_scale(self) -> float:
        return float(np.abs(np.hstack([self.Am_x, self.Am_g])).sum(axis=1).max())

    def extend(self, x, d=None):
        """Extended coordinates of ``x`` with ``L y = d`` (``d = 0`` by default)."""
        x = np.asarray(x)
        d = np.zeros(self.k) if d is None else np.asarray(d)
        g = self._Lg_inv @ (d - self.L_x @ x)
        return np.concatenate([x, g])

    def with_feedback(self, P=None, Phi=None) -> "BoundarySystem":
        return BoundarySystem(self.space, self.boundary_space, self.Am_x, self.Am_g, self.L_x, self.L_g,
                              self.P if P is None else P, self.Phi if Phi is None else Phi, self.mu,
                              self.name, dict(self.meta), self.P_g)


@dataclass
class DirichletOperator:
    """``L_lambda``: boundary data to ``ker(lambda - A_m)``.

    Attributes
    ----------
    lam : complex
    block : OperatorBlock
        ``dX -> X`` part (state coordinates).
    aux : ndarray
        Auxiliary coordinates of the extended solution, shape (k, k).
    construction : str
        ``"direct"`` or ``"resolvent"`` (or an example-specific route).
    """

    lam: complex
    block: OperatorBlock
    aux: np.ndarray
    construction: str

    @property
    def matrix(self):
        return self.block.matrix

    def norm(self) -> float:
        return self.block.norm().value

    def residuals(self, sys: BoundarySystem):
        """``(||L L_lam - I||, ||(lam - A_m) L_lam|| / ||A_m||)``."""
        X, G = self.block.matrix, self.aux
        r1 = float(np.abs(sys.L_x @ X + sys.L_g @ G - np.eye(sys.k)).max())
        R = self.lam * X - (sys.Am_x @ X + sys.Am_g @ G)
        r2 = float(np.abs(R).max() / max(sys.am_scale * max(np.abs(X).max(), np.abs(G).max()), 1e-300))
        return r1, r2


def dirichlet_solve(sys: BoundarySystem, lam) -> DirichletOperator:
    """Solve ``(lam - A_m) y = 0, L y = d`` for every boundary basis vector.

    Raises
    ------
    SpectralProximityError
        If ``lam`` is (numerically) in the spectrum of A.
    SurjectivityError
        If the bordered system is rank deficient.
    """
    _check_proximity(sys.A, lam)
    n, k = sys.n, sys.k
    M = np.zeros((n + k, n + k), dtype=np.result_type(sys.Am_x, complex if np.iscomplexobj(lam) else float))
    M[:n, :n] = lam * np.eye(n) - sys.Am_x
    M[:n, n:] = -sys.Am_g
    M[n:, :n] = sys.L_x
    M[n:, n:] = sys.L_g
    rhs = np.zeros((n + k, k), dtype=M.dtype)
    rhs[n:] = np.eye(k)
    try:
        Y = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SurjectivityError(f"bordered boundary system is singular: {exc}") from exc
    if not np.all(np.isfinite(Y)):
        raise SurjectivityError("bordered boundary system is singular")
    res = np.abs(M @ Y - rhs).max() / max(np.abs(M).max() * np.abs(Y).max(), 1e-300)
    if res > 1e-8:
        # least-squares fallback with rank diagnostics
        Y, _, rank, sv = np.linalg.lstsq(M, rhs, rcond=None)
        if rank < n + k:
            raise SurjectivityError(f"bordered boundary system has rank {rank} < {n + k}")
    block = OperatorBlock(Y[:n], sys.boundary_space, sys.space, f"L_{lam}")
    return DirichletOperator(lam, block, Y[n:], "direct")


def dirichlet_from_resolvent(sys: BoundarySystem, lam, mu=None, L_mu: Optional[DirichletOperator] = None) -> DirichletOperator:
    """``L_lam = (mu - A) R(lam, A) L_mu``."""
    mu = sys.mu if mu is None else mu
    if L_mu is None:
        L_mu = dirichlet_solve(sys, mu)
    if lam == mu:
        return L_mu
    Xmu = L_mu.matrix
    # (mu - A) R(lam, A) = Id + (mu - lam) R(lam, A) avoids forming A R
    X = Xmu + (mu - lam) * resolvent_matrix(sys.A, lam, Xmu)
    # auxiliary coordinates: L y = I on the extended solution
    G = sys._Lg_inv @ (np.eye(sys.k) - sys.L_x @ X)
    block = OperatorBlock(X, sys.boundary_space, sys.space, f"L_{lam}")
    return DirichletOperator(lam, block, G, "resolvent")


def la_independence(sys: BoundarySystem, lams: Sequence) -> float:
    """Largest pairwise relative difference of ``(lam - A) L_lam`` across ``lams``."""
    mats = []
    for lam in lams:
        X = dirichlet_solve(sys, lam).matrix
        mats.append(lam * X - sys.A.matrix @ X)
    worst = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            worst = max(worst, float(np.linalg.norm(mats[i] - mats[j]) / np.linalg.norm(mats[j])))
    return worst


def assemble_G(sys: BoundarySystem) -> PerturbedGenerator:
    """``G = A_m + P`` on ``{L y = Phi x}`` in state coordinates.

    Raises
    ------
    AssemblyError
        If the constraint rows cannot be solved for the auxiliary coordinates.
    """
    Lg_inv = sys._Lg_inv
    ext = np.vstack([np.eye(sys.n), Lg_inv @ (sys.Phi - sys.L_x)])
    M = sys.Am_x + sys.P + (sys.Am_g + sys.P_g) @ Lg_inv @ (sys.Phi - sys.L_x)
    gen = GeneratorRep(sys.space, M, name="G")
    trip = block_encoding(sys)
    return PerturbedGenerator(trip, gen, "L y = Phi x", ext)


def block_encoding(sys: BoundarySystem, reduced=False) -> ControlObsTriple:
    """Triple with ``B = (Id, L_A)`` on ``U = X x dX`` and ``C = (P; Phi)``.

    With ``reduced=True`` and ``P = 0`` the first block is dropped:
    ``U = dX``, ``B = L_A``, ``C = Phi``.  When P reads auxiliary
    coordinates, ``P`` is its restriction to ``ker L`` and the boundary
    block of ``B`` is ``L_A + P_g L_g^{-1}``, so ``A + B C = G`` exactly.
    """
    X, dX = sys.space, sys.boundary_space
    LB = sys.control_boundary
    if reduced:
        if np.any(sys.P_A):
            raise PreconditionError("the reduced encoding needs P = 0")
        return ControlObsTriple(sys.A, OperatorBlock(LB, dX, X, "L_A"), OperatorBlock(sys.Phi, X, dX, "Phi"),
                                name="(A, L_A, Phi)", C_bounded=True)
    U = DiscreteSpace.product(X, dX, name="U")
    B = OperatorBlock(np.hstack([np.eye(sys.n), LB]), U, X, "B")
    C = OperatorBlock(np.vstack([sys.P_A, sys.Phi]), X, U, "C")
    return ControlObsTriple(sys.A, B, C, name="(A, B, C)")


def sub_triple(sys: BoundarySystem, control: str, observation: str) -> ControlObsTriple:
    """One of the four sub-triples: control in {"Id", "L_A"}, observation in {"P", "Phi"}."""
    X, dX = sys.space, sys.boundary_space
    if control == "Id":
        B = OperatorBlock(np.eye(sys.n), X, X, "Id")
    else:
        B = OperatorBlock(sys.control_boundary, dX, X, "L_A")
    if observation == "P":
        C = OperatorBlock(sys.P_A, X, X, "P")
    else:
        C = OperatorBlock(sys.Phi, X, dX, "Phi")
    return ControlObsTriple(sys.A, B, C, name=f"(A, {control}, {observation})",
                            B_bounded=control == "Id", C_bounded=True)


# -- Block input-output system --------------------------------------


@dataclass
class BlockInvertibilityReport:
    """Sub-map verdict, small-gain quantity and the direct check of the block map."""

    sub_verdict: str
    direct_verdict: str
    gain: float
    norms: dict
    verdict: str

    def as_dict(self):
        return {"sub_verdict": self.sub_verdict, "direct_verdict": self.direct_verdict,
                "gain": self.gain, "norms": dict(self.norms), "verdict": self.verdict}


def _inverse_norm(F: InputOutputMap) -> float:
    fb = feedback_check(F)
    if fb.inverse_kernels is None:
        return math.inf
    G = InputOutputMap(fb.inverse_kernels, F.t_final, F.p, F.Y, F.U)
    return 1.0 + io_norm(G, lower=False).value


def block_invertibility_from_blocks(F11: InputOutputMap, F12: InputOutputMap, F21: InputOutputMap,
                            F22: InputOutputMap) -> BlockInvertibilityReport:
    """Invertibility of ``Id - [[F11, F12], [F21, F22]]`` from the ``F22`` sub-map.

    PASS when ``Id - F22`` passes and ``||F11|| + ||F12|| ||(Id - F22)^{-1}|| ||F21|| < 1``;
    SUSPECT when the small-gain bound fails but the direct check of the full
    block map passes; FAIL when the sub-map or the direct check fails.
    """
    sub = feedback_check(F22)
    n11 = io_norm(F11, lower=False).value
    n12 = io_norm(F12, lower=False).value
    n21 = io_norm(F21, lower=False).value
    inv22 = _inverse_norm(F22) if sub.passed else math.inf
    if n11 < 1:
        gain = inv22 * n12 * n21 / (1.0 - n11) if n12 * n21 > 0 else 0.0
    else:
        gain = math.inf
    m = F11.m
    d1u, d2u = F11.U.dim, F22.U.dim
    d1y, d2y = F11.Y.dim, F22.Y.dim
    K = np.zeros((m, d1y + d2y, d1u + d2u), dtype=np.result_type(F11.kernels, F22.kernels, F12.kernels))
    K[:, :d1y, :d1u] = F11.kernels
    K[:, :d1y, d1u:] = F12.kernels
    K[:, d1y:, :d1u] = F21.kernels
    K[:, d1y:, d1u:] = F22.kernels
    Uf = DiscreteSpace.product(F11.U, F22.U)
    Yf = DiscreteSpace.product(F11.Y, F22.Y)
    full = InputOutputMap(K, F11.t_final, F11.p, Uf, Yf)
    direct = feedback_check(full)
    if not sub.passed or not direct.passed:
        verdict = "FAIL"
    elif gain < 1:
        verdict = "PASS"
    else:
        verdict = "SUSPECT"
    norms = {"F11": n11, "F12": n12, "F21": n21, "F22": io_norm(F22, lower=False).value,
             "inv_F22": inv22}
    return BlockInvertibilityReport(sub.verdict, direct.verdict, float(gain), norms, verdict)


def block_invertibility_check(sys: BoundarySystem, p, t, m=64) -> BlockInvertibilityReport:
    """Block input-output check for the encoding ``B = (Id, L_A)``, ``C = (P; Phi)``."""
    if p <= 1:
        raise PreconditionError("the block criterion needs p > 1")
    F = build_io_map(block_encoding(sys), t, m, p)
    n = sys.n
    X, dX = sys.space, sys.boundary_space

    def blk(rows, cols, U, Y):
        return InputOutputMap(np.ascontiguousarray(F.kernels[:, rows, cols]), F.t_final, p, U, Y)

    a, b = slice(0, n), slice(n, n + sys.k)
    return block_invertibility_from_blocks(blk(a, a, X, X), blk(a, b, dX, X), blk(b, a, X, dX), blk(b, b, dX, dX))


# -- Three equivalent Favard-type conditions -------------------------------


@dataclass
class FavardEquivalenceReport:
    """Verdicts of the three equivalent conditions on a lambda grid."""

    alpha: float
    lambda_grid: np.ndarray
    a_values: np.ndarray
    a_slope: float
    a_verdict: str
    b_values: np.ndarray
    b_slope: float
    b_verdict: str
    c_value: float
    c_slope: float
    c_verdict: str

    @property
    def agree(self) -> bool:
        return self.a_verdict == self.b_verdict == self.c_verdict

    @property
    def verdict(self) -> str:
        return self.a_verdict if self.agree else "SUSPECT"

    def as_dict(self):
        return {"alpha": self.alpha, "a": [float(self.a_values.max()), self.a_slope, self.a_verdict],
                "b": [float(self.b_values.min()), self.b_slope, self.b_verdict],
                "c": [self.c_value, self.c_slope, self.c_verdict], "agree": self.agree}


def favard_equivalences(sys: BoundarySystem, alpha, lambda_grid=None, mu=None, norms=None) -> FavardEquivalenceReport:
    """Evaluate (a) ``sup lam^alpha ||L_lam||``, (b) the lower bound of ``L`` on
    ``ker(lam - A_m)`` and (c) the Favard estimate of ``ker(mu - A_m)``.

    (a) is flagged when the running max still rises by more than 0.05 decades
    over the top decade; (b) ``M(lam) = 1 / (lam^alpha ||L_lam||)`` is
    flagged when its running min falls by more than 0.05 decades; (c) uses
    the Favard flag of ``L_mu``.
    """
    if not 0 < alpha <= 1:
        raise PreconditionError("alpha must lie in (0, 1]")
    A = sys.A
    grid = default_lambda_grid(A) if lambda_grid is None else np.asarray(lambda_grid, dtype=float)
    mu = (A.base_lambda if sys.mu is None else sys.mu) if mu is None else mu
    if norms is None:
        norms = np.array([dirichlet_solve(sys, lam).norm() for lam in grid])
    a_vals = grid**alpha * norms
    a_slope = _top_decade_slope(grid, np.maximum.accumulate(a_vals))
    b_vals = 1.0 / a_vals
    b_slope = -_top_decade_slope(grid, 1.0 / np.minimum.accumulate(b_vals))
    L_mu = dirichlet_solve(sys, mu).block
    fav = favard_norm(A, alpha, L_mu, grid)
    a_v = "SUSPECT" if a_slope > SLOPE_FLAG else "PASS"
    b_v = "SUSPECT" if b_slope < -SLOPE_FLAG else "PASS"
    c_v = "SUSPECT" if fav.unbounded_suspect else "PASS"
    return FavardEquivalenceReport(alpha, grid, a_vals, a_slope, a_v, b_vals, b_slope, b_v, fav.value, fav.slope, c_v)


def lifted_domain_residual(sys: BoundarySystem, lam, x):
    """Residuals of ``(Id - L_lam Phi) y in ker L  <=>  L y = Phi x``.

    Returns ``(r_sat, r_gen)``: for the extension of ``x`` satisfying the
    domain condition, ``||L (y - L_lam Phi x)||`` (should vanish); for the
    plain extension with ``L y = 0``, the same quantity compared with
    ``||Phi x||`` (should equal it).
    """
    x = np.asarray(x)
    D = dirichlet_solve(sys, lam)
    Lfull = sys.L.matrix
    LlamExt = np.vstack([D.matrix, D.aux])
    d = sys.Phi @ x
    y = sys.extend(x, d)
    z = y - LlamExt @ d
    r_sat = float(np.abs(Lfull @ z).max() / max(np.abs(d).max(), np.abs(x).max(), 1e-300))
    y0 = sys.extend(x)
    z0 = y0 - LlamExt @ d
    r_gen = float(abs(np.abs(Lfull @ z0).max() - np.abs(d).max()) / max(np.abs(d).max(), 1e-300))
    return r_sat, r_gen
