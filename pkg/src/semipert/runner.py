"""Configuration-driven experiments and report emission.

A configuration is a YAML (or JSON) mapping::

    kind: identity-suite        # or admissibility-audit, analytic-certificate,
                                # wentzell-solve, rde-solve
    seed: 0                     # mandatory
    mesh_family: [32, 64, 128]  # ascending
    problem: {...}              # see ``build_wentzell`` and ``build_rde``
    time: {t: 1.0, t_final: 1.0, steps: 100, m: 64}
    tolerances: {...}           # overrides of DEFAULT_TOLERANCES[kind]
    output: {dir: out, trajectory: true}
    workers: 1

Every check yields a record ``{name, anchor, verdict, constants, residuals}``
with a verdict in ``{PASS, SUSPECT, FAIL}``.  Reports are deterministic given
the configuration; the ``volatile`` section (timestamp, wall time) is the
only part that changes between identical runs.
"""
from __future__ import annotations

import copy
import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import yaml

from .errors import ConfigError, DomainError, SemipertError

SCHEMA_VERSION = "1.0"
VERDICTS = ("PASS", "SUSPECT", "FAIL")

COMMANDS = {
    "audit": "admissibility-audit",
    "certify": "analytic-certificate",
    "solve-de": "wentzell-solve",
    "solve-rde": "rde-solve",
    "identities": "identity-suite",
}
KINDS = tuple(COMMANDS.values())

DEFAULT_TOLERANCES = {
    "identity-suite": {
        "rotation_resolvent": 1e-10, "rotation_power": 1e-8, "rotated_product": 1e-9,
        "young_slack": 0.02, "dirichlet_bound": 1.05, "closed_form": 1e-6, "cross_route": 1e-8,
        "wentzell_bound": 1.02, "vop_residual": 1e-4, "vop_ratio": 1.8, "control_map": 1e-8,
        "sector_cap": 1e4,
    },
    "admissibility-audit": {},
    "analytic-certificate": {"sector_cap": 1e4},
    "wentzell-solve": {"constraint": 1e-5},
    "rde-solve": {"discrepancy": 1e-3, "decay_rel": 0.05},
}

DEFAULT_MESH = {
    "identity-suite": [32, 64, 128],
    "admissibility-audit": [128, 256],
    "analytic-certificate": [64, 128],
    "wentzell-solve": [128, 256],
    "rde-solve": [32, 64],
}

_EXPR_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "abs", "sinh", "cosh", "tanh", "arctan",
                 "where", "clip", "minimum", "maximum", "sign")
}
_EXPR_NAMES["pi"] = math.pi


# -- configuration -------------------------------------------------------------


def compile_expression(text, var, where="expression") -> Callable:
    """Vectorized function of ``var`` from an arithmetic expression.

    Only numpy elementary functions and ``pi`` are in scope.
    """
    if isinstance(text, (int, float)):
        val = float(text)
        return lambda x: np.full(np.shape(x), val)
    if not isinstance(text, str):
        raise ConfigError(f"expected an expression in {var}, got {type(text).__name__}", where)
    try:
        code = compile(text, f"<{where}>", "eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse {text!r}: {exc.msg}", where) from None
    for name in code.co_names:
        if name != var and name not in _EXPR_NAMES:
            raise ConfigError(f"unknown name {name!r} in {text!r}", where)

    def f(x):
        x = np.asarray(x, dtype=float)
        val = eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, var: x})  # noqa: S307
        return np.broadcast_to(np.asarray(val, dtype=float), x.shape).copy()

    return f


@dataclass
class ExperimentConfig:
    """Validated experiment configuration."""

    kind: str
    seed: int
    mesh_family: list
    problem: dict = field(default_factory=dict)
    time: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    workers: int = 1

    @classmethod
    def from_mapping(cls, data: dict, kind=None, seed=None, mesh_family=None, workers=None, out=None):
        """Validate a raw mapping; keyword arguments override its entries."""
        data = copy.deepcopy(data or {})
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping", "config")
        known = {"kind", "seed", "mesh_family", "problem", "time", "tolerances", "output", "workers"}
        extra = sorted(set(data) - known)
        if extra:
            raise ConfigError(f"unknown keys {extra}", "config")
        cfg_kind = data.get("kind")
        if kind is not None and cfg_kind is not None and cfg_kind != kind:
            raise ConfigError(f"configuration is for {cfg_kind!r}, not {kind!r}", "kind")
        kind = kind or cfg_kind
        if kind not in KINDS:
            raise ConfigError(f"kind must be one of {list(KINDS)}", "kind")
        seed = data.get("seed") if seed is None else seed
        if seed is None:
            raise ConfigError("a seed is required", "seed")
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "seed")
        mesh = data.get("mesh_family") if mesh_family is None else mesh_family
        mesh = list(DEFAULT_MESH[kind] if mesh is None else mesh)
        if not mesh or any(isinstance(n, bool) or not isinstance(n, int) or n < 4 for n in mesh):
            raise ConfigError("mesh sizes must be integers of at least 4", "mesh_family")
        if mesh != sorted(mesh) or len(set(mesh)) != len(mesh):
            raise ConfigError("mesh_family must be strictly ascending", "mesh_family")
        if kind == "admissibility-audit" and len(mesh) < 2:
            raise ConfigError("plateau verdicts need at least two meshes", "mesh_family")
        tol = dict(DEFAULT_TOLERANCES[kind])
        for key, val in (data.get("tolerances") or {}).items():
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not val > 0:
                raise ConfigError("tolerances must be positive numbers", f"tolerances.{key}")
            tol[key] = float(val)
        workers = data.get("workers", 1) if workers is None else workers
        if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
            raise ConfigError("workers must be a positive integer", "workers")
        output = dict(data.get("output") or {})
        if out is not None:
            output["dir"] = str(out)
        tm = dict(data.get("time") or {})
        for key, val in tm.items():
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not val > 0:
                raise ConfigError("time parameters must be positive numbers", f"time.{key}")
        problem = data.get("problem") or {}
        if not isinstance(problem, dict):
            raise ConfigError("problem must be a mapping", "problem")
        return cls(kind, int(seed), mesh, problem, tm, tol, output, int(workers))

    def echo(self) -> dict:
        """Configuration as recorded in the report (output location excluded)."""
        return {"kind": self.kind, "seed": self.seed, "mesh_family": list(self.mesh_family),
                "problem": self.problem, "time": self.time, "tolerances": self.tolerances}


def load_config(path) -> dict:
    """Read a YAML or JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", "config") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}", "config") from None
    return data or {}


# -- problem construction ----------------------------------------------------


def _functional(spec, where):
    from .wentzell import BoundaryFunctional

    if spec is None:
        return BoundaryFunctional()
    if not isinstance(spec, dict):
        raise ConfigError("expected a mapping with points, derivatives and density", where)
    pairs = {}
    for key in ("points", "derivatives"):
        try:
            pairs[key] = [(float(a), float(b)) for a, b in spec.get(key, [])]
        except (TypeError, ValueError):
            raise ConfigError("expected a list of [location, coefficient] pairs", f"{where}.{key}") from None
    dens = spec.get("density")
    dens = None if dens is None else compile_expression(dens, "s", f"{where}.density")
    return BoundaryFunctional(pairs["points"], pairs["derivatives"], dens)


def build_wentzell(spec: dict):
    """``WentzellProblem`` from ``{a, b, c, phi0, phi1, holder_delta}`` in the variable ``s``.

    ``preset: canonical`` starts from the canonical problem; listed keys
    override it.
    """
    from .wentzell import WentzellProblem, canonical_problem

    base = canonical_problem() if spec.get("preset", "canonical" if "a" not in spec else None) else None
    if base is None and "a" not in spec:
        raise ConfigError("the diffusion coefficient a is required", "problem.a")
    kw = {}
    for key in ("a", "b", "c"):
        if key in spec:
            kw[key] = compile_expression(spec[key], "s", f"problem.{key}")
    for key in ("phi0", "phi1"):
        if key in spec:
            kw[key] = _functional(spec[key], f"problem.{key}")
    if "holder_delta" in spec:
        kw["holder_delta"] = float(spec["holder_delta"])
    if base is None:
        return WentzellProblem(name=spec.get("name", "wentzell"), **kw)
    return replace(base, **kw)


def build_rde(spec: dict, spatial_n=None):
    """``RDEProblem`` from ``{p, gamma, b, c, mu: {atoms, density}, spatial_n, delay_m}``.

    ``b`` and ``c`` are expressions in ``s``; the measure density is an
    expression in ``r``.
    """
    from .rde import DelayMeasure, RDEProblem

    mu = spec.get("mu") or {}
    try:
        atoms = [(float(a), float(w)) for a, w in mu.get("atoms", [])]
    except (TypeError, ValueError):
        raise ConfigError("expected a list of [location, weight] pairs", "problem.mu.atoms") from None
    dens = mu.get("density")
    dens = None if dens is None else compile_expression(dens, "r", "problem.mu.density")
    kw = {"p": float(spec.get("p", 1.5)), "gamma": float(spec.get("gamma", 0.6)),
          "mu": DelayMeasure(atoms, dens),
          "spatial_n": int(spec.get("spatial_n", 32) if spatial_n is None else spatial_n),
          "delay_m": int(spec.get("delay_m", 16))}
    for key in ("b", "c"):
        if key in spec:
            kw[key] = compile_expression(spec[key], "s", f"problem.{key}")
    return RDEProblem(name=spec.get("name", "rde"), **kw).validate()


def _example(spec):
    ex = spec.get("example", "wentzell")
    if ex not in ("wentzell", "rde", "heat-point", "heat-generator"):
        raise ConfigError("example must be wentzell, rde, heat-point or heat-generator", "problem.example")
    return ex


class _TripleBuilder:
    """Picklable ``n -> ControlObsTriple`` for audits."""

    def __init__(self, example, spec):
        self.example, self.spec = example, spec

    def __call__(self, n):
        from . import library
        from .rde import rde_build
        from .wentzell import wentzell_triple

        if self.example == "wentzell":
            return wentzell_triple(build_wentzell(self.spec), n)
        if self.example == "rde":
            return rde_build(build_rde(self.spec, spatial_n=n)).audit_triple()
        p = float(self.spec.get("p", 1.0 if self.example == "heat-point" else 2.0))
        if self.example == "heat-point":
            return library.heat_point_observation(n, p)
        return library.heat_generator_observation(n, p)


# -- records -----------------------------------------------------------------


def _clean(x):
    """JSON-safe, deterministic representation of numbers and containers."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return v if math.isfinite(v) else repr(v)
    if isinstance(x, complex):
        return [_clean(x.real), _clean(x.imag)]
    return x


def record(name, anchor, verdict, constants=None, residuals=None, **extra) -> dict:
    """One check record."""
    if verdict not in VERDICTS:
        raise ValueError(f"verdict {verdict!r} not in {VERDICTS}")
    rec = {"name": name, "anchor": anchor, "verdict": verdict,
           "constants": _clean(constants or {}), "residuals": _clean(residuals or {})}
    rec.update(_clean(extra))
    return rec


def _at_most(value, tol):
    return "PASS" if value <= tol else "FAIL"


# -- identity suite ------------------------------------------------------------


def _task_rotation(n, tol):
    from .core import certify_sector, dirichlet_laplacian
    from .scales import rotated_semigroup_product, rotation_power_identity, rotation_resolvent_residual

    A = dirichlet_laplacian(n, math.pi, 2.0)
    cert = certify_sector(A, math.pi / 2, lambda_samples=np.logspace(-3, 6, 30))
    recs = [record(f"laplacian-sector[n={n}]", "Laplacian generates an analytic semigroup of angle pi/2",
                   cert.verdict, {"constant": cert.constant})]
    if cert.passed:
        A = A.with_sector(math.pi / 2)
    phis, lams = (0.3, -0.7, 1.2), (1.0, 10 + 5j, -3 + 40j)
    r1 = max(rotation_resolvent_residual(A, phi, lam) for phi in phis for lam in lams)
    r2 = max(rotation_power_identity(A, phi, al) for phi in phis for al in (0.25, 0.5, 0.75))
    zs = (0.5, 0.3 + 0.2j, 1 - 1j, 0.01 + 0.02j)
    r3 = max(rotated_semigroup_product(A, 1.2, z)[1] for z in zs)
    return recs + [
        record(f"rotation-resolvent[n={n}]", "R(lam, e^{i phi} A) = e^{-i phi} R(e^{-i phi} lam, A)",
               _at_most(r1, tol["rotation_resolvent"]), residuals={"max": r1}),
        record(f"rotation-power[n={n}]", "(-e^{i phi} A)^{-alpha} = e^{-i phi alpha} (-A)^{-alpha}",
               _at_most(r2, tol["rotation_power"]), residuals={"max": r2}),
        record(f"rotated-product[n={n}]", "T_phi(r+) T_-phi(r-) = exp(zA) on the sector",
               _at_most(r3, tol["rotated_product"]), residuals={"max": r3}),
    ]


def _task_young(seed, tol, count=50):
    from .young import random_young_configuration, young_convolution_check

    rng = np.random.default_rng([seed, 8])
    worst, held = 0.0, 0
    for j in range(count):
        K, v, p, q, r, beta = random_young_configuration(rng, dim=None if j % 2 == 0 else 3)
        rep = young_convolution_check(K, v, p, q, r)
        ratio = rep.ratio
        worst = max(worst, ratio)
        held += ratio <= 1 + tol["young_slack"]
    return [record("young-convolution", "||K * v||_r <= ||K||_q ||v||_p for singular kernels",
                   "PASS" if held == count else "FAIL", {"configurations": count, "held": held},
                   {"worst_ratio": worst})]


def _task_rde_dirichlet(tol, n=256):
    from .boundary import dirichlet_solve
    from .rde import RDEProblem, rde_build, rde_dirichlet_closed_form

    recs = []
    grid = np.logspace(0, 5, 26)
    for p in (1.0, 1.5):
        sys = rde_build(RDEProblem(p=p, gamma=0.6 if p > 1 else 0.75, spatial_n=n)).spatial
        alpha = (p + 1) / (2 * p)
        val = max(lam**alpha * dirichlet_solve(sys, lam).norm() for lam in grid)
        recs.append(record(f"rde-dirichlet-bound[p={p}]", "sup_lam lam^{(p+1)/(2p)} ||L_lam|| <= 1",
                           _at_most(val, tol["dirichlet_bound"]), {"sup": val}))
    sys = rde_build(RDEProblem(p=1.5, spatial_n=n)).spatial
    xs = sys.space.grid
    err = 0.0
    for lam in (1.0, 10.0, 100.0):
        num = dirichlet_solve(sys, lam).matrix[:, 0]
        ref = rde_dirichlet_closed_form(xs, lam)
        err = max(err, float(np.abs(num - ref).max() / np.abs(ref).max()))
    recs.append(record("rde-dirichlet-closed-form", "L_lam = -cosh/sinh profile with f(pi) = 0, f'(0) = 1",
                       _at_most(err, tol["closed_form"]), residuals={"relative": err}))
    recs += _cross_route_records("rde", sys, tol)
    return recs


def _cross_route_records(label, sys, tol):
    from .boundary import dirichlet_from_resolvent, dirichlet_solve, la_independence

    cross = 0.0
    for lam in (2.0, 20.0, 200.0):
        a = dirichlet_solve(sys, lam).matrix
        b = dirichlet_from_resolvent(sys, lam).matrix
        cross = max(cross, float(np.linalg.norm(a - b) / np.linalg.norm(a)))
    ind = la_independence(sys, (1.0, 10.0, 100.0))
    ind = float(ind if np.isscalar(ind) else np.max(ind))
    return [
        record(f"{label}-dirichlet-cross-route", "L_lam = L_mu + (mu - lam) R(lam, A) L_mu",
               _at_most(cross, tol["cross_route"]), residuals={"relative": cross}),
        record(f"{label}-control-independence", "L_A = (mu - A_{-1}) L_mu does not depend on mu",
               _at_most(ind, tol["cross_route"]), residuals={"relative": ind}),
    ]


def _task_wentzell_dirichlet(tol, n=256):
    from .boundary import dirichlet_solve
    from .spaces import operator_norm
    from .wentzell import canonical_problem, wentzell_build, wentzell_dirichlet

    sys = wentzell_build(canonical_problem(), n)
    s = sys.meta["s"]
    L0 = np.stack([1 - s, s], axis=1)
    l0 = operator_norm(L0, sys.boundary_space, sys.space).value
    worst = 0.0
    for lam in (1.0, 10.0, 100.0, 1000.0):
        worst = max(worst, lam * wentzell_dirichlet(sys, lam).norm() / 2)
    formula = 0.0
    for lam in (2.0, 20.0, 200.0):
        a = dirichlet_solve(sys, lam).matrix
        b = wentzell_dirichlet(sys, lam).matrix
        formula = max(formula, float(np.linalg.norm(a - b) / np.linalg.norm(a)))
    recs = [record("wentzell-dirichlet-bound", "lam ||L_lam|| / 2 <= ||L_0~|| with L_0~ d = (1-s) d_0 + s d_1",
                   _at_most(worst, l0 * tol["wentzell_bound"]), {"max": worst, "reference": l0}),
            record("wentzell-dirichlet-formula", "L_lam d = L_0~ d / lam - z with (lam - a d^2) z = L_0~ d",
                   _at_most(formula, tol["cross_route"]), residuals={"relative": formula})]
    return recs + _cross_route_records("wentzell", sys, tol)


def _task_favard(n=128):
    from .boundary import favard_equivalences
    from .rde import RDEProblem, rde_build, rde_spatial
    from .wentzell import canonical_problem, wentzell_build

    cases = [
        ("wentzell", wentzell_build(canonical_problem(), n), 1.0, "PASS"),
        ("rde", rde_build(RDEProblem(p=1.5, spatial_n=64)).spatial, 2.5 / 3.0, "PASS"),
        ("rde-p2-alpha1", rde_spatial(64, 2.0), 1.0, "SUSPECT"),
    ]
    recs = []
    for label, sys, alpha, expected in cases:
        rep = favard_equivalences(sys, alpha)
        ok = rep.agree and rep.verdict == expected
        recs.append(record(f"favard-equivalence[{label}]",
                           "lam^alpha ||L_lam|| bounded <=> ||L x|| >= M lam^alpha ||x|| <=> L_mu into Fav_alpha",
                           "PASS" if ok else "FAIL", rep.as_dict(), expected=expected, agreed=rep.verdict))
    return recs


def _task_control_map(tol):
    from .rde import rde_control_map_closed_form

    u = lambda x: np.array([np.sin(2 * x), x * x])
    res = rde_control_map_closed_form(u, 1.0)
    return [record("rde-control-map", "int_0^t S_{-1}(t-s) K_D u(s) ds = u(max(0, r + t))",
                   _at_most(res.discrepancy, tol["control_map"]), residuals={"max": res.discrepancy})]


def _task_schur(seed, count=20):
    from .rde import random_rde_problem, rde_build, rde_feedback_schur

    rng = np.random.default_rng([seed, 11])
    agree, verdicts = 0, []
    for _ in range(count):
        rs = rde_build(random_rde_problem(rng))
        rep = rde_feedback_schur(rs, float(rng.uniform(0.05, 1.0)))
        agree += rep.agree
        verdicts.append(rep.direct)
    return [record("rde-feedback-schur", "Id - F_t invertible <=> its Schur complement is invertible",
                   "PASS" if agree == count else "FAIL",
                   {"configurations": count, "agree": agree, "direct_pass": verdicts.count("PASS")})]


def _task_vop(tol, n=128):
    from .boundary import assemble_G
    from .perturb import verify_vop_formula
    from .wentzell import canonical_problem, wentzell_build

    pg = assemble_G(wentzell_build(canonical_problem(), n))
    res = [verify_vop_formula(pg, m=m).residual for m in (64, 128, 256)]
    ratios = [res[i] / res[i + 1] for i in range(2)]
    ok = res[-1] <= tol["vop_residual"] and min(ratios) >= tol["vop_ratio"]
    return [record("wentzell-variation-of-parameters",
                   "T_BC(t) x = T(t) x + int_0^t T_{-1}(t-s) BC T_BC(s) x ds",
                   "PASS" if ok else "FAIL", {"ratios": ratios}, {"m64": res[0], "m128": res[1], "m256": res[2]})]


def _task_wentzell_scaling(n=128):
    from .perturb import fit_io_scaling
    from .wentzell import canonical_problem, wentzell_triple

    fit = fit_io_scaling(wentzell_triple(canonical_problem(), n), 2.0, 0.2)
    return [record("wentzell-io-scaling", "||F_t|| <= M t^eps on [1e-3, 1]", fit.verdict,
                   {"exponent": fit.exponent, "M": fit.constant, "threshold": fit.threshold},
                   bound_holds=fit.bound_holds)]


def _task_wentzell_sector(tol, n=128):
    from .boundary import assemble_G
    from .core import certify_sector
    from .wentzell import canonical_problem, wentzell_build

    G = assemble_G(wentzell_build(canonical_problem(), n)).generator
    theta = math.pi / 2
    cert = certify_sector(G, theta, phi_samples=[-(theta - 0.05), 0.0, theta - 0.05],
                          lambda_samples=np.logspace(-3, 6, 40), cap=tol["sector_cap"])
    return [record("wentzell-sector", "G generates an analytic semigroup of angle pi/2", cert.verdict,
                   {"constant": cert.constant, "shift": cert.shift}, reason=cert.reason)]


def _identity_tasks(cfg: ExperimentConfig):
    tol, seed = cfg.tolerances, cfg.seed
    tasks = [(_task_rotation, (n, tol)) for n in cfg.mesh_family]
    tasks += [
        (_task_young, (seed, tol)),
        (_task_rde_dirichlet, (tol,)),
        (_task_wentzell_dirichlet, (tol,)),
        (_task_favard, ()),
        (_task_control_map, (tol,)),
        (_task_schur, (seed,)),
        (_task_vop, (tol,)),
        (_task_wentzell_scaling, ()),
        (_task_wentzell_sector, (tol,)),
    ]
    return tasks


# -- other experiment kinds ----------------------------------------------------


def _task_audit(example, spec, mesh, p, t, seed, m):
    from .admissibility import audit

    rep = audit(_TripleBuilder(example, spec), mesh, p, t, m=m, seed=seed)
    return [record(f"{example}-{key}", _AUDIT_ANCHORS[key], c.verdict,
                   {"values": list(c.constants), "drift": c.drift}, method=c.method, sizes=list(mesh))
            for key, c in rep.conditions.items()]


_AUDIT_ANCHORS = {
    "compatibility": "R(lam, A_{-1}) B maps U into Z with bounded constant",
    "control": "int_0^t T_{-1}(t-s) B u(s) ds lies in X for u in L^p(0,t;U)",
    "observation": "||C T(.) x||_{L^p(0,t;Y)} <= M ||x||",
    "io_norm": "F_t is bounded on L^p(0,t;U)",
    "feedback": "Id - F_t is invertible",
}


def _task_certificate(example, spec, mesh, seed, tol):
    from .boundary import assemble_G
    from .core import certify_sector
    from .perturb import certify
    from .rde import rde_build
    from .wentzell import wentzell_build, wentzell_triple

    if example == "wentzell":
        prob = build_wentzell(spec)
        fam = [wentzell_triple(prob, n) for n in mesh]
        beta, gamma = float(spec.get("beta", 0.0)), float(spec.get("gamma_z", 0.1))
        G = assemble_G(wentzell_build(prob, mesh[-1])).generator
    elif example == "rde":
        systems = [rde_build(build_rde(spec, spatial_n=n)) for n in mesh]
        fam = [rs.spatial_triple("L_A", "P") for rs in systems]
        p = systems[0].prob.p
        beta, gamma = float(spec.get("beta", (p - 1) / (2 * p))), systems[0].prob.gamma
        G = assemble_G(systems[-1].spatial).generator
    else:
        raise ConfigError("certificates are available for wentzell and rde", "problem.example")
    cert = certify(fam, beta, gamma, seed=seed)
    theta = math.pi / 2
    sec = certify_sector(G, theta, phi_samples=[-(theta - 0.05), 0.0, theta - 0.05],
                         lambda_samples=np.logspace(-3, 6, 40), cap=tol["sector_cap"])
    return [
        record(f"{example}-analytic-certificate",
               "R(lam, A_{-1}) B into Fav_{1-beta}, D((lam - A)^gamma) into Z, beta + gamma < 1",
               cert.verdict, cert.as_dict()),
        record(f"{example}-sector", "perturbed generator is sectorial of angle pi/2", sec.verdict,
               {"constant": sec.constant, "n": mesh[-1]}, reason=sec.reason),
    ]


def _task_solve_de(spec, n, tm, tol):
    from .wentzell import solve_de

    prob = build_wentzell(spec)
    f0 = compile_expression(spec.get("initial", "sin(pi*s)"), "s", "problem.initial")
    traj = solve_de(prob, f0, float(tm.get("t_final", 1.0)), int(tm.get("steps", 100)), n=n)
    rec = record(f"wentzell-solve[n={n}]", "(a u'')(t, j) = phi_j(u(t)) along the trajectory",
                 _at_most(traj.constraint_residual, tol["constraint"]),
                 {"growth_M": traj.growth_M, "growth_omega": traj.growth_omega},
                 {"constraint": traj.constraint_residual})
    return [rec], traj


def _task_solve_rde(spec, n, tm, tol, reference):
    from .rde import compatible_initial_data, decay_rate, lp_discrepancy, method_of_steps, rde_build, solve_rde

    prob = build_rde(spec, spatial_n=n)
    rs = rde_build(prob)
    g = compile_expression(spec.get("initial", "cos(s/2)"), "s", "problem.initial")
    f0, u0 = compatible_initial_data(prob, g)
    t_final, steps = float(tm.get("t_final", 1.0)), int(tm.get("steps", 100))
    traj = solve_rde(rs, f0, u0, t_final, steps)
    recs = []
    if reference:
        dt = t_final / steps
        x, u = method_of_steps(prob, f0, u0, t_final, dt / 2, 2 * n)
        disc = lp_discrepancy(rs, traj.states[-1], x, u)
        recs.append(record(f"rde-method-of-steps[n={n}]", "exponential trajectory = method of steps at t_final",
                           _at_most(disc, tol["discrepancy"]), residuals={"lp": disc}))
    if prob.mu.is_zero and t_final >= 8.0:
        rate = decay_rate(traj.times, traj.extra["f_norms"])
        rel = abs(rate + 0.25) / 0.25
        recs.append(record(f"rde-decay[n={n}]", "decoupled decay rate -1/4 (mixed boundary conditions)",
                           _at_most(rel, tol["decay_rel"]), {"rate": rate}, {"relative": rel}))
    recs.append(record(f"rde-solve[n={n}]", "coupled trajectory stays bounded by M e^{omega t}", "PASS",
                       {"growth_M": traj.growth_M, "growth_omega": traj.growth_omega}))
    small = replace(traj, states=traj.states[:, : rs.n])
    return recs, small


def _tasks(cfg: ExperimentConfig):
    """``[(callable, args), ...]`` and whether tasks return trajectories."""
    spec, mesh, tm, tol = cfg.problem, cfg.mesh_family, cfg.time, cfg.tolerances
    if cfg.kind == "identity-suite":
        return _identity_tasks(cfg), False
    if cfg.kind == "admissibility-audit":
        ex = _example(spec)
        p = float(spec.get("p", {"heat-point": 1.0, "rde": 1.5}.get(ex, 2.0)))
        return [(_task_audit, (ex, spec, mesh, p, float(tm.get("t", 1.0)), cfg.seed, int(tm.get("m", 64))))], False
    if cfg.kind == "analytic-certificate":
        return [(_task_certificate, (_example(spec), spec, mesh, cfg.seed, tol))], False
    if cfg.kind == "wentzell-solve":
        try:
            build_wentzell(spec).validate()
        except DomainError as exc:
            raise ConfigError(str(exc), "problem.a") from None
        return [(_task_solve_de, (spec, n, tm, tol)) for n in mesh], True
    build_rde(spec)
    ref = bool(spec.get("reference", True))
    return [(_task_solve_rde, (spec, n, tm, tol, ref)) for n in mesh], True


def _call(job):
    fn, args = job
    try:
        return fn(*args)
    except SemipertError as exc:
        name = fn.__name__.removeprefix("_task_")
        return [record(name, "task error", "FAIL", error=f"{type(exc).__name__}: {exc}")]


def fingerprint() -> dict:
    """Software environment (stable across runs on one machine)."""
    import scipy

    from .kernels import BACKEND

    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "machine": platform.machine(), "system": platform.system(), "kernels": BACKEND}


def run(cfg: ExperimentConfig) -> dict:
    """Run every check of ``cfg`` and return the report mapping.

    Validation problems raise ``ConfigError``; failures inside a check
    become FAIL records and the report is still produced.
    """
    t0 = time.perf_counter()
    jobs, with_traj = _tasks(cfg)
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_call, jobs))
    else:
        results = [_call(j) for j in jobs]
    checks, trajectories = [], []
    for res in results:
        if with_traj and isinstance(res, tuple):
            recs, traj = res
            trajectories.append(traj)
        else:
            recs = res
        checks.extend(recs)
    verdicts = [c["verdict"] for c in checks]
    overall = "FAIL" if "FAIL" in verdicts else ("SUSPECT" if "SUSPECT" in verdicts else "PASS")
    report = {
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "config": _clean(cfg.echo()),
        "verdict": overall,
        "checks": checks,
        "environment": fingerprint(),
        "volatile": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
                     "wall_time": round(time.perf_counter() - t0, 3)},
    }
    if trajectories:
        report["_trajectories"] = trajectories
    return report


def strip_volatile(report: dict) -> dict:
    """Report without the ``volatile`` section (for comparisons)."""
    return {k: v for k, v in report.items() if k != "volatile" and not k.startswith("_")}


def write_outputs(report: dict, out_dir, trajectory=True) -> dict:
    """Write ``report.json``, ``summary.csv`` and (when present) ``trajectory.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {"report": os.path.join(out_dir, "report.json"), "summary": os.path.join(out_dir, "summary.csv")}
    with open(paths["report"], "w", encoding="utf-8") as fh:
        json.dump({k: v for k, v in report.items() if not k.startswith("_")}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["summary"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["check", "verdict", "anchor", "group", "quantity", "value"])
        for c in report["checks"]:
            rows = [(g, k, v) for g in ("constants", "residuals") for k, v in _flatten(c[g])]
            if not rows:
                rows = [("", "", "")]
            for g, k, v in rows:
                w.writerow([c["name"], c["verdict"], c["anchor"], g, k, v])
    trajs = report.get("_trajectories") or []
    if trajectory and trajs:
        paths["trajectory"] = os.path.join(out_dir, "trajectory.csv")
        with open(paths["trajectory"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for k, tr in enumerate(trajs):
                w.writerow(["mesh", "time", *[f"{x:.12g}" for x in tr.grid]])
                for row in tr.rows():
                    w.writerow([k, *[f"{v:.12g}" for v in row]])
    return paths


def _flatten(d, prefix=""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif isinstance(v, list) and v and all(isinstance(x, (int, float)) for x in v):
            for i, x in enumerate(v):
                yield f"{key}[{i}]", x
        else:
            yield key, v


# -- report comparison -------------------------------------------------------


def compare_reports(baseline: dict, candidate: dict, rel_tol=0.05) -> dict:
    """Verdict flips and numeric drifts beyond ``rel_tol`` between two reports.

    Raises
    ------
    ConfigError
        If the reports describe different experiment kinds.
    """
    if baseline.get("kind") != candidate.get("kind"):
        raise ConfigError(f"kind mismatch: {baseline.get('kind')} vs {candidate.get('kind')}", "kind")
    base = {c["name"]: c for c in baseline.get("checks", [])}
    cand = {c["name"]: c for c in candidate.get("checks", [])}
    flips, drifts = [], []
    for name in sorted(set(base) & set(cand)):
        b, c = base[name], cand[name]
        if b["verdict"] != c["verdict"]:
            flips.append({"check": name, "baseline": b["verdict"], "candidate": c["verdict"]})
        for group in ("constants", "residuals"):
            bv, cv = dict(_flatten(b.get(group, {}))), dict(_flatten(c.get(group, {})))
            for key in sorted(set(bv) & set(cv)):
                x, y = bv[key], cv[key]
                if isinstance(x, bool) or isinstance(y, bool):
                    continue
                if isinstance(x, (int, float)) and isinstance(y, (int, float)):
                    scale = max(abs(x), abs(y))
                    if scale > 0 and abs(x - y) > rel_tol * scale:
                        drifts.append({"check": name, "quantity": f"{group}.{key}", "baseline": x,
                                       "candidate": y})
                elif x != y:
                    drifts.append({"check": name, "quantity": f"{group}.{key}", "baseline": x, "candidate": y})
    return {"kind": baseline.get("kind"), "rel_tol": rel_tol, "verdict_flips": flips, "drifts": drifts,
            "missing": sorted(set(base) - set(cand)), "added": sorted(set(cand) - set(base))}


def diff_is_empty(diff: dict) -> bool:
    return not (diff["verdict_flips"] or diff["drifts"] or diff["missing"] or diff["added"])
