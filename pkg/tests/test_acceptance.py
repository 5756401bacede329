"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
terminal summary.  ``python3 tests/test_acceptance.py`` runs the suite
directly.
"""
import math
import time

import numpy as np
import pytest

from semipert.admissibility import audit, observation_admissibility
from semipert.boundary import (
    assemble_G, dirichlet_from_resolvent, dirichlet_solve, la_independence, favard_equivalences,
)
from semipert.core import certify_sector, dirichlet_laplacian
from semipert.library import heat_generator_observation, heat_point_observation
from semipert.perturb import fit_io_scaling, verify_vop_formula
from semipert.rde import (
    DelayMeasure, RDEProblem, compatible_initial_data, decay_rate, lp_discrepancy, method_of_steps,
    random_rde_problem, rde_build, rde_dirichlet_closed_form, rde_feedback_schur, rde_spatial, solve_rde,
)
from semipert.runner import ExperimentConfig, run, strip_volatile
from semipert.scales import rotated_semigroup_product, rotation_power_identity, rotation_resolvent_residual
from semipert.spaces import operator_norm
from semipert.wentzell import canonical_problem, wentzell_build, wentzell_dirichlet, wentzell_triple
from semipert.young import random_young_configuration, young_convolution_check

RESULTS = {}


def report(key, ok, detail):
    line = f"criterion {key:>4s}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[key] = line
    print(line)
    return ok


MU = DelayMeasure(atoms=[(-1.0, 0.5)], density=lambda r: 1.0 + 0 * r)


def test_criterion_01_rde_dirichlet_bound():
    t0 = time.perf_counter()
    grid = np.logspace(0, 5, 41)
    sups = {}
    for p in (1.0, 1.5):
        sys = rde_build(RDEProblem(p=p, gamma=0.75 if p == 1 else 0.6, spatial_n=256)).spatial
        alpha = (p + 1) / (2 * p)
        sups[p] = max(lam**alpha * dirichlet_solve(sys, lam).norm() for lam in grid)
    dt = time.perf_counter() - t0
    ok = max(sups.values()) <= 1.05 and dt < 30
    assert report("1", ok, f"sup lam^a ||L_lam|| = {sups[1.0]:.6f} (p=1), {sups[1.5]:.6f} (p=1.5); {dt:.1f} s")


def test_criterion_02_rde_closed_form():
    sys = rde_build(RDEProblem(spatial_n=256)).spatial
    xs = sys.space.grid
    err = 0.0
    for lam in (1.0, 10.0, 100.0):
        num = dirichlet_solve(sys, lam).matrix[:, 0]
        ref = rde_dirichlet_closed_form(xs, lam)
        err = max(err, float(np.abs(num - ref).max() / np.abs(ref).max()))
    assert report("2", err <= 1e-6, f"max relative error {err:.2e}")


def _cross(sys, formula=None):
    c = 0.0
    for lam in (2.0, 20.0, 200.0):
        a = dirichlet_solve(sys, lam).matrix
        b = (formula or dirichlet_from_resolvent)(sys, lam).matrix
        c = max(c, float(np.linalg.norm(a - b) / np.linalg.norm(a)))
    return c, la_independence(sys, (1.0, 10.0, 100.0))


def test_criterion_03_dirichlet_cross_route():
    rsys = rde_build(RDEProblem(spatial_n=128)).spatial
    wsys = wentzell_build(canonical_problem(), 128)
    r_c, r_i = _cross(rsys)
    w_c, w_i = _cross(wsys)
    w_f, _ = _cross(wsys, wentzell_dirichlet)
    worst = max(r_c, r_i, w_c, w_i, w_f)
    assert report("3", worst <= 1e-8,
                  f"rde cross {r_c:.1e} indep {r_i:.1e}; wentzell cross {w_c:.1e} formula {w_f:.1e} indep {w_i:.1e}")


def test_criterion_04_wentzell_dirichlet_bound():
    sys = wentzell_build(canonical_problem(), 256)
    s = sys.meta["s"]
    l0 = operator_norm(np.stack([1 - s, s], axis=1), sys.boundary_space, sys.space).value
    vals = [lam * wentzell_dirichlet(sys, lam).norm() / 2 for lam in (1.0, 10.0, 100.0, 1000.0)]
    assert report("4", max(vals) <= 1.02 * l0, f"max lam ||L_lam||/2 = {max(vals):.6f}, ||L_0~|| = {l0:.6f}")


def test_criterion_05_io_scaling():
    fit = fit_io_scaling(wentzell_triple(canonical_problem(), 128), 2.0, 0.2)
    ok = fit.exponent >= 0.15 and fit.bound_holds
    assert report("5", ok, f"fitted exponent {fit.exponent:.4f}, M = {fit.constant:.4f}, bound holds {fit.bound_holds}")


def test_criterion_06_vop_residual():
    pg = assemble_G(wentzell_build(canonical_problem(), 128))
    res = [verify_vop_formula(pg, m=m).residual for m in (64, 128, 256)]
    ratios = [res[0] / res[1], res[1] / res[2]]
    ok = res[-1] <= 1e-4 and min(ratios) >= 1.8
    assert report("6", ok, f"residual {res[-1]:.2e} at m=256; ratios {ratios[0]:.2f}, {ratios[1]:.2f}")


def test_criterion_07_rotation_identities():
    worst = [0.0, 0.0, 0.0]
    for n in (32, 64, 128):
        A = dirichlet_laplacian(n, math.pi, 2.0)
        cert = certify_sector(A, math.pi / 2, lambda_samples=np.logspace(-3, 6, 30))
        assert cert.passed
        A = A.with_sector(math.pi / 2)
        worst[0] = max(worst[0], max(rotation_resolvent_residual(A, phi, lam)
                                     for phi in (0.3, -0.7, 1.2) for lam in (1.0, 10 + 5j, -3 + 40j)))
        worst[1] = max(worst[1], max(rotation_power_identity(A, phi, a)
                                     for phi in (0.3, -0.7, 1.2) for a in (0.25, 0.5, 0.75)))
        worst[2] = max(worst[2], max(rotated_semigroup_product(A, 1.2, z)[1]
                                     for z in (0.5, 0.3 + 0.2j, 1 - 1j, 0.01 + 0.02j)))
    ok = worst[0] <= 1e-10 and worst[1] <= 1e-8 and worst[2] <= 1e-9
    assert report("7", ok, f"resolvent {worst[0]:.1e}, power {worst[1]:.1e}, product {worst[2]:.1e}")


def test_criterion_08_young():
    rng = np.random.default_rng(2024)
    ratios, singular = [], 0
    for j in range(50):
        K, v, p, q, r, beta = random_young_configuration(rng, dim=None if j % 2 == 0 else 3)
        singular += beta > 0
        ratios.append(young_convolution_check(K, v, p, q, r).ratio)
    ok = max(ratios) <= 1.02 and singular >= 40
    assert report("8", ok, f"50 configurations ({singular} singular), worst lhs/rhs = {max(ratios):.4f}")


def test_criterion_09_admissibility_plateaus():
    w = audit(lambda n: wentzell_triple(canonical_problem(), n), [128, 256], 2.0, 1.0)
    r = audit(lambda n: rde_build(RDEProblem(p=1.5, spatial_n=n, delay_m=8, mu=MU)).audit_triple(),
              [128, 256], 1.5, 1.0)
    drifts = {f"{tag}.{k}": c.drift for tag, rep in (("wentzell", w), ("rde", r)) for k, c in rep.conditions.items()}
    worst = max(drifts, key=drifts.get)
    ok = w.all_pass and r.all_pass and max(drifts.values()) <= 0.2
    assert report("9a", ok, f"certified triples: largest drift {drifts[worst]:.2e} ({worst})")


def test_criterion_09_negative_control():
    sizes = (64, 128, 256)
    point = observation_admissibility([(tr.A, tr.C) for tr in (heat_point_observation(n, 1.0) for n in sizes)],
                                      1.0, 1.0, probe_count=16)
    growth = [b / a for a, b in zip(point.constants, point.constants[1:])]
    gen = observation_admissibility([(tr.A, tr.C) for tr in (heat_generator_observation(n, 2.0) for n in sizes)],
                                    2.0, 1.0, probe_count=8)
    ggrowth = [b / a for a, b in zip(gen.constants, gen.constants[1:])]
    ok = min(growth) >= 2.0
    assert report("9b", ok,
                  f"point observation on L^1: constants {np.round(point.constants, 3).tolist()}, growth "
                  f"{np.round(growth, 2).tolist()} (needs >= 2); C = A on L^2: growth {np.round(ggrowth, 2).tolist()}")


def test_criterion_10_rde_solve():
    prob = RDEProblem(p=1.5, spatial_n=64, delay_m=64, mu=MU)
    rs = rde_build(prob)
    f0, u0 = compatible_initial_data(prob, lambda s: np.cos(s / 2))
    traj = solve_rde(rs, f0, u0, 1.0, 100)
    x, u = method_of_steps(prob, f0, u0, 1.0, 0.005, 128)
    disc = lp_discrepancy(rs, traj.states[-1], x, u)
    dprob = RDEProblem(p=1.5, spatial_n=32, delay_m=16)
    drs = rde_build(dprob)
    g0, v0 = compatible_initial_data(dprob, lambda s: np.cos(s / 2))
    dtraj = solve_rde(drs, g0, v0, 10.0, 100)
    rate = decay_rate(dtraj.times, dtraj.extra["f_norms"])
    ok = disc <= 1e-3 and abs(rate + 0.25) <= 0.05 * 0.25
    assert report("10", ok, f"L^p discrepancy {disc:.2e}; decoupled decay rate {rate:.6f}")


def test_criterion_11_schur_consistency():
    rng = np.random.default_rng(11)
    agree, direct = 0, []
    for _ in range(20):
        rs = rde_build(random_rde_problem(rng))
        rep = rde_feedback_schur(rs, float(rng.uniform(0.05, 1.0)))
        agree += rep.agree
        direct.append(rep.direct)
    assert report("11", agree == 20, f"{agree}/20 agree ({direct.count('PASS')} PASS, {direct.count('FAIL')} FAIL)")


def test_criterion_12_sector():
    G = assemble_G(wentzell_build(canonical_problem(), 128)).generator
    theta = math.pi / 2
    cert = certify_sector(G, theta, phi_samples=[-(theta - 0.05), 0.0, theta - 0.05],
                          lambda_samples=np.logspace(-3, 6, 60))
    assert report("12", cert.passed, f"sampled constant {cert.constant:.3f} at +-(pi/2 - 0.05)")


def test_criterion_13_favard_equivalences():
    cases = {
        "wentzell": (favard_equivalences(wentzell_build(canonical_problem(), 128), 1.0), "PASS"),
        "rde": (favard_equivalences(rde_build(RDEProblem(p=1.5, spatial_n=64)).spatial, 2.5 / 3), "PASS"),
        "rde alpha=1": (favard_equivalences(rde_spatial(64, 2.0), 1.0), "SUSPECT"),
    }
    ok = all(rep.agree and rep.verdict == exp for rep, exp in cases.values())
    detail = ", ".join(f"{k}: {rep.a_verdict}/{rep.b_verdict}/{rep.c_verdict}" for k, (rep, _) in cases.items())
    assert report("13", ok, detail)


def test_criterion_14_determinism():
    cfg = ExperimentConfig.from_mapping({"seed": 20240611}, kind="identity-suite")
    t0 = time.perf_counter()
    a = run(cfg)
    dt = time.perf_counter() - t0
    b = run(cfg)
    same = strip_volatile(a) == strip_volatile(b)
    ok = same and dt < 600 and a["verdict"] == "PASS"
    assert report("14", ok, f"identical reports {same}; {len(a['checks'])} checks, suite verdict "
                            f"{a['verdict']}, {dt:.1f} s per run")


if __name__ == "__main__":  # pragma: no cover
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
