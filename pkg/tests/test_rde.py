import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.boundary import dirichlet_solve
from semipert.errors import ConfigError, DomainError
from semipert.rde import (
    DelayMeasure, RDEProblem, compatible_initial_data, decay_rate, lp_discrepancy, method_of_steps,
    random_rde_problem, rde_build, rde_control_map_closed_form, rde_dirichlet_closed_form, rde_feedback_schur,
    smallest_passing_t, solve_rde,
)


@pytest.mark.parametrize("p,gamma", [(2.0, 0.6), (2.5, 0.3), (1.5, 0.7), (1.5, 0.5)])
def test_regime_rejected(p, gamma):
    with pytest.raises(ConfigError):
        RDEProblem(p=p, gamma=gamma).validate()


def test_atom_at_zero_rejected():
    with pytest.raises(ConfigError):
        DelayMeasure(atoms=[(0.0, 1.0)])


@given(st.floats(0.5, 1e3))
def test_closed_form_dirichlet(lam):
    rs = rde_build(RDEProblem(spatial_n=64))
    xs = rs.X.grid
    num = dirichlet_solve(rs.spatial, lam).matrix[:, 0]
    ref = rde_dirichlet_closed_form(xs, lam)
    assert np.abs(num - ref).max() / np.abs(ref).max() < 1e-8


def test_closed_form_overflow_safe():
    v = rde_dirichlet_closed_form(np.linspace(0, math.pi, 5), 1e6)
    assert np.all(np.isfinite(v))


def test_measure_weights_match_moments():
    mu = DelayMeasure(atoms=[(-1.0, 0.5), (-2.5, -0.2)], density=lambda r: np.exp(r))
    rs = rde_build(RDEProblem(spatial_n=8, delay_m=32, mu=mu))
    g = np.cos
    # the r = 0 node carries no weight, so compare with a function vanishing there
    h = lambda r: np.sin(r) * g(r)
    assert rs.phi_weights @ h(rs.r[:rs.M]) == pytest.approx(mu.moment(h), rel=1e-8)
    assert mu.total_variation == pytest.approx(0.7 + 1 - math.exp(-math.pi), rel=1e-10)


def test_control_map_closed_form():
    res = rde_control_map_closed_form(lambda x: np.array([x * np.exp(-x)]), 2.0)
    assert res.discrepancy < 1e-10
    with pytest.raises(DomainError):
        rde_control_map_closed_form(lambda x: np.array([1.0 + x]), 1.0)


def test_schur_agreement_seeded():
    rng = np.random.default_rng(123)
    for _ in range(4):
        rs = rde_build(random_rde_problem(rng, spatial_n=8, delay_m=6))
        rep = rde_feedback_schur(rs, 0.5, m=16)
        assert rep.agree


def test_smallest_passing_time():
    rs = rde_build(RDEProblem(spatial_n=8, delay_m=6, mu=DelayMeasure(density=lambda r: 1.0 + 0 * r)))
    t, reports = smallest_passing_t(rs, [0.05, 0.1, 0.5])
    assert t == 0.05 and reports[0].direct == "PASS"


def test_compatible_initial_data_and_solution():
    prob = RDEProblem(spatial_n=20, delay_m=10, mu=DelayMeasure(atoms=[(-1.2, 0.3)], density=lambda r: 0.2 + 0 * r))
    rs = rde_build(prob)
    f0, u0 = compatible_initial_data(prob, lambda s: np.cos(s / 2))
    xs = rs.X.grid
    assert np.allclose(u0(np.zeros_like(xs), xs), f0(xs))
    traj = solve_rde(rs, f0, u0, 0.5, 50)
    x, u = method_of_steps(prob, f0, u0, 0.5, 0.005, 80)
    assert lp_discrepancy(rs, traj.states[-1], x, u) < 1e-3
    with pytest.raises(DomainError):
        solve_rde(rs, f0, lambda r, s: u0(r, s) + 1.0, 0.5, 5)


def test_compatible_data_requires_vanishing_at_pi():
    with pytest.raises(DomainError):
        compatible_initial_data(RDEProblem(), lambda s: np.ones_like(s))


def test_decoupled_decay_rate():
    prob = RDEProblem(spatial_n=24, delay_m=8)
    rs = rde_build(prob)
    f0, u0 = compatible_initial_data(prob, lambda s: np.cos(s / 2))
    traj = solve_rde(rs, f0, u0, 10.0, 100)
    rate = decay_rate(traj.times, traj.extra["f_norms"])
    assert rate == pytest.approx(-0.25, rel=0.01)


def test_delay_observation_constant_below_measure_bound():
    mu = DelayMeasure(atoms=[(-1.0, 0.5)], density=lambda r: 1.0 + 0 * r)
    from semipert.admissibility import observation_admissibility

    p = 1.5
    fam = []
    for m in (8, 16):
        tr = rde_build(RDEProblem(p=p, spatial_n=12, delay_m=m, mu=mu)).delay_triple()
        fam.append((tr.A, tr.C))
    est = observation_admissibility(fam, p, math.pi, probe_count=16)
    bound = math.pi ** (p - 1) * mu.total_variation**p
    assert max(est.constants) ** p <= bound * 1.05
