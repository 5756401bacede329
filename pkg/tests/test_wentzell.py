import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.boundary import dirichlet_solve
from semipert.errors import DomainError
from semipert.wentzell import (
    BoundaryFunctional, WentzellProblem, boundary_extrapolation, canonical_problem, project_to_domain, solve_de,
    wentzell_build, wentzell_dirichlet,
)


def test_canonical_validates():
    info = canonical_problem().validate()
    assert info["relative_change"] < 0.01
    assert info["holder_estimate"] >= 0.45


@pytest.mark.parametrize("a,msg", [
    (lambda s: np.asarray(s), "integrable"),
    (lambda s: np.abs(np.asarray(s) - 0.5), "positive|integrable"),
])
def test_invalid_coefficients_rejected(a, msg):
    with pytest.raises(DomainError, match=msg):
        WentzellProblem(a=a).validate()


def test_holder_claim_checked():
    prob = canonical_problem()
    prob.holder_delta = 1.0
    with pytest.raises(DomainError, match="Hoelder"):
        prob.validate()


@given(st.floats(0.05, 0.95), st.floats(-2, 2), st.floats(-2, 2))
def test_functional_exact_on_cubics(x, c0, c1):
    s = np.linspace(0, 1, 33)
    f = lambda t: c0 + c1 * t + t**3
    df = lambda t: c1 + 3 * t**2
    row = BoundaryFunctional(points=[(x, 1.0)], derivatives=[(x, 2.0)]).row(s)
    assert row @ f(s) == pytest.approx(f(x) + 2 * df(x), abs=1e-10)


def test_functional_density_is_trapezoid():
    s = np.linspace(0, 1, 401)
    row = BoundaryFunctional(density=lambda t: np.ones_like(t)).row(s)
    assert row @ np.sin(np.pi * s) == pytest.approx(2 / np.pi, rel=1e-5)


def test_functional_location_outside_rejected():
    with pytest.raises(DomainError):
        BoundaryFunctional(points=[(1.5, 1.0)]).row(np.linspace(0, 1, 9))


def test_formula_route_matches_solve():
    sys = wentzell_build(canonical_problem(), 96)
    for lam in (1.0, 50.0):
        a = dirichlet_solve(sys, lam).matrix
        b = wentzell_dirichlet(sys, lam).matrix
        assert np.abs(a - b).max() / np.abs(a).max() < 1e-10


def test_dirichlet_maximum_principle():
    sys = wentzell_build(canonical_problem(), 128)
    for lam in (1.0, 10.0, 100.0, 1000.0):
        assert lam * wentzell_dirichlet(sys, lam).norm() <= 1.0 + 1e-10


def test_projection_enforces_constraint():
    sys = wentzell_build(canonical_problem(), 64)
    s = sys.meta["s"]
    f = project_to_domain(sys, np.cos(2 * s) + s)
    E = boundary_extrapolation(sys)
    assert np.allclose(E @ f, sys.Phi @ f, atol=1e-10)


def test_solve_de_constraint_and_trivial_solution():
    prob = canonical_problem()
    traj = solve_de(prob, lambda s: np.sin(np.pi * s) + s, 1.0, 20, n=64)
    assert traj.constraint_residual < 1e-5
    norms = np.abs(traj.states).max(axis=1)
    bound = traj.growth_M * np.exp(traj.growth_omega * traj.times) * norms[0]
    assert np.all(norms <= bound * (1 + 1e-9))
    zero = solve_de(prob, lambda s: 0 * s, 1.0, 5, n=32)
    assert np.all(zero.states == 0)
    assert len(traj.rows()) == 21


def test_solve_de_rejects_incompatible_vector():
    prob = canonical_problem()
    sys = wentzell_build(prob, 32)
    with pytest.raises(DomainError):
        solve_de(prob, np.ones(32) + sys.meta["s"] ** 2, 1.0, 4, sys=sys)
