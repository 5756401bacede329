import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.boundary import (
    BoundarySystem, assemble_G, block_encoding, block_invertibility_check, dirichlet_from_resolvent, dirichlet_solve,
    la_independence, lifted_domain_residual, favard_equivalences,
)
from semipert.errors import AssemblyError, PreconditionError
from semipert.rde import RDEProblem, rde_build, rde_spatial
from semipert.wentzell import canonical_problem, wentzell_build


@pytest.fixture(scope="module")
def wsys():
    return wentzell_build(canonical_problem(), 64)


@pytest.fixture(scope="module")
def rsys():
    return rde_build(RDEProblem(p=1.5, spatial_n=16, delay_m=8,
                                mu=__import__("semipert.rde", fromlist=["DelayMeasure"]).DelayMeasure(
                                    atoms=[(-1.0, 0.4)], density=lambda r: 0.3 + 0 * r)))


@given(st.floats(0.5, 500.0))
def test_dirichlet_solution_residuals(lam):
    sys = rde_spatial(24, 1.5, c=lambda s: np.cos(s))
    D = dirichlet_solve(sys, lam)
    r_bc, r_ker = D.residuals(sys)
    assert r_bc < 1e-10 and r_ker < 1e-10


def test_cross_routes_and_independence(wsys):
    for lam in (3.0, 30.0):
        a = dirichlet_solve(wsys, lam).matrix
        b = dirichlet_from_resolvent(wsys, lam).matrix
        assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-9
    assert la_independence(wsys, (1.0, 10.0, 100.0)) < 1e-9


@pytest.mark.parametrize("which", ["wentzell", "rde"])
def test_block_encoding_reproduces_generator(which, wsys, rsys):
    sys = wsys if which == "wentzell" else rsys.coupled
    pg = assemble_G(sys)
    tr = block_encoding(sys)
    assert np.allclose(tr.A.matrix + tr.B.matrix @ tr.C.matrix, pg.matrix,
                       atol=1e-9 * np.abs(pg.matrix).max())


def test_extension_satisfies_constraint(wsys):
    rng = np.random.default_rng(0)
    x = rng.standard_normal(wsys.n)
    y = assemble_G(wsys).extension @ x
    assert np.allclose(wsys.L.matrix @ y, wsys.Phi @ x, atol=1e-10)


def test_lifted_domain_residuals(wsys):
    x = np.sin(np.pi * wsys.meta["s"])
    r_sat, r_gen = lifted_domain_residual(wsys, 5.0, x)
    assert r_sat < 1e-10 and r_gen < 1e-10


def test_singular_boundary_block_rejected(wsys):
    bad = BoundarySystem(wsys.space, wsys.boundary_space, wsys.Am_x, wsys.Am_g, wsys.L_x,
                         np.zeros_like(wsys.L_g), wsys.P, wsys.Phi)
    with pytest.raises(AssemblyError):
        bad.A


def test_favard_equivalences_agree(wsys):
    assert favard_equivalences(wsys, 1.0).verdict == "PASS"
    neg = favard_equivalences(rde_spatial(48, 2.0), 1.0)
    assert neg.agree and neg.verdict == "SUSPECT"
    with pytest.raises(PreconditionError):
        favard_equivalences(wsys, 1.5)


def test_block_check_small_wentzell():
    sys = wentzell_build(canonical_problem(), 24)
    rep = block_invertibility_check(sys, 2.0, 0.2, m=16)
    assert rep.direct_verdict == "PASS"
    assert rep.verdict in ("PASS", "SUSPECT")
    with pytest.raises(PreconditionError):
        block_invertibility_check(sys, 1.0, 0.2)
