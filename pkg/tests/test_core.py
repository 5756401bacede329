import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from semipert.core import (
    GeneratorRep, certify_sector, dirichlet_laplacian, expm_action, growth_bound, resolvent, resolvent_matrix,
    semigroup_apply,
)
from semipert.errors import DomainError, SpectralProximityError
from semipert.spaces import DiscreteSpace


def test_laplacian_leading_eigenvalue():
    A = dirichlet_laplacian(200, math.pi, 2.0)
    assert growth_bound(A) == pytest.approx(-1.0, rel=1e-4)


@given(st.floats(0.5, 50.0))
def test_resolvent_inverts(lam):
    A = dirichlet_laplacian(20, math.pi, 2.0)
    R = resolvent_matrix(A, lam)
    assert np.allclose(R @ (lam * np.eye(20) - A.matrix), np.eye(20), atol=1e-10)
    assert np.allclose(resolvent(A, lam).matrix, R)


def test_resolvent_rejects_eigenvalue():
    A = dirichlet_laplacian(10, math.pi, 2.0)
    with pytest.raises(SpectralProximityError):
        resolvent_matrix(A, A.eigenvalues[0].real)


@given(st.floats(0.0, 3.0))
def test_semigroup_matches_expm(t):
    rng = np.random.default_rng(0)
    M = rng.standard_normal((8, 8)) - 3 * np.eye(8)
    A = GeneratorRep(DiscreteSpace.coordinates(8, 2.0), M)
    x = rng.standard_normal(8)
    assert np.allclose(semigroup_apply(A, t, x), sla.expm(t * M) @ x, atol=1e-10)


def test_semigroup_rejects_negative_time():
    A = dirichlet_laplacian(6, math.pi, 2.0)
    with pytest.raises(DomainError):
        A.expm(-1.0)


def test_expm_action_matches_dense():
    rng = np.random.default_rng(4)
    n = 120
    A = dirichlet_laplacian(n, math.pi, 2.0).matrix + 0.3 * rng.standard_normal((n, n)) / math.sqrt(n)
    x0 = rng.standard_normal(n)
    times = np.linspace(0, 2.0, 21)
    got = expm_action(A, x0, times, chunk=0.5)
    ref = np.array([sla.expm(t * A) @ x0 for t in times])
    assert np.abs(got - ref).max() / np.abs(ref).max() < 1e-9


def test_sector_certificate_laplacian_and_counterexample():
    A = dirichlet_laplacian(40, math.pi, 2.0)
    cert = certify_sector(A, math.pi / 2, lambda_samples=np.logspace(-3, 5, 25))
    assert cert.passed and cert.constant < 1.5
    # a skew generator is not analytic: rotating by any phi > 0 leaves the left half-plane
    S = GeneratorRep(DiscreteSpace.coordinates(2, 2.0), np.array([[0.0, 5.0], [-5.0, 0.0]]))
    bad = certify_sector(S, math.pi / 4, lambda_samples=np.logspace(-2, 3, 20), shift=0.0)
    assert not bad.passed


def test_with_sector_keeps_matrix():
    A = dirichlet_laplacian(8, math.pi, 2.0)
    B = A.with_sector(1.0)
    assert B.sector_angle == 1.0 and np.array_equal(A.matrix, B.matrix)
