import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.core import dirichlet_laplacian
from semipert.errors import DomainError, PreconditionError
from semipert.scales import (
    check_embedding_chain, favard_norm, fractional_power, graph_norm, rotate_generator,
    rotated_semigroup_product, rotation_power_identity, rotation_resolvent_residual, smoothing_fit,
    split_sector_point, xminus1_norm,
)


def _lap(n=24, p=2.0):
    return dirichlet_laplacian(n, math.pi, p)


def _eig_power(A, lam, gamma):
    w, V = np.linalg.eigh(A.matrix)
    return (V * (lam - w) ** gamma) @ V.T


@given(st.floats(0.0, 5.0), st.sampled_from([-0.75, -0.5, 0.25, 0.5, 0.9, 1.0]))
def test_fractional_power_matches_spectral_oracle(lam, gamma):
    A = _lap()
    P = fractional_power(A, lam, gamma).matrix
    ref = _eig_power(A, lam, gamma)
    assert np.abs(P - ref).max() / np.abs(ref).max() < 1e-8


def test_fractional_power_semigroup_property():
    A = _lap()
    h = fractional_power(A, 1.0, 0.5).matrix
    assert np.allclose(h @ h, np.eye(A.n) - A.matrix, rtol=1e-8, atol=1e-8 * np.abs(A.matrix).max())


def test_fractional_power_rejects_zero_order():
    with pytest.raises(DomainError):
        fractional_power(_lap(), 1.0, 0.0)


def test_graph_and_extrapolation_norms():
    A = _lap()
    x = np.sin(A.space.grid)
    mu = -A.eigenvalues.real.max()
    assert graph_norm(A, x) == pytest.approx(A.space.norm(x) * (1 + mu), rel=1e-10)
    assert xminus1_norm(A, x, lam0=1.0) == pytest.approx(A.space.norm(x) / (1 + mu), rel=1e-10)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 0.8])
def test_favard_norm_of_eigenvector(alpha):
    A = _lap(64)
    w, V = np.linalg.eigh(A.matrix)
    x = V[:, -1] / A.space.norm(V[:, -1])
    mu = -w[-1]
    grid = np.logspace(-3, 4, 2000)
    est = favard_norm(A, alpha, x, grid)
    lam = grid
    ref = np.max(lam**alpha * mu / (lam + mu))
    assert est.value == pytest.approx(ref, rel=1e-9)
    assert not est.unbounded_suspect


def test_favard_flags_rough_vector():
    A = _lap(128)
    x = np.zeros(A.n)
    x[A.n // 2] = 1.0
    est = favard_norm(A, 1.0, x, np.logspace(0, 3, 40))
    assert est.unbounded_suspect


def test_embedding_chain_plateaus():
    fam = [_lap(n) for n in (32, 64)]
    rep = check_embedding_chain(fam, 0.6, 0.3, samples=6)
    assert rep.verdict == "PASS"


@given(st.floats(0.05, 1.5), st.floats(0.0, 5.0), st.floats(-1.0, 1.0))
def test_split_sector_point_reconstructs(phi, rho, frac):
    z = rho * np.exp(1j * frac * phi)
    rp, rm = split_sector_point(phi, z)
    assert rp * np.exp(1j * phi) + rm * np.exp(-1j * phi) == pytest.approx(z, abs=1e-9 * (1 + rho))
    assert rp >= -1e-9 and rm >= -1e-9


def test_rotation_identities_on_laplacian():
    A = _lap(32).with_sector(math.pi / 2)
    assert rotation_resolvent_residual(A, 0.7, 3 + 2j) < 1e-12
    assert rotation_power_identity(A, -0.9, 0.4) < 1e-10
    _, res = rotated_semigroup_product(A, 1.0, 0.4 + 0.3j)
    assert res < 1e-12


def test_rotation_requires_certified_sector():
    with pytest.raises(DomainError):
        rotate_generator(_lap(8), 0.3)
    with pytest.raises(DomainError):
        rotate_generator(_lap(8).with_sector(0.5), 0.6)


def test_rotated_product_outside_sector_rejected():
    A = _lap(8).with_sector(math.pi / 2)
    with pytest.raises(DomainError):
        rotated_semigroup_product(A, 0.3, 1j)


def test_power_identity_needs_negative_growth_bound():
    A = _lap(8)
    shifted = type(A)(A.space, A.matrix + 2 * np.eye(A.n))
    with pytest.raises(PreconditionError):
        rotation_power_identity(shifted, 0.2, 0.5)


def test_smoothing_rate():
    fit = smoothing_fit(_lap(64), 0.5)
    assert fit.verdict == "PASS"
    assert fit.slope == pytest.approx(-0.5, abs=0.1)
