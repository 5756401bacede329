import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from semipert.admissibility import ControlObsTriple, ZDescriptor
from semipert.core import OperatorBlock, dirichlet_laplacian
from semipert.errors import DomainError, PreconditionError
from semipert.perturb import (
    admissible_p_range, build_perturbed, certify, fit_io_scaling, verify_perturbed_analytic, verify_vop_formula,
)


def _triple(n=24, scale=2.0):
    A = dirichlet_laplacian(n, math.pi, 2.0)
    X = A.space
    s = X.grid
    B = OperatorBlock(scale * np.outer(np.sin(s), np.ones(n)) / n, X, X, "B")
    C = OperatorBlock(np.eye(n), X, X, "I")
    return ControlObsTriple(A, B, C, ZDescriptor("full"), "rank-one", B_bounded=True, C_bounded=True)


@given(st.floats(0.0, 0.9), st.floats(0.05, 0.95))
def test_p_range_formula(beta, gamma):
    r = admissible_p_range(beta, gamma)
    assert r.lower == pytest.approx(1 / (1 - beta))
    assert r.upper == pytest.approx(1 / gamma)
    assert r.includes_one == (beta == 0 and gamma < 1)


def test_perturbed_generator_is_sum():
    tr = _triple()
    pg = build_perturbed(tr)
    assert np.allclose(pg.matrix, tr.A.matrix + tr.B.matrix @ tr.C.matrix)


def test_vop_residual_converges_second_order():
    pg = build_perturbed(_triple())
    r = [verify_vop_formula(pg, m=m).residual for m in (32, 64)]
    assert r[1] < 1e-4
    assert r[0] / r[1] > 3.0


def test_vop_zero_perturbation_is_exact():
    tr = _triple(scale=0.0)
    assert verify_vop_formula(build_perturbed(tr)).residual == 0.0


def test_certificate_for_bounded_perturbation():
    fam = [_triple(16), _triple(32)]
    cert = certify(fam, 0.0, 0.2)
    assert cert.verdict == "PASS"
    with pytest.raises(PreconditionError):
        certify(fam, -0.1, 0.2)
    assert certify(fam, 0.5, 0.6).verdict == "FAIL"


def test_io_scaling_bounded_is_linear():
    fit = fit_io_scaling(_triple(8), 2.0, 0.2, m=32)
    assert fit.verdict == "PASS"
    assert fit.exponent == pytest.approx(1.0, abs=0.05)
    with pytest.raises(DomainError):
        fit_io_scaling(_triple(), 2.0, 0.5, beta=0.3, gamma=0.3)


def test_perturbed_sector():
    pg = build_perturbed(_triple())
    cert = verify_perturbed_analytic(pg, math.pi / 2, lambda_samples=np.logspace(-2, 5, 20))
    assert cert.passed
