import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.errors import DomainError
from semipert.young import kernel_lq_norm, random_young_configuration, young_convolution_check


def test_constant_kernel_oracle():
    # (1 * 1)(t) = t on (0, 1): ||.||_1 = 1/2, ||1||_1 ||1||_1 = 1
    rep = young_convolution_check(lambda t: np.ones_like(t), lambda s: np.ones_like(s), 1.0, 1.0, 1.0)
    assert rep.lhs == pytest.approx(0.5, rel=1e-8)
    assert rep.rhs == pytest.approx(1.0, rel=1e-8)
    assert rep.holds


@pytest.mark.parametrize("beta,q", [(0.5, 1.5), (0.3, 2.0), (0.0, 3.0)])
def test_singular_kernel_norm(beta, q):
    # ||t^-beta||_q^q = 1 / (1 - beta q)
    val = kernel_lq_norm(lambda t: np.asarray(t) ** -beta, q)
    assert val == pytest.approx((1.0 / (1 - beta * q)) ** (1 / q), rel=1e-6)


def test_exponent_relation_enforced():
    with pytest.raises(DomainError):
        young_convolution_check(lambda t: t, lambda s: s, 2.0, 2.0, 2.0)


@given(st.integers(0, 2**32 - 1))
def test_random_configurations_hold(seed):
    rng = np.random.default_rng(seed)
    K, v, p, q, r, beta = random_young_configuration(rng, dim=None if seed % 2 else 2)
    assert beta * q < 1
    rep = young_convolution_check(K, v, p, q, r)
    assert rep.ratio <= 1.02
