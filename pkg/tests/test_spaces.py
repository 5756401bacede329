import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from semipert.errors import DimensionError, DomainError
from semipert.spaces import DiscreteSpace, operator_norm

finite = st.floats(-1e3, 1e3, allow_nan=False)
exps = st.sampled_from([1.0, 1.5, 2.0, 3.0, math.inf])


def _space(n, p, seed=0):
    w = np.random.default_rng(seed).uniform(0.1, 2.0, n)
    return DiscreteSpace.from_nodes(np.arange(n, dtype=float), p, None if math.isinf(p) else w)


def test_interval_trapezoid_norm_of_constant():
    X = DiscreteSpace.interval(0.0, 2.0, 11, p=2.0)
    assert X.norm(np.ones(11)) == pytest.approx(math.sqrt(2.0))
    assert X.measure == pytest.approx(2.0)


def test_sup_norm_ignores_weights():
    X = DiscreteSpace.interval(0.0, 1.0, 5, p=math.inf)
    assert X.norm(np.array([1, -3, 2, 0, 1.0])) == 3.0


def test_product_combines_lp():
    a = DiscreteSpace.coordinates(2, 2.0)
    b = DiscreteSpace.coordinates(3, 2.0)
    P = DiscreteSpace.product(a, b)
    x = np.array([3.0, 0, 0, 4, 0])
    assert P.norm(x) == pytest.approx(5.0)
    with pytest.raises(DomainError):
        DiscreteSpace.product(a, DiscreteSpace.coordinates(1, 1.0))


def test_dimension_checks():
    with pytest.raises(DimensionError):
        DiscreteSpace.coordinates(0)
    X = DiscreteSpace.coordinates(3, 2.0)
    with pytest.raises(DimensionError):
        X.norm(np.ones(4))


@given(exps, arrays(float, 6, elements=finite), arrays(float, 6, elements=finite))
def test_triangle_and_homogeneity(p, x, y):
    X = _space(6, p)
    assert X.norm(x + y) <= X.norm(x) + X.norm(y) + 1e-9 * (1 + X.norm(x) + X.norm(y))
    assert X.norm(-2.5 * x) == pytest.approx(2.5 * X.norm(x), rel=1e-12, abs=1e-12)


@given(exps, arrays(float, 5, elements=finite), arrays(float, 5, elements=finite))
def test_dual_pairing_holder(p, g, x):
    X = _space(5, p, seed=3)
    assert abs(g @ x) <= X.dual_norm(g) * X.norm(x) * (1 + 1e-10) + 1e-9


@given(exps, arrays(float, 5, elements=st.floats(-10, 10, allow_nan=False)))
def test_maximizer_attains_dual_norm(p, g):
    X = _space(5, p, seed=5)
    if not np.any(np.abs(g) > 1e-6):
        return
    u = X.maximizer(g)
    assert X.norm(u) == pytest.approx(1.0, rel=1e-9)
    assert g @ u == pytest.approx(X.dual_norm(g), rel=1e-8)


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_operator_norm_exact_cases(p):
    rng = np.random.default_rng(1)
    M = rng.standard_normal((4, 5))
    dom = DiscreteSpace.coordinates(5, p)
    cod = DiscreteSpace.coordinates(4, p)
    br = operator_norm(M, dom, cod)
    ref = {1.0: np.abs(M).sum(0).max(), 2.0: np.linalg.norm(M, 2), math.inf: np.abs(M).sum(1).max()}[p]
    assert br.lower == pytest.approx(ref, rel=1e-12)
    assert br.upper == pytest.approx(ref, rel=1e-12)


@given(st.sampled_from([1.5, 3.0]), st.integers(0, 2**32 - 1))
def test_operator_norm_bracket_contains_samples(p, seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((4, 4))
    X = _space(4, p, seed=7)
    br = operator_norm(M, X, X, rng=np.random.default_rng(0))
    assert br.lower <= br.upper * (1 + 1e-12)
    for _ in range(5):
        x = rng.standard_normal(4)
        assert X.norm(M @ x) <= br.upper * X.norm(x) * (1 + 1e-10)
