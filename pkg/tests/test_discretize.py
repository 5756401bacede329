import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert.discretize import (
    chebyshev_diff, clenshaw_curtis_weights, gauss_on, graded_gauss, interp_matrix, interpolatory_weights,
    fd_first_derivative, fd_second_derivative,
)


@given(st.integers(4, 24), st.floats(-3, 0), st.floats(0.5, 4))
def test_chebyshev_diff_exact_on_polynomials(N, a, L):
    b = a + L
    x, D = chebyshev_diff(a, b, N)
    deg = N - 1
    f = x**deg
    assert np.allclose(D @ f, deg * x ** (deg - 1), atol=1e-8 * max(1, np.abs(x).max()) ** deg * N**2)


def test_chebyshev_diff_spectral_accuracy():
    x, D = chebyshev_diff(0.0, math.pi, 32)
    assert np.abs(D @ np.sin(x) - np.cos(x)).max() < 1e-11


@pytest.mark.parametrize("N", [4, 8, 16, 32])
def test_clenshaw_curtis_integrates_polynomials(N):
    x, _ = chebyshev_diff(-1.0, 2.0, N)
    w = clenshaw_curtis_weights(-1.0, 2.0, N)
    for k in range(N + 1):
        assert w @ x**k == pytest.approx((2.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1), rel=1e-11, abs=1e-11)


def test_interpolatory_weights_positive_on_interior_chebyshev():
    x, _ = chebyshev_diff(0.0, math.pi, 40)
    w = interpolatory_weights(x[1:-1], 0.0, math.pi)
    assert np.all(w > 0)
    assert w @ np.sin(x[1:-1]) == pytest.approx(2.0, rel=1e-10)


def test_interp_matrix_reproduces_smooth_function():
    x, _ = chebyshev_diff(-1.0, 1.0, 30)
    t = np.linspace(-1, 1, 17)
    assert np.abs(interp_matrix(x, t) @ np.exp(x) - np.exp(t)).max() < 1e-12


def test_gauss_rules():
    x, w = gauss_on(0.0, 2.0, 6)
    assert w @ x**11 == pytest.approx(2.0**12 / 12, rel=1e-13)
    x, w, eps = graded_gauss(0.0, 1.0, levels=30, order=12)
    assert w @ x**-0.5 == pytest.approx(2.0, rel=1e-3)
    assert eps > 0


def test_finite_differences_second_order():
    errs = []
    for n in (41, 81):
        s = np.linspace(0, 1, n)
        h = s[1] - s[0]
        f = np.sin(2 * s)
        e2 = np.abs((fd_second_derivative(n, h) @ f)[1:-1] + 4 * f[1:-1]).max()
        e1 = np.abs(fd_first_derivative(n, h) @ f - 2 * np.cos(2 * s)).max()
        errs.append((e1, e2))
    assert errs[0][0] / errs[1][0] > 3.5
    assert errs[0][1] / errs[1][1] > 3.5
