import numpy as np
import pytest
from hypothesis import given, strategies as st

from semipert import _kernels_py, kernels

try:
    from semipert import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def _rand(seed, m, d, e=None):
    rng = np.random.default_rng(seed)
    K = rng.standard_normal((m, d, e or d)) / (m * d)
    return K


def _dense(K):
    m, a, b = K.shape
    T = np.zeros((m * a, m * b))
    for i in range(m):
        for j in range(i + 1):
            T[i * a:(i + 1) * a, j * b:(j + 1) * b] = K[i - j]
    return T


@given(st.integers(0, 10**6), st.integers(1, 12), st.integers(1, 4))
def test_convolution_equals_block_toeplitz(seed, m, d):
    K = _rand(seed, m, d)
    U = np.random.default_rng(seed + 1).standard_normal((m, d, 1))
    ref = (_dense(K) @ U.reshape(-1)).reshape(m, d, 1)
    assert np.allclose(kernels.causal_convolve(K, U), ref)
    assert np.allclose(_kernels_py.causal_convolve(K, U), ref)


@given(st.integers(0, 10**6), st.integers(1, 10), st.integers(1, 3))
def test_composition_and_inverse(seed, m, d):
    A, B = _rand(seed, m, d), _rand(seed + 7, m, d)
    assert np.allclose(_dense(kernels.convolve_kernels(A, B)), _dense(A) @ _dense(B))
    K = A.copy()
    K[0] = 0.0
    G = kernels.causal_inverse_kernels(K)
    I = np.eye(m * d)
    # (I - T_K)^{-1} = I + T_G
    assert np.allclose((I - _dense(K)) @ (I + _dense(G)), I, atol=1e-10)


@pytest.mark.skipif(compiled is None, reason="compiled backend not built")
@given(st.integers(0, 10**6), st.integers(1, 16), st.integers(1, 5))
def test_backends_agree(seed, m, d):
    K = np.ascontiguousarray(_rand(seed, m, d))
    K[0] = 0.0
    U = np.ascontiguousarray(np.random.default_rng(seed).standard_normal((m, d, 2)))
    assert np.allclose(compiled.causal_convolve(K, U), _kernels_py.causal_convolve(K, U), atol=1e-13)
    assert np.allclose(compiled.convolve_kernels(K, K), _kernels_py.convolve_kernels(K, K), atol=1e-13)
    assert np.allclose(compiled.causal_inverse_kernels(K), _kernels_py.causal_inverse_kernels(K), atol=1e-12)


def test_backend_flag():
    assert kernels.BACKEND in ("compiled", "python")
