"""Backend selection for the causal Toeplitz kernels.

The compiled module is used for real data with small blocks, where Python
loop overhead of the numpy route dominates.  Large blocks and complex data go
through numpy, which hands the work to BLAS.  Setting ``SEMIPERT_NO_EXT=1``
forces the pure-Python route.
"""
import os

import numpy as np

from . import _kernels_py

_compiled = None
if not os.environ.get("SEMIPERT_NO_EXT"):
    try:  # pragma: no cover - depends on the build
        from . import _kernels as _compiled
    except ImportError:  # pragma: no cover
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"

# largest block sizes where the compiled loops beat per-lag BLAS calls
# (see benchmarks/bench_kernels.py); inversion is sequential in the lag
SMALL_BLOCK = 8
INVERSE_BLOCK = 64


def _use_compiled(*arrays, block, limit=SMALL_BLOCK):
    if _compiled is None or block > limit:
        return False
    return all(np.isrealobj(a) for a in arrays)


def _as_c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def causal_convolve(K, U):
    """Inclusive causal convolution ``Y[i] = sum_{j<=i} K[i-j] @ U[j]``."""
    K = np.asarray(K)
    U = np.asarray(U)
    squeeze = U.ndim == 2
    if squeeze:
        U = U[:, :, None]
    if _use_compiled(K, U, block=max(K.shape[1], K.shape[2])):
        Y = _compiled.causal_convolve(_as_c(K), _as_c(U))
    else:
        Y = _kernels_py.causal_convolve(K, U)
    return Y[:, :, 0] if squeeze else Y


def convolve_kernels(A, B):
    """Kernel of the composed causal operator ``T_A T_B``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if _use_compiled(A, B, block=max(A.shape[1:] + B.shape[2:])):
        return _compiled.convolve_kernels(_as_c(A), _as_c(B))
    return _kernels_py.convolve_kernels(A, B)


def causal_inverse_kernels(K):
    """Kernel ``G`` of ``(I - T_K)^{-1} - I`` for a strictly causal ``K``."""
    K = np.asarray(K)
    if _use_compiled(K, block=K.shape[1], limit=INVERSE_BLOCK):
        return _compiled.causal_inverse_kernels(_as_c(K))
    return _kernels_py.causal_inverse_kernels(K)
