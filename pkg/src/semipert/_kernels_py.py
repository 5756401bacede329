"""Pure numpy versions of the causal block-Toeplitz kernels.

Same contracts as the compiled module: kernel arrays have shape (m, p, q),
``K[l]`` is the block for lag ``l`` and convolutions are inclusive.
"""
import numpy as np


def causal_convolve(K, U):
    """Apply the block lower-triangular Toeplitz operator with blocks ``K``."""
    K = np.asarray(K)
    U = np.asarray(U)
    m, dy, du = K.shape
    if U.shape[0] != m or U.shape[1] != du:
        raise ValueError("kernel and input shapes disagree")
    Y = np.zeros((m, dy, U.shape[2]), dtype=np.result_type(K, U))
    for lag in range(m):
        if not np.any(K[lag]):
            continue
        # one batched product per lag keeps the work inside BLAS
        Y[lag:] += np.matmul(K[lag], U[: m - lag])
    return Y


def convolve_kernels(A, B):
    """Kernel of the composition of two causal Toeplitz operators."""
    A = np.asarray(A)
    B = np.asarray(B)
    m, da, dm = A.shape
    if B.shape[0] != m or B.shape[1] != dm:
        raise ValueError("kernel shapes disagree")
    C = np.zeros((m, da, B.shape[2]), dtype=np.result_type(A, B))
    for k in range(m):
        if not np.any(A[k]):
            continue
        C[k:] += np.matmul(A[k], B[: m - k])
    return C


def causal_inverse_kernels(K):
    """Kernel G with (I - T_K)^{-1} = I + T_G, assuming K[0] = 0."""
    K = np.asarray(K)
    m, d, d2 = K.shape
    if d != d2:
        raise ValueError("feedback kernel must be square")
    G = np.zeros_like(K)
    for lag in range(1, m):
        acc = K[lag].copy()
        if lag > 1:
            # sum_{k=1}^{lag-1} K[k] G[lag-k]
            acc += np.einsum("kab,kbc->ac", K[1:lag], G[lag - 1:0:-1])
        G[lag] = acc
    return G
