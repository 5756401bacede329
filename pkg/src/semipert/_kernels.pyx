# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled causal block-Toeplitz kernels (real arithmetic).

Kernel arrays have shape (m, p, q) with entry ``K[l]`` the block for time lag
``l``.  Convolutions are inclusive: ``Y[i] = sum_{j <= i} K[i - j] @ U[j]``.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def causal_convolve(const double[:, :, ::1] K, const double[:, :, ::1] U):
    """Apply the block lower-triangular Toeplitz operator with blocks ``K``."""
    cdef Py_ssize_t m = K.shape[0], dy = K.shape[1], du = K.shape[2]
    cdef Py_ssize_t r = U.shape[2]
    if U.shape[0] != m or U.shape[1] != du:
        raise ValueError("kernel and input shapes disagree")
    out = np.zeros((m, dy, r), dtype=np.float64)
    cdef double[:, :, ::1] Y = out
    cdef Py_ssize_t i, j, a, b, c
    cdef double kab
    with nogil:
        for i in range(m):
            for j in range(i + 1):
                for a in range(dy):
                    for b in range(du):
                        kab = K[i - j, a, b]
                        if kab != 0.0:
                            for c in range(r):
                                Y[i, a, c] += kab * U[j, b, c]
    return out


def convolve_kernels(const double[:, :, ::1] A, const double[:, :, ::1] B):
    """Kernel of the composition of two causal Toeplitz operators."""
    cdef Py_ssize_t m = A.shape[0], da = A.shape[1], dm = A.shape[2], db = B.shape[2]
    if B.shape[0] != m or B.shape[1] != dm:
        raise ValueError("kernel shapes disagree")
    out = np.zeros((m, da, db), dtype=np.float64)
    cdef double[:, :, ::1] C = out
    cdef Py_ssize_t l, k, a, b, c
    cdef double akb
    with nogil:
        for l in range(m):
            for k in range(l + 1):
                for a in range(da):
                    for b in range(dm):
                        akb = A[k, a, b]
                        if akb != 0.0:
                            for c in range(db):
                                C[l, a, c] += akb * B[l - k, b, c]
    return out


def causal_inverse_kernels(const double[:, :, ::1] K):
    """Kernel G with (I - T_K)^{-1} = I + T_G, assuming K[0] = 0."""
    cdef Py_ssize_t m = K.shape[0], d = K.shape[1]
    if K.shape[2] != d:
        raise ValueError("feedback kernel must be square")
    out = np.zeros((m, d, d), dtype=np.float64)
    cdef double[:, :, ::1] G = out
    cdef Py_ssize_t l, k, a, b, c
    cdef double kab
    with nogil:
        for l in range(1, m):
            for a in range(d):
                for c in range(d):
                    G[l, a, c] = K[l, a, c]
            for k in range(1, l):
                for a in range(d):
                    for b in range(d):
                        kab = K[k, a, b]
                        if kab != 0.0:
                            for c in range(d):
                                G[l, a, c] += kab * G[l - k, b, c]
    return out
