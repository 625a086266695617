"""Numba-compiled implementations of the hot inner loops.

Same contracts as ``numpy_backend``.  Loops are sequential (no prange): the
summation order within a row is fixed, so repeated calls are bit-identical.
Kernels release the GIL so per-tensor thread pools can overlap them.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def soft_assign(w, z, alpha):
    n = w.shape[0]
    m = z.shape[0]
    out = np.empty((n, m))
    for i in range(n):
        wi = w[i]
        best = -np.inf
        for j in range(m):
            d = -alpha * abs(wi - z[j])
            if d > best:
                best = d
        denom = 0.0
        for j in range(m):
            e = np.exp(-alpha * abs(wi - z[j]) - best)
            out[i, j] = e
            denom += e
        for j in range(m):
            out[i, j] /= denom
    return out


@njit(cache=True, nogil=True)
def soft_quantize(w, z, alpha):
    n = w.shape[0]
    m = z.shape[0]
    out = np.empty(n)
    for i in range(n):
        wi = w[i]
        best = -np.inf
        for j in range(m):
            d = -alpha * abs(wi - z[j])
            if d > best:
                best = d
        denom = 0.0
        num = 0.0
        for j in range(m):
            e = np.exp(-alpha * abs(wi - z[j]) - best)
            denom += e
            num += e * z[j]
        out[i] = num / denom
    return out


@njit(cache=True, nogil=True)
def hard_quantize(w, z):
    n = w.shape[0]
    m = z.shape[0]
    vals = np.empty(n)
    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        wi = w[i]
        best = np.inf
        bj = 0
        for j in range(m):
            d = abs(wi - z[j])
            if d < best:  # strict: ties keep the lower index
                best = d
                bj = j
        vals[i] = z[bj]
        idx[i] = bj
    return vals, idx


@njit(cache=True, nogil=True)
def pack_bits(indices, bit_depth):
    n = indices.shape[0]
    nbytes = (n * bit_depth + 7) // 8
    out = np.zeros(nbytes, dtype=np.uint8)
    bitpos = 0
    for i in range(n):
        v = indices[i]
        for k in range(bit_depth - 1, -1, -1):
            if (v >> np.uint32(k)) & np.uint32(1):
                out[bitpos >> 3] |= np.uint8(0x80) >> np.uint8(bitpos & 7)
            bitpos += 1
    return out


@njit(cache=True, nogil=True)
def unpack_bits(stream, n, bit_depth):
    out = np.zeros(n, dtype=np.uint32)
    bitpos = 0
    for i in range(n):
        v = np.uint32(0)
        for _ in range(bit_depth):
            byte = stream[bitpos >> 3]
            bit = (byte >> np.uint8(7 - (bitpos & 7))) & np.uint8(1)
            v = (v << np.uint32(1)) | np.uint32(bit)
            bitpos += 1
        out[i] = v
    return out
