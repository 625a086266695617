"""Pure-numpy implementations of the hot inner loops.

This is the fallback path used when numba is unavailable or when
GQ_BACKEND=numpy is set.  Semantics must match ``numba_backend`` exactly for
the integer paths (hard assignment, bit packing) and to float round-off for
the softmax paths.
"""

import numpy as np


def soft_assign(w: np.ndarray, z: np.ndarray, alpha: float) -> np.ndarray:
    """Row-stochastic assignment matrix exp(-alpha*|w_i - z_j|), normalized.

    Computed with per-row max subtraction so large alpha cannot overflow.
    """
    logits = -alpha * np.abs(w[:, None] - z[None, :])
    logits -= logits.max(axis=1, keepdims=True)
    a = np.exp(logits)
    a /= a.sum(axis=1, keepdims=True)
    return a


def soft_quantize(w: np.ndarray, z: np.ndarray, alpha: float) -> np.ndarray:
    """Fused soft projection: each weight becomes its assignment-weighted
    centroid mixture, without materializing the full n*m matrix for callers
    that only need the projected values."""
    return soft_assign(w, z, alpha) @ z


def hard_quantize(w: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid assignment; ties go to the lower index."""
    # argmin returns the first occurrence of the minimum, which is the
    # lower-index tie-break rule.
    idx = np.abs(w[:, None] - z[None, :]).argmin(axis=1)
    return z[idx], idx


def pack_bits(indices: np.ndarray, bit_depth: int) -> np.ndarray:
    """MSB-first concatenation of ``bit_depth``-wide indices, zero padded to a
    byte boundary.  ``indices`` must already be validated as < 2**bit_depth."""
    if indices.size == 0:
        return np.empty(0, dtype=np.uint8)
    shifts = np.arange(bit_depth - 1, -1, -1, dtype=np.uint32)
    bits = ((indices[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    return np.packbits(bits.ravel())  # bitorder="big" is the default


def unpack_bits(stream: np.ndarray, n: int, bit_depth: int) -> np.ndarray:
    """Inverse of :func:`pack_bits` for a stream of exactly n indices."""
    if n == 0:
        return np.empty(0, dtype=np.uint32)
    bits = np.unpackbits(stream)[: n * bit_depth].reshape(n, bit_depth)
    weights = (1 << np.arange(bit_depth - 1, -1, -1, dtype=np.uint32))
    return (bits.astype(np.uint32) * weights[None, :]).sum(axis=1, dtype=np.uint32)
