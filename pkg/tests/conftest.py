import numpy as np
import pytest

from gq import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every hot kernel once so JIT compilation doesn't leak into
    timed sections."""
    w = np.array([0.1, -0.4])
    z = np.array([-1.0, 0.0, 1.0])
    kernels.soft_assign(w, z, 10.0)
    kernels.soft_quantize(w, z, 10.0)
    kernels.hard_quantize(w, z)
    idx = np.array([1, 0, 3], dtype=np.uint32)
    kernels.unpack_bits(kernels.pack_bits(idx, 2), 3, 2)
