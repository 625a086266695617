"""Sub-byte serialization of hard-quantized models.

Index streams are MSB-first bit concatenations, zero-padded to a byte
boundary; each tensor stores its codebook (INT8 grid codes + a float32
scale), so dequantization is exactly ``scale * code / 128``.

GQPK layout (little-endian, see docs/formats.md):

    magic "GQPK" | version u32 | count u64
    per tensor: name_len u32 | name utf-8 | rank u8 | dims u64 x rank
                | b u8 | m u16 | codes i8 x m | scale f32 | stream_len u64
    streams     (concatenated packed index bytes, manifest order)
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .centroids import GRID_DENOM
from .checkpoint import _Reader
from .errors import CorruptFile, CorruptStream, FormatError, IndexOverflow, InvalidTensor, IoError
from .quantize import CentroidCodebook

MAGIC = b"GQPK"
VERSION = 1
HEADER = struct.Struct("<4sIQ")


def packed_size(n: int, bit_depth: int) -> int:
    return (n * bit_depth + 7) // 8


def pack_indices(indices, bit_depth: int) -> bytes:
    """MSB-first bit concatenation of indices, zero-padded to a byte."""
    if not (1 <= bit_depth <= 8):
        raise IndexOverflow(f"bit_depth must be in 1..8, got {bit_depth}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= (1 << bit_depth)):
        raise IndexOverflow(
            f"index out of range for {bit_depth}-bit packing "
            f"(min {idx.min()}, max {idx.max()})"
        )
    return kernels.pack_bits(idx.astype(np.uint32), bit_depth).tobytes()


def unpack_indices(data: bytes, n: int, bit_depth: int, strict: bool = False) -> np.ndarray:
    """Exact inverse of :func:`pack_indices` for a stream of n indices.

    With strict=True, nonzero padding bits raise CorruptStream.
    """
    expected = packed_size(n, bit_depth)
    if len(data) != expected:
        raise CorruptStream(
            f"stream holds {len(data)} bytes, {n} x {bit_depth}-bit needs {expected}"
        )
    buf = np.frombuffer(data, dtype=np.uint8)
    out = kernels.unpack_bits(buf, n, bit_depth)
    if strict and expected:
        pad_bits = expected * 8 - n * bit_depth
        if pad_bits and (buf[-1] & ((1 << pad_bits) - 1)):
            raise CorruptStream("nonzero padding bits in packed stream")
    return out


@dataclass
class PackedTensor:
    name: str
    shape: "tuple[int, ...]"
    codebook: CentroidCodebook
    stream: bytes

    @property
    def n(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1

    def indices(self, strict: bool = False) -> np.ndarray:
        return unpack_indices(self.stream, self.n, self.codebook.bit_depth, strict=strict)


@dataclass
class PackedModel:
    tensors: "list[PackedTensor]"

    def __getitem__(self, name: str) -> PackedTensor:
        for t in self.tensors:
            if t.name == name:
                return t
        raise KeyError(name)


def pack_quantized_tensor(name: str, values, codebook: CentroidCodebook) -> PackedTensor:
    """Turn a hard-quantized tensor back into codebook indices and pack them.

    Every value must be exactly scale * code / 128 for some codebook entry;
    this is what the hard quantization path produces.
    """
    arr = np.asarray(values, dtype=np.float64)
    codes = codebook.grid_codes
    if codebook.scale == 0.0:
        idx = np.zeros(arr.size, dtype=np.int64)
        if np.any(arr != 0.0):
            raise InvalidTensor(f"{name}: nonzero values with a zero-scale codebook")
    else:
        k = np.rint(arr.ravel() / codebook.scale * GRID_DENOM).astype(np.int64)
        # first index for each grid code (duplicates resolve to the lower index)
        lookup = {}
        for j in range(codes.size - 1, -1, -1):
            lookup[int(codes[j])] = j
        try:
            idx = np.array([lookup[int(ki)] for ki in k], dtype=np.int64)
        except KeyError as exc:
            raise InvalidTensor(
                f"{name}: value maps to grid code {exc.args[0]} absent from the codebook"
            ) from exc
        deq = codebook.scale * (codes[idx] / GRID_DENOM)
        if not np.array_equal(np.float32(deq), np.float32(arr.ravel())):
            raise InvalidTensor(f"{name}: values are not on the codebook grid")
    stream = pack_indices(idx, codebook.bit_depth)
    return PackedTensor(name=name, shape=tuple(arr.shape), codebook=codebook, stream=stream)


def dequantize_packed(pt: PackedTensor, strict: bool = False) -> np.ndarray:
    """Reconstruct the float32 tensor: scale * code / 128 per element.

    The product is exact in float64 (f32 scale times an 8-bit-mantissa grid
    value), so the float32 cast is the correctly rounded result and matches
    the hard-quantization output bit for bit.
    """
    idx = pt.indices(strict=strict)
    vals = pt.codebook.scale * (pt.codebook.grid_codes[idx] / GRID_DENOM)
    return vals.astype(np.float32).reshape(pt.shape)


def write_packed_model(path, model: PackedModel) -> None:
    manifest = bytearray()
    streams = bytearray()
    for pt in model.tensors:
        cb = pt.codebook
        if cb.grid_codes.size != (1 << cb.bit_depth):
            raise ValueError(f"{pt.name}: codebook must hold 2**b codes")
        if len(pt.stream) != packed_size(pt.n, cb.bit_depth):
            raise ValueError(f"{pt.name}: stream length mismatch")
        nb = pt.name.encode("utf-8")
        manifest += struct.pack("<I", len(nb)) + nb
        manifest += struct.pack("<B", len(pt.shape))
        manifest += struct.pack(f"<{len(pt.shape)}Q", *pt.shape)
        manifest += struct.pack("<BH", cb.bit_depth, cb.grid_codes.size)
        manifest += cb.grid_codes.astype("<i1").tobytes()
        manifest += struct.pack("<f", cb.scale)
        manifest += struct.pack("<Q", len(pt.stream))
        streams += pt.stream
    blob = HEADER.pack(MAGIC, VERSION, len(model.tensors)) + bytes(manifest) + bytes(streams)
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoError(f"cannot write packed model {path}: {exc}") from exc


def read_packed_model(path, strict: bool = True) -> PackedModel:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read packed model {path}: {exc}") from exc

    if len(buf) < HEADER.size:
        raise FormatError("file too short for GQPK header")
    magic, version, count = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported GQPK version {version}")

    rd = _Reader(buf[HEADER.size :], "packed manifest")
    entries = []
    for _ in range(count):
        name = rd.text()
        rank = rd.u8()
        dims = tuple(rd.u64() for _ in range(rank))
        b = rd.u8()
        m = struct.unpack("<H", rd.take(2))[0]
        if not (1 <= b <= 8) or m != (1 << b):
            raise CorruptFile(f"tensor {name!r}: inconsistent bit depth {b} / codebook size {m}")
        codes = np.frombuffer(rd.take(m), dtype="<i1").astype(np.int64)
        scale = struct.unpack("<f", rd.take(4))[0]
        stream_len = rd.u64()
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        if stream_len != packed_size(n, b):
            raise CorruptFile(f"tensor {name!r}: stream length {stream_len} inconsistent with shape")
        entries.append((name, dims, b, codes, scale, stream_len))

    tensors = []
    for name, dims, b, codes, scale, stream_len in entries:
        stream = bytes(rd.take(stream_len))
        cb = CentroidCodebook(
            bit_depth=b,
            mu=0.0,  # mu is not persisted; reconstruction needs only codes+scale
            grid_codes=codes,
            scale=float(scale),
            effective_distinct=int(np.unique(codes).size),
        )
        pt = PackedTensor(name=name, shape=dims, codebook=cb, stream=stream)
        pt.indices(strict=strict)  # validates padding and stream integrity
        tensors.append(pt)
    if rd.remaining():
        raise CorruptFile("trailing bytes after streams")
    return PackedModel(tensors=tensors)
