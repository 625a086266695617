"""GQCK checkpoint container: named float32 tensors plus string metadata.

Layout (all integers little-endian, see docs/formats.md):

    magic "GQCK" | version u32 | count u64
    per tensor: name_len u32 | name utf-8 | dtype u8 (0 = f32) | rank u8
                | dims u64 x rank | offset u64 | byte_len u64
    payload     (concatenated raw tensor bytes; offsets relative to here)
    trailer     (only when metadata is non-empty):
                meta_count u64, then key_len u32 | key | val_len u32 | val

The directory precedes the payload so tools can list tensors without a full
read.  Serialization is deterministic: the same checkpoint always produces
the same bytes.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptFile, FormatError, IoError

MAGIC = b"GQCK"
VERSION = 1
DTYPE_F32 = 0
HEADER = struct.Struct("<4sIQ")


@dataclass
class Checkpoint:
    """Ordered name -> float32 tensor map with string metadata."""

    tensors: "dict[str, np.ndarray]" = field(default_factory=dict)
    metadata: "dict[str, str]" = field(default_factory=dict)

    def add(self, name: str, data) -> None:
        if not name:
            raise ValueError("tensor name must be non-empty")
        if name in self.tensors:
            raise ValueError(f"duplicate tensor name {name!r}")
        self.tensors[name] = np.ascontiguousarray(data, dtype=np.float32)

    def names(self) -> "list[str]":
        return list(self.tensors)


def write_checkpoint(path, ckpt: Checkpoint) -> None:
    """Serialize to ``path``; byte-exact inverse of :func:`read_checkpoint`."""
    directory = bytearray()
    payload = bytearray()
    for name, arr in ckpt.tensors.items():
        if not name:
            raise ValueError("tensor name must be non-empty")
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        raw = arr.tobytes()  # row-major
        nb = name.encode("utf-8")
        directory += struct.pack("<I", len(nb)) + nb
        directory += struct.pack("<BB", DTYPE_F32, arr.ndim)
        directory += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        directory += struct.pack("<QQ", len(payload), len(raw))
        payload += raw

    blob = bytearray(HEADER.pack(MAGIC, VERSION, len(ckpt.tensors)))
    blob += directory
    blob += payload
    if ckpt.metadata:
        blob += struct.pack("<Q", len(ckpt.metadata))
        for key, val in ckpt.metadata.items():
            kb, vb = key.encode("utf-8"), str(val).encode("utf-8")
            blob += struct.pack("<I", len(kb)) + kb
            blob += struct.pack("<I", len(vb)) + vb
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


class _Reader:
    def __init__(self, buf: bytes, what: str):
        self.buf = buf
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptFile(f"truncated {self.what}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def text(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptFile(f"bad utf-8 in {self.what}") from exc

    def remaining(self) -> int:
        return len(self.buf) - self.pos


def read_checkpoint(path) -> Checkpoint:
    """Parse a GQCK file; exact inverse of :func:`write_checkpoint`."""
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc

    if len(buf) < HEADER.size:
        raise FormatError("file too short for GQCK header")
    magic, version, count = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported GQCK version {version}")

    rd = _Reader(buf[HEADER.size :], "checkpoint directory")
    entries = []
    for _ in range(count):
        name = rd.text()
        if not name:
            raise CorruptFile("empty tensor name")
        dtype = rd.u8()
        if dtype != DTYPE_F32:
            raise CorruptFile(f"unknown dtype code {dtype}")
        rank = rd.u8()
        dims = tuple(rd.u64() for _ in range(rank))
        offset, byte_len = rd.u64(), rd.u64()
        n = int(np.prod(dims, dtype=np.int64)) if rank else 1
        if n * 4 != byte_len:
            raise CorruptFile(
                f"tensor {name!r}: shape {dims} implies {n * 4} bytes, directory says {byte_len}"
            )
        entries.append((name, dims, offset, byte_len))

    payload_size = sum(e[3] for e in entries)
    payload = rd.take(payload_size)

    ckpt = Checkpoint()
    for name, dims, offset, byte_len in entries:
        if offset + byte_len > payload_size:
            raise CorruptFile(f"tensor {name!r} payload out of bounds")
        if name in ckpt.tensors:
            raise CorruptFile(f"duplicate tensor name {name!r}")
        arr = np.frombuffer(payload[offset : offset + byte_len], dtype="<f4").reshape(dims)
        ckpt.tensors[name] = arr.copy()

    # Metadata trailer is optional; absent means empty.
    if rd.remaining():
        meta_rd = _Reader(rd.take(rd.remaining()), "metadata trailer")
        meta_count = meta_rd.u64()
        for _ in range(meta_count):
            key = meta_rd.text()
            ckpt.metadata[key] = meta_rd.text()
        if meta_rd.remaining():
            raise CorruptFile("trailing bytes after metadata")
    return ckpt
