"""Model-size accounting: parameter counts and packed-size ratios for a
topology described by kernel shapes and a per-kernel bit allocation.

The headline reduction ratio is computed at bit granularity (32*N over
sum of b_i*n_i), so a uniform b-bit allocation reports exactly 32/b.
Byte-padded stream sizes and codebook overhead are reported alongside but
kept out of the ratio.
"""

import json
from dataclasses import dataclass

from .errors import IoError
from .packing import packed_size


@dataclass
class FootprintRow:
    name: str
    group: str
    params: int
    bit_depth: int
    bytes_32bit: int
    bytes_8bit: int
    packed_bits: int
    packed_stream_bytes: int
    codebook_overhead_bytes: int


@dataclass
class FootprintReport:
    rows: "list[FootprintRow]"

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_bytes_32bit(self) -> int:
        return sum(r.bytes_32bit for r in self.rows)

    @property
    def total_bytes_8bit(self) -> int:
        return sum(r.bytes_8bit for r in self.rows)

    @property
    def total_packed_bits(self) -> int:
        return sum(r.packed_bits for r in self.rows)

    @property
    def total_packed_stream_bytes(self) -> int:
        return sum(r.packed_stream_bytes for r in self.rows)

    @property
    def total_overhead_bytes(self) -> int:
        return sum(r.codebook_overhead_bytes for r in self.rows)

    @property
    def reduction_ratio(self) -> float:
        """32-bit footprint over packed footprint, overhead excluded."""
        return 32.0 * self.total_params / self.total_packed_bits

    def group_params(self) -> "dict[str, int]":
        out: "dict[str, int]" = {}
        for r in self.rows:
            out[r.group] = out.get(r.group, 0) + r.params
        return out

    def to_json_dict(self) -> dict:
        return {
            "tensors": [vars(r) for r in self.rows],
            "group_params": self.group_params(),
            "totals": {
                "params": self.total_params,
                "bytes_32bit": self.total_bytes_32bit,
                "bytes_8bit": self.total_bytes_8bit,
                "packed_bits": self.total_packed_bits,
                "packed_stream_bytes": self.total_packed_stream_bytes,
                "codebook_overhead_bytes": self.total_overhead_bytes,
            },
            "reduction_ratio_vs_32bit": self.reduction_ratio,
        }

    def to_csv(self) -> str:
        lines = [
            "name,group,params,bit_depth,bytes_32bit,bytes_8bit,"
            "packed_stream_bytes,codebook_overhead_bytes"
        ]
        for r in self.rows:
            lines.append(
                f"{r.name},{r.group},{r.params},{r.bit_depth},{r.bytes_32bit},"
                f"{r.bytes_8bit},{r.packed_stream_bytes},{r.codebook_overhead_bytes}"
            )
        lines.append(
            f"TOTAL,,{self.total_params},,{self.total_bytes_32bit},"
            f"{self.total_bytes_8bit},{self.total_packed_stream_bytes},"
            f"{self.total_overhead_bytes}"
        )
        return "\n".join(lines) + "\n"


def footprint_report(shapes, bit_map, default_bits: "int | None" = None) -> FootprintReport:
    """Byte accounting for a list of (name, dims) or (name, dims, group).

    bit_map assigns a bit depth per kernel name; names absent from the map
    fall back to default_bits.  Codebook overhead per tensor is 2**b bytes
    of INT8 codes plus a 4-byte scale.
    """
    rows = []
    for entry in shapes:
        name, dims = entry[0], entry[1]
        group = entry[2] if len(entry) > 2 else ""
        n = 1
        for d in dims:
            if d <= 0:
                raise ValueError(f"{name}: non-positive dim in {tuple(dims)}")
            n *= int(d)
        if name in bit_map:
            b = int(bit_map[name])
        elif default_bits is not None:
            b = int(default_bits)
        else:
            raise ValueError(f"{name}: no bit depth in bit_map and no default given")
        if not (1 <= b <= 8):
            raise ValueError(f"{name}: bit depth {b} outside 1..8")
        rows.append(
            FootprintRow(
                name=name,
                group=group,
                params=n,
                bit_depth=b,
                bytes_32bit=4 * n,
                bytes_8bit=n,
                packed_bits=b * n,
                packed_stream_bytes=packed_size(n, b),
                codebook_overhead_bytes=(1 << b) + 4,
            )
        )
    return FootprintReport(rows=rows)


def load_topology(path) -> "list[tuple[str, tuple[int, ...], str]]":
    """Read a topology JSON file into (name, dims, group) triples.

    Schema: {"groups": [{"name": g, "kernels": [{"name": n, "shape": [...]}]}]}
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read topology {path}: {exc}") from exc
    shapes = []
    for group in doc["groups"]:
        for kernel in group["kernels"]:
            shapes.append((kernel["name"], tuple(kernel["shape"]), group["name"]))
    return shapes
