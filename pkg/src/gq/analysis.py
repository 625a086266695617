"""Per-kernel quantization statistics: distinct values consumed, weight
boundaries, l2 error and SQNR, with grouped box-plot style summaries.

CSV schema: name,kind,bit_depth,distinct,weight_min,weight_max,l2_error,sqnr_db
The JSON mirror carries identical fields.
"""

import json
from dataclasses import dataclass

import numpy as np

from .centroids import build_linear_centroids, snap_to_int8_grid
from .errors import DegenerateTensor, ShapeError
from .quantize import CentroidCodebook, MuSearchConfig, fit_mu, hard_quantize, _snapped_centroids

# Serialized stand-in for an infinite SQNR (exact representation): real
# SQNRs of lossy kernels sit well below this.
SQNR_SENTINEL_DB = 999.0

KINDS = ("dense", "mhsa", "conv", "other")

# Substring patterns checked in order; first hit wins.
DEFAULT_KIND_PATTERNS = {
    "mhsa": ("mhsa", "attn", "attention"),
    "conv": ("conv", "depthwise", "pointwise"),
    "dense": ("dense", "ffn", "proj", "joint", "lstm", "linear"),
}


@dataclass
class KernelStats:
    name: str
    kind: str
    bit_depth: int
    distinct_values_used: int
    weight_min: float
    weight_max: float
    quant_error_l2: float
    sqnr_db: float


def classify_kind(name: str, patterns: "dict[str, tuple] | None" = None) -> str:
    pats = patterns or DEFAULT_KIND_PATTERNS
    lowered = name.lower()
    for kind in ("mhsa", "conv", "dense"):
        if any(p in lowered for p in pats.get(kind, ())):
            return kind
    return "other"


def kernel_stats(
    t_original,
    t_quantized,
    codebook: CentroidCodebook,
    name: str = "",
    kind: "str | None" = None,
) -> KernelStats:
    t = np.asarray(t_original, dtype=np.float64)
    tq = np.asarray(t_quantized, dtype=np.float64)
    if t.shape != tq.shape:
        raise ShapeError(f"{name or 'tensor'}: shapes {t.shape} vs {tq.shape} differ")

    err = float(np.linalg.norm(t - tq))
    signal = float(np.sum(t * t))
    if err == 0.0:
        sqnr = SQNR_SENTINEL_DB
    elif signal == 0.0:
        sqnr = -SQNR_SENTINEL_DB
    else:
        sqnr = float(10.0 * np.log10(signal / (err * err)))
    return KernelStats(
        name=name,
        kind=kind if kind is not None else classify_kind(name),
        bit_depth=codebook.bit_depth,
        distinct_values_used=int(np.unique(tq).size),
        weight_min=float(t.min()),
        weight_max=float(t.max()),
        quant_error_l2=err,
        sqnr_db=sqnr,
    )


def _summary(values: np.ndarray) -> dict:
    return {
        "count": int(values.size),
        "mean": float(values.mean()),
        "median": float(np.median(values)),
        "q1": float(np.percentile(values, 25)),
        "q3": float(np.percentile(values, 75)),
        "min": float(values.min()),
        "max": float(values.max()),
    }


def allocation_report(stats: "list[KernelStats]", grouping: str = "kind") -> "list[dict]":
    """Quartile/mean/median summary of distinct-value counts and weight
    boundary widths, one row per group.

    grouping is the KernelStats attribute to group by (``kind`` by default).
    Standard quartile box statistics; fancier whisker conventions are left
    to whatever plots consumers build from the CSV.
    """
    if not stats:
        raise ValueError("no kernel statistics to summarize")
    groups: "dict[str, list[KernelStats]]" = {}
    for s in stats:
        groups.setdefault(str(getattr(s, grouping)), []).append(s)
    rows = []
    for key in sorted(groups):
        members = groups[key]
        distinct = np.array([s.distinct_values_used for s in members], dtype=np.float64)
        width = np.array([s.weight_max - s.weight_min for s in members], dtype=np.float64)
        rows.append(
            {
                "group": key,
                "distinct": _summary(distinct),
                "boundary_width": _summary(width),
            }
        )
    return rows


def mu_benefit(t, bit_depth: int, alpha: float) -> "tuple[float, float]":
    """Hard-quantization l2 error with plain linear centroids vs centroids
    warped by a fitted mu.

    The fit search space is widened down to mu = 2**-17, small enough that
    the warped centroids snap onto exactly the linear grid codes, so the
    fitted route can always fall back to the unwarped alphabet.
    """
    t = np.asarray(t, dtype=np.float64).ravel()
    scale = float(np.abs(t).max(initial=0.0))
    if scale == 0.0 or np.all(t == t[0]):
        raise DegenerateTensor("constant tensor")
    wn = t / scale

    def hard_error(centroids) -> float:
        vals, _ = hard_quantize(wn, centroids)
        return float(np.linalg.norm((wn - vals) * scale))

    _, linear_snapped = snap_to_int8_grid(build_linear_centroids(bit_depth))
    error_linear = hard_error(linear_snapped)

    search = MuSearchConfig(mu_min=2.0 ** -17, mu_max=256.0)
    mu = fit_mu(wn, bit_depth, alpha, search=search)
    _, fitted_snapped = _snapped_centroids(bit_depth, mu, "standard")
    error_fitted = hard_error(fitted_snapped)
    return error_linear, error_fitted


CSV_HEADER = "name,kind,bit_depth,distinct,weight_min,weight_max,l2_error,sqnr_db"


def stats_to_csv(stats: "list[KernelStats]") -> str:
    lines = [CSV_HEADER]
    for s in stats:
        lines.append(
            f"{s.name},{s.kind},{s.bit_depth},{s.distinct_values_used},"
            f"{s.weight_min!r},{s.weight_max!r},{s.quant_error_l2!r},{s.sqnr_db!r}"
        )
    return "\n".join(lines) + "\n"


def stats_to_json(stats: "list[KernelStats]") -> str:
    rows = [
        {
            "name": s.name,
            "kind": s.kind,
            "bit_depth": s.bit_depth,
            "distinct": s.distinct_values_used,
            "weight_min": s.weight_min,
            "weight_max": s.weight_max,
            "l2_error": s.quant_error_l2,
            "sqnr_db": s.sqnr_db,
        }
        for s in stats
    ]
    return json.dumps({"kernels": rows}, indent=2, sort_keys=True) + "\n"


def allocation_to_csv(rows: "list[dict]") -> str:
    cols = ["count", "mean", "median", "q1", "q3", "min", "max"]
    header = "group," + ",".join(f"distinct_{c}" for c in cols) + "," + ",".join(
        f"boundary_{c}" for c in cols
    )
    lines = [header]
    for row in rows:
        parts = [row["group"]]
        parts += [repr(row["distinct"][c]) for c in cols]
        parts += [repr(row["boundary_width"][c]) for c in cols]
        lines.append(",".join(parts))
    return "\n".join(lines) + "\n"
