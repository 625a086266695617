"""Centroid alphabets: linear spacing, mu-law warping, INT8-grid snapping,
and the linear temperature ramp used to anneal the soft assignment.

The centroid pipeline is build -> expand -> snap.  All three stages operate
on normalized weight space [-1, 1]; per-tensor scaling lives in
:mod:`gq.quantize`.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidBitDepth, InvalidMu, InvalidSchedule

MAX_BIT_DEPTH = 8

# INT8 grid: value = k/128 with k in [-128, 127].
GRID_DENOM = 128
GRID_MIN = -128
GRID_MAX = 127


@dataclass(frozen=True)
class CentroidVector:
    """Ordered quantization alphabet in normalized weight space.

    ``values`` has exactly 2**bit_depth entries, ascending.  Before snapping
    the entries are strictly increasing and odd-symmetric; snapping may
    introduce duplicates (kept deliberately, see ``effective_distinct`` on
    the codebook).
    """

    values: np.ndarray
    bit_depth: int

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class MuLawConfig:
    """Nonlinearity of the centroid warp.

    ``standard`` divides by mu, which fixes 0 and +/-1 and degrades to the
    identity as mu -> 0.  ``paper-verbatim`` divides by (1 + mu) instead;
    it is kept selectable for anyone who wants the alternative normalization,
    but it maps 1 to mu/(1+mu) < 1, so it has no identity limit.
    """

    mu: float = 8.0
    mode: str = "standard"

    def __post_init__(self):
        if not (self.mu > 0):
            raise InvalidMu(f"mu must be positive, got {self.mu}")
        if self.mode not in ("standard", "paper-verbatim"):
            raise ValueError(f"unknown mu-law mode {self.mode!r}")


@dataclass(frozen=True)
class AnnealSchedule:
    """Linear ramp of the softmax temperature over a step interval.

    Outside [s_start, s_end] the evaluated temperature clamps to the
    corresponding endpoint.
    """

    alpha_start: float = 10.0
    alpha_end: float = 400.0
    s_start: int = 0
    s_end: int = field(default=1)

    def __post_init__(self):
        if self.s_end <= self.s_start:
            raise InvalidSchedule(
                f"ramp needs s_end > s_start, got [{self.s_start}, {self.s_end}]"
            )
        if self.alpha_start < 1:
            raise InvalidSchedule(f"alpha_start must be >= 1, got {self.alpha_start}")
        if self.alpha_end < self.alpha_start:
            raise InvalidSchedule(
                f"alpha_end {self.alpha_end} < alpha_start {self.alpha_start}"
            )


def centroid_values(z) -> np.ndarray:
    """Accept a CentroidVector or any array-like of centroid values."""
    if isinstance(z, CentroidVector):
        return z.values
    return np.asarray(z, dtype=np.float64)


def build_linear_centroids(bit_depth: int) -> CentroidVector:
    """2**bit_depth equally spaced values covering [-1, 1] inclusive.

    Uses (2j - (m-1))/(m-1) rather than linspace so the odd symmetry
    values[i] == -values[m-1-i] holds exactly in floating point.
    """
    if not isinstance(bit_depth, (int, np.integer)) or not (1 <= bit_depth <= MAX_BIT_DEPTH):
        raise InvalidBitDepth(f"bit_depth must be an integer in 1..{MAX_BIT_DEPTH}, got {bit_depth}")
    m = 1 << bit_depth
    j = np.arange(m, dtype=np.float64)
    values = (2.0 * j - (m - 1)) / (m - 1)
    return CentroidVector(values=values, bit_depth=int(bit_depth))


def mulaw_expand(z: CentroidVector, cfg: MuLawConfig) -> CentroidVector:
    """Warp centroids toward zero: sgn(z) * ((1+mu)^|z| - 1) / denom.

    denom is mu in standard mode and (1+mu) in paper-verbatim mode.
    """
    v = z.values
    if np.abs(v).max(initial=0.0) > 1.0 + 1e-12:
        raise ValueError("centroid values must lie in [-1, 1]")
    denom = cfg.mu if cfg.mode == "standard" else 1.0 + cfg.mu
    warped = np.sign(v) * (np.power(1.0 + cfg.mu, np.abs(v)) - 1.0) / denom
    # the mathematical image is within [-1, 1]; at tiny mu the boundary pole
    # can land a few ulps outside, so pin it back
    warped = np.clip(warped, -1.0, 1.0)
    return CentroidVector(values=warped, bit_depth=z.bit_depth)


def snap_to_int8_grid(z: CentroidVector) -> tuple[np.ndarray, CentroidVector]:
    """Round each centroid to the nearest k/128 with k clamped to [-128, 127].

    Returns the integer codes alongside the snapped vector.  Collisions
    (several centroids landing on the same code) are preserved.
    """
    v = z.values
    if v.size and np.abs(v).max() > 1.0 + 1e-12:
        raise ValueError("centroid values must lie in [-1, 1]")
    codes = np.clip(np.rint(v * GRID_DENOM), GRID_MIN, GRID_MAX).astype(np.int64)
    snapped = CentroidVector(values=codes / GRID_DENOM, bit_depth=z.bit_depth)
    return codes, snapped


def anneal_alpha(sched: AnnealSchedule, s: int) -> float:
    """Temperature at step s: linear between the endpoints, clamped outside."""
    span = sched.s_end - sched.s_start
    alpha = sched.alpha_start + (s - sched.s_start) * (sched.alpha_end - sched.alpha_start) / span
    return float(min(max(alpha, sched.alpha_start), sched.alpha_end))
