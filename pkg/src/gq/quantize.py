"""Soft and hard weight quantization against a snapped centroid alphabet,
plus the self-adjusting fit of the mu-law nonlinearity.

All functions are pure and safe to call concurrently on disjoint tensors.
The assignment matrix convention: row i holds the probabilities of
representing weight w_i by each centroid; rows sum to 1.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .centroids import (
    CentroidVector,
    MuLawConfig,
    build_linear_centroids,
    centroid_values,
    snap_to_int8_grid,
    mulaw_expand,
    GRID_DENOM,
)
from .errors import (
    DegenerateTensor,
    EmptyInput,
    InvalidTensor,
    NonDifferentiablePoint,
)

# Softmax temperatures above this are clamped; beyond it the assignment is
# one-hot to double precision anyway.
ALPHA_CAP = 1e6


@dataclass(frozen=True)
class CentroidCodebook:
    """Per-tensor quantization alphabet in storable form.

    Dequantized centroid i is ``scale * grid_codes[i] / 128``.  A scale of
    0.0 is the sentinel for an all-zero tensor that was passed through
    unchanged.
    """

    bit_depth: int
    mu: float
    grid_codes: np.ndarray
    scale: float
    effective_distinct: int

    def __post_init__(self):
        object.__setattr__(
            self, "grid_codes", np.asarray(self.grid_codes, dtype=np.int64)
        )

    @property
    def dequantized(self) -> np.ndarray:
        """Centroids in real weight space."""
        return self.scale * (self.grid_codes / GRID_DENOM)

    def to_dict(self) -> dict:
        return {
            "bit_depth": self.bit_depth,
            "mu": self.mu,
            "grid_codes": [int(k) for k in self.grid_codes],
            "scale": self.scale,
            "effective_distinct": self.effective_distinct,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CentroidCodebook":
        return cls(
            bit_depth=int(d["bit_depth"]),
            mu=float(d["mu"]),
            grid_codes=np.asarray(d["grid_codes"], dtype=np.int64),
            scale=float(d["scale"]),
            effective_distinct=int(d["effective_distinct"]),
        )


@dataclass(frozen=True)
class MuSearchConfig:
    """Search space for the nonlinearity fit: a log-spaced grid over
    [mu_min, mu_max], with golden-section refinement (to ``log_tol`` in
    ln(mu)) of the brackets around the ``top_k`` best grid points.

    The objective is a staircase in mu (snapped centroids change at discrete
    thresholds), so narrow dips exist between smooth-looking shoulders; the
    default grid is dense enough to sample them.
    """

    mu_min: float = 0.125
    mu_max: float = 256.0
    grid_points: int = 4096
    top_k: int = 8
    log_tol: float = 1e-3
    # tensors larger than this are stride-subsampled before fitting; the
    # objective only needs the weight distribution, not every element
    max_samples: int = 8192


def _as_weight_vector(w) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).ravel()
    if w.size == 0:
        raise EmptyInput("weight vector is empty")
    return w


def _prepare(w, z, alpha: float) -> tuple[np.ndarray, np.ndarray, float]:
    w = _as_weight_vector(w)
    zv = centroid_values(z)
    if zv.size == 0:
        raise EmptyInput("centroid vector is empty")
    if zv.size < 2:
        raise ValueError("soft assignment needs at least 2 centroids")
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    return w, zv, min(float(alpha), ALPHA_CAP)


def soft_assign(w, z, alpha: float) -> np.ndarray:
    """n x m row-stochastic assignment matrix of weights onto centroids."""
    w, zv, alpha = _prepare(w, z, alpha)
    return kernels.soft_assign(w, zv, alpha)


def soft_quantize(w, z, alpha: float) -> np.ndarray:
    """Assignment-weighted centroid mixture for each weight (soft projection)."""
    w, zv, alpha = _prepare(w, z, alpha)
    return kernels.soft_quantize(w, zv, alpha)


def soft_quantize_jacobian(w: float, z, alpha: float) -> float:
    """Analytic d(soft_quantize)/dw at a scalar w.

    Along the softmax of -alpha*|w - z_j| the derivative is
    -alpha * Cov_a(z_j, sgn(w - z_j)).  Undefined exactly at a centroid,
    where |w - z_j| has a kink.
    """
    wv, zv, alpha = _prepare([w], z, alpha)
    diff = wv[0] - zv
    if np.any(diff == 0.0):
        raise NonDifferentiablePoint(f"w={w} coincides with a centroid")
    a = kernels.soft_assign(wv, zv, alpha)[0]
    s = np.sign(diff)
    e_z = a @ zv
    e_s = a @ s
    e_zs = a @ (zv * s)
    return float(-alpha * (e_zs - e_z * e_s))


def hard_quantize(w, z) -> tuple[np.ndarray, np.ndarray]:
    """Replace each weight by its nearest centroid (ties: lower index).

    Returns (values, indices).
    """
    w = np.asarray(w, dtype=np.float64).ravel()
    zv = centroid_values(z)
    if zv.size == 0:
        raise EmptyInput("centroid vector is empty")
    return kernels.hard_quantize(w, zv)


@functools.lru_cache(maxsize=65536)
def _snapped_centroids(bit_depth: int, mu: float, mode: str) -> tuple[np.ndarray, CentroidVector]:
    """Full centroid pipeline: linear -> mu-law -> INT8 grid.

    Cached: the geometry depends only on (bit_depth, mu, mode), and the mu
    fit re-evaluates the same log-grid of mu values for every tensor.
    """
    expanded = mulaw_expand(build_linear_centroids(bit_depth), MuLawConfig(mu=mu, mode=mode))
    return snap_to_int8_grid(expanded)


def reconstruction_error(w: np.ndarray, z, alpha: float) -> float:
    """l2 norm of (soft projection - w); the objective the mu fit minimizes."""
    wbar = soft_quantize(w, z, alpha)
    return float(np.linalg.norm(wbar - np.asarray(w, dtype=np.float64).ravel()))


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def fit_mu(
    w,
    bit_depth: int,
    alpha: float,
    search: MuSearchConfig = MuSearchConfig(),
    mode: str = "standard",
) -> float:
    """Pick mu minimizing the soft reconstruction error of w.

    The weights are normalized by max|w| first, so the fit sees the same
    [-1, 1] space as the centroids.  Candidates come from a log-spaced grid;
    the best bracket is refined by golden section, and the best mu evaluated
    anywhere is returned.  The objective is piecewise constant in mu (the
    centroids are grid-snapped), so the refinement walks plateaus rather
    than a smooth valley; returning the best evaluated point keeps the
    result no worse than the raw grid.
    """
    w = _as_weight_vector(w)
    if not np.isfinite(w).all():
        raise InvalidTensor("weights contain NaN or Inf")
    if np.abs(w).max() == 0.0 or np.all(w == w[0]):
        raise DegenerateTensor("constant tensor: nothing to fit")
    if w.size > search.max_samples:
        sub = w[:: w.size // search.max_samples + 1]
        if not np.all(sub == sub[0]):
            w = sub
    scale = float(np.abs(w).max())
    wn = w / scale
    alpha_c = min(float(alpha), ALPHA_CAP)
    if alpha_c < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")

    def objective(log_mu: float) -> float:
        # kernels called directly: this runs thousands of times per fit
        _, snapped = _snapped_centroids(bit_depth, math.exp(log_mu), mode)
        diff = kernels.soft_quantize(wn, snapped.values, alpha_c) - wn
        return float(np.sqrt(diff @ diff))

    lo, hi = math.log(search.mu_min), math.log(search.mu_max)
    grid = np.linspace(lo, hi, search.grid_points)
    errs = np.array([objective(g) for g in grid])
    best_i = int(errs.argmin())
    best_log, best_err = float(grid[best_i]), float(errs[best_i])

    for i in np.argsort(errs, kind="stable")[: search.top_k]:
        a = float(grid[max(i - 1, 0)])
        b = float(grid[min(i + 1, len(grid) - 1)])
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
        fc, fd = objective(c), objective(d)
        while b - a > search.log_tol:
            for x, fx in ((c, fc), (d, fd)):
                if fx < best_err:
                    best_log, best_err = x, fx
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _INV_PHI * (b - a)
                fc = objective(c)
            else:
                a, c, fc = c, d, fd
                d = a + _INV_PHI * (b - a)
                fd = objective(d)
        for x, fx in ((c, fc), (d, fd)):
            if fx < best_err:
                best_log, best_err = x, fx
    return math.exp(best_log)


def _sentinel_codebook(bit_depth: int) -> CentroidCodebook:
    return CentroidCodebook(
        bit_depth=bit_depth,
        mu=0.0,
        grid_codes=np.zeros(1 << bit_depth, dtype=np.int64),
        scale=0.0,
        effective_distinct=1,
    )


def _f32_scale(t: np.ndarray) -> float:
    """max|t| rounded up to the nearest float32.

    The scale is stored as f32 in packed artifacts; rounding it up (never
    down) keeps the normalized weights inside [-1, 1] and makes
    dequantization bit-exact against the f32 container path.
    """
    m = float(np.abs(t).max())
    s = np.float32(m)
    if not np.isfinite(s):
        raise InvalidTensor("tensor magnitude exceeds the float32 range")
    if float(s) < m:
        s = np.nextafter(s, np.float32(np.inf))
    return float(s)


def quantize_tensor(
    t,
    bit_depth: int,
    alpha: float,
    mu_policy: "float | str" = 8.0,
    hard: bool = False,
    mode: str = "standard",
    search: MuSearchConfig = MuSearchConfig(),
) -> tuple[np.ndarray, CentroidCodebook]:
    """Quantize one tensor end to end.

    mu_policy is either a fixed mu value or the string ``"refit"`` to
    re-optimize mu for this tensor at the given alpha.  With hard=False the
    result is the soft projection (training-time); with hard=True every
    value lands exactly on a dequantized centroid, so the output carries at
    most 2**bit_depth distinct values.

    All-zero tensors pass through unchanged with a sentinel codebook of
    scale 0.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.size == 0:
        raise EmptyInput("tensor is empty")
    if not np.isfinite(t).all():
        raise InvalidTensor("tensor contains NaN or Inf")

    scale = _f32_scale(t)
    if scale == 0.0:
        return t.copy(), _sentinel_codebook(bit_depth)
    wn = t.ravel() / scale

    if mu_policy == "refit":
        mu = fit_mu(wn, bit_depth, alpha, search=search, mode=mode)
    else:
        mu = float(mu_policy)
    codes, snapped = _snapped_centroids(bit_depth, mu, mode)

    if hard:
        values, _ = hard_quantize(wn, snapped)
    else:
        values = soft_quantize(wn, snapped, alpha)
    out = (values * scale).reshape(t.shape)

    codebook = CentroidCodebook(
        bit_depth=bit_depth,
        mu=mu,
        grid_codes=codes,
        scale=scale,
        effective_distinct=int(np.unique(codes).size),
    )
    return out, codebook
