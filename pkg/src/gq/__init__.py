"""Soft-to-hard weight quantization with self-adjusting mu-law centroids.

Public surface re-exported here; see README.md for the tour.
"""

from .centroids import (
    AnnealSchedule,
    CentroidVector,
    MuLawConfig,
    anneal_alpha,
    build_linear_centroids,
    mulaw_expand,
    snap_to_int8_grid,
)
from .checkpoint import Checkpoint, read_checkpoint, write_checkpoint
from .kernels import BACKEND
from .packing import (
    PackedModel,
    PackedTensor,
    dequantize_packed,
    pack_indices,
    pack_quantized_tensor,
    read_packed_model,
    unpack_indices,
    write_packed_model,
)
from .quantize import (
    CentroidCodebook,
    MuSearchConfig,
    fit_mu,
    hard_quantize,
    quantize_tensor,
    soft_assign,
    soft_quantize,
    soft_quantize_jacobian,
)
from .footprint import FootprintReport, footprint_report, load_topology
from .analysis import KernelStats, allocation_report, kernel_stats, mu_benefit
from .tasks import make_task
from .models import ToyModel, finite_difference_grads, make_model
from .training import (
    TrainConfig,
    TrainReport,
    default_bit_map,
    frequency_ablation,
    gq_callback,
    train,
)

__all__ = [
    "AnnealSchedule",
    "BACKEND",
    "CentroidCodebook",
    "CentroidVector",
    "Checkpoint",
    "FootprintReport",
    "KernelStats",
    "MuLawConfig",
    "MuSearchConfig",
    "PackedModel",
    "PackedTensor",
    "ToyModel",
    "TrainConfig",
    "TrainReport",
    "allocation_report",
    "anneal_alpha",
    "build_linear_centroids",
    "default_bit_map",
    "dequantize_packed",
    "finite_difference_grads",
    "fit_mu",
    "footprint_report",
    "frequency_ablation",
    "gq_callback",
    "hard_quantize",
    "kernel_stats",
    "load_topology",
    "make_model",
    "make_task",
    "mu_benefit",
    "mulaw_expand",
    "pack_indices",
    "pack_quantized_tensor",
    "quantize_tensor",
    "read_checkpoint",
    "read_packed_model",
    "snap_to_int8_grid",
    "soft_assign",
    "soft_quantize",
    "soft_quantize_jacobian",
    "train",
    "unpack_indices",
    "write_checkpoint",
    "write_packed_model",
]
