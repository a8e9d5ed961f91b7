"""Combined-dictionary deep-unfolding network for two-source image fusion.

The fused luminance comes from a stack of CDBlocks, each one a single joint
soft-thresholded gradient step over the unique, X-specific and Y-specific
feature maps of a pair of registered images. Everything runs on numpy with
hand-written adjoints, so training needs no autodiff framework.
"""

from .cdblock import CDBlockParams, cdblock_step, alternating_step, soft_threshold
from .color import decode_image, encode_image, fuse_color, rgb_to_ycbcr, ycbcr_to_rgb
from .cost import cost_report, m_am, m_joint, reduction
from .loss import adaptive_weights, hlif_loss, scharr_magnitude
from .metrics import MetricReport, evaluate
from .network import (
    ModelConfig,
    ModelFormatError,
    ModelParams,
    decompose,
    fuse_luminance,
    init_params,
    load_model,
    parameter_count,
    save_model,
)
from .tensor import DimensionError, MultCounter, conv2d, conv2d_transposed
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "CDBlockParams", "cdblock_step", "alternating_step", "soft_threshold",
    "decode_image", "encode_image", "fuse_color", "rgb_to_ycbcr", "ycbcr_to_rgb",
    "cost_report", "m_am", "m_joint", "reduction",
    "adaptive_weights", "hlif_loss", "scharr_magnitude",
    "MetricReport", "evaluate",
    "ModelConfig", "ModelFormatError", "ModelParams", "decompose", "fuse_luminance",
    "init_params", "load_model", "parameter_count", "save_model",
    "DimensionError", "MultCounter", "conv2d", "conv2d_transposed",
    "TrainConfig", "train",
]
