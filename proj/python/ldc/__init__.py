"""Toy latent diffusion with localized structural control."""

from ._ldc import (
    ModelBundle,
    NoiseSchedule,
    build_schedule,
    dmse_in,
    dmse_out,
    downsample_mask,
    extract_edges,
    forward_diffuse,
    gaussian_downsample,
    geometric_decode,
    geometric_encode,
    latent_filter,
    loss_diff,
    loss_sim,
    loss_total,
    make_sample,
    predict_z0,
    sample_roi_mask,
)

__all__ = [
    "ModelBundle",
    "NoiseSchedule",
    "build_schedule",
    "dmse_in",
    "dmse_out",
    "downsample_mask",
    "extract_edges",
    "forward_diffuse",
    "gaussian_downsample",
    "geometric_decode",
    "geometric_encode",
    "latent_filter",
    "loss_diff",
    "loss_sim",
    "loss_total",
    "make_sample",
    "predict_z0",
    "sample_roi_mask",
]
