"""Thermal-image fault detection with a convolutional autoencoder.

A desk-scale pipeline: a deterministic synthetic thermal scene stands in
for camera data; homography-based augmentation builds the training set; a
strided convolutional autoencoder is trained with a 1 - MS-SSIM objective
on normal images only; reconstruction residuals score anomalies and ROC/AUC
measures detection quality.
"""

from .augment import (
    AugDataset,
    AugmentParams,
    Homography,
    SampledAug,
    adjust_brightness_contrast,
    augment_one,
    build_dataset,
    build_homography,
    sample_aug,
    warp_bilinear,
)
from .detect import RocCurve, anomaly_map, anomaly_score, roc_points
from .model import Cae, CaeConfig, build_cae, load_checkpoint, save_checkpoint
from .msssim import SsimParams, ms_ssim, msssim_loss, ssim
from .rng import Rng, mix
from .synth import (
    FaultSpec,
    SceneConfig,
    ThermalFrame,
    generate_split,
    load_pattern,
    render_frame,
    steady_state_field,
    step_response,
)
from .tensor import ConvSpec, Graph, Tensor, grad_check
from .trainer import Adam, EpochStats, TrainConfig, train, validate

__version__ = "0.1.0"

__all__ = [
    "AugDataset",
    "AugmentParams",
    "Homography",
    "SampledAug",
    "adjust_brightness_contrast",
    "augment_one",
    "build_dataset",
    "build_homography",
    "sample_aug",
    "warp_bilinear",
    "RocCurve",
    "anomaly_map",
    "anomaly_score",
    "roc_points",
    "Cae",
    "CaeConfig",
    "build_cae",
    "load_checkpoint",
    "save_checkpoint",
    "SsimParams",
    "ms_ssim",
    "msssim_loss",
    "ssim",
    "Rng",
    "mix",
    "FaultSpec",
    "SceneConfig",
    "ThermalFrame",
    "generate_split",
    "load_pattern",
    "render_frame",
    "steady_state_field",
    "step_response",
    "ConvSpec",
    "Graph",
    "Tensor",
    "grad_check",
    "Adam",
    "EpochStats",
    "TrainConfig",
    "train",
    "validate",
]
