"""bidbench: deterministic mixed-image synthesis and scoring.

Generates superimposed images from arbitrary subsets of source components
(linear mixes, weather composites, raindrop rendering, overlay chains),
records bit-exact regeneration manifests, and scores decomposition
methods with PSNR / SSIM / LAB RMSE / source-prediction accuracy.
"""

from .imgcore import (
    augment,
    gaussian_blur,
    load_image,
    resize_bilinear,
    save_image,
    srgb_to_lab,
)
from .linmix import linear_mix
from .metrics import eval_run, prediction_accuracy, psnr, rmse_lab, ssim
from .scenario import (
    CaseMask,
    ComponentSpec,
    MixManifest,
    SelectionPolicy,
    compose,
    derive_stream,
    enumerate_cases,
    read_manifests,
    sample_case,
    task_policy,
    write_manifests,
)
from .streams import Stream

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Stream",
    "derive_stream",
    "load_image",
    "save_image",
    "srgb_to_lab",
    "gaussian_blur",
    "resize_bilinear",
    "augment",
    "linear_mix",
    "CaseMask",
    "ComponentSpec",
    "SelectionPolicy",
    "MixManifest",
    "enumerate_cases",
    "sample_case",
    "task_policy",
    "compose",
    "write_manifests",
    "read_manifests",
    "psnr",
    "ssim",
    "rmse_lab",
    "prediction_accuracy",
    "eval_run",
]
