"""Image segmentation under blur and Poisson noise with AITV-regularised smoothing.

Pipeline: :func:`aitvseg.solver.admm_smooth` smooths the observation,
:mod:`aitvseg.segment` clusters the result (grayscale intensities, or RGB
plus CIELAB for colour), and :mod:`aitvseg.metrics` scores it.
"""

from .degrade import DegradeSpec, degrade, normalize_01, poisson_sample, scale_to_peak
from .errors import (
    AitvSegError,
    DataError,
    DimensionError,
    DomainError,
    InfeasibleError,
    NumericalError,
    ParameterError,
)
from .grid import aitv_value, divergence_adjoint, energy, gradient
from .metrics import dice, match_labels, psnr
from .prox import prox_field, prox_l1_minus_l2, prox_l21
from .segment import Segmentation, kmeans, sat_pipeline, slat_pipeline, threshold_grayscale
from .solver import AdmmConfig, admm_smooth, stationarity_residuals
from .spectral import gaussian_kernel, identity_kernel, motion_kernel, parse_kernel

__version__ = "0.1.0"

__all__ = [
    "AdmmConfig",
    "AitvSegError",
    "DataError",
    "DegradeSpec",
    "DimensionError",
    "DomainError",
    "InfeasibleError",
    "NumericalError",
    "ParameterError",
    "Segmentation",
    "admm_smooth",
    "aitv_value",
    "degrade",
    "dice",
    "divergence_adjoint",
    "energy",
    "gaussian_kernel",
    "gradient",
    "identity_kernel",
    "kmeans",
    "match_labels",
    "motion_kernel",
    "normalize_01",
    "parse_kernel",
    "poisson_sample",
    "prox_field",
    "prox_l1_minus_l2",
    "prox_l21",
    "psnr",
    "sat_pipeline",
    "scale_to_peak",
    "slat_pipeline",
    "stationarity_residuals",
    "threshold_grayscale",
    "__version__",
]
