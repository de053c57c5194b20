"""Phantom tomography: forward model, PCA, image metrics and network inference."""

from ._ptomo import (
    Checkpoint,
    Dataset,
    Geometry,
    Grid,
    NumericError,
    PCAModel,
    ValidationError,
    __version__,
    analytic_projection,
    derive_seed,
    nrmse,
    psnr,
    render_blobs,
    sample_phantom,
    ssim,
)

__all__ = [
    "Checkpoint",
    "Dataset",
    "Geometry",
    "Grid",
    "NumericError",
    "PCAModel",
    "ValidationError",
    "__version__",
    "analytic_projection",
    "derive_seed",
    "nrmse",
    "psnr",
    "render_blobs",
    "sample_phantom",
    "ssim",
]
