"""Laplacian-pyramid stain augmentation toolkit for H&E histology tiles."""

from .imageio import Image, load_image, save_image, to_symmetric, to_unit
from .pyramid import (
    BPScales,
    GaussianPyramid,
    LaplacianPyramid,
    PyramidConfig,
    build_gaussian,
    build_laplacian,
    compute_bp_scales,
    reconstruct,
    reconstruct_at_level,
)
from .generator import (
    GeneratorWeights,
    StainVector,
    augment_random,
    extract_stain,
    interpolate_stain,
    transfer,
)

__version__ = "0.1.0"

__all__ = [
    "Image", "load_image", "save_image", "to_symmetric", "to_unit",
    "BPScales", "GaussianPyramid", "LaplacianPyramid", "PyramidConfig",
    "build_gaussian", "build_laplacian", "compute_bp_scales",
    "reconstruct", "reconstruct_at_level",
    "GeneratorWeights", "StainVector", "augment_random", "extract_stain",
    "interpolate_stain", "transfer",
]
