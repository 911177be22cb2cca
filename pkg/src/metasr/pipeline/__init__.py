"""Image ingestion, resampling and training-patch preparation."""

from .io import Image, list_images, load_dataset, load_image, save_image
from .patches import (BRATS_NORM, NormalizationSpec, PatchPair, degrade, denormalize,
                      maximal_info_crop, normalize, sample_patches, to_luminance)
from .resample import bicubic_resize, cubic_kernel

__all__ = [
    "BRATS_NORM", "Image", "NormalizationSpec", "PatchPair", "bicubic_resize", "cubic_kernel",
    "degrade", "denormalize", "list_images", "load_dataset", "load_image", "maximal_info_crop",
    "normalize", "sample_patches", "save_image", "to_luminance",
]
