"""Inference on whole images and model-vs-bicubic evaluation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import CheckpointError
from .generator import SRNetwork, infer_config
from .metrics import MetricReport, evaluate_set
from .nn import load_checkpoint, no_grad
from .pipeline.patches import BRATS_NORM, NormalizationSpec, degrade, denormalize, to_luminance
from .pipeline.resample import bicubic_resize
from .scales import as_scale, scaled_extent
from .trainer import to_batch


def load_model(path) -> tuple[SRNetwork, NormalizationSpec]:
    """Rebuild the SR network stored in a checkpoint, plus its normalisation."""
    store = load_checkpoint(path)
    try:
        model = SRNetwork(infer_config(store))
        model.load_state_dict(store)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: not a usable SR checkpoint ({exc})") from None
    norm = BRATS_NORM
    if "config.norm_mean" in store and "config.norm_std" in store:
        # shortest float32 repr recovers the decimal that was written
        norm = NormalizationSpec(float(str(store["config.norm_mean"].data.reshape(()))),
                                 float(str(store["config.norm_std"].data.reshape(()))))
    model.eval()
    return model, norm


def super_resolve(model: SRNetwork, lr: np.ndarray, r, norm: NormalizationSpec = BRATS_NORM,
                  quantize: bool = True) -> np.ndarray:
    """Upscale one HxW (or HxWx3) pixel array; output is clamped to [0, 255]."""
    lr = np.asarray(lr, dtype=np.float64)
    if model.config.in_channels == 1:
        lr = to_luminance(lr)
    model.eval()
    dtype = model.generator.head.weight.dtype
    with no_grad():
        out = model(to_batch([lr], norm, dtype), as_scale(r)).data[0]
    pixels = denormalize(out.transpose(1, 2, 0), norm)
    pixels = pixels[:, :, 0] if pixels.shape[2] == 1 else pixels
    return np.rint(pixels) if quantize else pixels


def bicubic_upscale(lr: np.ndarray, r, quantize: bool = True) -> np.ndarray:
    lr = np.asarray(lr, dtype=np.float64)
    h, w = lr.shape[:2]
    out = np.clip(bicubic_resize(lr, scaled_extent(h, r), scaled_extent(w, r)), 0.0, 255.0)
    return np.rint(out) if quantize else out


def evaluate_model(model: SRNetwork, hr_images: Sequence[np.ndarray], r,
                   norm: NormalizationSpec = BRATS_NORM) -> tuple[MetricReport, MetricReport]:
    """Degrade each HR image by ``r``, restore with the model and with bicubic; score both."""
    srs, bics, refs = [], [], []
    for hr in hr_images:
        lr, ref = degrade(to_luminance(hr), r)
        srs.append(super_resolve(model, lr, r, norm))
        bics.append(bicubic_upscale(lr, r))
        refs.append(ref)
    return evaluate_set(srs, refs), evaluate_set(bics, refs)
