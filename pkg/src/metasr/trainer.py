"""Adversarial training loop with per-batch scale sampling and exact resume.

Each update draws its batch from ``np.random.default_rng([seed, step])``, so the
data stream depends only on the step index; a checkpoint therefore needs no
RNG state for bit-exact resumption.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .adversarial import (Discriminator, FeatureExtractor, LossWeights, discriminator_loss,
                          generator_loss_terms)
from .errors import DataError
from .generator import GeneratorConfig, SRNetwork
from .nn import AdamState, ParameterStore, Tensor, adam_step, load_checkpoint, save_checkpoint
from .nn.tensor import clip, concat, take
from .pipeline.patches import (NormalizationSpec, PatchPair, maximal_info_crop, normalize,
                               sample_patches, to_luminance)
from .scales import TRAINING_SCALES, format_scale, sample_scale, scaled_extent

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "scale", "lr", "l1", "adv_g", "adv_d", "perceptual", "total")


@dataclass
class TrainConfig:
    total_updates: int = 500
    batch_size: int = 8
    lr0: float = 1e-4
    decay_factor: float = 0.8
    decay_interval: int = 60_000
    p_lr: int = 48
    seed: int = 0
    scales: tuple[Fraction, ...] = TRAINING_SCALES
    crop_fraction: float = 0.5
    checkpoint_interval: int = 100
    norm_mean: float = 0.370
    norm_std: float = 0.117
    w_l1: float = 1.0
    w_adv: float = 0.001
    w_perc: float = 0.006
    perceptual_weights: str | None = None
    model: GeneratorConfig = field(default_factory=GeneratorConfig)

    @property
    def norm(self) -> NormalizationSpec:
        return NormalizationSpec(self.norm_mean, self.norm_std)

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.w_l1, self.w_adv, self.w_perc)


@dataclass
class LossRecord:
    step: int
    scale: Fraction
    lr: float
    l1: float
    adv_g: float
    adv_d: float
    perceptual: float
    total: float

    def row(self) -> list[str]:
        return [str(self.step), format_scale(self.scale)] + [
            repr(v) for v in (self.lr, self.l1, self.adv_g, self.adv_d, self.perceptual, self.total)
        ]


@dataclass
class TrainState:
    config: TrainConfig
    model: SRNetwork
    discriminator: Discriminator
    phi: FeatureExtractor
    opt_g: AdamState
    opt_d: AdamState
    update_count: int = 0
    history: list[LossRecord] = field(default_factory=list)

    def to_store(self) -> ParameterStore:
        store = self.model.state_dict()
        store.update_from(self.discriminator.state_dict("discriminator."))
        store.update_from(self.opt_g.to_store("optim.generator."))
        store.update_from(self.opt_d.to_store("optim.discriminator."))
        store["train.update_count"] = np.array(self.update_count, dtype=np.float32)
        store["config.norm_mean"] = np.array(self.config.norm_mean, dtype=np.float32)
        store["config.norm_std"] = np.array(self.config.norm_std, dtype=np.float32)
        return store

    def load_store(self, store: ParameterStore) -> None:
        self.model.load_state_dict(store)
        self.discriminator.load_state_dict(store, "discriminator.")
        self.opt_g.load_store(store, "optim.generator.")
        self.opt_d.load_store(store, "optim.discriminator.")
        self.update_count = int(store["train.update_count"].item())


def lr_at(t: int, cfg: TrainConfig) -> float:
    """Learning rate before update ``t``: cut by 20% every ``decay_interval`` updates."""
    if t < 0:
        raise ValueError(f"update index must be >= 0, got {t}")
    return cfg.lr0 * cfg.decay_factor ** (t // cfg.decay_interval)


def init_state(cfg: TrainConfig) -> TrainState:
    model_cfg = replace(cfg.model, init_seed=cfg.seed)
    channels = model_cfg.in_channels
    if cfg.perceptual_weights:
        phi = FeatureExtractor.load(cfg.perceptual_weights)
    else:
        phi = FeatureExtractor.random(channels)
    return TrainState(
        config=cfg,
        model=SRNetwork(model_cfg),
        discriminator=Discriminator(channels, seed=cfg.seed + 1),
        phi=phi,
        opt_g=AdamState(lr=cfg.lr0),
        opt_d=AdamState(lr=cfg.lr0),
    )


def to_batch(arrays: Sequence[np.ndarray], norm: NormalizationSpec, dtype=np.float32) -> Tensor:
    """Stack HxW or HxWx3 pixel arrays into a normalised NCHW tensor."""
    stacked = np.stack([a if a.ndim == 3 else a[:, :, None] for a in arrays]).transpose(0, 3, 1, 2)
    return Tensor(normalize(stacked, norm), dtype=dtype)


def discriminator_view(sr: Tensor, norm: NormalizationSpec) -> Tensor:
    """Clamp SR output to the [0, 255] pixel range, expressed in normalised units."""
    return clip(sr, (0.0 - norm.mean) / norm.std, (1.0 - norm.mean) / norm.std)


def _set_requires_grad(params, flag: bool) -> None:
    for p in params:
        p.requires_grad = flag


def train_step(state: TrainState, batch: Sequence[PatchPair]) -> LossRecord:
    """One discriminator update followed by one generator update."""
    scales = {p.scale for p in batch}
    if len(scales) != 1:
        raise ValueError(f"all pairs in a batch must share one scale, got {sorted(float(s) for s in scales)}")
    (r,) = scales
    cfg = state.config
    norm = cfg.norm
    lr = lr_at(state.update_count, cfg)
    state.opt_g.lr = state.opt_d.lr = lr
    dtype = state.model.generator.head.weight.dtype

    x = to_batch([p.lr for p in batch], norm, dtype)
    y = to_batch([p.hr for p in batch], norm, dtype)
    n = len(batch)

    state.model.train()
    sr = state.model(x, r)

    disc = state.discriminator
    disc.zero_grad()
    d_out = disc(concat([y, discriminator_view(sr.detach(), norm)], axis=0))
    d_real, d_fake = take(d_out, np.arange(n)), take(d_out, np.arange(n, 2 * n))
    d_loss = discriminator_loss(d_real, d_fake)
    d_loss.backward()
    adam_step(disc.trainable(), state.opt_d)

    d_params = disc.parameters()
    _set_requires_grad(d_params, False)
    try:
        d_fake_g = disc(discriminator_view(sr, norm))
    finally:
        _set_requires_grad(d_params, True)
    terms = generator_loss_terms(sr, y, d_fake_g, state.phi, cfg.loss_weights)
    state.model.zero_grad()
    terms["total"].backward()
    adam_step(state.model.trainable(), state.opt_g)

    state.update_count += 1
    record = LossRecord(
        step=state.update_count,
        scale=r,
        lr=lr,
        l1=terms["l1"].item(),
        adv_g=terms["adversarial"].item(),
        adv_d=d_loss.item(),
        perceptual=terms["perceptual"].item(),
        total=terms["total"].item(),
    )
    state.history.append(record)
    return record


def prepare_crops(images: Sequence[np.ndarray], cfg: TrainConfig, names: Sequence[str] | None = None) -> list[np.ndarray]:
    """Maximal-information crops, checked up front against the largest HR patch."""
    if not images:
        raise DataError("dataset is empty")
    names = list(names) if names is not None else [f"image[{i}]" for i in range(len(images))]
    need = scaled_extent(cfg.p_lr, max(cfg.scales))
    crops, offenders = [], []
    for name, img in zip(names, images):
        img = np.asarray(img, dtype=np.float64)
        if cfg.model.in_channels == 1:
            img = to_luminance(img)
        h, w = img.shape[:2]
        ch = max(1, int(round(h * cfg.crop_fraction)))
        cw = max(1, int(round(w * cfg.crop_fraction)))
        if ch < need or cw < need:
            offenders.append(f"{name} (crop {ch}x{cw} from {h}x{w})")
            continue
        crops.append(maximal_info_crop(img, ch, cw)[0])
    if offenders:
        raise DataError(
            f"images too small for HR patches of {need}x{need} "
            f"(p_lr={cfg.p_lr}, max scale {float(max(cfg.scales)):g}): " + ", ".join(offenders)
        )
    return crops


def make_batch(crops: Sequence[np.ndarray], cfg: TrainConfig, step: int) -> list[PatchPair]:
    rng = np.random.default_rng([cfg.seed, step])
    r = sample_scale(rng, cfg.scales)
    picks = rng.integers(len(crops), size=cfg.batch_size)
    return [sample_patches(crops[i], r, 1, cfg.p_lr, rng)[0] for i in picks]


def checkpoint_path(out_dir, step: int) -> Path:
    return Path(out_dir) / f"ckpt_{step}.msrg"


def save_state(state: TrainState, path) -> None:
    save_checkpoint(state.to_store(), path)


def load_state(cfg: TrainConfig, path) -> TrainState:
    state = init_state(cfg)
    state.load_store(load_checkpoint(path))
    return state


def train(
    cfg: TrainConfig,
    images: Sequence[np.ndarray],
    out_dir=None,
    state: TrainState | None = None,
    names: Sequence[str] | None = None,
) -> TrainState:
    """Run updates until ``cfg.total_updates``; resumes from ``state`` if given."""
    crops = prepare_crops(images, cfg, names)
    state = state or init_state(cfg)
    log_file = writer = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        log_path = out_dir / "losses.csv"
        fresh = state.update_count == 0 or not log_path.exists()
        log_file = open(log_path, "w" if fresh else "a", newline="")
        writer = csv.writer(log_file)
        if fresh:
            writer.writerow(LOG_COLUMNS)
            log_file.flush()
        if state.update_count == 0:
            save_state(state, checkpoint_path(out_dir, 0))
    try:
        while state.update_count < cfg.total_updates:
            record = train_step(state, make_batch(crops, cfg, state.update_count))
            if not all(math.isfinite(v) for v in (record.l1, record.adv_d, record.total)):
                log.warning("non-finite loss at step %d: %s", record.step, record)
            if writer is not None:
                writer.writerow(record.row())
                log_file.flush()
                if state.update_count % cfg.checkpoint_interval == 0:
                    save_state(state, checkpoint_path(out_dir, state.update_count))
            if record.step % 50 == 0:
                log.info("step %d scale %s l1 %.4f total %.4f", record.step, format_scale(record.scale),
                         record.l1, record.total)
        if out_dir is not None and not checkpoint_path(out_dir, state.update_count).exists():
            save_state(state, checkpoint_path(out_dir, state.update_count))
    finally:
        if log_file is not None:
            log_file.close()
    return state
