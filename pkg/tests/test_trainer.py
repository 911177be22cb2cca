import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from metasr.errors import DataError
from metasr.generator import GeneratorConfig
from metasr.nn import load_checkpoint
from metasr.scales import TRAINING_SCALES
from metasr.synthetic import phantom_set
from metasr.trainer import (TrainConfig, checkpoint_path, init_state, load_state, lr_at, make_batch,
                            prepare_crops, train, train_step)

TINY_MODEL = GeneratorConfig(num_features=8, num_res_blocks=1, wpn_hidden=8)


def tiny(**kw) -> TrainConfig:
    base = dict(total_updates=10, batch_size=2, p_lr=10, scales=(Fraction(2), Fraction(5, 2)),
                crop_fraction=1.0, checkpoint_interval=1000, model=TINY_MODEL)
    base.update(kw)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def images():
    return phantom_set(3, 32, seed=1)


def params_of(state):
    return {k: v.data.copy() for k, v in state.to_store().items()}


def assert_same(a, b):
    assert a.keys() == b.keys()
    for k in a:
        assert a[k].tobytes() == b[k].tobytes(), k


# ---------------------------------------------------------------- schedule


def test_lr_schedule_points():
    cfg = TrainConfig()
    assert lr_at(0, cfg) == 1e-4
    assert lr_at(1, cfg) == 1e-4
    assert lr_at(59_999, cfg) == 1e-4
    assert lr_at(60_000, cfg) == pytest.approx(8e-5, rel=1e-12)
    assert lr_at(120_000, cfg) == pytest.approx(6.4e-5, rel=1e-12)
    with pytest.raises(ValueError):
        lr_at(-1, cfg)


def test_lr_schedule_is_monotone_staircase():
    cfg = TrainConfig()
    values = [lr_at(t, cfg) for t in range(0, 400_000, 7_919)]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert len(set(values)) == 400_000 // 60_000 + 1


# ---------------------------------------------------------------- stepping


def test_ten_steps_deterministic(images):
    a = train(tiny(), images)
    b = train(tiny(), images)
    assert [r.row() for r in a.history] == [r.row() for r in b.history]
    assert_same(params_of(a), params_of(b))


def test_losses_finite_over_100_steps(images):
    state = train(tiny(total_updates=100), images)
    assert len(state.history) == 100
    for rec in state.history:
        assert all(math.isfinite(v) for v in (rec.l1, rec.adv_g, rec.adv_d, rec.perceptual, rec.total))
    assert {rec.scale for rec in state.history} == {Fraction(2), Fraction(5, 2)}


def test_zero_updates_writes_initial_checkpoint(tmp_path, images):
    cfg = tiny(total_updates=0)
    state = train(cfg, images, out_dir=tmp_path)
    assert sorted(p.name for p in tmp_path.glob("*.msrg")) == ["ckpt_0.msrg"]
    init = params_of(init_state(cfg))
    assert_same(params_of(state), init)
    stored = load_checkpoint(checkpoint_path(tmp_path, 0))
    for k in init:
        assert stored[k].data.tobytes() == init[k].tobytes()


def test_resume_is_bit_exact(tmp_path, images):
    cfg = tiny(total_updates=40, checkpoint_interval=20)
    straight = train(cfg, images, out_dir=tmp_path / "a")
    train(tiny(total_updates=20, checkpoint_interval=20), images, out_dir=tmp_path / "b")
    resumed = load_state(cfg, checkpoint_path(tmp_path / "b", 20))
    assert resumed.update_count == 20
    resumed = train(cfg, images, out_dir=tmp_path / "b", state=resumed)
    assert_same(params_of(straight), params_of(resumed))
    log_a = (tmp_path / "a" / "losses.csv").read_text()
    log_b = (tmp_path / "b" / "losses.csv").read_text()
    assert log_a == log_b


def test_updates_are_disjoint(images):
    cfg = tiny()
    state = init_state(cfg)
    crops = prepare_crops(images, cfg)
    gen0 = {k: v.data.copy() for k, v in state.model.named_parameters()}
    disc0 = {k: v.data.copy() for k, v in state.discriminator.named_parameters()}
    phi0 = {k: v.data.copy() for k, v in state.phi.named_parameters()}
    train_step(state, make_batch(crops, cfg, 0))
    assert any(not np.array_equal(p.data, gen0[k]) for k, p in state.model.named_parameters())
    assert any(not np.array_equal(p.data, disc0[k]) for k, p in state.discriminator.named_parameters())
    assert all(np.array_equal(p.data, phi0[k]) for k, p in state.phi.named_parameters())
    # each optimiser only ever saw its own network's parameters
    assert set(state.opt_g.m) == set(dict(state.model.named_parameters()))
    assert set(state.opt_d.m) == set(dict(state.discriminator.named_parameters()))


def test_scale_histogram_covers_every_scale(images):
    cfg = TrainConfig(batch_size=1, p_lr=8, crop_fraction=1.0, model=TINY_MODEL)
    crops = prepare_crops(images, cfg)
    counts = Counter(make_batch(crops, cfg, t)[0].scale for t in range(3000))
    assert set(counts) == set(TRAINING_SCALES)
    assert min(counts.values()) > 50


def test_batch_shares_one_scale(images):
    cfg = tiny(batch_size=4)
    crops = prepare_crops(images, cfg)
    for t in range(20):
        assert len({p.scale for p in make_batch(crops, cfg, t)}) == 1


def test_mixed_scale_batch_rejected(images):
    cfg = tiny()
    crops = prepare_crops(images, cfg)
    a, b = make_batch(crops, cfg, 0)[0], None
    t = 1
    while b is None or b.scale == a.scale:
        b = make_batch(crops, cfg, t)[0]
        t += 1
    with pytest.raises(ValueError):
        train_step(init_state(cfg), [a, b])


def test_prepare_crops_errors(images):
    with pytest.raises(DataError):
        prepare_crops([], tiny())
    with pytest.raises(DataError, match="tiny.pgm"):
        prepare_crops([np.zeros((20, 20))], tiny(), names=["tiny.pgm"])
