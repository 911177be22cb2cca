import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metasr.errors import ShapeError
from metasr.evaluation import bicubic_upscale
from metasr.metrics import MetricReport, evaluate_set, psnr, ssim
from metasr.pipeline.patches import degrade
from metasr.synthetic import phantom_set

C1, C2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2


def psnr_oracle(a, b):
    mse = sum((float(x) - float(y)) ** 2 for x, y in zip(a.ravel(), b.ravel())) / a.size
    return 10 * math.log10(255.0 ** 2 / mse)


def ssim_oracle(a, b):
    """Direct sliding-window SSIM with an explicit 2-D Gaussian weight table."""
    x = np.arange(11) - 5.0
    w = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2 * 1.5 ** 2))
    w /= w.sum()
    vals = []
    for i in range(a.shape[0] - 10):
        for j in range(a.shape[1] - 10):
            pa, pb = a[i:i + 11, j:j + 11], b[i:i + 11, j:j + 11]
            ma, mb = (w * pa).sum(), (w * pb).sum()
            va = (w * (pa - ma) ** 2).sum()
            vb = (w * (pb - mb) ** 2).sum()
            cab = (w * (pa - ma) * (pb - mb)).sum()
            vals.append((2 * ma * mb + C1) * (2 * cab + C2) / ((ma ** 2 + mb ** 2 + C1) * (va + vb + C2)))
    return float(np.mean(vals))


def test_psnr_identical_is_inf():
    a = np.full((4, 4), 9.0)
    assert psnr(a, a) == math.inf


def test_psnr_extremes_zero_db():
    assert psnr(np.zeros((5, 5)), np.full((5, 5), 255.0)) == 0.0


@settings(max_examples=100)
@given(h=st.integers(1, 12), w=st.integers(1, 12), seed=st.integers(0, 2**31))
def test_psnr_matches_oracle(h, w, seed):
    r = np.random.default_rng(seed)
    a, b = r.uniform(0, 255, size=(h, w)), r.uniform(0, 255, size=(h, w))
    assert psnr(a, b) == pytest.approx(psnr_oracle(a, b), abs=1e-9)


def test_psnr_monotone_in_noise(rng):
    a = rng.uniform(0, 255, size=(32, 32))
    noise = rng.normal(size=a.shape)
    values = [psnr(a, a + s * noise) for s in (1.0, 5.0, 25.0)]
    assert values[0] > values[1] > values[2]


def test_ssim_identical_is_one(rng):
    a = rng.uniform(0, 255, size=(16, 16))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constant_images():
    u, v = 100.0, 140.0
    got = ssim(np.full((12, 12), u), np.full((12, 12), v))
    assert got == pytest.approx((2 * u * v + C1) / (u * u + v * v + C1), rel=1e-9)


def test_ssim_random_16x16_oracle(rng):
    a, b = rng.uniform(0, 255, size=(16, 16)), rng.uniform(0, 255, size=(16, 16))
    assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-7)


@settings(max_examples=100)
@given(h=st.integers(11, 16), w=st.integers(11, 16), seed=st.integers(0, 2**31),
       noise=st.floats(0.5, 80))
def test_ssim_matches_oracle(h, w, seed, noise):
    r = np.random.default_rng(seed)
    a = r.uniform(0, 255, size=(h, w))
    b = np.clip(a + r.normal(0, noise, size=a.shape), 0, 255)
    assert ssim(a, b) == pytest.approx(ssim_oracle(a, b), abs=1e-7)


@settings(max_examples=40)
@given(seed=st.integers(0, 2**31))
def test_symmetry_flip_invariance_and_bound(seed):
    r = np.random.default_rng(seed)
    a, b = r.uniform(0, 255, size=(14, 13)), r.uniform(0, 255, size=(14, 13))
    assert psnr(a, b) == pytest.approx(psnr(b, a), abs=1e-12)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)
    for flip in (np.fliplr, np.flipud):
        assert psnr(flip(a), flip(b)) == pytest.approx(psnr(a, b), abs=1e-9)
        assert ssim(flip(a), flip(b)) == pytest.approx(ssim(a, b), abs=1e-9)
    assert ssim(a, b) < 1.0


def test_shape_errors():
    with pytest.raises(ShapeError):
        psnr(np.zeros((3, 3)), np.zeros((3, 4)))
    with pytest.raises(ShapeError):
        ssim(np.zeros((10, 20)), np.zeros((10, 20)))


def test_report_single_pair():
    rep = MetricReport.from_values([23.5], [0.8])
    assert rep.mean_psnr == 23.5 and rep.std_psnr == 0.0 and rep.mean_ssim == 0.8


def test_report_population_std():
    rep = MetricReport.from_values([10.0, 20.0], [0.5, 0.7])
    assert rep.mean_psnr == 15.0 and rep.std_psnr == 5.0


def test_report_excludes_inf_with_warning():
    with pytest.warns(RuntimeWarning):
        rep = MetricReport.from_values([math.inf, 10.0, 20.0], [1.0, 0.5, 0.5])
    assert rep.mean_psnr == 15.0
    with pytest.warns(RuntimeWarning):
        assert MetricReport.from_values([math.inf], [1.0]).mean_psnr == math.inf


@settings(max_examples=30)
@given(st.lists(st.floats(0, 60), min_size=1, max_size=10))
def test_report_aggregates_recompute(values):
    rep = MetricReport.from_values(values, [v / 60 for v in values])
    assert rep.mean_psnr == pytest.approx(float(np.mean(rep.psnr_db)), abs=1e-9)
    assert rep.std_psnr == pytest.approx(float(np.std(rep.psnr_db)), abs=1e-9)
    assert rep.std_ssim == pytest.approx(float(np.std(rep.ssim)), abs=1e-9)


def test_evaluate_set_uses_luminance(rng):
    rgb = rng.uniform(0, 255, size=(12, 12, 3))
    gray = rgb @ np.array([0.299, 0.587, 0.114])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = evaluate_set([rgb], [gray])
    assert rep.psnr_db == [math.inf] and rep.ssim[0] == pytest.approx(1.0)


def test_bicubic_report_is_deterministic():
    def run():
        srs, refs = [], []
        for hr in phantom_set(3, 48, seed=5):
            lr, ref = degrade(hr, 2)
            srs.append(bicubic_upscale(lr, 2))
            refs.append(ref)
        return evaluate_set(srs, refs)

    a, b = run(), run()
    assert a.psnr_db == b.psnr_db and a.ssim == b.ssim
