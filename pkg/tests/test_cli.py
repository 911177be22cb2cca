import csv
import math
from fractions import Fraction

import numpy as np
import pytest

from helpers import identity_network, save_model
from metasr.cli import GAP, LABEL_HEIGHT, baseline_path, grid_layout, main
from metasr.generator import GeneratorConfig, SRNetwork
from metasr.pipeline.io import load_image, save_image
from metasr.scales import TRAINING_SCALES, format_scale
from metasr.synthetic import phantom_set


@pytest.fixture(scope="module")
def models(tmp_path_factory):
    d = tmp_path_factory.mktemp("models")
    save_model(identity_network(), d / "identity.msrg")
    save_model(SRNetwork(GeneratorConfig(num_features=8, num_res_blocks=1, wpn_hidden=8)), d / "small.msrg")
    return d


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    for i, img in enumerate(phantom_set(3, 48, seed=2)):
        save_image(np.rint(img), d / f"img{i}.png")
    return d


def write_gray(path, h, w, seed=0):
    px = np.random.default_rng(seed).integers(0, 256, size=(h, w)).astype(float)
    save_image(px, path)
    return px


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


# ---------------------------------------------------------------- train

TRAIN_SET = ["--set", "total_updates=5", "--set", "batch_size=2", "--set", "p_lr=10",
             "--set", "scales=2", "--set", "num_features=8", "--set", "num_res_blocks=1",
             "--set", "wpn_hidden=8", "--set", "crop_fraction=1.0"]


def test_train_empty_data_dir(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["train", "--data", str(tmp_path / "empty"), "--out", str(tmp_path / "o")]) == 3
    assert "empty" in capsys.readouterr().err


def test_train_toy_run_and_determinism(tmp_path, data_dir):
    for run in ("a", "b"):
        assert main(["train", "--data", str(data_dir), "--out", str(tmp_path / run), *TRAIN_SET]) == 0
        assert (tmp_path / run / "ckpt_5.msrg").exists() and (tmp_path / run / "ckpt_0.msrg").exists()
    log_a = (tmp_path / "a" / "losses.csv").read_text()
    assert log_a == (tmp_path / "b" / "losses.csv").read_text()
    assert len(log_a.strip().splitlines()) == 6
    assert "total_updates = 5" in (tmp_path / "a" / "config.txt").read_text()


def test_train_config_file_and_unknown_key(tmp_path, data_dir, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("total_updates = 3\nlearning_rat = 0.1\n")
    assert main(["train", "--data", str(data_dir), "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "learning_rat" in capsys.readouterr().err
    assert main(["train", "--data", str(data_dir), "--out", str(tmp_path / "o"), "--set", "seed=x"]) == 2


def test_train_resume_continues(tmp_path, data_dir):
    out = tmp_path / "run"
    assert main(["train", "--data", str(data_dir), "--out", str(out), *TRAIN_SET]) == 0
    more = [a if a != "total_updates=5" else "total_updates=7" for a in TRAIN_SET]
    assert main(["train", "--data", str(data_dir), "--out", str(out), "--resume", str(out / "ckpt_5.msrg"),
                 *more]) == 0
    assert (out / "ckpt_7.msrg").exists()
    assert len((out / "losses.csv").read_text().strip().splitlines()) == 8


def test_train_image_too_small(tmp_path):
    (tmp_path / "d").mkdir()
    write_gray(tmp_path / "d" / "small.pgm", 12, 12)
    code = main(["train", "--data", str(tmp_path / "d"), "--out", str(tmp_path / "o"), *TRAIN_SET])
    assert code == 3


# ---------------------------------------------------------------- upscale


@pytest.mark.parametrize("h,w,r,expected", [(48, 48, "2", (96, 96)), (60, 40, "3.3", (198, 132)),
                                            (20, 17, "1.0", (20, 17)), (21, 30, "2.5", (52, 75))])
def test_upscale_extents(tmp_path, models, h, w, r, expected):
    write_gray(tmp_path / "in.pgm", h, w)
    assert main(["upscale", "--model", str(models / "small.msrg"), "--scale", r,
                 "--in", str(tmp_path / "in.pgm"), "--out", str(tmp_path / "out.png")]) == 0
    assert load_image(tmp_path / "out.png").pixels.shape == expected


def test_upscale_identity_at_one(tmp_path, models):
    px = write_gray(tmp_path / "in.pgm", 16, 19)
    assert main(["upscale", "--model", str(models / "identity.msrg"), "--scale", "1",
                 "--in", str(tmp_path / "in.pgm"), "--out", str(tmp_path / "out.pgm")]) == 0
    np.testing.assert_array_equal(load_image(tmp_path / "out.pgm").pixels, px)


def test_upscale_errors(tmp_path, models):
    write_gray(tmp_path / "in.pgm", 12, 12)
    args = ["--in", str(tmp_path / "in.pgm"), "--out", str(tmp_path / "o.pgm")]
    assert main(["upscale", "--model", str(models / "small.msrg"), "--scale", "0.5", *args]) == 2
    assert main(["upscale", "--model", str(models / "small.msrg"), "--scale", "two", *args]) == 2
    assert main(["upscale", "--model", str(tmp_path / "nope.msrg"), "--scale", "2", *args]) == 3
    (tmp_path / "junk.msrg").write_bytes(b"not a checkpoint")
    assert main(["upscale", "--model", str(tmp_path / "junk.msrg"), "--scale", "2", *args]) == 3
    assert main(["upscale", "--model", str(models / "small.msrg")]) == 2


def test_upscale_all_training_scales_one_checkpoint(tmp_path, models):
    write_gray(tmp_path / "in.pgm", 12, 10)
    for r in TRAINING_SCALES:
        out = tmp_path / f"o{format_scale(r)}.pgm"
        assert main(["upscale", "--model", str(models / "small.msrg"), "--scale", format_scale(r),
                     "--in", str(tmp_path / "in.pgm"), "--out", str(out)]) == 0
        assert load_image(out).pixels.shape == (math.floor(12 * r), math.floor(10 * r))


# ---------------------------------------------------------------- evaluate


def test_evaluate_identity_gives_inf(tmp_path, models, data_dir):
    out = tmp_path / "eval.csv"
    assert main(["evaluate", "--model", str(models / "identity.msrg"), "--data", str(data_dir),
                 "--scale", "1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["path", "scale", "psnr_db", "ssim"]
    body = [r for r in rows[1:] if not r[0].startswith("#")]
    assert [r[0] for r in body] == ["img0.png", "img1.png", "img2.png"]
    assert all(r[2] == "inf" and float(r[3]) == pytest.approx(1.0) for r in body)


def test_evaluate_baseline_deterministic(tmp_path, models, data_dir):
    for run in ("a", "b"):
        assert main(["evaluate", "--model", str(models / "small.msrg"), "--data", str(data_dir),
                     "--scale", "2", "--baseline", "bicubic", "--out", str(tmp_path / run / "e.csv")]) == 0
    a = baseline_path(tmp_path / "a" / "e.csv")
    assert a.name == "e.bicubic.csv"
    assert a.read_bytes() == baseline_path(tmp_path / "b" / "e.csv").read_bytes()
    rows = read_csv(a)
    assert rows[-2][0] == "#mean" and rows[-1][0] == "#std"
    psnrs = [float(r[2]) for r in rows[1:-2]]
    assert float(rows[-2][2]) == pytest.approx(np.mean(psnrs), abs=1e-9)


def test_evaluate_errors(tmp_path, models, data_dir):
    args = ["--data", str(data_dir), "--out", str(tmp_path / "e.csv")]
    assert main(["evaluate", "--model", str(models / "small.msrg"), "--scale", "0.9", *args]) == 2
    assert main(["evaluate", "--model", str(tmp_path / "missing"), "--scale", "2", *args]) == 3
    assert main(["evaluate", "--model", str(models / "small.msrg"), "--scale", "4", *args]) == 3


# ---------------------------------------------------------------- grid


def test_grid_layout_law():
    shapes = [(10, 12), (20, 24)]
    tiles, (height, width) = grid_layout(shapes, scales=[Fraction(1), Fraction(2)])
    assert len(tiles) == 4
    assert [(t.row, t.col, t.method) for t in tiles] == [(0, 0, "bicubic"), (0, 1, "bicubic"),
                                                         (1, 0, "model"), (1, 1, "model")]
    for t in tiles:
        assert (t.height, t.width) == shapes[t.col]
        assert t.top + t.height <= height and t.left + t.width <= width
    assert tiles[0].top == GAP + LABEL_HEIGHT and tiles[0].left == GAP
    assert tiles[2].top > tiles[0].top + 20  # model row sits below the tallest bicubic tile


def test_grid_six_scales(tmp_path, models):
    write_gray(tmp_path / "in.pgm", 12, 10)
    out = tmp_path / "grid.png"
    assert main(["grid", "--model", str(models / "small.msrg"), "--in", str(tmp_path / "in.pgm"),
                 "--out", str(out)]) == 0
    rows = read_csv(tmp_path / "grid.csv")[1:]
    assert len(rows) == 12
    assert {(r[0], r[2]) for r in rows} == {("0", "bicubic"), ("1", "model")}
    composite = load_image(out).pixels
    for r in rows:
        scale = Fraction(r[3])
        assert (int(r[6]), int(r[7])) == (math.floor(12 * scale), math.floor(10 * scale))
        assert int(r[4]) + int(r[6]) <= composite.shape[0] and int(r[5]) + int(r[7]) <= composite.shape[1]
        assert r[8] == "" and r[9] == ""  # no reference, no metrics


def test_grid_scale_one_tiles_equal_input(tmp_path, models):
    px = write_gray(tmp_path / "in.pgm", 14, 16)
    write_gray(tmp_path / "ref.pgm", 28, 32, seed=3)
    out = tmp_path / "g.png"
    assert main(["grid", "--model", str(models / "identity.msrg"), "--in", str(tmp_path / "in.pgm"),
                 "--scales", "1.0", "--reference", str(tmp_path / "ref.pgm"), "--out", str(out)]) == 0
    composite = load_image(out).pixels
    rows = read_csv(tmp_path / "g.csv")[1:]
    assert len(rows) == 2
    for r in rows:
        top, left, h, w = (int(v) for v in r[4:8])
        np.testing.assert_array_equal(composite[top:top + h, left:left + w], px)
        assert math.isfinite(float(r[8]))
    assert rows[0][8] == rows[1][8]


def test_grid_bad_scale_list(tmp_path, models):
    write_gray(tmp_path / "in.pgm", 12, 12)
    base = ["grid", "--model", str(models / "small.msrg"), "--in", str(tmp_path / "in.pgm"),
            "--out", str(tmp_path / "g.png")]
    assert main([*base, "--scales", "1.5,abc"]) == 2
    assert main([*base, "--scales", "2,0.5"]) == 2
    assert main([*base, "--scales", ","]) == 2


# ---------------------------------------------------------------- misc


def test_count_params(capsys):
    assert main(["count-params"]) == 0
    assert capsys.readouterr().out.strip() == "553601"
    assert main(["count-params", "--set", "num_res_blocks=5"]) == 0
    assert capsys.readouterr().out.strip() == str(553601 + 74112)
    assert main(["count-params", "--set", "bogus=1"]) == 2
