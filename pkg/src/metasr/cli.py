"""``metasr`` command line: train, upscale, evaluate, grid.

Exit codes: 0 success, 2 usage or configuration error, 3 data or model error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import dump_config, load_config, parse_overrides
from .errors import CheckpointError, ConfigError, DataError, ImageFormatError, ShapeError
from .evaluation import bicubic_upscale, load_model, super_resolve
from .generator import count_parameters
from .metrics import MetricReport, psnr, ssim, SSIM_WINDOW
from .pipeline.io import Image, load_dataset, load_image, relative_name, save_image
from .pipeline.patches import degrade, maximal_info_crop, to_luminance
from .pipeline.resample import bicubic_resize
from .scales import as_scale, format_scale
from .trainer import init_state, load_state, train

log = logging.getLogger("metasr")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
CSV_COLUMNS = ("path", "scale", "psnr_db", "ssim")


class UsageError(Exception):
    pass


def parse_scale(text: str):
    try:
        r = as_scale(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse scale {text!r}") from None
    if r < 1:
        raise UsageError(f"scale must be >= 1, got {text}")
    return r


def parse_scale_list(text: str) -> list:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise UsageError(f"empty scale list {text!r}")
    return [parse_scale(p) for p in parts]


def _fmt(x: float) -> str:
    return repr(float(x))


# -- train -----------------------------------------------------------------


def _images(directory) -> tuple[list[np.ndarray], list[str]]:
    entries = load_dataset(directory)
    return [img.pixels for _, img in entries], [relative_name(p, directory) for p, _ in entries]


def cmd_train(args) -> int:
    overrides = parse_overrides(args.set)
    if args.perceptual_weights:
        overrides["perceptual_weights"] = args.perceptual_weights
    cfg = load_config(args.config, overrides)
    images, names = _images(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg))

    state = None
    if args.resume:
        state = load_state(cfg, args.resume)
    elif args.pretrain:
        pre_images, pre_names = _images(args.pretrain)
        log.info("pretraining on %d images from %s", len(pre_images), args.pretrain)
        pre = train(cfg, pre_images, out / "pretrain", names=pre_names)
        # keep the learned weights, restart the schedule and optimiser moments
        state = init_state(cfg)
        state.model, state.discriminator = pre.model, pre.discriminator
    state = train(cfg, images, out, state=state, names=names)
    last = state.history[-1] if state.history else None
    print(f"trained {state.update_count} updates; checkpoints in {out}"
          + (f"; final l1 {last.l1:.5f}" if last else ""))
    return EXIT_OK


# -- upscale ---------------------------------------------------------------


def cmd_upscale(args) -> int:
    r = parse_scale(args.scale)
    model, norm = load_model(args.model)
    src = load_image(args.inp)
    sr = super_resolve(model, src.pixels, r, norm)
    save_image(Image(sr, src.bit_depth), args.out)
    print(f"{args.inp}: {src.height}x{src.width} -> {sr.shape[0]}x{sr.shape[1]} (x{format_scale(r)})")
    return EXIT_OK


# -- evaluate --------------------------------------------------------------


def evaluation_pairs(hr: np.ndarray, r) -> tuple[np.ndarray, np.ndarray]:
    """LR input and HR reference from the maximal-information crop of ``hr``'s luminance."""
    crop, _ = maximal_info_crop(to_luminance(hr))
    return degrade(crop, r)


def _write_report(path: Path, names, r, report: MetricReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for name, p, s in zip(names, report.psnr_db, report.ssim):
            w.writerow([name, format_scale(r), _fmt(p), _fmt(s)])
        w.writerow(["#mean", format_scale(r), _fmt(report.mean_psnr), _fmt(report.mean_ssim)])
        w.writerow(["#std", format_scale(r), _fmt(report.std_psnr), _fmt(report.std_ssim)])


def baseline_path(out) -> Path:
    out = Path(out)
    return out.with_name(f"{out.stem}.bicubic{out.suffix or '.csv'}")


def cmd_evaluate(args) -> int:
    r = parse_scale(args.scale)
    model, norm = load_model(args.model)
    entries = load_dataset(args.data)
    names, srs, bics, refs = [], [], [], []
    for path, img in entries:
        lr, ref = evaluation_pairs(img.pixels, r)
        if min(ref.shape) < SSIM_WINDOW or min(lr.shape) < model.config.head_kernel:
            raise DataError(f"{path}: crop {ref.shape[0]}x{ref.shape[1]} too small to evaluate at x{format_scale(r)}")
        names.append(relative_name(path, args.data))
        srs.append(super_resolve(model, lr, r, norm))
        bics.append(bicubic_upscale(lr, r))
        refs.append(ref)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        reports = {
            "model": MetricReport.from_values([psnr(s, h) for s, h in zip(srs, refs)],
                                              [ssim(s, h) for s, h in zip(srs, refs)]),
            "bicubic": MetricReport.from_values([psnr(b, h) for b, h in zip(bics, refs)],
                                                [ssim(b, h) for b, h in zip(bics, refs)]),
        }
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_report(out, names, r, reports["model"])
    if args.baseline:
        _write_report(baseline_path(out), names, r, reports["bicubic"])
    for label, rep in reports.items():
        if label == "bicubic" and not args.baseline:
            continue
        print(f"{label:8s} x{format_scale(r)}: PSNR {rep.mean_psnr:.3f} dB  SSIM {rep.mean_ssim:.4f}  (n={len(rep.psnr_db)})")
    return EXIT_OK


# -- grid ------------------------------------------------------------------

LABEL_HEIGHT = 14
GAP = 4


@dataclass(frozen=True)
class Tile:
    row: int
    col: int
    method: str
    scale: object
    top: int
    left: int
    height: int
    width: int


def grid_layout(shapes: list[tuple[int, int]], label_widths: list[int] | None = None,
                methods=("bicubic", "model"), scales=None) -> tuple[list[Tile], tuple[int, int]]:
    """Place one tile per (method, scale); columns share a width, rows share a height."""
    label_widths = label_widths or [0] * len(shapes)
    col_w = [max(w, lw) for (_, w), lw in zip(shapes, label_widths)]
    row_h = LABEL_HEIGHT + max(h for h, _ in shapes)
    lefts = np.concatenate([[GAP], GAP + np.cumsum(np.add(col_w, GAP))[:-1]]).astype(int)
    scales = scales if scales is not None else [None] * len(shapes)
    tiles = []
    for row, method in enumerate(methods):
        top = GAP + row * (row_h + GAP)
        for col, ((h, w), left, r) in enumerate(zip(shapes, lefts, scales)):
            tiles.append(Tile(row, col, method, r, top + LABEL_HEIGHT, int(left), h, w))
    width = int(GAP + sum(col_w) + GAP * len(col_w))
    height = GAP + len(methods) * (row_h + GAP)
    return tiles, (height, width)


def _label(method: str, r, metrics) -> str:
    text = f"{method} x{format_scale(r)}"
    if metrics is not None:
        p, s = metrics
        text += f" {p:.2f}dB/{s:.3f}" if math.isfinite(p) else f" inf/{s:.3f}"
    return text


def _tile_metrics(tile: np.ndarray, reference: np.ndarray | None):
    if reference is None:
        return None
    ref = np.rint(np.clip(bicubic_resize(reference, *tile.shape[:2]), 0, 255))
    s = ssim(tile, ref) if min(tile.shape[:2]) >= SSIM_WINDOW else math.nan
    return psnr(tile, ref), s


def cmd_grid(args) -> int:
    scales = parse_scale_list(args.scales)
    model, norm = load_model(args.model)
    src = load_image(args.inp)
    lr = src.pixels
    if model.config.in_channels == 1:
        lr = to_luminance(lr)
    reference = None
    if args.reference:
        reference = load_image(args.reference).pixels
        if model.config.in_channels == 1 or lr.ndim == 2:
            reference = to_luminance(reference)

    tiles = {"bicubic": [], "model": []}
    for r in scales:
        tiles["bicubic"].append(bicubic_upscale(lr, r))
        tiles["model"].append(super_resolve(model, lr, r, norm))
    metrics = {m: [_tile_metrics(t, reference) for t in ts] for m, ts in tiles.items()}
    labels = {m: [_label(m, r, mt) for r, mt in zip(scales, metrics[m])] for m in tiles}

    from PIL import Image as PILImage, ImageDraw

    draw_probe = ImageDraw.Draw(PILImage.new("L", (1, 1)))
    label_w = [max(int(draw_probe.textlength(labels[m][i])) + 2 for m in tiles) for i in range(len(scales))]
    shapes = [t.shape[:2] for t in tiles["model"]]
    layout, (height, width) = grid_layout(shapes, label_w, tuple(tiles), scales)

    color = lr.ndim == 3
    canvas = np.zeros((height, width, 3) if color else (height, width))
    for t in layout:
        canvas[t.top:t.top + t.height, t.left:t.left + t.width] = tiles[t.method][t.col]
    pil = PILImage.fromarray(canvas.astype(np.uint8), "RGB" if color else "L")
    draw = ImageDraw.Draw(pil)
    for t in layout:
        draw.text((t.left, t.top - LABEL_HEIGHT + 1), labels[t.method][t.col], fill="white" if color else 255)
    composite = np.asarray(pil, dtype=np.float64)
    save_image(Image(composite), args.out)

    sidecar = Path(args.out).with_suffix(".csv")
    with open(sidecar, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "method", "scale", "top", "left", "height", "width", "psnr_db", "ssim"])
        for t in layout:
            mt = metrics[t.method][t.col]
            w.writerow([t.row, t.col, t.method, format_scale(t.scale), t.top, t.left, t.height, t.width,
                        _fmt(mt[0]) if mt else "", _fmt(mt[1]) if mt else ""])
    print(f"wrote {args.out} ({height}x{width}, 2 rows x {len(scales)} tiles) and {sidecar}")
    return EXIT_OK


# -- count-params ------------------------------------------------------------


def cmd_count_params(args) -> int:
    cfg = load_config(args.config, parse_overrides(args.set))
    print(count_parameters(replace(cfg.model)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metasr", description="Arbitrary-scale super-resolution.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model on a directory of images")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--pretrain", metavar="DIR")
    p.add_argument("--perceptual-weights", metavar="PATH")
    p.add_argument("--resume", metavar="CKPT")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config value")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("upscale", help="upscale one image by any factor >= 1")
    p.add_argument("--model", required=True)
    p.add_argument("--scale", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_upscale)

    p = sub.add_parser("evaluate", help="PSNR/SSIM of the model (and bicubic) on a directory")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--scale", required=True)
    p.add_argument("--baseline", choices=["bicubic"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("grid", help="bicubic vs model comparison over several scales")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--scales", default="1.5,2.0,2.5,3.0,3.5,4.0")
    p.add_argument("--reference")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("count-params", help="print the trainable parameter count")
    p.add_argument("--config")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_count_params)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"metasr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, CheckpointError, ImageFormatError, ShapeError, OSError) as exc:
        print(f"metasr {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
