"""Overfit the synthetic phantoms at r=2 and report L1 and model-vs-bicubic PSNR as training goes."""

import argparse
import logging
import time
from dataclasses import replace
from fractions import Fraction

from metasr.evaluation import evaluate_model
from metasr.synthetic import phantom_set
from metasr.trainer import TrainConfig, train


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=500)
    ap.add_argument("--every", type=int, default=100, help="evaluate every N updates")
    ap.add_argument("--images", type=int, default=8)
    ap.add_argument("--size", type=int, default=96)
    ap.add_argument("--p-lr", type=int, default=16)
    ap.add_argument("--lr0", type=float, default=1e-3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="directory for checkpoints and the loss log")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    images = phantom_set(args.images, args.size, seed=args.seed)
    cfg = TrainConfig(total_updates=0, p_lr=args.p_lr, scales=(Fraction(2),), crop_fraction=1.0,
                      lr0=args.lr0, seed=args.seed, checkpoint_interval=args.every)
    state, t0 = None, time.perf_counter()
    for stop in range(args.every, args.steps + args.every, args.every):
        state = train(replace(cfg, total_updates=min(stop, args.steps)), images, args.out, state=state)
        sr, bic = evaluate_model(state.model, images, 2, cfg.norm)
        print(f"step {state.update_count:5d}  l1 {state.history[-1].l1:.4f}  "
              f"sr {sr.mean_psnr:.2f} dB / {sr.mean_ssim:.4f}  bicubic {bic.mean_psnr:.2f} dB / {bic.mean_ssim:.4f}  "
              f"{time.perf_counter() - t0:.0f}s", flush=True)
    print(f"first-step l1 {state.history[0].l1:.4f}, last-step l1 {state.history[-1].l1:.4f}")


if __name__ == "__main__":
    main()
