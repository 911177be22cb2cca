"""Output extents and PSNR/SSIM over every training scale, for bicubic and optionally a checkpoint."""

import argparse
import math
import warnings

from metasr.evaluation import bicubic_upscale, load_model, super_resolve
from metasr.metrics import evaluate_set
from metasr.pipeline.patches import degrade
from metasr.scales import TRAINING_SCALES, format_scale
from metasr.synthetic import phantom_set


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", help="MSRG checkpoint; bicubic only when omitted")
    ap.add_argument("--images", type=int, default=4)
    ap.add_argument("--size", type=int, default=96)
    args = ap.parse_args()
    warnings.simplefilter("ignore", RuntimeWarning)

    model = norm = None
    if args.model:
        model, norm = load_model(args.model)
    hrs = phantom_set(args.images, args.size, seed=11)
    print(f"{'scale':>5} {'lr':>7} {'hr':>9} {'bicubic dB':>10} {'ssim':>6}" + ("  model dB   ssim" if model else ""))
    for r in TRAINING_SCALES:
        pairs = [degrade(hr, r) for hr in hrs]
        lr, ref = pairs[0]
        assert ref.shape == (math.floor(r * lr.shape[0]), math.floor(r * lr.shape[1]))
        bic = evaluate_set([bicubic_upscale(lr, r) for lr, _ in pairs], [ref for _, ref in pairs])
        line = (f"{format_scale(r):>5} {lr.shape[0]:>3}x{lr.shape[1]:<3} {ref.shape[0]:>4}x{ref.shape[1]:<4} "
                f"{bic.mean_psnr:>10.2f} {bic.mean_ssim:>6.3f}")
        if model:
            rep = evaluate_set([super_resolve(model, lr, r, norm) for lr, _ in pairs], [ref for _, ref in pairs])
            line += f"  {rep.mean_psnr:>8.2f} {rep.mean_ssim:>6.3f}"
        print(line)


if __name__ == "__main__":
    main()
