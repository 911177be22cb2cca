"""Trainable parameter count against the 0.561M budget for a range of block counts / WPN widths."""

import argparse

from metasr.generator import GeneratorConfig, count_parameters

TARGET = 561_000


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--blocks", type=int, nargs="+", default=list(range(1, 9)))
    ap.add_argument("--hidden", type=int, nargs="+", default=[128, 256])
    args = ap.parse_args()

    rows = []
    for hidden in args.hidden:
        for blocks in args.blocks:
            n = count_parameters(GeneratorConfig(num_res_blocks=blocks, wpn_hidden=hidden))
            rows.append((abs(n - TARGET), blocks, hidden, n))
    print(f"{'blocks':>6} {'hidden':>6} {'params':>9} {'vs target':>10}")
    for _, blocks, hidden, n in sorted(rows, key=lambda r: (r[2], r[1])):
        print(f"{blocks:>6} {hidden:>6} {n:>9,} {(n - TARGET) / TARGET:>+10.2%}")
    _, blocks, hidden, n = min(rows)
    print(f"closest: {blocks} blocks, hidden {hidden} -> {n:,}")


if __name__ == "__main__":
    main()
