"""COIN mesh vs one-router-per-node baseline vs c-mesh on every preset.

    python scripts/compare_architectures.py --k 16 --out results/compare.csv
"""
import argparse
import csv
import math
from pathlib import Path

from coinsim import HardwareConfig, PRESETS
from coinsim.energy import compare_architectures


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/compare.csv")
    args = ap.parse_args()

    side = math.isqrt(args.k)
    if side * side != args.k:
        ap.error("--k must be a perfect square")
    hw = HardwareConfig().with_mesh(side, side)
    rows = []
    for name, pre in PRESETS.items():
        for rep in compare_architectures(pre, hw, seed=args.seed):
            t = rep.totals()
            rows.append({"dataset": name, "architecture": rep.architecture, **t})
            print(f"{name:14s} {rep.architecture:9s} E={t['total_energy'] * 1e6:10.2f} uJ  "
                  f"comm={t['comm_share']:.3f}  bit-hops={t['bit_hop_count']:>12,}  cycles={t['latency_cycles']:>9,}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


if __name__ == "__main__":
    main()
