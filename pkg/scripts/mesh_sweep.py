"""Communication energy across mesh sizes for every preset dataset.

Writes one CSV per dataset plus a summary of the minimising mesh.

    python scripts/mesh_sweep.py --out results/sweep --seed 0
"""
import argparse
import csv
from pathlib import Path

from coinsim import HardwareConfig, PRESETS
from coinsim.energy import DEFAULT_SWEEP, mesh_sweep, sweep_argmin


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--policy", default="sparse", choices=("sparse", "broadcast"))
    ap.add_argument("--datasets", default=",".join(PRESETS))
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    hw = HardwareConfig()
    summary = []
    for name in args.datasets.split(","):
        pts = mesh_sweep(PRESETS[name], hw, DEFAULT_SWEEP, args.policy, args.seed)
        best = sweep_argmin(pts)
        with open(out / f"{name}.csv", "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(pts[0].to_dict()))
            w.writeheader()
            w.writerows(p.to_dict() for p in pts)
        summary.append((name, best.mesh, best.comm_energy))
        print(f"{name:14s} min at {best.mesh:5s}  {best.comm_energy * 1e6:8.2f} uJ  "
              + " ".join(f"{p.comm_energy * 1e6:.1f}" for p in pts))
    hits = sum(m == "4x4" for _, m, _ in summary)
    print(f"4x4 is the minimum for {hits}/{len(summary)} datasets")


if __name__ == "__main__":
    main()
