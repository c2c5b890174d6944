"""Optimal CE count from the communication-energy objective.

Runs the canonical uniform instance and then each preset with p1/p2
estimated from its synthetic graph.

    python scripts/optimal_k.py
"""
from coinsim import ObjectiveParams, PRESETS, minimize, partition_contiguous
from coinsim.objective import convexity_table, verify_unimodal


def main():
    p = ObjectiveParams(6000, 1.0, 0.25, 0.22)
    r = minimize(p)
    print(f"uniform N=6000: k*={r.k_star} (continuous {r.k_continuous:.2f}), unimodal={verify_unimodal(p)}")
    neg = [row["k"] for row in convexity_table(p) if row["rounded"] <= 0]
    if neg:
        print(f"  rounded E'' is non-positive for k >= {neg[0]}")
    for name, pre in PRESETS.items():
        g = pre.synthesize(0)
        part = partition_contiguous(g, 16)
        q = ObjectiveParams(g.num_nodes, sum(g.feature_dims[1:-1]) * 4, part.uniform_p1, part.uniform_p2)
        print(f"{name:14s} p1={part.uniform_p1:.2e} p2={part.uniform_p2:.2e} k*={minimize(q).k_star}")


if __name__ == "__main__":
    main()
