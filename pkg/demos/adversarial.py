"""Anchor recall stays perfect while compliance accuracy collapses.

Each instance holds one matching pre-clearance, n - 1 look-alikes for other
people, and a blackout worded nothing like the query.  Run with ``--n`` to
change the sizes.
"""

import argparse

from supersede.evaluate import adversarial_sweep

parser = argparse.ArgumentParser()
parser.add_argument("--n", type=int, nargs="+", default=[3, 10, 100, 1000])
parser.add_argument("--k", type=int, default=5)
args = parser.parse_args()

print(f"{'system':16} {'n':>6} {'recall':>7} {'TCA':>5} {'N+':>5}")
for system in ("bm25", "tfidf", "two_stage_rssg"):
    out = adversarial_sweep(args.n, k=args.k, system=system)
    for row in out["rows"]:
        note = "  (k covers corpus)" if row["degenerate"] else ""
        print(f"{system:16} {row['n']:>6} {row['anchor_recall']:>7} {row['tca']:>5} {row['n_plus']:>5}{note}")
