"""Anchor-only versus rule-graph promotion on the contaminated benchmark.

With naive distractor sampling, other documents land in the gold entity
buckets.  Taking the newest document in a bucket then often picks a
distractor; walking the rule graph from the anchor does not.
"""

from supersede import GenConfig, evaluate, generate_contaminated
from supersede.benchgen import contamination_stats

ds = generate_contaminated(GenConfig(seed=0, n_examples=400, enforce_entity_disjoint=False))
print(f"contamination rate: {contamination_stats(ds)['contamination_rate']:.3f}")
for system in ("two_stage", "two_stage_rssg"):
    rep = evaluate(ds, system)
    by_hop = "  ".join(f"{h} {rep.aggregates[h]['tca']['display']}" for h in ("T0", "T1", "T2", "T3"))
    print(f"{system:16} TCA {rep.aggregates['overall']['tca']['display']}   {by_hop}")
