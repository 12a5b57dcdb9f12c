"""Score a cohort of languages.

A judge model places each sketch on sixteen typological features.
Diversity is the mean share of features on which two languages differ,
counting only features the judge could classify in both. Consistency
rates are the shares of sampled statements and translations that the
judge finds compatible with the sketch.
"""

from conlangkit import (
    RefineConfig,
    bootstrap,
    diversity,
    encode_profile,
    language_consistency,
    load_feature_set,
)

from _common import JUDGE, banner, replay_gateway

gw = replay_gateway()
features = load_feature_set()
sketches = [bootstrap(gw, seed, refine_cfg=RefineConfig()) for seed in range(3)]
profiles = [encode_profile(gw, JUDGE, s, features) for s in sketches]

banner("Profiles")
for f_index, feature in enumerate(features.features):
    row = "  ".join(f"{str(p.values[f_index]):<22}"[:22] for p in profiles)
    print(f"{feature.name:<28}{row}")

result = diversity(profiles)
banner("Diversity")
print(result.pairwise.round(3))
print(f"d_mean = {result.d_mean:.4f}")

banner("Language consistency")
for s in sketches:
    rc = language_consistency(gw, JUDGE, s, rng_seed=s.seed)
    print(f"{s.id[:8]}: {rc.n_consistent}/{rc.n_total} = {rc.rate:.2f}")
