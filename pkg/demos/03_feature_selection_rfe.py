# Candidate screening and recursive feature elimination.
#
# From 120 monitored nets: keep the 100 most active, then iteratively drop
# the least-important 10% until 20 remain.  Correlated group members are
# interchangeable, so almost all of them go while accuracy survives.

import powertree as pt

design = pt.generate_design(pt.hybrid_design_spec(seed=1))
ds = pt.simulate_dataset(design, 1500, 300, seed=5)

candidates = pt.rank_signals_by_activity(ds, top_m=100)
print(f"candidates: {len(candidates)} of {ds.n_features} signals "
      f"(most active: {candidates[0]})")

hp = pt.HyperParams(max_depth=8, min_split_sample=5, min_leaf_sample=5,
                    min_leaf_impurity=0.001)
result = pt.rfe(ds.select_features(candidates), hp, target_fraction=0.2)

print(f"\nretained {len(result.retained)} features "
      f"after {len(result.history)} iterations:")
print("  " + " ".join(result.retained))
print("\nelimination history (iteration, dropped, training MAE%):")
for step in result.history:
    print(f"  {step.iteration:2d}  -{len(step.dropped):3d}  "
          f"{step.train_mae_percent:6.2f}%")

# %% accuracy before and after pruning 80% of the candidates
full = pt.fit_tree(ds.select_features(candidates), hp)
sub = ds.select_features(result.retained)
refit = pt.fit_tree(sub, hp)
full_mae = pt.mae_percent(
    pt.predict_tree_batch(full, ds.select_features(candidates).features),
    ds.powers)
refit_mae = pt.mae_percent(pt.predict_tree_batch(refit, sub.features),
                           sub.powers)
print(f"\ntraining MAE with 100 features: {full_mae:.2f}%")
print(f"training MAE with  20 features: {refit_mae:.2f}%")
