# Ten-fold grid search and learning curves.
#
# A small grid keeps this demo quick; the full default grid spans
# {3..8} x {5,10,15,20} x {5,10,15,20} x {0.001..0.05} = 576 combinations.
# The learning curves show the classic contrast: the tree keeps improving
# with more samples while the linear model plateaus early (underfitting).

import numpy as np

import powertree as pt

design = pt.generate_design(pt.hybrid_design_spec(seed=1))
ds = pt.simulate_dataset(design, 1200, 300, seed=5)
candidates = pt.rank_signals_by_activity(ds, 100)
hp_sel = pt.HyperParams(8, 5, 5, 0.001)
retained = pt.rfe(ds.select_features(candidates), hp_sel, 0.2).retained
data = ds.select_features(retained)

grid = pt.Grid(max_depth=(3, 5, 8), min_split_sample=(5, 20),
               min_leaf_sample=(5,), min_leaf_impurity=(0.001, 0.03))
result = pt.grid_search_cv(data, grid, k=10, seed=11)
print(f"evaluated {len(result.rows)} combinations, "
      f"best: {result.best_params}")
print(f"best mean validation MAE: {result.best_score:.2f}%")

print("\nworst five combinations:")
for row in sorted(result.rows, key=lambda r: -r.mean_score)[:5]:
    hp = row.params
    print(f"  depth={hp.max_depth} split={hp.min_split_sample:2d} "
          f"impurity={hp.min_leaf_impurity:<6} -> {row.mean_score:6.2f}%")

# %% learning curves
sizes = [50, 100, 200, 400, 800]
points = pt.learning_curve(data, pt.HyperParams(8, 5, 5, 0.001), sizes,
                           k=10, seed=11)
print("\n  size   tree train/val      linear train/val")
for p in points:
    print(f"  {p.size:5d}  {p.tree_train:6.2f}% /{p.tree_val:6.2f}%   "
          f"{p.linear_train:6.2f}% /{p.linear_val:6.2f}%")
print("\ntree validation error keeps falling; linear flattens out")
