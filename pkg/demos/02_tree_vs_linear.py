# Regression trees versus ordinary least squares on hybrid power data.
#
# On a design whose DSP-like units make power a nonlinear function of
# activity, a variance-minimizing tree reaches a few percent MAE while the
# linear baseline stays an order of magnitude worse.

import numpy as np

import powertree as pt

design = pt.generate_design(pt.hybrid_design_spec(seed=1))
ds = pt.simulate_dataset(design, 2000, 300, seed=5)
perm = np.random.default_rng(7).permutation(len(ds))
train, test = ds.take(perm[:1600]), ds.take(perm[1600:])

hp = pt.HyperParams(max_depth=6, min_split_sample=5, min_leaf_sample=5,
                    min_leaf_impurity=0.001)
tree = pt.fit_tree(train, hp)
linear = pt.fit_linear(train)

for name, model, predict in (("tree", tree, pt.predict_tree_batch),
                             ("linear", linear, pt.predict_linear_batch)):
    tr = pt.mae_percent(predict(model, train.features), train.powers)
    te = pt.mae_percent(predict(model, test.features), test.powers)
    print(f"{name:6s}: train MAE {tr:5.2f}%   test MAE {te:5.2f}%")

print(f"\ntree: depth {tree.depth}, {tree.n_leaves()} leaves")
imp = pt.feature_importances(tree)
top = np.argsort(imp)[::-1][:5]
print("top tree features:",
      ", ".join(f"{tree.feature_ids[j]} ({imp[j]:.2f})" for j in top))

# %% the first few rules the tree learned
print("\n" + "\n".join(pt.rule_text(tree).splitlines()[:12]))
print("...")
