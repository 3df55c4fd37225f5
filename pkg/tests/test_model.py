import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import powertree as pt
from powertree.workload import Dataset


def make_dataset(X, y, period=1000, freq=1e8):
    X = np.asarray(X)
    if X.ndim == 1:
        X = X[:, None]
    names = tuple(f"f{j}" for j in range(X.shape[1]))
    return Dataset(X.astype(np.int64), np.asarray(y, dtype=np.float64),
                   names, period, freq)


def brute_force_best_split(X, y, min_leaf=1):
    """Independent oracle: scan every feature and midpoint, recomputing
    subset variances from scratch; ties keep the lowest feature index then
    the lowest threshold."""
    m = len(y)
    parent_sse = np.var(y) * m
    best = None
    for j in range(X.shape[1]):
        xs = np.unique(X[:, j])
        for lo, hi in zip(xs, xs[1:]):
            thr = (lo + hi) / 2.0
            mask = X[:, j] <= thr
            nl, nr = int(mask.sum()), int((~mask).sum())
            if nl < min_leaf or nr < min_leaf:
                continue
            sse = np.var(y[mask]) * nl + np.var(y[~mask]) * nr
            red = (parent_sse - sse) / m
            if red > 0 and (best is None or red > best[2]):
                best = (j, thr, red)
    return best


STUMP_X = np.array([[1], [2], [3], [4]])
STUMP_Y = np.array([0.0, 0.0, 10.0, 10.0])


class TestBestSplit:
    def test_constant_targets_no_split(self):
        assert pt.best_split(STUMP_X, np.ones(4), 0) is None

    def test_hand_computed_stump(self):
        # variance 25 -> 0, threshold between 2 and 3
        thr, red = pt.best_split(STUMP_X, STUMP_Y, 0)
        assert thr == 2.5
        assert red == pytest.approx(25.0, rel=1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_brute_force_oracle(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.integers(0, 15, size=(20, 3))
        y = rng.normal(size=20)
        for j in range(3):
            got = pt.best_split(X, y, j)
            expect = brute_force_best_split(X[:, [j]], y)
            if expect is None:
                assert got is None
            else:
                assert got[0] == expect[1]
                assert got[1] == pytest.approx(expect[2], rel=1e-9)

    def test_min_leaf_skips_starving_splits(self):
        x = np.array([[1], [2], [3], [4], [5], [6]])
        y = np.array([0.0, 0, 0, 0, 0, 100.0])
        thr, _ = pt.best_split(x, y, 0, min_leaf_sample=2)
        assert thr == 4.5  # the 5/1 cut at 5.5 is forbidden

    def test_too_few_samples_rejected(self):
        with pytest.raises(ValueError):
            pt.best_split(np.array([[1]]), np.array([1.0]), 0)


class TestFitTree:
    def test_constant_targets_single_leaf(self):
        ds = make_dataset([[1], [2], [3]], [5.0, 5.0, 5.0])
        tree = pt.fit_tree(ds, pt.HyperParams(max_depth=4, min_split_sample=2,
                                              min_leaf_sample=1,
                                              min_leaf_impurity=0.0))
        assert tree.root.is_leaf
        assert tree.root.value == 5.0
        assert tree.depth == 0

    def test_stump_example(self):
        ds = make_dataset(STUMP_X, STUMP_Y)
        tree = pt.fit_tree(ds, pt.HyperParams(1, 2, 1, 0.0))
        root = tree.root
        assert not root.is_leaf
        assert root.feature == 0 and root.threshold == 2.5
        assert root.left.value == 0.0 and root.right.value == 10.0
        assert tree.depth == 1

    def test_empty_dataset_rejected(self):
        ds = make_dataset(np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(ValueError):
            pt.fit_tree(ds, pt.HyperParams())

    @pytest.mark.parametrize("hp", [
        pt.HyperParams(3, 5, 2, 0.01),
        pt.HyperParams(8, 2, 1, 0.0),
        pt.HyperParams(2, 10, 5, 0.05),
    ])
    def test_growth_constraints_hold_on_every_node(self, hp):
        rng = np.random.default_rng(0)
        ds = make_dataset(rng.integers(0, 30, (200, 4)), rng.uniform(1.0, 9.0, 200))
        tree = pt.fit_tree(ds, hp)
        assert tree.depth <= hp.max_depth
        root_var = tree.root.impurity

        def walk(node, depth):
            if node.is_leaf:
                assert depth <= hp.max_depth
                return
            assert node.n_samples >= hp.min_split_sample
            assert node.left.n_samples >= hp.min_leaf_sample
            assert node.right.n_samples >= hp.min_leaf_sample
            assert node.impurity / root_var >= hp.min_leaf_impurity
            assert node.reduction > 0
            walk(node.left, depth + 1)
            walk(node.right, depth + 1)

        walk(tree.root, 0)

    def test_leaf_values_are_routed_means(self):
        rng = np.random.default_rng(1)
        X = rng.integers(0, 20, (120, 3))
        y = rng.uniform(0.0, 10.0, 120)
        ds = make_dataset(X, y)
        tree = pt.fit_tree(ds, pt.HyperParams(4, 5, 2, 0.0))

        def route(node, rows):
            if node.is_leaf:
                assert node.value == pytest.approx(y[rows].mean(), rel=1e-12)
                assert node.n_samples == len(rows)
                return
            mask = X[rows, node.feature] <= node.threshold
            route(node.left, rows[mask])
            route(node.right, rows[~mask])

        route(tree.root, np.arange(120))

    def test_every_node_split_matches_oracle(self):
        rng = np.random.default_rng(2)
        X = rng.integers(0, 12, (50, 4))
        y = rng.uniform(0.0, 10.0, 50)
        ds = make_dataset(X, y)
        hp = pt.HyperParams(5, 4, 2, 0.0)
        tree = pt.fit_tree(ds, hp)
        checked = 0

        def walk(node, rows):
            nonlocal checked
            if node.is_leaf:
                return
            expect = brute_force_best_split(X[rows], y[rows],
                                            hp.min_leaf_sample)
            assert expect is not None
            assert node.feature == expect[0]
            assert node.threshold == expect[1]
            checked += 1
            mask = X[rows, node.feature] <= node.threshold
            walk(node.left, rows[mask])
            walk(node.right, rows[~mask])

        walk(tree.root, np.arange(50))
        assert checked > 0


class TestPredict:
    def test_single_leaf(self):
        ds = make_dataset([[1], [2]], [3.0, 3.0])
        tree = pt.fit_tree(ds, pt.HyperParams())
        assert pt.predict_tree(tree, [999]) == 3.0

    def test_stump_predictions(self):
        tree = pt.fit_tree(make_dataset(STUMP_X, STUMP_Y),
                           pt.HyperParams(1, 2, 1, 0.0))
        assert pt.predict_tree(tree, [2]) == 0.0
        assert pt.predict_tree(tree, [3]) == 10.0

    def test_dimension_mismatch(self):
        tree = pt.fit_tree(make_dataset(STUMP_X, STUMP_Y), pt.HyperParams())
        with pytest.raises(ValueError):
            pt.predict_tree(tree, [1, 2])

    def test_batch_matches_single(self):
        rng = np.random.default_rng(3)
        ds = make_dataset(rng.integers(0, 25, (150, 4)), rng.uniform(0.0, 10.0, 150))
        tree = pt.fit_tree(ds, pt.HyperParams(6, 4, 2, 0.0))
        X = rng.integers(0, 25, (80, 4))
        batch = pt.predict_tree_batch(tree, X)
        single = np.array([pt.predict_tree(tree, x) for x in X])
        assert (batch == single).all()

    def test_piecewise_constant_between_thresholds(self):
        rng = np.random.default_rng(4)
        ds = make_dataset(rng.integers(0, 25, (100, 3)), rng.uniform(0.0, 10.0, 100))
        tree = pt.fit_tree(ds, pt.HyperParams(5, 4, 2, 0.0))
        thresholds = sorted({n.threshold for n in tree.nodes_preorder()
                             if not n.is_leaf})
        x = np.array([7.0, 7.0, 7.0])
        base = pt.predict_tree(tree, x)
        # nudge a coordinate without crossing any threshold
        eps = min(abs(7.0 - t) for t in thresholds) / 2 or 0.1
        for j in range(3):
            bumped = x.copy()
            bumped[j] += eps
            assert pt.predict_tree(tree, bumped) == base

    def test_rule_text_interpreter_oracle(self):
        rng = np.random.default_rng(5)
        ds = make_dataset(rng.integers(0, 25, (150, 4)), rng.uniform(0.0, 10.0, 150))
        tree = pt.fit_tree(ds, pt.HyperParams(5, 4, 2, 0.0))
        rules = pt.rule_text(tree)

        def interpret(lines, x, indent=0):
            line = lines.pop(0)
            pad = "    " * indent
            if line.startswith(pad + "value:"):
                return float(line.split(":", 1)[1])
            assert line.startswith(pad + "if x[")
            cond = line[len(pad) + 3:-1]
            idx = int(cond[cond.index("[") + 1:cond.index("]")])
            thr = float(cond.split("<=")[1])
            if x[idx] <= thr:
                value = interpret(lines, x, indent + 1)
                skip_else(lines, indent)
                return value
            skip_branch(lines, indent + 1)
            assert lines.pop(0) == pad + "else:"
            return interpret(lines, x, indent + 1)

        def skip_branch(lines, indent):
            pad = "    " * indent
            if lines[0].startswith(pad + "value:"):
                lines.pop(0)
                return
            lines.pop(0)
            skip_branch(lines, indent + 1)
            lines.pop(0)  # else:
            skip_branch(lines, indent + 1)

        def skip_else(lines, indent):
            pad = "    " * indent
            assert lines.pop(0) == pad + "else:"
            skip_branch(lines, indent + 1)

        for _ in range(50):
            x = rng.integers(0, 25, 4)
            lines = [l for l in rules.splitlines() if not l.startswith("#")]
            assert interpret(lines, x) == pt.predict_tree(tree, x)


class TestImportances:
    def test_single_leaf_all_zero(self):
        tree = pt.fit_tree(make_dataset([[1], [2]], [3.0, 3.0]),
                           pt.HyperParams())
        assert (pt.feature_importances(tree) == 0).all()

    def test_stump_concentrates_on_split_feature(self):
        X = np.hstack([STUMP_X, np.zeros((4, 1), dtype=int)])
        tree = pt.fit_tree(make_dataset(X, STUMP_Y), pt.HyperParams(1, 2, 1, 0.0))
        imp = pt.feature_importances(tree)
        assert imp[0] == 1.0 and imp[1] == 0.0

    def test_normalized(self):
        rng = np.random.default_rng(6)
        ds = make_dataset(rng.integers(0, 25, (200, 5)), rng.uniform(0.0, 10.0, 200))
        tree = pt.fit_tree(ds, pt.HyperParams(5, 4, 2, 0.0))
        imp = pt.feature_importances(tree)
        assert imp.sum() == pytest.approx(1.0, rel=1e-12)
        assert (imp >= 0).all()


class TestLinear:
    def test_recovers_exact_affine_rule(self):
        rng = np.random.default_rng(7)
        X = rng.integers(0, 300, (200, 5))
        w = np.array([0.5, -0.2, 1.5, 0.0, 2.0]) * 1e-3
        y = X @ w + 0.125
        model = pt.fit_linear(make_dataset(X, y))
        assert np.allclose(model.weights, w, rtol=1e-9, atol=1e-15)
        assert model.intercept == pytest.approx(0.125, rel=1e-9)

    def test_zero_features_gives_intercept(self):
        rng = np.random.default_rng(8)
        X = rng.integers(1, 300, (50, 2))
        y = X @ np.array([1e-3, 2e-3]) + 0.5
        model = pt.fit_linear(make_dataset(X, y))
        assert pt.predict_linear(model, [0, 0]) == pytest.approx(
            model.intercept)

    def test_collinear_features_fall_back_to_ridge(self):
        rng = np.random.default_rng(9)
        a = rng.integers(0, 300, 60)
        X = np.stack([a, a], axis=1)  # exactly duplicated column
        y = 2e-3 * a + 1.0
        model = pt.fit_linear(make_dataset(X, y))
        pred = pt.predict_linear_batch(model, X)
        assert np.allclose(pred, y, rtol=1e-6)

    def test_residuals_orthogonal_to_features(self):
        rng = np.random.default_rng(10)
        X = rng.integers(0, 300, (300, 4))
        y = X @ np.array([1, 2, 3, 4.0]) * 1e-3 + rng.normal(0, 0.1, 300) + 5.0
        ds = make_dataset(X, y)
        model = pt.fit_linear(ds)
        resid = y - pt.predict_linear_batch(model, X)
        Xc = X - X.mean(axis=0)
        dots = Xc.T @ resid
        scale = np.linalg.norm(Xc, axis=0) * np.linalg.norm(resid)
        assert (np.abs(dots) <= 1e-6 * scale).all()

    def test_needs_more_samples_than_features(self):
        with pytest.raises(ValueError):
            pt.fit_linear(make_dataset(np.zeros((3, 3), dtype=int),
                                       np.zeros(3)))

    def test_underfits_nonlinear_data_versus_tree(self):
        d = pt.generate_design(pt.hybrid_design_spec(seed=3))
        ds = pt.simulate_dataset(d, 800, 300, seed=4)
        tree = pt.fit_tree(ds, pt.HyperParams(6, 5, 5, 0.001))
        lin = pt.fit_linear(ds)
        tree_mae = pt.mae_percent(pt.predict_tree_batch(tree, ds.features),
                                  ds.powers)
        lin_mae = pt.mae_percent(pt.predict_linear_batch(lin, ds.features),
                                 ds.powers)
        assert tree_mae < lin_mae


class TestScalePrediction:
    def test_identity(self):
        assert pt.scale_prediction(0.7, 1e8, 1e8) == 0.7

    def test_half_frequency_halves_power(self):
        assert pt.scale_prediction(0.5, 100e6, 50e6) == 0.25

    @given(st.floats(min_value=1e-3, max_value=1e3))
    @settings(max_examples=50, deadline=None)
    def test_depends_only_on_frequency_ratio(self, c):
        base = pt.scale_prediction(0.7, 100e6, 40e6)
        assert pt.scale_prediction(0.7, 100e6 * c, 40e6 * c) \
            == pytest.approx(base, rel=1e-12)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            pt.scale_prediction(1.0, 0.0, 1e8)

    def test_matches_retrained_model_exactly(self):
        d = pt.generate_design(pt.linear_design_spec(seed=2))
        ds = pt.simulate_dataset(d, 400, 300, seed=9)
        hp = pt.HyperParams(5, 5, 5, 0.001)
        tree = pt.fit_tree(ds, hp)
        for ratio in (0.5, 2.0):
            scaled_ds = Dataset(ds.features, ds.powers * ratio,
                                ds.feature_names, 300, ds.clock_freq * ratio)
            retrained = pt.fit_tree(scaled_ds, hp)
            for i in range(0, 400, 7):
                a = pt.scale_prediction(pt.predict_tree(tree, ds.features[i]),
                                        ds.clock_freq, ds.clock_freq * ratio)
                b = pt.predict_tree(retrained, ds.features[i])
                assert a == b


class TestEnsemble:
    def _stump(self, value_left, value_right):
        X = np.array([[0], [0], [10], [10]])
        y = np.array([value_left] * 2 + [value_right] * 2)
        return pt.fit_tree(make_dataset(X, y), pt.HyperParams(1, 2, 1, 0.0))

    def test_sum_of_components(self):
        trees = [self._stump(1.2, 1.2), self._stump(0.8, 0.8),
                 self._stump(0.5, 0.5)]
        em = pt.EnsembleModel(((trees[0], ("a",)), (trees[1], ("b",)),
                               (trees[2], ("c",))))
        got = pt.predict_ensemble(em, [[1], [1], [1]])
        assert got == pytest.approx(2.5, rel=1e-12)

    def test_single_component_equals_tree(self):
        tree = self._stump(0.0, 10.0)
        em = pt.EnsembleModel(((tree, ("a",)),))
        assert pt.predict_ensemble(em, [[10]]) == pt.predict_tree(tree, [10])

    def test_component_count_mismatch(self):
        em = pt.EnsembleModel(((self._stump(1, 1), ("a",)),))
        with pytest.raises(ValueError):
            pt.predict_ensemble(em, [[1], [2]])

    def test_overlapping_feature_sets_rejected(self):
        with pytest.raises(ValueError):
            pt.EnsembleModel(((self._stump(1, 1), ("a",)),
                              (self._stump(2, 2), ("a",))))


class TestMaePercent:
    def test_perfect_predictions(self):
        assert pt.mae_percent([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_hand_value(self):
        assert pt.mae_percent([1.0, 1.0], [2.0, 2.0]) == 50.0

    @given(st.floats(min_value=0.01, max_value=100.0))
    @settings(max_examples=50, deadline=None)
    def test_scale_invariant(self, c):
        pred = np.array([1.0, 3.0, 2.0])
        truth = np.array([2.0, 2.5, 2.0])
        assert pt.mae_percent(pred * c, truth * c) == pytest.approx(
            pt.mae_percent(pred, truth), rel=1e-12)

    def test_rejects_zero_mean_truth(self):
        with pytest.raises(ValueError):
            pt.mae_percent([1.0], [0.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            pt.mae_percent([1.0], [1.0, 2.0])


class TestSerialization:
    def test_tree_round_trip_lossless(self, tmp_path):
        rng = np.random.default_rng(11)
        ds = make_dataset(rng.integers(0, 300, (300, 6)),
                          rng.uniform(0.5, 8.0, 300))
        tree = pt.fit_tree(ds, pt.HyperParams(6, 5, 2, 0.001))
        path = tmp_path / "tree.json"
        pt.save_tree(tree, path)
        back = pt.load_tree(path)
        assert back.depth == tree.depth
        assert back.n_features == tree.n_features
        assert back.model_freq == tree.model_freq
        assert back.feature_ids == tree.feature_ids
        a = [vars(n) for n in tree.nodes_preorder()]
        b = [vars(n) for n in back.nodes_preorder()]
        for na, nb in zip(a, b):
            for key in ("value", "feature", "threshold", "n_samples",
                        "impurity", "reduction"):
                assert na[key] == nb[key]
        X = rng.integers(0, 300, (100, 6))
        assert (pt.predict_tree_batch(tree, X)
                == pt.predict_tree_batch(back, X)).all()

    def test_second_save_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(12)
        ds = make_dataset(rng.integers(0, 300, (100, 3)),
                          rng.uniform(0.5, 8.0, 100))
        tree = pt.fit_tree(ds, pt.HyperParams(4, 5, 2, 0.001))
        pt.save_tree(tree, tmp_path / "a.json")
        pt.save_tree(pt.load_tree(tmp_path / "a.json"), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() \
            == (tmp_path / "b.json").read_bytes()

    def test_linear_round_trip(self, tmp_path):
        rng = np.random.default_rng(13)
        X = rng.integers(0, 300, (100, 4))
        y = X @ np.array([1, 2, 3, 4.0]) * 1e-3 + 0.25
        model = pt.fit_linear(make_dataset(X, y))
        pt.save_linear(model, tmp_path / "lin.json")
        back = pt.load_linear(tmp_path / "lin.json")
        assert (back.weights == model.weights).all()
        assert back.intercept == model.intercept
        assert back.model_freq == model.model_freq
