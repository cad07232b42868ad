import numpy as np
import pytest

from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal

from pkg.libs.Data import Data
from pkg.libs.Errors import ConfigError
from pkg.libs.Errors import NumericalError
from pkg.libs.Errors import SchemaError
from pkg.libs.Tree import Tree
from pkg.libs.Tree import TreeNode
from pkg.libs.Tree import TreeParams
from tests.conftest import MakeDataset


def Binned(columns, minDataInBin=1):
    n = len(next(iter(columns.values())))
    ds = MakeDataset(columns, np.arange(n) % 2)

    return ds, Data.BinFeatures(ds, 255, minDataInBin)


def Interpret(node, row):
    if node.is_leaf:
        return node.value

    branch = node.left if row[node.column] <= node.threshold else node.right

    return Interpret(branch, row)


def Leaves(tree):
    return [node for node in Tree.Nodes(tree) if node.is_leaf]


class TestFormulas:
    def test_leaf_value(self):
        assert Tree.LeafValue(2.0, 4.0, 2) == pytest.approx(-0.25)
        assert Tree.LeafValue(2.0, 4.0, 2, redundancy=False) == pytest.approx(-0.5)
        assert Tree.LeafValue(2.0, 4.0, 3) == pytest.approx(-1 / 3)

    def test_leaf_value_needs_positive_hessian(self):
        with pytest.raises(NumericalError):
            Tree.LeafValue(1.0, 0.0, 2)

    def test_split_gain(self):
        assert Tree.SplitGain((1.0, 1.0), (-1.0, 1.0), (0.0, 2.0)) == pytest.approx(1.0)
        assert Tree.SplitGain((1.0, 1.0), (1.0, 1.0), (2.0, 2.0)) == 0.0

    def test_split_gain_rejects_inconsistent_sums(self):
        with pytest.raises(NumericalError):
            Tree.SplitGain((1.0, 1.0), (1.0, 1.0), (3.0, 2.0))

    def test_params_are_validated(self):
        with pytest.raises(ConfigError):
            TreeParams(max_depth=0, allowed_columns=("x",))

        with pytest.raises(ConfigError):
            TreeParams(learning_rate=0.0, allowed_columns=("x",))


class TestBuildTree:
    def test_constant_gradient_gives_single_leaf(self):
        _, binned = Binned({"x": np.linspace(0, 1, 100)})
        params = TreeParams(allowed_columns=("x",), learning_rate=1.0, min_data_in_leaf=5)
        tree = Tree.BuildTree(binned, np.ones(100), np.ones(100), params)

        assert tree.is_leaf
        assert tree.value == pytest.approx(-0.5)

    def test_learning_rate_shrinks_leaves(self):
        _, binned = Binned({"x": np.linspace(0, 1, 100)})
        g = np.where(np.linspace(0, 1, 100) < 0.5, 1.0, -1.0)
        full = Tree.BuildTree(binned, g, np.ones(100), TreeParams(allowed_columns=("x",), learning_rate=1.0))
        shrunk = Tree.BuildTree(binned, g, np.ones(100), TreeParams(allowed_columns=("x",), learning_rate=0.1))

        assert_allclose([leaf.value for leaf in Leaves(shrunk)], [0.1 * leaf.value for leaf in Leaves(full)])

    def test_best_split_matches_brute_force(self):
        rng = np.random.default_rng(0)
        directions = ("none", "increasing", "decreasing")

        for _ in range(500):
            n = int(rng.integers(30, 201))
            names = ["c{}".format(i) for i in range(int(rng.integers(1, 4)))]
            columns = {name: rng.integers(0, 16, size=n).astype(float) for name in names}
            monotone = {name: directions[int(rng.integers(0, 3))] for name in names}
            g = rng.normal(size=n)
            h = rng.uniform(0.1, 1.0, size=n)
            _, binned = Binned(columns)
            params = TreeParams(
                allowed_columns=tuple(names), monotone=monotone, min_data_in_leaf=3, learning_rate=1.0
            )
            tree = Tree.BuildTree(binned, g, h, params)

            best = 0.0

            for name in names:
                x = columns[name]

                for cut in np.unique(x)[:-1]:
                    left = x <= cut

                    if left.sum() < 3 or (~left).sum() < 3:
                        continue

                    leftSums = (g[left].sum(), h[left].sum())
                    rightSums = (g[~left].sum(), h[~left].sum())
                    leftValue = Tree.LeafValue(*leftSums, 2)
                    rightValue = Tree.LeafValue(*rightSums, 2)

                    if monotone[name] == "increasing" and leftValue > rightValue:
                        continue

                    if monotone[name] == "decreasing" and leftValue < rightValue:
                        continue

                    gain = Tree.SplitGain(leftSums, rightSums, (g.sum(), h.sum()))
                    best = max(best, gain)

            if best > 0:
                assert not tree.is_leaf
                assert tree.gain == pytest.approx(best, rel=1e-9)
            else:
                assert tree.is_leaf

    def test_ties_go_to_the_lower_column(self):
        x = np.repeat([0.0, 1.0], 20)
        _, binned = Binned({"a": x, "b": x.copy()})
        g = np.where(x == 0, 1.0, -1.0)
        params = TreeParams(allowed_columns=("b", "a"), min_data_in_leaf=1)

        assert Tree.BuildTree(binned, g, np.ones(40), params).column == "a"

    def test_min_data_in_leaf_blocks_small_children(self):
        x = np.arange(10, dtype=float)
        _, binned = Binned({"x": x})
        g = np.where(x < 9, 0.0, 5.0)
        params = TreeParams(allowed_columns=("x",), min_data_in_leaf=2)
        tree = Tree.BuildTree(binned, g, np.ones(10), params)

        for node in Tree.Nodes(tree):
            if not node.is_leaf:
                assert node.threshold <= 8

    def test_depth_and_leaf_caps(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(size=500)
        z = rng.uniform(size=500)
        _, binned = Binned({"x": x, "z": z}, 5)
        g = rng.normal(size=500) + np.sin(6 * x) + np.cos(5 * z)

        deep = Tree.BuildTree(
            binned, g, np.ones(500), TreeParams(allowed_columns=("x", "z"), max_depth=6, num_leaves=4, min_data_in_leaf=5)
        )
        stump = Tree.BuildTree(
            binned, g, np.ones(500), TreeParams(allowed_columns=("x", "z"), max_depth=1, min_data_in_leaf=5)
        )

        assert len(Leaves(deep)) <= 4
        assert len(Leaves(stump)) == 2

    def test_zero_hessian_root(self):
        _, binned = Binned({"x": np.arange(10.0)})
        tree = Tree.BuildTree(binned, np.ones(10), np.zeros(10), TreeParams(allowed_columns=("x",)))

        assert tree.is_leaf
        assert tree.value == 0.0


class TestMonotone:
    def Increasing(self):
        x = np.repeat([0.0, 1.0], 30)
        _, binned = Binned({"x": x})
        # Negative gradient on the high side raises its leaf value
        g = np.where(x == 0, 1.0, -1.0)

        return binned, g

    def test_violating_split_is_rejected(self):
        binned, g = self.Increasing()
        params = TreeParams(allowed_columns=("x",), monotone={"x": "decreasing"}, min_data_in_leaf=1)

        assert Tree.BuildTree(binned, g, np.ones(60), params).is_leaf

    def test_agreeing_split_is_kept(self):
        binned, g = self.Increasing()
        params = TreeParams(allowed_columns=("x",), monotone={"x": "increasing"}, min_data_in_leaf=1)
        tree = Tree.BuildTree(binned, g, np.ones(60), params)

        assert not tree.is_leaf
        assert tree.left.value < tree.right.value

    @pytest.mark.parametrize("direction", ["increasing", "decreasing"])
    def test_deep_trees_stay_monotone(self, direction):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            x = rng.uniform(size=400)
            z = rng.uniform(size=400)
            _, binned = Binned({"x": x, "z": z}, 3)
            g = rng.normal(size=400) + np.sin(8 * x)
            params = TreeParams(
                allowed_columns=("x", "z"),
                monotone={"x": direction},
                max_depth=4,
                min_data_in_leaf=5,
            )
            tree = Tree.BuildTree(binned, g, np.ones(400), params)
            grid = np.linspace(0, 1, 201)

            for level in (0.1, 0.5, 0.9):
                values = Tree.PredictTree(tree, {"x": grid, "z": np.full(201, level)})
                steps = np.diff(values)

                if direction == "increasing":
                    assert (steps >= -1e-12).all()
                else:
                    assert (steps <= 1e-12).all()


class TestPredict:
    def Stump(self):
        return TreeNode(
            column="x",
            bin_threshold=0,
            threshold=0.5,
            left=TreeNode(value=1.0),
            right=TreeNode(value=2.0),
        )

    def test_stump(self):
        stump = self.Stump()

        assert Tree.PredictRow(stump, {"x": 0.5}) == 1.0
        assert Tree.PredictRow(stump, {"x": 0.6}) == 2.0
        assert_array_equal(Tree.PredictTree(stump, {"x": np.array([0.0, 0.5, 0.6, 9.0])}), [1, 1, 2, 2])

    def test_missing_column(self):
        with pytest.raises(SchemaError):
            Tree.PredictRow(self.Stump(), {"y": 0.0})

        with pytest.raises(SchemaError):
            Tree.PredictTree(self.Stump(), {"y": np.zeros(3)})

    def test_vectorized_matches_recursive_and_binned(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=600)
        z = rng.integers(0, 5, size=600).astype(float)
        ds, binned = Binned({"x": x, "z": z}, 3)
        g = rng.normal(size=600) + x * (z > 2)
        params = TreeParams(allowed_columns=("x", "z"), max_depth=5, min_data_in_leaf=10)
        tree = Tree.BuildTree(binned, g, rng.uniform(0.5, 1.0, size=600), params)

        vectorized = Tree.PredictTree(tree, ds.variables)
        recursive = [Interpret(tree, {"x": a, "z": b}) for a, b in zip(x, z)]

        assert_array_equal(vectorized, recursive)
        assert_array_equal(Tree.PredictBinned(tree, binned), vectorized)

    def test_inspection(self):
        stump = self.Stump()
        stump.gain = 2.5

        assert Tree.Columns(stump) == {"x"}
        assert Tree.Thresholds(stump, "x") == [0.5]
        assert Tree.TotalGain(stump) == 2.5
        assert [node.value for node in Tree.Nodes(stump)] == [0.0, 1.0, 2.0]
