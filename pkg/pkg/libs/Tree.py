# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import heapq

from dataclasses import dataclass
from dataclasses import field

import numpy as np

import pkg.libs.Variables as var

from pkg.libs.Errors import ConfigError
from pkg.libs.Errors import NumericalError
from pkg.libs.Errors import SchemaError


@dataclass
class TreeParams:
    max_depth: int = 1
    min_data_in_leaf: int = 20
    min_sum_hessian_in_leaf: float = 1e-3
    min_gain_to_split: float = 0.0
    learning_rate: float = 0.1
    allowed_columns: tuple = ()
    monotone: dict = field(default_factory=dict)
    num_leaves: int = None
    n_alternatives: int = 2
    redundancy: bool = True

    def __post_init__(self):
        if self.max_depth < 1:
            raise ConfigError("max_depth must be at least 1, got {}".format(self.max_depth))

        if self.min_data_in_leaf < 1:
            raise ConfigError("min_data_in_leaf must be positive")

        if self.min_sum_hessian_in_leaf < 0 or self.min_gain_to_split < 0:
            raise ConfigError("min_sum_hessian_in_leaf and min_gain_to_split can't be negative")

        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive, got {}".format(self.learning_rate))

        if self.num_leaves is not None and self.num_leaves < 2:
            raise ConfigError("num_leaves must be at least 2, got {}".format(self.num_leaves))


@dataclass
class TreeNode:
    """Split node (column set) or leaf (value set).

    Rows with raw value <= threshold, or bin <= bin_threshold, go left.
    """

    column: str = None
    bin_threshold: int = None
    threshold: float = None
    gain: float = 0.0
    left: "TreeNode" = None
    right: "TreeNode" = None
    value: float = 0.0

    @property
    def is_leaf(self):
        return self.column is None


@dataclass(order=True)
class _Candidate:
    priority: tuple
    node: TreeNode = field(compare=False)
    rows: np.ndarray = field(compare=False)
    depth: int = field(compare=False)
    bounds: tuple = field(compare=False)
    split: dict = field(compare=False)


class Tree:
    """Histogram regression tree learner with monotone bound propagation."""

    @classmethod
    def LeafValue(cls, sumG, sumH, J, redundancy=True):
        if not sumH > 0:
            raise NumericalError("Leaf hessian sum must be positive, got {}".format(sumH))

        factor = (J - 1) / J if redundancy else 1.0

        return -factor * sumG / sumH

    @classmethod
    def SplitGain(cls, left, right, parent):
        """Loss reduction of splitting parent (Σg, Σh) into left and right."""
        for index in range(2):
            total = left[index] + right[index]

            if abs(parent[index] - total) > 1e-9 * max(1.0, abs(parent[index]), abs(total)):
                raise NumericalError("Split sums don't add up to the parent sums")

        if not (left[1] > 0 and right[1] > 0 and parent[1] > 0):
            raise NumericalError("Split gain needs positive hessian sums")

        gain = 0.5 * (
            left[0] ** 2 / left[1] + right[0] ** 2 / right[1] - parent[0] ** 2 / parent[1]
        )

        # Exact algebra guarantees gain >= 0; only rounding can push it below
        return max(gain, 0.0)

    @classmethod
    def BuildTree(cls, binned, g, h, params, rows=None):
        """Grows one tree best-first on the histogram of binned.

        Each node's candidate split is the best over all allowed columns;
        the node with the largest candidate gain is split next. Growth stops
        at max_depth, num_leaves, or when no candidate passes the data,
        hessian, gain and monotone checks.
        """
        if not params.allowed_columns:
            raise ConfigError("A tree needs at least one allowed column")

        g = np.asarray(g, dtype=float)
        h = np.asarray(h, dtype=float)
        rows = np.arange(len(g)) if rows is None else np.asarray(rows)

        # Columns are scanned in dataset order so ties go to the lower index
        columns = sorted(
            (binned.ColumnIndex(name), name) for name in params.allowed_columns
        )
        root = TreeNode()
        sumG, sumH = g[rows].sum(), h[rows].sum()

        if not sumH > 0:
            return root

        bounds = (-np.inf, np.inf)
        root.value = cls._Clamp(cls._Value(sumG, sumH, params), bounds)
        heap = []
        counter = 0
        leaves = 1

        split = cls._BestSplit(binned, columns, g, h, rows, sumG, sumH, bounds, params)

        if split is not None:
            heapq.heappush(heap, _Candidate((-split["gain"], counter), root, rows, 0, bounds, split))

        while heap:
            if params.num_leaves is not None and leaves >= params.num_leaves:
                break

            candidate = heapq.heappop(heap)
            node, split = candidate.node, candidate.split
            lo, hi = candidate.bounds

            node.column = split["column"]
            node.bin_threshold = split["bin"]
            node.threshold = float(binned.edges[split["column"]][split["bin"]])
            node.gain = split["gain"]

            direction = params.monotone.get(split["column"], var.unconstrained)
            leftBounds, rightBounds = (lo, hi), (lo, hi)

            if direction != var.unconstrained:
                middle = (split["left_value"] + split["right_value"]) / 2

                if direction == var.increasing:
                    leftBounds, rightBounds = (lo, min(hi, middle)), (max(lo, middle), hi)
                else:
                    leftBounds, rightBounds = (max(lo, middle), hi), (lo, min(hi, middle))

            columnBins = binned.bins[candidate.rows, binned.ColumnIndex(split["column"])]
            goLeft = columnBins <= split["bin"]
            leaves += 1

            for child, childRows, childBounds, sums in (
                ("left", candidate.rows[goLeft], leftBounds, split["left"]),
                ("right", candidate.rows[~goLeft], rightBounds, split["right"]),
            ):
                childNode = TreeNode(value=cls._Clamp(cls._Value(*sums, params), childBounds))
                setattr(node, child, childNode)

                if candidate.depth + 1 >= params.max_depth:
                    continue

                childSplit = cls._BestSplit(
                    binned, columns, g, h, childRows, *sums, childBounds, params
                )

                if childSplit is not None:
                    counter += 1
                    heapq.heappush(
                        heap,
                        _Candidate(
                            (-childSplit["gain"], counter),
                            childNode,
                            childRows,
                            candidate.depth + 1,
                            childBounds,
                            childSplit,
                        ),
                    )

        cls._Shrink(root, params.learning_rate)

        return root

    @classmethod
    def _Value(cls, sumG, sumH, params):
        return cls.LeafValue(sumG, sumH, params.n_alternatives, params.redundancy)

    @classmethod
    def _Clamp(cls, value, bounds):
        return float(min(max(value, bounds[0]), bounds[1]))

    @classmethod
    def _Shrink(cls, node, rate):
        stack = [node]

        while stack:
            current = stack.pop()

            if current.is_leaf:
                current.value = current.value * rate
                current.left = current.right = None
            else:
                current.value = 0.0
                stack.extend((current.left, current.right))

    @classmethod
    def _BestSplit(cls, binned, columns, g, h, rows, sumG, sumH, bounds, params):
        best = None
        lo, hi = bounds

        for columnIndex, name in columns:
            numBins = binned.NumBins(name)

            if numBins < 2:
                continue

            columnBins = binned.bins[rows, columnIndex]
            histG = np.bincount(columnBins, weights=g[rows], minlength=numBins)
            histH = np.bincount(columnBins, weights=h[rows], minlength=numBins)
            histC = np.bincount(columnBins, minlength=numBins)

            leftG = np.cumsum(histG)[:-1]
            leftH = np.cumsum(histH)[:-1]
            leftC = np.cumsum(histC)[:-1]
            rightG, rightH, rightC = sumG - leftG, sumH - leftH, len(rows) - leftC

            valid = (
                (leftC >= params.min_data_in_leaf)
                & (rightC >= params.min_data_in_leaf)
                & (leftH >= params.min_sum_hessian_in_leaf)
                & (rightH >= params.min_sum_hessian_in_leaf)
                & (leftH > 0)
                & (rightH > 0)
            )

            if not valid.any():
                continue

            safeLeftH = np.where(valid, leftH, 1.0)
            safeRightH = np.where(valid, rightH, 1.0)
            gain = 0.5 * (leftG**2 / safeLeftH + rightG**2 / safeRightH - sumG**2 / sumH)

            factor = (params.n_alternatives - 1) / params.n_alternatives if params.redundancy else 1.0
            leftValue = np.clip(-factor * leftG / safeLeftH, lo, hi)
            rightValue = np.clip(-factor * rightG / safeRightH, lo, hi)
            direction = params.monotone.get(name, var.unconstrained)

            if direction == var.increasing:
                valid &= leftValue <= rightValue
            elif direction == var.decreasing:
                valid &= leftValue >= rightValue

            valid &= gain > params.min_gain_to_split

            if not valid.any():
                continue

            candidates = np.flatnonzero(valid)
            index = candidates[np.argmax(gain[candidates])]

            if best is None or gain[index] > best["gain"]:
                best = {
                    "column": name,
                    "bin": int(index),
                    "gain": float(gain[index]),
                    "left": (float(leftG[index]), float(leftH[index])),
                    "right": (float(rightG[index]), float(rightH[index])),
                    "left_value": float(leftValue[index]),
                    "right_value": float(rightValue[index]),
                }

        return best

    ####### Prediction #######

    @classmethod
    def PredictRow(cls, tree, row):
        """Value of the leaf reached by one row (a mapping of raw column values)."""
        node = tree

        while not node.is_leaf:
            if node.column not in row:
                raise SchemaError("The row has no column '{}'".format(node.column))

            node = node.left if row[node.column] <= node.threshold else node.right

        return node.value

    @classmethod
    def PredictTree(cls, tree, variables):
        """Vectorized prediction on raw values (a DataFrame or dict of arrays)."""
        n = cls.RowCount(variables)

        def Lookup(name):
            if name not in variables:
                raise SchemaError("Column '{}' is not in the dataset".format(name))

            return np.asarray(variables[name], dtype=float)

        return cls._Route(tree, n, Lookup, binned=False)

    @classmethod
    def RowCount(cls, variables):
        if isinstance(variables, dict):
            return len(next(iter(variables.values()), ()))

        return len(variables)

    @classmethod
    def PredictBinned(cls, tree, binned):
        return cls._Route(
            tree,
            binned.bins.shape[0],
            lambda name: binned.bins[:, binned.ColumnIndex(name)],
            binned=True,
        )

    @classmethod
    def _Route(cls, tree, n, lookup, binned):
        out = np.zeros(n)
        stack = [(tree, np.arange(n))]
        cache = {}

        while stack:
            node, rows = stack.pop()

            if node.is_leaf:
                out[rows] = node.value
                continue

            if node.column not in cache:
                cache[node.column] = lookup(node.column)

            cut = node.bin_threshold if binned else node.threshold
            goLeft = cache[node.column][rows] <= cut
            stack.append((node.left, rows[goLeft]))
            stack.append((node.right, rows[~goLeft]))

        return out

    ####### Inspection #######

    @classmethod
    def Columns(cls, tree):
        return {node.column for node in cls.Nodes(tree) if not node.is_leaf}

    @classmethod
    def Thresholds(cls, tree, column):
        return sorted(
            {node.threshold for node in cls.Nodes(tree) if node.column == column}
        )

    @classmethod
    def TotalGain(cls, tree):
        return sum(node.gain for node in cls.Nodes(tree) if not node.is_leaf)

    @classmethod
    def Nodes(cls, tree):
        """Preorder walk."""
        stack = [tree]

        while stack:
            node = stack.pop()
            yield node

            if not node.is_leaf:
                stack.extend((node.right, node.left))
