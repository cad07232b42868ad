# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import os

from dataclasses import dataclass

import numpy as np
import pandas as pd

from pkg.libs.Errors import ConfigError
from pkg.libs.Errors import DataError
from pkg.libs.Errors import ParseError
from pkg.libs.Errors import SchemaError
from pkg.libs.Errors import ValidationError
from pkg.libs.Tools import Tools


@dataclass(frozen=True, eq=False)
class ChoiceDataset:
    """N observations of K real-valued variables and the chosen alternative.

    Treated as immutable once built: every transformation returns a new
    dataset.
    """

    variables: pd.DataFrame
    choice: np.ndarray
    alt_names: tuple
    group_key: np.ndarray = None

    def __post_init__(self):
        n = len(self.variables)

        if len(self.choice) != n:
            raise ValidationError(
                "The choice column has {} entries but the data has {} rows".format(
                    len(self.choice), n
                )
            )

        if self.group_key is not None and len(self.group_key) != n:
            raise ValidationError(
                "The group column has {} entries but the data has {} rows".format(
                    len(self.group_key), n
                )
            )

        if self.variables.columns.duplicated().any():
            duplicates = self.variables.columns[self.variables.columns.duplicated()]
            raise ValidationError(
                "Duplicate column names: {}".format(", ".join(map(str, duplicates)))
            )

        bad = np.flatnonzero((self.choice < 0) | (self.choice >= len(self.alt_names)))

        if len(bad):
            raise ValidationError(
                "Choice {} at row {} is outside 0..{}".format(
                    self.choice[bad[0]], bad[0] + 1, len(self.alt_names) - 1
                )
            )

    @property
    def n_rows(self):
        return len(self.variables)

    @property
    def n_alternatives(self):
        return len(self.alt_names)

    @property
    def columns(self):
        return list(self.variables.columns)

    def Column(self, name):
        """Returns a column as a float array."""
        if name not in self.variables.columns:
            raise SchemaError("Column '{}' is not in the dataset".format(name))

        return self.variables[name].to_numpy(dtype=float)

    def Take(self, indices):
        """Returns the rows at indices (repetitions allowed) as a new dataset."""
        indices = np.asarray(indices)

        return ChoiceDataset(
            variables=self.variables.iloc[indices].reset_index(drop=True),
            choice=self.choice[indices],
            alt_names=self.alt_names,
            group_key=None if self.group_key is None else self.group_key[indices],
        )


@dataclass(frozen=True, eq=False)
class BinnedDataset:
    """Histogram view of a dataset.

    edges[c] holds the cut points of column c; a raw value x falls in bin
    b when edges[b-1] < x <= edges[b].
    """

    columns: tuple
    edges: dict
    bins: np.ndarray
    max_bins: int
    min_data_in_bin: int

    def ColumnIndex(self, name):
        try:
            return self.columns.index(name)
        except ValueError:
            raise SchemaError("Column '{}' was not binned".format(name)) from None

    def NumBins(self, name):
        return len(self.edges[name]) + 1

    def BinInterval(self, name, vBin):
        """Returns the (low, high] interval of a bin."""
        edges = self.edges[name]
        low = edges[vBin - 1] if vBin > 0 else -np.inf
        high = edges[vBin] if vBin < len(edges) else np.inf

        return low, high


@dataclass(frozen=True, eq=False)
class FoldAssignment:
    fold: np.ndarray
    k: int

    def Valid(self, vFold):
        return np.flatnonzero(self.fold == vFold)

    def Train(self, vFold):
        return np.flatnonzero(self.fold != vFold)


class Data:
    """Loads, bins, resamples and folds choice data."""

    _schema_keys = {"choice", "group", "alternatives", "categorical", "ignore", "delimiter"}

    @classmethod
    def LoadSchema(cls, path):
        schema = Tools.LoadJson(path, SchemaError)
        cls.CheckSchema(schema)

        return schema

    @classmethod
    def CheckSchema(cls, schema):
        if not isinstance(schema, dict):
            raise SchemaError("The schema must be a JSON object")

        unknown = set(schema) - cls._schema_keys

        if unknown:
            raise SchemaError("Unknown schema keys: {}".format(", ".join(sorted(unknown))))

        if "choice" not in schema:
            raise SchemaError("The schema doesn't name a choice column")

    @classmethod
    def LoadDataset(cls, path, schema):
        """Reads a delimited table into a ChoiceDataset.

        Categorical columns listed in the schema are expanded into 0/1
        dummies named <column>_<level>, the reference level dropped.
        """
        cls.CheckSchema(schema)

        if not os.path.isfile(path):
            raise DataError("The data file doesn't exist: {}".format(path))

        delimiter = schema.get("delimiter", ",")

        try:
            header = pd.read_csv(
                path, sep=delimiter, header=None, nrows=1, dtype=str, skipinitialspace=True
            )
            frame = pd.read_csv(
                path,
                sep=delimiter,
                float_precision="round_trip",
                skipinitialspace=True,
            )
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as error:
            raise ParseError("Unable to read {}: {}".format(path, error)) from error

        # read_csv renames repeated names to x.1, so check the raw header
        names = pd.Index(header.iloc[0].fillna("").astype(str))

        if names.duplicated().any():
            raise ValidationError(
                "Duplicate column names: {}".format(
                    ", ".join(sorted(set(names[names.duplicated()])))
                )
            )

        choiceColumn = schema["choice"]
        groupColumn = schema.get("group")
        categorical = schema.get("categorical", {})
        ignored = set(schema.get("ignore", []))

        for column in [choiceColumn, groupColumn, *categorical, *ignored]:
            if column and column not in frame.columns:
                raise SchemaError("Missing column: {}".format(column))

        altNames = schema.get("alternatives")
        choice = cls._ReadChoice(frame[choiceColumn], altNames, choiceColumn)

        if altNames is None:
            altNames = [str(alt) for alt in range(int(choice.max()) + 1 if len(choice) else 0)]

        groupKey = None

        if groupColumn:
            if frame[groupColumn].isna().any():
                row = int(np.flatnonzero(frame[groupColumn].isna())[0]) + 1
                raise ParseError("Missing value", row, groupColumn)

            groupKey = frame[groupColumn].to_numpy()

        variables = {}

        for column in frame.columns:
            if column in (choiceColumn, groupColumn) or column in ignored:
                continue

            if column in categorical:
                dummies = cls._ExpandDummies(frame[column], categorical[column])
                taken = [name for name in dummies if name in frame.columns or name in variables]

                if taken:
                    raise SchemaError(
                        "Dummy column {} of {} clashes with an existing column".format(
                            taken[0], column
                        )
                    )

                variables.update(dummies)
            else:
                variables[column] = cls._ReadNumeric(frame[column], column)

        return ChoiceDataset(
            variables=pd.DataFrame(variables, index=pd.RangeIndex(len(frame))),
            choice=choice,
            alt_names=tuple(altNames),
            group_key=groupKey,
        )

    @classmethod
    def _ReadNumeric(cls, series, column):
        values = pd.to_numeric(series, errors="coerce")
        bad = values.isna().to_numpy()

        if bad.any():
            row = int(np.flatnonzero(bad)[0])

            if pd.isna(series.iloc[row]):
                raise ParseError("Missing value", row + 1, column)

            raise ParseError(
                "Non-numeric value '{}'".format(series.iloc[row]), row + 1, column
            )

        return values.to_numpy(dtype=float)

    @classmethod
    def _ReadChoice(cls, series, altNames, column):
        if series.isna().any():
            raise ParseError("Missing value", int(np.flatnonzero(series.isna())[0]) + 1, column)

        # Choices may be written as alternative names
        if altNames is not None and series.dtype == object:
            lookup = {str(name): index for index, name in enumerate(altNames)}
            mapped = series.astype(str).map(lookup)

            if not mapped.isna().any():
                return mapped.to_numpy(dtype=np.int64)

        values = cls._ReadNumeric(series, column)
        fractional = np.flatnonzero(values != np.round(values))

        if len(fractional):
            raise ParseError(
                "Choice '{}' is not an alternative index".format(
                    series.iloc[fractional[0]]
                ),
                int(fractional[0]) + 1,
                column,
            )

        choice = values.astype(np.int64)

        if altNames is not None:
            bad = np.flatnonzero((choice < 0) | (choice >= len(altNames)))

            if len(bad):
                raise ValidationError(
                    "Choice {} at row {} is outside 0..{}".format(
                        choice[bad[0]], bad[0] + 1, len(altNames) - 1
                    )
                )

        return choice

    @classmethod
    def _ExpandDummies(cls, series, reference):
        if series.isna().any():
            raise ParseError(
                "Missing value", int(np.flatnonzero(series.isna())[0]) + 1, series.name
            )

        levels = series.astype(str)
        reference = str(reference)

        if reference not in set(levels):
            raise SchemaError(
                "Reference level '{}' doesn't occur in column {}".format(
                    reference, series.name
                )
            )

        dummies = pd.get_dummies(levels, prefix=series.name, prefix_sep="_", dtype=float)
        dummies = dummies.drop(columns="{}_{}".format(series.name, reference))

        return {name: dummies[name].to_numpy() for name in sorted(dummies.columns)}

    @classmethod
    def SaveDataset(cls, ds, path, choiceColumn="choice", groupColumn="group"):
        """Writes ds so that LoadDataset with the matching schema reads it back bit-for-bit."""
        frame = ds.variables.copy()
        frame[choiceColumn] = ds.choice

        if ds.group_key is not None:
            frame[groupColumn] = ds.group_key

        frame.to_csv(path, index=False)

        schema = {"choice": choiceColumn, "alternatives": list(ds.alt_names)}

        if ds.group_key is not None:
            schema["group"] = groupColumn

        return schema

    ####### Binning #######

    @classmethod
    def BinColumn(cls, values, maxBins, minDataInBin):
        """Quantile cut points for one column.

        Columns with at most maxBins distinct values get one bin per value;
        bins holding fewer than minDataInBin rows are merged into a neighbour.
        """
        distinct, counts = np.unique(values, return_counts=True)

        if len(distinct) <= 1:
            return np.empty(0)

        cumulative = np.cumsum(counts)
        n = cumulative[-1]

        if len(distinct) <= maxBins:
            cutAfter = np.arange(len(distinct) - 1)
        else:
            targets = np.arange(1, maxBins) * (n / maxBins)
            cutAfter = np.unique(np.searchsorted(cumulative, targets, side="left"))
            cutAfter = cutAfter[cutAfter < len(distinct) - 1]

        kept = []
        previous = 0

        for cut in cutAfter:
            if cumulative[cut] - previous >= minDataInBin:
                kept.append(cut)
                previous = cumulative[cut]

        # The remainder after the last cut is folded into its left neighbour
        if kept and n - cumulative[kept[-1]] < minDataInBin:
            kept.pop()

        edges = []

        for cut in kept:
            low, high = distinct[cut], distinct[cut + 1]
            middle = low + (high - low) / 2
            edges.append(middle if low <= middle < high else low)

        return np.asarray(edges, dtype=float)

    @classmethod
    def BinFeatures(cls, ds, maxBins, minDataInBin, columns=None):
        if ds.n_rows == 0:
            raise DataError("Cannot bin an empty dataset")

        if maxBins < 2:
            raise ConfigError("max_bins must be at least 2, got {}".format(maxBins))

        if minDataInBin < 1:
            raise ConfigError("min_data_in_bin must be positive, got {}".format(minDataInBin))

        columns = tuple(columns if columns is not None else ds.columns)
        edges = {
            column: cls.BinColumn(ds.Column(column), maxBins, minDataInBin)
            for column in columns
        }

        return cls._Assign(ds, columns, edges, maxBins, minDataInBin)

    @classmethod
    def ApplyBins(cls, binned, ds):
        """Bins another dataset with the edges learnt on binned's data."""
        return cls._Assign(ds, binned.columns, binned.edges, binned.max_bins, binned.min_data_in_bin)

    @classmethod
    def _Assign(cls, ds, columns, edges, maxBins, minDataInBin):
        bins = np.empty((ds.n_rows, len(columns)), dtype=np.int32, order="F")

        for index, column in enumerate(columns):
            bins[:, index] = np.searchsorted(edges[column], ds.Column(column), side="left")

        return BinnedDataset(
            columns=columns,
            edges=edges,
            bins=bins,
            max_bins=maxBins,
            min_data_in_bin=minDataInBin,
        )

    ####### Resampling #######

    @classmethod
    def GroupedKFold(cls, ds, k, seed):
        """Assigns whole groups to folds, largest groups first, each to the lightest fold.

        Rows without a group key are their own group.
        """
        if k < 2:
            raise ConfigError("The number of folds must be at least 2, got {}".format(k))

        keys = ds.group_key if ds.group_key is not None else np.arange(ds.n_rows)
        groups, inverse = np.unique(keys, return_inverse=True)

        if len(groups) < k:
            raise DataError(
                "Cannot build {} folds from {} groups".format(k, len(groups))
            )

        sizes = np.bincount(inverse)
        rng = np.random.default_rng(seed)
        order = rng.permutation(len(groups))
        order = order[np.argsort(-sizes[order], kind="stable")]

        load = np.zeros(k, dtype=np.int64)
        groupFold = np.empty(len(groups), dtype=np.int64)

        for group in order:
            target = int(np.argmin(load))
            groupFold[group] = target
            load[target] += sizes[group]

        return FoldAssignment(fold=groupFold[inverse], k=k)

    @classmethod
    def GroupSplit(cls, ds, validFraction, seed):
        """Group-aware train/validation split holding out about validFraction of rows.

        With fewer groups than folds one group is held out. A single group
        can't be split: the whole dataset is returned with no validation part.
        """
        keys = ds.group_key if ds.group_key is not None else np.arange(ds.n_rows)
        nGroups = len(np.unique(keys))

        if nGroups < 2:
            Tools.Warn("Only {} group, training without a validation split".format(nGroups))
            return ds, None

        k = min(max(2, int(round(1 / validFraction))), nGroups)
        folds = cls.GroupedKFold(ds, k, seed)

        return ds.Take(folds.Train(0)), ds.Take(folds.Valid(0))

    @classmethod
    def BootstrapSample(cls, ds, seed):
        """Draws as many groups as the data has, with replacement.

        Rows without a group key are their own group. Copies of a group keep
        its key, so a later group split never puts one observation on both
        sides.
        """
        if ds.n_rows == 0:
            raise DataError("Cannot resample an empty dataset")

        rng = np.random.default_rng(seed)
        keys = ds.group_key if ds.group_key is not None else np.arange(ds.n_rows)
        _, inverse = np.unique(keys, return_inverse=True)
        nGroups = int(inverse.max()) + 1
        members = np.argsort(inverse, kind="stable")
        starts = np.concatenate([[0], np.cumsum(np.bincount(inverse, minlength=nGroups))])
        drawn = rng.integers(0, nGroups, size=nGroups)
        rows = np.concatenate([members[starts[g] : starts[g + 1]] for g in drawn])
        sample = ds.Take(rows)

        return ChoiceDataset(
            variables=sample.variables,
            choice=sample.choice,
            alt_names=sample.alt_names,
            group_key=keys[rows],
        )
