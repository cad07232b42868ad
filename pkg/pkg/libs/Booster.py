# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace

import numpy as np
import pandas as pd

import pkg.libs.Variables as var

from pkg.libs.Data import Data
from pkg.libs.Errors import ConfigError
from pkg.libs.Errors import DataError
from pkg.libs.Probabilities import Probabilities
from pkg.libs.Spec import FEBlockSpec
from pkg.libs.Spec import Spec
from pkg.libs.Tools import Tools
from pkg.libs.Tree import Tree
from pkg.libs.Tree import TreeParams


@dataclass
class TrainParams:
    learning_rate: float = 0.1
    num_rounds: int = 1300
    early_stopping_rounds: int = 100
    seed: int = 0
    min_data_in_leaf: int = 20
    min_sum_hessian_in_leaf: float = 1e-3
    min_gain_to_split: float = 0.0
    max_bins: int = 255
    min_data_in_bin: int = 3
    valid_fraction: float = 0.2
    nested_redundancy: bool = True
    bagging_fraction: float = 1.0
    bagging_freq: int = 0
    feature_fraction: float = 1.0
    threads: int = 1
    log_every: int = 100

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive, got {}".format(self.learning_rate))

        if self.num_rounds < 0 or self.early_stopping_rounds < 0:
            raise ConfigError("num_rounds and early_stopping_rounds can't be negative")

        if not 0 < self.valid_fraction < 1:
            raise ConfigError("valid_fraction must be in (0, 1), got {}".format(self.valid_fraction))

        if not 0 < self.bagging_fraction <= 1 or not 0 < self.feature_fraction <= 1:
            raise ConfigError("bagging_fraction and feature_fraction must be in (0, 1]")

    def TreeParamsFor(self, entry, J, nested):
        """Tree learner settings for one parameter or FE block."""
        isBlock = isinstance(entry, FEBlockSpec)

        return TreeParams(
            max_depth=entry.max_depth,
            min_data_in_leaf=self.min_data_in_leaf,
            min_sum_hessian_in_leaf=self.min_sum_hessian_in_leaf,
            min_gain_to_split=self.min_gain_to_split,
            learning_rate=self.learning_rate,
            allowed_columns=entry.variables,
            monotone=dict(zip(entry.variables, entry.monotone)),
            num_leaves=entry.num_leaves if isBlock else None,
            n_alternatives=J,
            redundancy=self.nested_redundancy if nested else True,
        )


@dataclass
class ParameterEnsemble:
    spec: object
    trees: list = field(default_factory=list)
    rounds: list = field(default_factory=list)

    @property
    def is_fe_block(self):
        return isinstance(self.spec, FEBlockSpec)

    def Predict(self, variables):
        total = np.zeros(Tree.RowCount(variables))

        for tree in self.trees:
            total += Tree.PredictTree(tree, variables)

        return total

    def PredictAt(self, row):
        return float(sum(Tree.PredictRow(tree, row) for tree in self.trees))

    def Thresholds(self, column):
        return sorted({t for tree in self.trees for t in Tree.Thresholds(tree, column)})


@dataclass
class RUMBoostModel:
    spec: object
    ensembles: list
    ascs: np.ndarray = None
    asc_prime: np.ndarray = None
    trained_rounds: int = 0
    best_round: int = 0
    history: list = field(default_factory=list)
    domains: dict = field(default_factory=dict)
    seed: int = 0
    config_hash: str = None

    @property
    def head(self):
        return Probabilities.MakeHead(self.spec.J, self.spec.nest)

    @property
    def n_trees(self):
        return sum(len(ensemble.trees) for ensemble in self.ensembles)

    def HistoryFrame(self):
        return pd.DataFrame(self.history, columns=["round", "train_ce", "valid_ce", "trees"])


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Piecewise-constant utility curve.

    values[k] holds the utility on (breakpoints[k-1], breakpoints[k]], the
    last entry the utility above the last breakpoint.
    """

    variable: str
    breakpoints: np.ndarray
    values: np.ndarray
    domain: tuple

    def Evaluate(self, x):
        x = np.asarray(x, dtype=float)

        return self.values[np.searchsorted(self.breakpoints, x, side="left")]

    def IsMonotone(self, direction):
        steps = np.diff(self.values)

        if direction == var.increasing:
            return bool((steps >= 0).all())

        if direction == var.decreasing:
            return bool((steps <= 0).all())

        return True


@dataclass
class CrossValidationResult:
    fold_ce: list
    fold_rounds: list
    mean_ce: float
    mean_best_round: int

    def Frame(self):
        return pd.DataFrame(
            {
                "fold": range(len(self.fold_ce)),
                "valid_ce": self.fold_ce,
                "best_round": self.fold_rounds,
            }
        )


@dataclass
class BootstrapResult:
    curves: list
    bands: dict


class Booster:
    """Gradient boosting of per-parameter utility ensembles."""

    @classmethod
    def Train(cls, ds, spec, params, valid=None):
        Spec.ValidateSpec(spec, ds)

        if ds.n_rows == 0:
            raise DataError("Cannot train on an empty dataset")

        train = ds

        if valid is None and params.early_stopping_rounds > 0:
            train, valid = Data.GroupSplit(ds, params.valid_fraction, params.seed)

            if valid is not None:
                Tools.Info(
                    "Holding out {} of {} rows for early stopping".format(
                        valid.n_rows, ds.n_rows
                    )
                )

        if valid is not None and valid.n_alternatives != spec.J:
            raise DataError("The validation data has a different number of alternatives")

        J = spec.J
        head = Probabilities.MakeHead(J, spec.nest)
        nested = spec.nest is not None
        columns = spec.Columns()
        binned = Data.BinFeatures(train, params.max_bins, params.min_data_in_bin, columns)
        ensembles = [ParameterEnsemble(entry) for entry in spec.ensembles]
        treeParams = [params.TreeParamsFor(entry, J, nested) for entry in spec.ensembles]
        rng = np.random.default_rng(params.seed)

        V = np.zeros((train.n_rows, J))
        validV = np.zeros((valid.n_rows, J)) if valid is not None else None
        probs = head.Probs(V)
        rows = None
        history = []
        best = (np.inf, 0)

        Tools.Info(
            "Training {} ensembles over {} rows with the {} head".format(
                len(ensembles), train.n_rows, head.Describe()
            )
        )

        for m in range(1, params.num_rounds + 1):
            g, h = head.GradHess(probs, train.choice)

            if nested:
                h = np.maximum(h, var.hessianFloor)

            if params.bagging_freq > 0 and params.bagging_fraction < 1:
                if (m - 1) % params.bagging_freq == 0:
                    size = max(1, int(round(params.bagging_fraction * train.n_rows)))
                    rows = np.sort(rng.choice(train.n_rows, size=size, replace=False))

            jobs = [
                (index, entry.alt, cls._SampleFeatures(treeParams[index], entry, params, rng))
                for index, entry in enumerate(spec.ensembles)
            ]
            trees = cls._GrowCandidates(binned, g, h, rows, jobs, params.threads)
            accepted = cls._SelectPerAlternative(spec, jobs, trees)

            if not accepted:
                Tools.Info("Round {}: no alternative found a split, stopping".format(m))
                break

            for index, tree in accepted:
                alt = spec.ensembles[index].alt
                ensembles[index].trees.append(tree)
                ensembles[index].rounds.append(m)
                V[:, alt] += Tree.PredictBinned(tree, binned)

                if valid is not None:
                    validV[:, alt] += Tree.PredictTree(tree, valid.variables)

            probs = head.Probs(V)
            trainCE = Probabilities.CrossEntropy(probs, train.choice)
            validCE = None

            if valid is not None:
                validCE = Probabilities.CrossEntropy(head.Probs(validV), valid.choice)

            history.append(
                {"round": m, "train_ce": trainCE, "valid_ce": validCE, "trees": len(accepted)}
            )

            if params.log_every and m % params.log_every == 0:
                Tools.Option(
                    "Round {}: train CE {:.6f}{}".format(
                        m,
                        trainCE,
                        "" if validCE is None else ", valid CE {:.6f}".format(validCE),
                    )
                )

            if validCE is not None and params.early_stopping_rounds > 0:
                if validCE < best[0]:
                    best = (validCE, m)
                elif m - best[1] >= params.early_stopping_rounds:
                    Tools.Info(
                        "Early stopping at round {}, best round {}".format(m, best[1])
                    )
                    break

        trainedRounds = len(history)
        bestRound = trainedRounds

        if valid is not None and params.early_stopping_rounds > 0 and best[1] > 0:
            bestRound = best[1]
            cls._Truncate(ensembles, bestRound)

        model = RUMBoostModel(
            spec=spec,
            ensembles=ensembles,
            trained_rounds=trainedRounds,
            best_round=bestRound,
            history=history,
            domains=cls.Domains(ds, columns),
            seed=params.seed,
        )
        cls.ExtractAsc(model)

        Tools.Flag(
            "Trained {} trees in {} rounds (best round {})".format(
                model.n_trees, trainedRounds, bestRound
            )
        )

        return model


    @classmethod
    def _SampleFeatures(cls, treeParams, entry, params, rng):
        if not isinstance(entry, FEBlockSpec) or params.feature_fraction >= 1:
            return treeParams

        count = max(1, int(round(params.feature_fraction * len(entry.variables))))
        chosen = rng.choice(len(entry.variables), size=count, replace=False)

        return replace(
            treeParams, allowed_columns=tuple(entry.variables[i] for i in sorted(chosen))
        )

    @classmethod
    def _GrowCandidates(cls, binned, g, h, rows, jobs, threads):
        def Grow(job):
            _, alt, treeParams = job
            return Tree.BuildTree(binned, g[:, alt], h[:, alt], treeParams, rows)

        if threads > 1 and len(jobs) > 1:
            # map returns in submission order whatever the scheduling
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(Grow, jobs))

        return [Grow(job) for job in jobs]

    @classmethod
    def _SelectPerAlternative(cls, spec, jobs, trees):
        """Keeps the highest gain candidate of each alternative, if any split."""
        accepted = []

        for alt in range(spec.J):
            best = None

            for (index, jobAlt, _), tree in zip(jobs, trees):
                if jobAlt != alt or tree.is_leaf:
                    continue

                gain = Tree.TotalGain(tree)

                if best is None or gain > best[0]:
                    best = (gain, index, tree)

            if best is not None:
                accepted.append((best[1], best[2]))

        return accepted

    @classmethod
    def _Truncate(cls, ensembles, bestRound):
        for ensemble in ensembles:
            keep = [r <= bestRound for r in ensemble.rounds]
            ensemble.trees = [tree for tree, k in zip(ensemble.trees, keep) if k]
            ensemble.rounds = [r for r, k in zip(ensemble.rounds, keep) if k]

    @classmethod
    def Domains(cls, ds, columns):
        domains = {}

        for column in columns:
            values = ds.Column(column)
            domains[column] = (float(values.min()), float(values.max()))

        return domains

    ####### Prediction #######

    @classmethod
    def PredictUtilities(cls, model, ds):
        """Raw ensemble sums; they already carry each alternative's ASC'."""
        V = np.zeros((ds.n_rows, model.spec.J))

        for ensemble in model.ensembles:
            V[:, ensemble.spec.alt] += ensemble.Predict(ds.variables)

        return V

    @classmethod
    def PredictProbs(cls, model, ds):
        return model.head.Probs(cls.PredictUtilities(model, ds))

    @classmethod
    def ExtractAsc(cls, model):
        """Reads ASC'_i off the ensembles at the zero vector and normalizes them."""
        J = model.spec.J
        ascPrime = np.zeros(J)

        for ensemble in model.ensembles:
            zero = {variable: 0.0 for variable in ensemble.spec.variables}
            ascPrime[ensemble.spec.alt] += ensemble.PredictAt(zero)

        ascs = ascPrime - ascPrime[model.spec.reference_alt]
        ascs[model.spec.reference_alt] = 0.0

        model.asc_prime = ascPrime
        model.ascs = ascs

        return ascs

    @classmethod
    def UtilityCurve(cls, model, alt, parameter):
        """Step curve of a single-variable parameter, given by index or variable name."""
        spec = model.spec

        if isinstance(parameter, str):
            index = spec.FindParameter(alt, (parameter,))
        else:
            index = int(parameter)

        entry = spec.parameters[index]

        if entry.alt != spec.AltIndex(alt):
            raise ConfigError(
                "Parameter {} doesn't belong to alternative {}".format(index, alt)
            )

        if len(entry.variables) != 1:
            raise ConfigError(
                "Parameter over {} is an interaction; export it with a contour table".format(
                    ", ".join(entry.variables)
                )
            )

        return cls.StepCurve(model.ensembles[index], model.domains)

    @classmethod
    def StepCurve(cls, ensemble, domains):
        variable = ensemble.spec.variables[0]
        breakpoints = np.asarray(ensemble.Thresholds(variable), dtype=float)

        if len(breakpoints):
            points = np.append(breakpoints, np.nextafter(breakpoints[-1], np.inf))
            values = ensemble.Predict({variable: points})
        else:
            values = np.array([ensemble.PredictAt({variable: 0.0})])

        domain = domains.get(variable)

        if domain is None:
            domain = (float(breakpoints[0]), float(breakpoints[-1])) if len(breakpoints) else (0.0, 0.0)

        return StepFunction(
            variable=variable, breakpoints=breakpoints, values=values, domain=tuple(domain)
        )

    ####### Resampling #######

    @classmethod
    def CrossValidate(cls, ds, spec, params, folds):
        if folds.k < 2:
            raise ConfigError("Cross validation needs at least 2 folds")

        foldCE = []
        foldRounds = []

        for fold in range(folds.k):
            train = ds.Take(folds.Train(fold))
            valid = ds.Take(folds.Valid(fold))

            for part, name in ((train, "training"), (valid, "validation")):
                missing = sorted(set(range(spec.J)) - set(np.unique(part.choice)))

                if missing:
                    Tools.Warn(
                        "Fold {} {} rows never choose {}".format(
                            fold, name, ", ".join(spec.alt_names[alt] for alt in missing)
                        )
                    )

            Tools.Info("Fold {}/{}: {} training rows".format(fold + 1, folds.k, train.n_rows))
            model = cls.Train(train, spec, params, valid)
            foldCE.append(Probabilities.CrossEntropy(cls.PredictProbs(model, valid), valid.choice))
            foldRounds.append(model.best_round)

        return CrossValidationResult(
            fold_ce=foldCE,
            fold_rounds=foldRounds,
            mean_ce=float(np.mean(foldCE)),
            mean_best_round=int(round(np.mean(foldRounds))),
        )

    @classmethod
    def BootstrapUtilities(cls, ds, spec, params, iterations, seed):
        """Trains on bootstrap resamples and summarizes every single-variable curve.

        bands maps a parameter index to a frame of x, mean, min, max and std
        over the union of all iterations' breakpoints.
        """
        if iterations < 1:
            raise ConfigError("Bootstrap needs at least one iteration")

        targets = [i for i, entry in enumerate(spec.parameters) if len(entry.variables) == 1]
        curves = []

        for t in range(iterations):
            Tools.Info("Bootstrap iteration {}/{}".format(t + 1, iterations))
            sample = Data.BootstrapSample(ds, seed + t)
            model = cls.Train(sample, spec, replace(params, seed=seed + t))
            model.domains = cls.Domains(ds, spec.Columns())
            curves.append({i: cls.StepCurve(model.ensembles[i], model.domains) for i in targets})

        bands = {}

        for i in targets:
            steps = [iteration[i] for iteration in curves]
            grid = np.unique(np.concatenate([step.breakpoints for step in steps]))
            upper = steps[0].domain[1]

            # The top of the domain covers the piece above the last breakpoint
            if len(grid) == 0 or grid[-1] < upper:
                grid = np.append(grid, upper)

            sampled = np.vstack([step.Evaluate(grid) for step in steps])

            bands[i] = pd.DataFrame(
                {
                    "x": grid,
                    "mean": sampled.mean(axis=0),
                    "min": sampled.min(axis=0),
                    "max": sampled.max(axis=0),
                    "std": sampled.std(axis=0),
                }
            )

        return BootstrapResult(curves=curves, bands=bands)

    ####### Functional effects #######

    @classmethod
    def IndividualConstants(cls, model, ds, histogramBins=50):
        """Per-row FE block output of every alternative and its histogram table."""
        blocks = [ensemble for ensemble in model.ensembles if ensemble.is_fe_block]

        if not blocks:
            raise ConfigError("The model has no FE blocks")

        constants = np.zeros((ds.n_rows, model.spec.J))

        for ensemble in blocks:
            constants[:, ensemble.spec.alt] += ensemble.Predict(ds.variables)

        tables = []

        for alt in sorted({ensemble.spec.alt for ensemble in blocks}):
            counts, edges = np.histogram(constants[:, alt], bins=histogramBins)
            tables.append(
                pd.DataFrame(
                    {
                        "alternative": model.spec.alt_names[alt],
                        "bin_low": edges[:-1],
                        "bin_high": edges[1:],
                        "count": counts,
                    }
                )
            )

        return constants, pd.concat(tables, ignore_index=True)
