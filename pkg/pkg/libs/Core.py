# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import os

from dataclasses import dataclass
from dataclasses import replace

import numpy as np
import pandas as pd

import pkg.libs.Variables as var

from pkg.libs.Booster import Booster
from pkg.libs.Booster import TrainParams
from pkg.libs.Data import Data
from pkg.libs.Errors import ConfigError
from pkg.libs.Indicators import Indicators
from pkg.libs.ModelFile import ModelFile
from pkg.libs.Probabilities import Probabilities
from pkg.libs.Smoother import SmoothedModel
from pkg.libs.Smoother import Smoother
from pkg.libs.Spec import Spec
from pkg.libs.Tools import Tools


@dataclass
class RunConfig:
    command: str
    args: object
    train: TrainParams
    settings: dict
    seed: int
    out: str
    config_hash: str

    @property
    def meta(self):
        return {"seed": self.seed, "config_hash": self.config_hash}


class Core:
    """Contains the workflows behind each command"""

    @classmethod
    def LoadSettings(cls, args):
        """Merges settings.json with the command line into a RunConfig."""
        settings = Tools.LoadSettings()

        try:
            training = settings["training"]
            trees = settings["trees"]
            params = TrainParams(
                learning_rate=args.lr if args.lr is not None else training["learningRate"],
                num_rounds=args.rounds if args.rounds is not None else training["numRounds"],
                early_stopping_rounds=(
                    args.early_stop
                    if args.early_stop is not None
                    else training["earlyStoppingRounds"]
                ),
                seed=args.seed,
                min_data_in_leaf=trees["minDataInLeaf"],
                min_sum_hessian_in_leaf=trees["minSumHessianInLeaf"],
                min_gain_to_split=trees["minGainToSplit"],
                max_bins=settings["data"]["maxBins"],
                min_data_in_bin=settings["data"]["minDataInBin"],
                valid_fraction=training["validFraction"],
                nested_redundancy=bool(training["nestedRedundancyFactor"]),
                bagging_fraction=training["baggingFraction"],
                bagging_freq=training["baggingFreq"],
                feature_fraction=settings["feBlocks"]["featureFraction"],
                threads=Tools.ThreadCount(),
                log_every=training.get("logEvery", 100),
            )

            for section in ("nested", "smoothing", "indicators", "bootstrap"):
                if section not in settings:
                    raise KeyError(section)
        except KeyError as error:
            raise ConfigError("Missing setting: {}".format(error)) from None

        flags = {
            key: value
            for key, value in sorted(vars(args).items())
            if key not in ("quiet", "config", "out")
        }
        configHash = Tools.ConfigHash({"settings": settings, "flags": flags})

        return RunConfig(
            command=args.command,
            args=args,
            train=params,
            settings=settings,
            seed=args.seed,
            out=args.out,
            config_hash=configHash,
        )

    @classmethod
    def Run(cls, config):
        Tools.MakeDirectory(config.out)
        Tools.Info("Config hash: " + config.config_hash)

        workflows = {
            "train": cls.CmdTrain,
            "evaluate": cls.CmdEvaluate,
            "smooth": cls.CmdSmooth,
            "indicators": cls.CmdIndicators,
            "bootstrap": cls.CmdBootstrap,
        }

        workflows[config.command](config)

    ####### Inputs #######

    @classmethod
    def LoadSchema(cls, args):
        schema = Data.LoadSchema(args.schema) if args.schema else {"choice": "choice"}

        if args.group:
            schema["group"] = args.group

        return schema

    @classmethod
    def LoadData(cls, args, path=None):
        path = path or args.data

        if not path:
            raise ConfigError("--data is required for this command")

        Tools.Info("Loading " + path)
        ds = Data.LoadDataset(path, cls.LoadSchema(args))
        Tools.Flag("{} rows, {} variables".format(ds.n_rows, len(ds.columns)))

        return ds

    @classmethod
    def LoadSpec(cls, config):
        args = config.args

        if not args.spec:
            raise ConfigError("--spec is required for this command")

        spec = Spec.LoadSpec(args.spec)

        if args.nested:
            mu = args.mu if args.mu is not None else config.settings["nested"]["mu"]
            spec = Spec.WithNest(spec, Spec.ParseNestFlag(args.nested, mu, spec.alt_names))
        elif args.mu is not None:
            raise ConfigError("--mu needs --nested")

        return spec

    @classmethod
    def LoadModel(cls, args):
        if not args.model:
            raise ConfigError("--model is required for this command")

        Tools.Info("Loading model " + args.model)

        return ModelFile.LoadModel(args.model)

    @classmethod
    def OutPath(cls, config, name):
        return os.path.join(config.out, name)

    ####### Commands #######

    @classmethod
    def CmdTrain(cls, config):
        args = config.args
        ds = cls.LoadData(args)
        spec = cls.LoadSpec(config)
        valid = cls.LoadData(args, args.valid) if args.valid else None
        params = config.train

        if args.mu_grid:
            spec = cls.SearchMu(config, ds, spec, valid)

        if args.cv:
            folds = Data.GroupedKFold(ds, args.cv, config.seed)
            result = Booster.CrossValidate(ds, spec, params, folds)
            table = pd.concat(
                [
                    result.Frame().astype({"fold": str}),
                    pd.DataFrame(
                        {
                            "fold": ["mean"],
                            "valid_ce": [result.mean_ce],
                            "best_round": [result.mean_best_round],
                        }
                    ),
                ],
                ignore_index=True,
            )
            Tools.WriteTable(cls.OutPath(config, "cv_folds.csv"), table, config.meta)
            Tools.Flag(
                "Mean CV CE {:.6f}, mean best round {}".format(
                    result.mean_ce, result.mean_best_round
                )
            )

            # Refit on everything for the averaged number of rounds
            params = replace(params, num_rounds=result.mean_best_round, early_stopping_rounds=0)
            valid = None

        model = Booster.Train(ds, spec, params, valid)
        model.config_hash = config.config_hash

        ModelFile.SaveModel(model, cls.OutPath(config, "model.json"))
        Tools.WriteTable(
            cls.OutPath(config, "training_log.csv"), model.HistoryFrame(), config.meta
        )
        Tools.WriteTable(
            cls.OutPath(config, "ascs.csv"),
            pd.DataFrame(
                {
                    "alternative": spec.alt_names,
                    "asc": model.ascs,
                    "asc_prime": model.asc_prime,
                }
            ),
            config.meta,
        )

        for name, asc in zip(spec.alt_names, model.ascs):
            Tools.Option("ASC {}: {:.6f}".format(name, asc))

    @classmethod
    def SearchMu(cls, config, ds, spec, valid):
        """Scores each mu of the grid and returns the spec with the best one."""
        args = config.args

        if spec.nest is None:
            raise ConfigError("--mu-grid needs --nested")

        low, high, step = Tools.ParseRange(args.mu_grid, 3, "--mu-grid")

        if low < 1 or step <= 0 or high < low:
            raise ConfigError("--mu-grid needs 1 <= LO <= HI and STEP > 0")

        rows = []
        best = None

        for mu in np.arange(low, high + step / 2, step):
            mu = float(round(mu, 10))
            nest = replace(
                spec.nest, mu=tuple(mu if len(group) > 1 else 1.0 for group in spec.nest.nests)
            )
            candidate = Spec.WithNest(spec, nest)

            if args.cv:
                folds = Data.GroupedKFold(ds, args.cv, config.seed)
                score = Booster.CrossValidate(ds, candidate, config.train, folds).mean_ce
            else:
                model = Booster.Train(ds, candidate, config.train, valid)
                score = min(
                    (row["valid_ce"] for row in model.history if row["valid_ce"] is not None),
                    default=np.inf,
                )

            rows.append({"mu": mu, "valid_ce": score})
            Tools.Option("mu {:g}: validation CE {:.6f}".format(mu, score))

            if best is None or score < best[0]:
                best = (score, candidate)

        Tools.WriteTable(cls.OutPath(config, "mu_trace.csv"), pd.DataFrame(rows), config.meta)
        Tools.Flag("Best mu: {}".format(max(best[1].nest.mu)))

        return best[1]

    @classmethod
    def CmdEvaluate(cls, config):
        model = cls.LoadModel(config.args)
        ds = cls.LoadData(config.args)

        if isinstance(model, SmoothedModel):
            probs = Smoother.SmoothedPredict(model, ds)
        else:
            probs = Booster.PredictProbs(model, ds)

        ce = Probabilities.CrossEntropy(probs, ds.choice)
        Tools.Flag("Cross-entropy: {!r}".format(ce))
        Tools.WriteTable(
            cls.OutPath(config, "evaluation.csv"),
            pd.DataFrame({"rows": [ds.n_rows], "cross_entropy": [ce]}),
            config.meta,
        )

    @classmethod
    def ParseTargets(cls, spec, vText):
        targets = []

        for item in (vText or "").split(","):
            if not item.strip():
                continue

            alt, sep, variable = item.strip().partition(":")

            if not sep:
                raise ConfigError("Smoothing targets are ALT:VARIABLE, got '{}'".format(item))

            targets.append(spec.FindParameter(alt, (variable,)))

        return targets

    @classmethod
    def CmdSmooth(cls, config):
        args = config.args
        smoothing = config.settings["smoothing"]
        model = cls.LoadModel(args)
        base = model.base if isinstance(model, SmoothedModel) else model
        targets = cls.ParseTargets(base.spec, args.smooth_targets)
        path = cls.OutPath(config, "smoothed_model.json")

        if not targets:
            Tools.Warn("No smoothing targets given, writing the model unchanged")
            ModelFile.SaveModel(model, path)
            return

        ds = cls.LoadData(args)
        bounds = (
            Tools.ParseRange(args.knot_bounds, 2, "--knot-bounds")
            if args.knot_bounds
            else smoothing["knotBounds"]
        )

        sm = Smoother.OptimizeKnotCounts(
            base,
            ds,
            targets,
            countBounds=(int(bounds[0]), int(bounds[1])),
            searches=args.searches if args.searches is not None else smoothing["searches"],
            seed=config.seed,
            dfCounting=smoothing["dfCounting"],
            passes=smoothing["passes"],
            maxIterations=smoothing["maxIterations"],
        )

        ModelFile.SaveModel(sm, path)
        Tools.WriteTable(cls.OutPath(config, "knot_report.csv"), Smoother.KnotReport(sm), config.meta)

        if sm.trace is not None:
            Tools.WriteTable(cls.OutPath(config, "bic_trace.csv"), sm.trace, config.meta)
            Tools.Flag("Best BIC {:.4f} with df {}".format(sm.bic, sm.df))

    @classmethod
    def CmdIndicators(cls, config):
        args = config.args
        indicators = config.settings["indicators"]
        model = cls.LoadModel(args)
        base = model.base if isinstance(model, SmoothedModel) else model
        gridPoints = indicators["gridPoints"]

        Tools.WriteTable(
            cls.OutPath(config, "curves.csv"),
            Indicators.CurveTable(model, gridPoints),
            config.meta,
        )

        for index, entry in enumerate(base.spec.parameters):
            if len(entry.variables) == 2:
                name = "contour_{}_{}_{}.csv".format(
                    base.spec.alt_names[entry.alt], *entry.variables
                )
                Tools.WriteTable(
                    cls.OutPath(config, name),
                    Indicators.ContourTable(base, entry.alt, index, gridPoints=gridPoints),
                    config.meta,
                )

        ds = cls.LoadData(args) if args.data else None

        if base.spec.fe_blocks and ds is not None:
            _, histogram = Booster.IndividualConstants(
                base, ds, indicators["histogramBins"]
            )
            Tools.WriteTable(cls.OutPath(config, "fe_constants.csv"), histogram, config.meta)

        if not args.vot:
            return

        parts = args.vot.split(":")

        if len(parts) != 3:
            raise ConfigError("--vot expects ALT:TIME:COST, got '{}'".format(args.vot))

        alt, timeVariable, costVariable = parts
        caps = tuple(indicators["votCaps"])
        surface = Indicators.VotSurface(
            model,
            alt,
            timeVariable,
            costVariable,
            caps=caps,
            log10=bool(indicators["votLog10"]),
            gridPoints=gridPoints,
        )
        Tools.WriteTable(cls.OutPath(config, "vot_surface.csv"), surface.Frame(), config.meta)

        if ds is not None:
            rows, histogram = Indicators.PopulationVot(
                model,
                ds,
                alt,
                timeVariable,
                costVariable,
                caps=caps,
                excludeTopFraction=indicators["excludeTopFraction"],
                bins=indicators["histogramBins"],
            )
            Tools.WriteTable(cls.OutPath(config, "vot_population.csv"), rows, config.meta)
            Tools.WriteTable(cls.OutPath(config, "vot_histogram.csv"), histogram, config.meta)

    @classmethod
    def CmdBootstrap(cls, config):
        args = config.args
        ds = cls.LoadData(args)
        spec = cls.LoadSpec(config)
        iterations = (
            args.bootstrap
            if args.bootstrap is not None
            else config.settings["bootstrap"]["iterations"]
        )

        result = Booster.BootstrapUtilities(ds, spec, config.train, iterations, config.seed)
        frames = []

        for index, band in sorted(result.bands.items()):
            entry = spec.parameters[index]
            band = band.copy()
            band.insert(0, "variable", entry.variables[0])
            band.insert(0, "alternative", spec.alt_names[entry.alt])
            frames.append(band)

        columns = ["alternative", "variable", "x", "mean", "min", "max", "std"]
        table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=columns)
        Tools.WriteTable(cls.OutPath(config, "bootstrap_bands.csv"), table, config.meta)
