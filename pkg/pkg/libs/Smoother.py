# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

from dataclasses import dataclass
from dataclasses import field

import numpy as np
import pandas as pd

from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import minimize

import pkg.libs.Variables as var

from pkg.libs.Booster import Booster
from pkg.libs.Errors import ConfigError
from pkg.libs.Errors import NumericalError
from pkg.libs.Probabilities import Probabilities
from pkg.libs.Tools import Tools


@dataclass(frozen=True, eq=False)
class SplineCurve:
    """Monotone piecewise cubic Hermite curve over [knots[0], knots[-1]]."""

    variable: str
    knots: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray

    @property
    def domain(self):
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def n_intervals(self):
        return len(self.knots) - 1


@dataclass
class SmoothedModel:
    base: object
    splines: dict = field(default_factory=dict)
    df: int = 0
    bic: float = None
    trace: pd.DataFrame = None


class _Context:
    """Utilities of a model with the smoothing targets taken out.

    Each target then contributes its own column vector, so a candidate
    curve is scored without re-running every ensemble.
    """

    def __init__(self, model, ds, targets):
        self.model = model
        self.choice = ds.choice
        self.head = model.head
        self.n = ds.n_rows
        self.x = {}
        self.contributions = {}
        self.splines = {}
        self.base = Booster.PredictUtilities(model, ds)

        for target in targets:
            ensemble = model.ensembles[target]
            self.x[target] = ds.Column(ensemble.spec.variables[0])
            self.base[:, ensemble.spec.alt] -= ensemble.Predict(ds.variables)

    def Bic(self, df, target=None, contribution=None):
        V = self.base.copy()
        current = dict(self.contributions)

        if target is not None:
            current[target] = contribution

        for index, values in current.items():
            V[:, self.model.ensembles[index].spec.alt] += values

        loss = Probabilities.CrossEntropy(self.head.Probs(V), self.choice)

        return Probabilities.Bic(loss, df, self.n)


class Smoother:
    """Replaces step curves with monotone cubic splines whose knots minimize BIC."""

    @classmethod
    def FritschCarlson(cls, knots, values):
        """Knot derivatives keeping every Hermite segment monotone where the data is."""
        t = np.asarray(knots, dtype=float)
        y = np.asarray(values, dtype=float)
        widths = np.diff(t)

        if len(t) < 2 or len(y) != len(t):
            raise ConfigError("A spline needs at least two knots with one value each")

        if not (widths > 0).all():
            raise NumericalError("Knots must be strictly increasing: {}".format(t.tolist()))

        slopes = np.diff(y) / widths
        d = np.empty_like(t)
        d[0] = slopes[0]
        d[-1] = slopes[-1]

        for k in range(1, len(t) - 1):
            if slopes[k - 1] * slopes[k] > 0:
                d[k] = (slopes[k - 1] + slopes[k]) / 2
            else:
                d[k] = 0.0

        for k, slope in enumerate(slopes):
            if slope == 0:
                d[k] = d[k + 1] = 0.0
                continue

            alpha, beta = d[k] / slope, d[k + 1] / slope

            if alpha < 0:
                d[k], alpha = 0.0, 0.0

            if beta < 0:
                d[k + 1], beta = 0.0, 0.0

            radius = alpha**2 + beta**2

            if radius > 9:
                tau = 3 / np.sqrt(radius)
                d[k] = tau * alpha * slope
                d[k + 1] = tau * beta * slope

        return d

    @classmethod
    def MakeCurve(cls, variable, knots, values):
        knots = np.asarray(knots, dtype=float)
        values = np.asarray(values, dtype=float)

        return SplineCurve(
            variable=variable,
            knots=knots,
            values=values,
            derivatives=cls.FritschCarlson(knots, values),
        )

    @classmethod
    def EvalSpline(cls, curve, x):
        """Returns (value, derivative); outside the domain the boundary value and slope 0."""
        x = np.asarray(x, dtype=float)
        a, b = curve.domain
        spline = CubicHermiteSpline(curve.knots, curve.values, curve.derivatives)
        inside = np.clip(x, a, b)
        value = spline(inside)
        slope = spline(inside, 1)

        value = np.where(x <= a, curve.values[0], value)
        value = np.where(x >= b, curve.values[-1], value)
        slope = np.where((x < a) | (x > b), 0.0, slope)

        # Knots are segment starts, so they reproduce their values exactly
        return value, slope

    ####### Knot placement #######

    @classmethod
    def Project(cls, z, a, b):
        """Sorts interior knots into (a, b) keeping a minimum gap between neighbours."""
        gap = var.minimumGapFraction * (b - a)
        z = np.sort(np.clip(np.asarray(z, dtype=float), a + gap, b - gap))

        for i in range(len(z)):
            z[i] = max(z[i], (z[i - 1] if i else a) + gap)

        for i in reversed(range(len(z))):
            z[i] = min(z[i], (z[i + 1] if i + 1 < len(z) else b) - gap)

        return z

    @classmethod
    def Df(cls, counts, dfCounting="values"):
        """Free parameters of splines with the given interval counts."""
        perCurve = 2 if dfCounting == "positions" else 1

        return int(sum(perCurve * (Q + 1) for Q in counts))

    @classmethod
    def ReduceCount(cls, step, Q):
        limit = max(2, len(step.breakpoints) + 1)

        if Q > limit:
            Tools.Warn(
                "{} has {} breakpoints, using {} knot intervals instead of {}".format(
                    step.variable, len(step.breakpoints), limit, Q
                )
            )
            return limit

        return Q

    @classmethod
    def InitialKnots(cls, step, x, Q):
        a, b = step.domain
        interior = np.quantile(x, np.arange(1, Q) / Q)

        return np.concatenate(([a], cls.Project(interior, a, b), [b]))

    @classmethod
    def FitFixedCount(cls, step, context, target, Q, df, maxIterations=200):
        """Optimizes interior knot positions of one target against the full model BIC.

        Returns the best curve seen and its BIC; the starting knots are the
        first point evaluated, so the result is never worse than them.
        """
        a, b = step.domain
        x = context.x[target]
        current = context.splines.get(target)

        if current is not None and current.n_intervals == Q:
            knots = current.knots
        else:
            knots = cls.InitialKnots(step, x, cls.ReduceCount(step, Q))

        def Score(interior):
            knots = np.concatenate(([a], interior, [b]))
            curve = cls.MakeCurve(step.variable, knots, step.Evaluate(knots))
            values, _ = cls.EvalSpline(curve, x)

            return context.Bic(df, target, values), curve, values

        best = list(Score(knots[1:-1]))

        def Objective(z):
            projected = cls.Project(z, a, b)
            score = Score(projected)

            if score[0] < best[0]:
                best[:] = score

            return score[0] + context.n * np.linalg.norm(z - projected)

        if len(knots) > 2:
            minimize(
                Objective,
                knots[1:-1],
                method="Nelder-Mead",
                options={
                    "maxiter": maxIterations,
                    "xatol": 1e-6 * (b - a),
                    "fatol": 1e-6,
                },
            )

        context.contributions[target] = best[2]
        context.splines[target] = best[1]

        return best[1], best[0]

    @classmethod
    def EvaluateCounts(cls, context, steps, counts, dfCounting, passes, maxIterations):
        """Fits every target with its knot count; returns splines, initial and final BIC."""
        df = cls.Df(counts.values(), dfCounting)
        context.contributions = {}
        context.splines = {}

        for target, Q in counts.items():
            knots = cls.InitialKnots(steps[target], context.x[target], Q)
            curve = cls.MakeCurve(steps[target].variable, knots, steps[target].Evaluate(knots))
            context.splines[target] = curve
            context.contributions[target] = cls.EvalSpline(curve, context.x[target])[0]

        initial = context.Bic(df)
        bic = initial

        for _ in range(passes):
            for target, Q in counts.items():
                _, bic = cls.FitFixedCount(
                    steps[target], context, target, Q, df, maxIterations
                )

        return dict(context.splines), initial, bic

    @classmethod
    def OptimizeKnotCounts(
        cls,
        model,
        ds,
        targets,
        countBounds=(3, 8),
        searches=25,
        seed=0,
        dfCounting="values",
        passes=1,
        maxIterations=200,
    ):
        """Random search over knot counts, keeping the BIC-minimizing set of splines.

        countBounds bounds the number of knots of each curve; a curve with
        n knots has n - 1 intervals.
        """
        if not targets:
            raise ConfigError("No smoothing targets")

        low, high = int(countBounds[0]), int(countBounds[1])

        if low < 3 or high < low:
            raise ConfigError("Knot count bounds must satisfy 3 <= LO <= HI, got {}".format(countBounds))

        if searches < 1:
            raise ConfigError("At least one knot count search is needed")

        steps = {}

        for target in targets:
            entry = model.spec.parameters[target]

            if len(entry.variables) != 1:
                raise ConfigError(
                    "Interactions can't be smoothed: {}".format(", ".join(entry.variables))
                )

            if not model.ensembles[target].trees:
                Tools.Warn(
                    "Skipping {}:{}, its ensemble has no trees".format(
                        model.spec.alt_names[entry.alt], entry.variables[0]
                    )
                )
                continue

            step = Booster.StepCurve(model.ensembles[target], model.domains)

            if not step.domain[1] > step.domain[0]:
                Tools.Warn("Skipping {}, its values are all equal".format(step.variable))
                continue

            steps[target] = step

        if not steps:
            Tools.Warn("Nothing left to smooth")
            return SmoothedModel(base=model)

        context = _Context(model, ds, list(steps))
        rng = np.random.default_rng(seed)
        rows = []
        seen = {}
        best = None

        for search in range(searches):
            knotCounts = rng.integers(low, high + 1, size=len(steps))
            counts = {
                target: cls.ReduceCount(steps[target], int(n) - 1)
                for target, n in zip(steps, knotCounts)
            }
            key = tuple(counts.values())

            if key not in seen:
                seen[key] = cls.EvaluateCounts(
                    context, steps, counts, dfCounting, passes, maxIterations
                )

            splines, initial, bic = seen[key]
            rows.append(
                {
                    "search": search,
                    "knots": ";".join(str(Q + 1) for Q in key),
                    "initial_bic": initial,
                    "bic": bic,
                }
            )
            Tools.Option(
                "Search {}: knots {} BIC {:.4f}".format(search + 1, rows[-1]["knots"], bic)
            )

            if best is None or bic < best[0]:
                best = (bic, splines, key)

        return SmoothedModel(
            base=model,
            splines=best[1],
            df=cls.Df(best[2], dfCounting),
            bic=best[0],
            trace=pd.DataFrame(rows),
        )

    ####### Prediction #######

    @classmethod
    def SmoothedUtilities(cls, sm, ds):
        V = Booster.PredictUtilities(sm.base, ds)

        for target, curve in sm.splines.items():
            ensemble = sm.base.ensembles[target]
            V[:, ensemble.spec.alt] -= ensemble.Predict(ds.variables)
            V[:, ensemble.spec.alt] += cls.EvalSpline(curve, ds.Column(curve.variable))[0]

        return V

    @classmethod
    def SmoothedPredict(cls, sm, ds):
        return sm.base.head.Probs(cls.SmoothedUtilities(sm, ds))

    @classmethod
    def KnotReport(cls, sm):
        rows = []

        for target, curve in sorted(sm.splines.items()):
            entry = sm.base.spec.parameters[target]
            rows.append(
                {
                    "alternative": sm.base.spec.alt_names[entry.alt],
                    "variable": curve.variable,
                    "knots": len(curve.knots),
                    "positions": ";".join(repr(float(t)) for t in curve.knots),
                    "values": ";".join(repr(float(y)) for y in curve.values),
                }
            )

        return pd.DataFrame(
            rows, columns=["alternative", "variable", "knots", "positions", "values"]
        )
