# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

from dataclasses import dataclass

import numpy as np
import pandas as pd

import pkg.libs.Variables as var

from pkg.libs.Booster import Booster
from pkg.libs.Booster import StepFunction
from pkg.libs.Errors import ConfigError
from pkg.libs.Smoother import SmoothedModel
from pkg.libs.Smoother import Smoother


@dataclass(frozen=True, eq=False)
class VoTSurface:
    """Value of time over a time × cost grid; masked cells are undefined."""

    time_grid: np.ndarray
    cost_grid: np.ndarray
    vot: np.ndarray
    mask: np.ndarray
    caps: tuple
    log10: bool = False

    def Frame(self):
        T, C = np.meshgrid(self.time_grid, self.cost_grid, indexing="ij")
        values = np.where(self.mask, np.nan, self.vot)

        if self.log10:
            values = np.log10(values)

        return pd.DataFrame(
            {
                "time": T.ravel(),
                "cost": C.ravel(),
                "log10_vot" if self.log10 else "vot": values.ravel(),
                "masked": self.mask.ravel().astype(int),
            }
        )


class Indicators:
    """Behavioural outputs of trained and smoothed models."""

    @classmethod
    def MarginalUtility(cls, curve, x):
        if isinstance(curve, StepFunction):
            raise ConfigError(
                "{} is a step curve with no usable derivative; smooth it first".format(
                    curve.variable
                )
            )

        return Smoother.EvalSpline(curve, x)[1]

    @classmethod
    def _Splines(cls, sm, alt, timeParam, costParam):
        if not isinstance(sm, SmoothedModel):
            raise ConfigError("Value of time needs a smoothed model")

        curves = []

        for parameter in (timeParam, costParam):
            index = (
                sm.base.spec.FindParameter(alt, (parameter,))
                if isinstance(parameter, str)
                else int(parameter)
            )

            if index not in sm.splines:
                raise ConfigError(
                    "Parameter {} of {} isn't smoothed".format(parameter, alt)
                )

            curves.append(sm.splines[index])

        return curves

    @classmethod
    def _Vot(cls, timeCurve, costCurve, t, c, caps):
        """Capped ratio of time and cost marginal utilities plus its mask; t and c broadcast."""
        t, c = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(c, dtype=float))
        dt = Smoother.EvalSpline(timeCurve, t)[1]
        dc = Smoother.EvalSpline(costCurve, c)[1]
        threshold = var.derivativeThreshold

        mask = np.abs(dc) < threshold
        mask |= ~np.isfinite(dt) | ~np.isfinite(dc)

        for curve, x, d in ((timeCurve, t, dt), (costCurve, c, dc)):
            a, b = curve.domain
            mask |= (x < a) | (x > b)

            # Flat first and last segments
            edge = (x <= curve.knots[1]) | (x >= curve.knots[-2])
            mask |= edge & (np.abs(d) < threshold)

        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(mask, np.nan, dt / np.where(mask, 1.0, dc))

        return np.clip(ratio, caps[0], caps[1]), mask

    @classmethod
    def VotSurface(
        cls,
        sm,
        alt,
        timeParam,
        costParam,
        timeGrid=None,
        costGrid=None,
        caps=(0.1, 100.0),
        log10=False,
        gridPoints=100,
    ):
        timeCurve, costCurve = cls._Splines(sm, alt, timeParam, costParam)

        if timeGrid is None:
            timeGrid = np.linspace(*timeCurve.domain, gridPoints)

        if costGrid is None:
            costGrid = np.linspace(*costCurve.domain, gridPoints)

        timeGrid = np.asarray(timeGrid, dtype=float)
        costGrid = np.asarray(costGrid, dtype=float)
        vot, mask = cls._Vot(timeCurve, costCurve, timeGrid[:, None], costGrid[None, :], caps)

        return VoTSurface(
            time_grid=timeGrid,
            cost_grid=costGrid,
            vot=vot,
            mask=mask,
            caps=tuple(caps),
            log10=bool(log10),
        )

    @classmethod
    def PopulationVot(
        cls,
        sm,
        ds,
        alt,
        timeParam,
        costParam,
        caps=(0.1, 100.0),
        excludeTopFraction=0.001,
        bins=50,
    ):
        """Value of time of every usable row and a histogram of the values.

        Rows with zero travel time and masked rows are dropped, then the
        top excludeTopFraction of the values.
        """
        timeCurve, costCurve = cls._Splines(sm, alt, timeParam, costParam)
        t = ds.Column(timeCurve.variable)
        c = ds.Column(costCurve.variable)
        vot, mask = cls._Vot(timeCurve, costCurve, t, c, caps)

        keep = np.flatnonzero((t != 0) & ~mask)
        drop = int(np.floor(excludeTopFraction * len(keep)))

        if drop:
            order = np.argsort(vot[keep], kind="stable")
            keep = np.sort(keep[order[: len(keep) - drop]])

        rows = pd.DataFrame({"row": keep, "time": t[keep], "cost": c[keep], "vot": vot[keep]})

        if len(keep):
            counts, edges = np.histogram(vot[keep], bins=bins)
        else:
            counts, edges = np.zeros(0, dtype=int), np.zeros(1)

        histogram = pd.DataFrame({"bin_low": edges[:-1], "bin_high": edges[1:], "count": counts})

        return rows, histogram

    @classmethod
    def ContourTable(cls, model, alt, parameter, grids=None, gridPoints=50):
        """Ensemble output of a two-variable parameter on a grid cross-product."""
        spec = model.spec
        index = (
            spec.FindParameter(alt, parameter)
            if isinstance(parameter, (tuple, list))
            else int(parameter)
        )
        entry = spec.parameters[index]

        if len(entry.variables) != 2:
            raise ConfigError(
                "{} is a single-variable parameter; export it as a curve".format(
                    entry.variables[0]
                )
            )

        if grids is None:
            grids = [
                np.linspace(*model.domains.get(v, (0.0, 1.0)), gridPoints)
                for v in entry.variables
            ]

        first, second = (np.asarray(grid, dtype=float) for grid in grids)
        X, Y = np.meshgrid(first, second, indexing="ij")
        values = model.ensembles[index].Predict(
            {entry.variables[0]: X.ravel(), entry.variables[1]: Y.ravel()}
        )

        return pd.DataFrame(
            {
                entry.variables[0]: X.ravel(),
                entry.variables[1]: Y.ravel(),
                "utility": values,
            }
        )

    @classmethod
    def CurveTable(cls, model, gridPoints=100):
        """Curves of every single-variable parameter.

        Step curves are sampled on a grid over their domain joined with their
        breakpoints; smoothed parameters add the spline and its derivative.
        """
        sm = model if isinstance(model, SmoothedModel) else None
        base = sm.base if sm else model
        frames = []

        for index, entry in enumerate(base.spec.parameters):
            if len(entry.variables) != 1:
                continue

            step = Booster.StepCurve(base.ensembles[index], base.domains)
            x = np.union1d(np.linspace(*step.domain, gridPoints), step.breakpoints)
            frames.append(cls._CurveFrame(base, entry, "step", x, step.Evaluate(x), np.nan))

            if sm and index in sm.splines:
                value, slope = Smoother.EvalSpline(sm.splines[index], x)
                frames.append(cls._CurveFrame(base, entry, "spline", x, value, slope))

        columns = ["alternative", "variable", "kind", "x", "value", "derivative"]

        if not frames:
            return pd.DataFrame(columns=columns)

        return pd.concat(frames, ignore_index=True)[columns]

    @classmethod
    def _CurveFrame(cls, model, entry, kind, x, value, derivative):
        return pd.DataFrame(
            {
                "alternative": model.spec.alt_names[entry.alt],
                "variable": entry.variables[0],
                "kind": kind,
                "x": x,
                "value": value,
                "derivative": derivative,
            }
        )
