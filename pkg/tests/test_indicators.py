import numpy as np
import pytest

from numpy.testing import assert_allclose
from numpy.testing import assert_array_equal

from pkg.libs.Booster import Booster
from pkg.libs.Booster import ParameterEnsemble
from pkg.libs.Booster import RUMBoostModel
from pkg.libs.Errors import ConfigError
from pkg.libs.Indicators import Indicators
from pkg.libs.Smoother import SmoothedModel
from pkg.libs.Smoother import Smoother
from pkg.libs.Spec import Spec
from pkg.libs.Tree import TreeNode
from tests.conftest import MakeDataset


def Stump(column, threshold, left, right):
    return TreeNode(
        column=column,
        bin_threshold=0,
        threshold=threshold,
        gain=1.0,
        left=TreeNode(value=left),
        right=TreeNode(value=right),
    )


def Model():
    spec = Spec.ParseSpec(
        {
            "alternatives": ["a0", "a1"],
            "parameters": [
                {"alt": "a0", "variables": ["x", "y"]},
                {"alt": "a1", "variables": ["t"], "monotone": "decreasing"},
                {"alt": "a1", "variables": ["c"], "monotone": "decreasing"},
            ],
        }
    )
    interaction = TreeNode(
        column="x",
        bin_threshold=0,
        threshold=0.5,
        gain=2.0,
        left=TreeNode(value=1.0),
        right=Stump("y", 0.25, 2.0, 3.0),
    )
    trees = [[interaction], [Stump("t", 1.0, 0.0, -1.0)], [Stump("c", 5.0, 0.0, -1.0)]]
    model = RUMBoostModel(
        spec=spec,
        ensembles=[
            ParameterEnsemble(entry, trees=found, rounds=[1] * len(found))
            for entry, found in zip(spec.ensembles, trees)
        ],
        domains={"x": (0.0, 1.0), "y": (0.0, 1.0), "t": (0.0, 3.0), "c": (0.0, 10.0)},
    )
    Booster.ExtractAsc(model)

    return model


def Smoothed(timeValues=(0.0, -1.0, -2.0, -3.0), costValues=(0.0, -1.0, -2.0)):
    return SmoothedModel(
        base=Model(),
        splines={
            1: Smoother.MakeCurve("t", [0.0, 1.0, 2.0, 3.0], timeValues),
            2: Smoother.MakeCurve("c", [0.0, 5.0, 10.0], costValues),
        },
        df=7,
    )


class TestValueOfTime:
    def test_linear_curves_give_constant_ratio(self):
        surface = Indicators.VotSurface(Smoothed(), "a1", "t", "c", gridPoints=11)

        assert surface.vot.shape == (11, 11)
        assert not surface.mask.any()
        assert_allclose(surface.vot, 5.0)

    def test_caps_clip_the_ratio(self):
        surface = Indicators.VotSurface(
            Smoothed(), "a1", "t", "c", timeGrid=[1.5], costGrid=[2.0], caps=(0.1, 2.0)
        )

        assert_allclose(surface.vot, [[2.0]])

    def test_flat_cost_segment_is_masked(self):
        sm = Smoothed(costValues=(0.0, 0.0, -2.0))
        surface = Indicators.VotSurface(sm, "a1", "t", "c", timeGrid=[1.5], costGrid=[2.0, 7.5])

        assert_array_equal(surface.mask, [[True, False]])
        assert np.isnan(surface.Frame()["vot"].iloc[0])

    def test_outside_domain_is_masked(self):
        surface = Indicators.VotSurface(Smoothed(), "a1", "t", "c", timeGrid=[1.5, 4.0], costGrid=[2.0])

        assert_array_equal(surface.mask[:, 0], [False, True])

    def test_log_frame(self):
        surface = Indicators.VotSurface(Smoothed(), "a1", "t", "c", gridPoints=3, log10=True)
        frame = surface.Frame()

        assert list(frame.columns) == ["time", "cost", "log10_vot", "masked"]
        assert_allclose(frame["log10_vot"], np.log10(5.0))

    def test_needs_smoothed_parameters(self):
        with pytest.raises(ConfigError):
            Indicators.VotSurface(Model(), "a1", "t", "c")

        sm = Smoothed()
        del sm.splines[2]

        with pytest.raises(ConfigError):
            Indicators.VotSurface(sm, "a1", "t", "c")

    def test_population(self):
        rng = np.random.default_rng(0)
        n = 2000
        t = np.where(np.arange(n) % 10 == 0, 0.0, rng.uniform(0.1, 2.9, size=n))
        c = rng.uniform(0.1, 9.9, size=n)
        ds = MakeDataset({"x": np.zeros(n), "y": np.zeros(n), "t": t, "c": c}, np.arange(n) % 2)
        sm = Smoothed(timeValues=(0.0, -0.5, -2.0, -2.5))

        rows, histogram = Indicators.PopulationVot(
            sm, ds, "a1", "t", "c", excludeTopFraction=0.01, bins=20
        )
        usable = int((t != 0).sum())

        assert len(rows) == usable - int(np.floor(0.01 * usable))
        assert (rows["time"] != 0).all()
        assert histogram["count"].sum() == len(rows)
        assert len(histogram) == 20

        _, slope = Smoother.EvalSpline(sm.splines[1], rows["time"].to_numpy())
        assert_allclose(rows["vot"], np.clip(slope / -0.2, 0.1, 100.0))

        for time, cost, vot in rows[["time", "cost", "vot"]].itertuples(index=False):
            surface = Indicators.VotSurface(sm, "a1", "t", "c", timeGrid=[time], costGrid=[cost])

            assert not surface.mask[0, 0]
            assert abs(surface.vot[0, 0] - vot) <= 1e-12

    def test_marginal_utility(self):
        sm = Smoothed()

        assert_allclose(Indicators.MarginalUtility(sm.splines[2], [2.0, 8.0]), [-0.2, -0.2])

        with pytest.raises(ConfigError):
            Indicators.MarginalUtility(Booster.UtilityCurve(sm.base, "a1", "t"), [1.0])


class TestTables:
    def test_contour(self):
        table = Indicators.ContourTable(Model(), "a0", ("x", "y"), grids=([0.2, 0.8], [0.1, 0.9]))

        assert list(table.columns) == ["x", "y", "utility"]
        assert_array_equal(table["utility"], [1.0, 1.0, 2.0, 3.0])

    def test_contour_needs_an_interaction(self):
        with pytest.raises(ConfigError):
            Indicators.ContourTable(Model(), "a1", 1)

    def test_curves_of_a_trained_model(self):
        table = Indicators.CurveTable(Model(), gridPoints=5)

        assert set(table["variable"]) == {"t", "c"}
        assert set(table["kind"]) == {"step"}
        assert table["derivative"].isna().all()

        c = table[table["variable"] == "c"]
        assert_array_equal(c["value"], np.where(c["x"] <= 5.0, 0.0, -1.0))

    def test_curves_of_a_smoothed_model(self):
        table = Indicators.CurveTable(Smoothed(), gridPoints=5)
        splines = table[table["kind"] == "spline"]

        assert set(splines["variable"]) == {"t", "c"}
        assert_allclose(splines[splines["variable"] == "c"]["derivative"], -0.2)
