# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import numpy as np
import pandas as pd
import pytest

import pkg.libs.Variables as var

from pkg.heads.Nested import Nested
from pkg.libs.Booster import TrainParams
from pkg.libs.Data import ChoiceDataset
from pkg.libs.Spec import Spec

# Utility of each quarter of [0, 1) for the step simulations
TRUE_STEPS = np.array([0.0, -0.5, -1.0, -2.0])
TRUE_ASCS = np.array([0.0, 0.3, -0.2])


def StepUtility(x):
    return TRUE_STEPS[np.minimum((np.asarray(x) * 4).astype(int), 3)]


def MakeDataset(columns, choice, altNames=None, groupKey=None):
    choice = np.asarray(choice, dtype=np.int64)

    if altNames is None:
        altNames = tuple(str(alt) for alt in range(int(choice.max()) + 1))

    return ChoiceDataset(
        variables=pd.DataFrame({name: np.asarray(v, dtype=float) for name, v in columns.items()}),
        choice=choice,
        alt_names=tuple(altNames),
        group_key=None if groupKey is None else np.asarray(groupKey),
    )


def SimulateSteps(n, seed):
    """Three alternatives, each with one decreasing four-step attribute x<i>."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, size=(n, 3))
    V = StepUtility(x) + TRUE_ASCS
    choice = np.argmax(V + rng.gumbel(size=V.shape), axis=1)
    ds = MakeDataset(
        {"x0": x[:, 0], "x1": x[:, 1], "x2": x[:, 2]},
        choice,
        ("a0", "a1", "a2"),
        groupKey=np.arange(n) // 2,
    )

    return ds, V


def SimulateNested(n, seed, nest):
    """Choices drawn from nested logit probabilities of two-step utilities."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, size=(n, 3))
    V = 2.0 * StepUtility(x) + np.array([0.0, 0.5, 0.5])
    probs = Nested(3, nest).Probs(V)
    cumulative = np.cumsum(probs, axis=1)
    choice = np.minimum((rng.uniform(size=(n, 1)) > cumulative).sum(axis=1), 2)

    return MakeDataset(
        {"x0": x[:, 0], "x1": x[:, 1], "x2": x[:, 2]}, choice, ("a0", "a1", "a2")
    )


def StepSpecDocument(monotone="decreasing"):
    return {
        "alternatives": ["a0", "a1", "a2"],
        "reference_alt": "a0",
        "parameters": [
            {"alt": "a{}".format(i), "variables": ["x{}".format(i)], "monotone": monotone}
            for i in range(3)
        ],
    }


@pytest.fixture(autouse=True)
def quiet(monkeypatch):
    monkeypatch.setattr(var, "quiet", True)
    monkeypatch.setattr(var, "settingsPath", "")


@pytest.fixture
def step_spec():
    return Spec.ParseSpec(StepSpecDocument())


@pytest.fixture(scope="session")
def step_data():
    return SimulateSteps(10000, 7)


@pytest.fixture(scope="session")
def step_holdout():
    return SimulateSteps(5000, 8)


@pytest.fixture
def fast_params():
    return TrainParams(num_rounds=60, early_stopping_rounds=0, log_every=0)
