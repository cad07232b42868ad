# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import numpy as np

import pkg.libs.Variables as var

from pkg.heads.Mnl import Mnl
from pkg.heads.Nested import Nested
from pkg.libs.Errors import NumericalError


class Probabilities:
    """Probability heads, cross-entropy and BIC."""

    @classmethod
    def MakeHead(cls, J, nest=None):
        """Returns the head a specification asks for."""
        if nest is None:
            return Mnl(J)

        return Nested(J, nest)

    @classmethod
    def SoftmaxProbs(cls, V):
        V = np.asarray(V, dtype=float)

        return Mnl(V.shape[1]).Probs(V)

    @classmethod
    def NestedProbs(cls, V, nest):
        V = np.asarray(V, dtype=float)

        return Nested(V.shape[1], nest).Probs(V)

    @classmethod
    def CrossEntropy(cls, probs, choice):
        """Mean negative log-likelihood of the chosen alternatives."""
        probs = np.asarray(probs, dtype=float)

        if len(probs) == 0:
            raise NumericalError("Cannot compute the loss of an empty dataset")

        chosen = probs[np.arange(len(probs)), np.asarray(choice)]

        return float(-np.mean(np.log(np.maximum(chosen, var.probabilityFloor))))

    @classmethod
    def GradHess(cls, probs, choice, head):
        return head.GradHess(probs, choice)

    @classmethod
    def Bic(cls, meanLoss, df, n):
        if n < 1 or df < 0:
            raise NumericalError("BIC needs N >= 1 and df >= 0, got N={} df={}".format(n, df))

        return 2.0 * n * meanLoss + df * np.log(n)
