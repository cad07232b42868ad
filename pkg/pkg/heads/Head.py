# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import numpy as np

from pkg.libs.Errors import NumericalError


class Head:
    """Base class for a probability head.

    A head turns an N×J utility matrix into choice probabilities and gives the
    gradient and Hessian diagonal of -log P(chosen) with respect to each
    utility.
    """

    name = None

    def __init__(self, J):
        self.J = J

    def Probs(self, V):
        raise NotImplementedError

    def GradHess(self, probs, choice):
        raise NotImplementedError

    def Describe(self):
        """Returns a one line description for the console."""
        return self.name

    def CheckUtilities(self, V):
        V = np.asarray(V, dtype=float)

        if V.ndim != 2 or V.shape[1] != self.J:
            raise NumericalError(
                "Expected an N×{} utility matrix, got shape {}".format(self.J, V.shape)
            )

        if not np.isfinite(V).all():
            raise NumericalError("Utilities contain NaN or infinite values")

        return V

    def CheckProbs(self, probs, choice):
        probs = np.asarray(probs, dtype=float)
        choice = np.asarray(choice)

        if probs.ndim != 2 or probs.shape[1] != self.J or len(choice) != len(probs):
            raise NumericalError(
                "Probabilities of shape {} don't match a {} head over {} alternatives "
                "and {} choices".format(probs.shape, self.name, self.J, len(choice))
            )

        return probs, choice

    @classmethod
    def OneHot(cls, choice, J):
        y = np.zeros((len(choice), J))
        y[np.arange(len(choice)), choice] = 1.0

        return y
