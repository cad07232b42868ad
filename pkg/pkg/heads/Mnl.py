# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

from scipy.special import softmax

from pkg.heads.Head import Head


class Mnl(Head):
    """Multinomial logit head."""

    name = "mnl"

    def Probs(self, V):
        # softmax subtracts the row maximum before exponentiating
        return softmax(self.CheckUtilities(V), axis=1)

    def GradHess(self, probs, choice):
        probs, choice = self.CheckProbs(probs, choice)

        return probs - self.OneHot(choice, self.J), probs * (1.0 - probs)
