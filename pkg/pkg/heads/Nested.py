# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import numpy as np

from scipy.special import logsumexp
from scipy.special import softmax

from pkg.heads.Head import Head
from pkg.libs.Errors import SpecError


class Nested(Head):
    """Nested logit head.

    P(i) = P(i|m) P(m) where P(i|m) is a softmax of mu_m V inside nest m and
    P(m) a softmax of the nest inclusive values (1/mu_m) logsumexp(mu_m V).
    """

    name = "nested"

    def __init__(self, J, nest):
        super().__init__(J)

        members = sorted(alt for group in nest.nests for alt in group)

        if members != list(range(J)):
            raise SpecError("The nests must partition the {} alternatives".format(J), "nest")

        for mu in nest.mu:
            if not mu >= 1:
                raise SpecError("mu must be >= 1, got {}".format(mu), "nest")

        self.nest = nest
        self.groups = [np.asarray(group) for group in nest.nests]
        self.mu = np.asarray(nest.mu, dtype=float)

    def Describe(self):
        return "nested ({})".format(
            ", ".join(
                "{}: mu={:g}".format(list(group), mu)
                for group, mu in zip(self.nest.nests, self.nest.mu)
                if len(group) > 1
            )
            or "singletons"
        )

    def Probs(self, V):
        V = self.CheckUtilities(V)
        inclusive = np.empty((len(V), len(self.groups)))
        conditional = np.empty_like(V)

        for m, (group, mu) in enumerate(zip(self.groups, self.mu)):
            scaled = mu * V[:, group]
            inclusive[:, m] = logsumexp(scaled, axis=1) / mu
            conditional[:, group] = softmax(scaled, axis=1)

        marginal = softmax(inclusive, axis=1)
        probs = np.empty_like(V)

        for m, group in enumerate(self.groups):
            probs[:, group] = conditional[:, group] * marginal[:, [m]]

        return probs

    def GradHess(self, probs, choice):
        """Gradient and Hessian diagonal of -log P(chosen), rebuilt from probabilities.

        Q is the chosen nest's marginal probability for alternatives inside
        it and the alternative's own nest probability otherwise.
        """
        probs, choice = self.CheckProbs(probs, choice)
        grad = np.empty_like(probs)
        hess = np.empty_like(probs)

        for group, mu in zip(self.groups, self.mu):
            Q = probs[:, group].sum(axis=1, keepdims=True)
            q = np.divide(probs[:, group], Q, out=np.zeros_like(probs[:, group]), where=Q > 0)
            chosen = np.isin(choice, group)[:, None]
            isChoice = (choice[:, None] == group[None, :]).astype(float)

            inGrad = -mu * isChoice + q * (mu - 1.0 + Q)
            inHess = q * (mu * (1.0 - q) * (mu - 1.0 + Q) + Q * (1.0 - Q) * q)
            outGrad = Q * q
            outHess = Q * q * ((1.0 - Q) * q + mu * (1.0 - q))

            grad[:, group] = np.where(chosen, inGrad, outGrad)
            hess[:, group] = np.where(chosen, inHess, outHess)

        return grad, hess
