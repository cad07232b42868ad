from decimal import Decimal
from decimal import localcontext

import numpy as np
import pytest

from numpy.testing import assert_allclose

from pkg.heads.Mnl import Mnl
from pkg.heads.Nested import Nested
from pkg.libs.Errors import NumericalError
from pkg.libs.Errors import SpecError
from pkg.libs.Probabilities import Probabilities
from pkg.libs.Spec import NestSpec


def RandomNest(J, rng, mu):
    """Random partition of J alternatives into two or three nests."""
    count = min(J, int(rng.integers(2, 4)))
    labels = np.concatenate([np.arange(count), rng.integers(0, count, size=J - count)])
    rng.shuffle(labels)
    nests = sorted(tuple(np.flatnonzero(labels == m).tolist()) for m in range(count))

    return NestSpec(
        nests=tuple(nests), mu=tuple(mu if len(group) > 1 else 1.0 for group in nests)
    )


def Loss(head, V, choice):
    probs = head.Probs(V)
    return -np.log(probs[np.arange(len(V)), choice])


class TestSoftmax:
    def test_uniform_row(self):
        assert_allclose(Probabilities.SoftmaxProbs([[0.0, 0.0, 0.0, 0.0]]), [[0.25] * 4])

    def test_two_to_one(self):
        assert_allclose(
            Probabilities.SoftmaxProbs([[np.log(2), 0.0]]), [[2 / 3, 1 / 3]], rtol=1e-14
        )

    def test_matches_decimal_evaluation(self):
        with localcontext() as context:
            context.prec = 40
            weights = [Decimal(v).exp() for v in (1, 2, 3)]
            expected = [float(w / sum(weights)) for w in weights]

        assert_allclose(Probabilities.SoftmaxProbs([[1.0, 2.0, 3.0]])[0], expected, rtol=1e-14)

    def test_large_utilities_do_not_overflow(self):
        probs = Probabilities.SoftmaxProbs([[1000.0, 1000.0]])

        assert_allclose(probs, [[0.5, 0.5]])

    def test_nan_is_rejected(self):
        with pytest.raises(NumericalError):
            Probabilities.SoftmaxProbs([[np.nan, 0.0]])

    def test_rows_sum_to_one_and_shift_invariance(self):
        rng = np.random.default_rng(0)
        V = rng.normal(scale=3, size=(200, 5))
        probs = Probabilities.SoftmaxProbs(V)

        assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert_allclose(Probabilities.SoftmaxProbs(V + rng.normal(size=(200, 1))), probs, atol=1e-12)


class TestNested:
    def test_unit_mu_equals_softmax(self):
        rng = np.random.default_rng(1)
        V = rng.normal(size=(1000, 4))
        nest = NestSpec(nests=((0,), (1, 2, 3)), mu=(1.0, 1.0))

        assert_allclose(Probabilities.NestedProbs(V, nest), Probabilities.SoftmaxProbs(V), atol=1e-12)

    def test_singleton_nests_ignore_mu(self):
        rng = np.random.default_rng(2)
        V = rng.normal(size=(100, 3))
        nest = NestSpec(nests=((0,), (1,), (2,)), mu=(1.7, 2.5, 1.2))

        assert_allclose(Probabilities.NestedProbs(V, nest), Probabilities.SoftmaxProbs(V), atol=1e-12)

    def test_two_level_hand_evaluation(self):
        nest = NestSpec(nests=((0,), (1, 2)), mu=(1.0, 2.0))
        probs = Probabilities.NestedProbs(np.zeros((1, 3)), nest)[0]
        # Inclusive values 0 and ln(2)/2, so P(nest {1,2}) = sqrt(2) / (1 + sqrt(2))
        top = 1 / (1 + np.sqrt(2))

        assert_allclose(probs, [top, (1 - top) / 2, (1 - top) / 2], rtol=1e-14)

    def test_rows_sum_to_one_and_shift_invariance(self):
        rng = np.random.default_rng(3)
        V = rng.normal(scale=2, size=(300, 4))
        nest = NestSpec(nests=((0, 3), (1, 2)), mu=(1.4, 2.0))
        probs = Probabilities.NestedProbs(V, nest)

        assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        assert_allclose(Probabilities.NestedProbs(V - 4.2, nest), probs, atol=1e-12)

    def test_mu_below_one(self):
        with pytest.raises(SpecError):
            Nested(2, NestSpec(nests=((0, 1),), mu=(0.5,)))

    def test_nests_must_partition(self):
        with pytest.raises(SpecError):
            Nested(3, NestSpec(nests=((0,), (1,)), mu=(1.0, 1.0)))


class TestCrossEntropyAndBic:
    def test_certain_predictions(self):
        assert Probabilities.CrossEntropy(np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 1]) == 0.0

    def test_uniform(self):
        probs = np.full((10, 4), 0.25)

        assert Probabilities.CrossEntropy(probs, np.arange(10) % 4) == pytest.approx(np.log(4))

    def test_zero_probability_is_clamped(self):
        loss = Probabilities.CrossEntropy(np.array([[1.0, 0.0]]), [1])

        assert loss == pytest.approx(-np.log(1e-15))

    def test_bic(self):
        assert Probabilities.Bic(0.0, 0, 10) == 0.0
        assert Probabilities.Bic(0.7, 10, 1000) == pytest.approx(1400 + 10 * np.log(1000))
        assert Probabilities.Bic(0.6, 10, 1000) < Probabilities.Bic(0.7, 10, 1000)

    def test_bic_rejects_bad_counts(self):
        with pytest.raises(NumericalError):
            Probabilities.Bic(0.5, 1, 0)


class TestGradHess:
    def test_mnl_examples(self):
        head = Mnl(2)
        g, h = head.GradHess(np.array([[1.0, 0.0], [0.5, 0.5]]), np.array([0, 0]))

        assert_allclose(g, [[0.0, 0.0], [-0.5, 0.5]])
        assert_allclose(h, [[0.0, 0.0], [0.25, 0.25]])

    def test_mnl_hessian_positive(self):
        rng = np.random.default_rng(5)
        probs = Probabilities.SoftmaxProbs(rng.normal(size=(100, 4)))
        _, h = Mnl(4).GradHess(probs, rng.integers(0, 4, 100))

        assert (h > 0).all()

    def test_shape_mismatch(self):
        with pytest.raises(NumericalError):
            Probabilities.GradHess(np.full((3, 3), 1 / 3), np.zeros(3, dtype=int), Mnl(4))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        step = 1e-5

        for instance in range(200):
            J = int(rng.integers(2, 6))
            V = rng.normal(size=(50, J))
            choice = rng.integers(0, J, size=50)

            if instance % 2:
                head = Mnl(J)
            else:
                head = Nested(J, RandomNest(J, rng, float(rng.choice([1.0, 1.2, 1.5, 2.0]))))

            g, h = head.GradHess(head.Probs(V), choice)

            for j in range(J):
                bump = np.zeros(J)
                bump[j] = step
                numeric = (Loss(head, V + bump, choice) - Loss(head, V - bump, choice)) / (2 * step)
                gUp, _ = head.GradHess(head.Probs(V + bump), choice)
                gDown, _ = head.GradHess(head.Probs(V - bump), choice)
                curvature = (gUp[:, j] - gDown[:, j]) / (2 * step)

                assert_allclose(g[:, j], numeric, rtol=1e-5, atol=1e-8)
                assert_allclose(h[:, j], curvature, rtol=1e-5, atol=1e-8)
