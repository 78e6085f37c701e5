import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rks import (
    accuracy,
    compute_metrics,
    entropy_regularized_perplexity,
    mean_entropy,
    perplexity,
)


def random_posteriors(rng, m, c):
    raw = rng.gamma(1.0, size=(m, c))
    return raw / raw.sum(axis=1, keepdims=True)


def one_hot(labels, c):
    out = np.zeros((len(labels), c))
    out[np.arange(len(labels)), labels] = 1.0
    return out


class TestPerplexity:
    def test_uniform_posteriors(self):
        c = 5000
        post = np.full((20, c), 1.0 / c)
        labels = np.arange(20) % c
        assert perplexity(post, labels) == pytest.approx(c, rel=1e-10)

    def test_correct_one_hot_is_one(self):
        labels = np.array([0, 2, 1])
        assert perplexity(one_hot(labels, 3), labels) == 1.0

    def test_two_frame_hand_computation(self):
        # exp(-(ln .5 + ln .125)/2) = sqrt(2 * 8) = 4
        post = np.array([[0.5, 0.5, 0.0], [0.125, 0.875, 0.0]])
        labels = np.array([0, 0])
        assert perplexity(post, labels) == pytest.approx(4.0, rel=1e-12)

    def test_floor_keeps_result_finite(self):
        post = one_hot(np.array([1, 1]), 3)
        labels = np.array([0, 0])  # correct-label probability is exactly 0
        assert np.isfinite(perplexity(post, labels))

    def test_at_least_one(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            post = random_posteriors(rng, 11, 4)
            labels = rng.integers(0, 4, 11)
            assert perplexity(post, labels) >= 1.0


class TestAccuracy:
    def test_one_hot_perfect(self):
        labels = np.array([1, 0, 2, 2])
        assert accuracy(one_hot(labels, 3), labels) == 1.0

    def test_uniform_tie_breaks_to_first_class(self):
        post = np.full((6, 4), 0.25)
        labels = np.full(6, 2)
        assert accuracy(post, labels) == 0.0
        assert accuracy(post, np.zeros(6, dtype=int)) == 1.0

    def test_three_of_four(self):
        post = one_hot(np.array([0, 1, 2, 2]), 3)
        labels = np.array([0, 1, 2, 1])
        assert accuracy(post, labels) == 0.75


class TestMeanEntropy:
    def test_one_hot_zero(self):
        assert mean_entropy(one_hot(np.array([0, 1]), 4)) == 0.0

    def test_uniform_is_log_c(self):
        post = np.full((7, 1000), 1e-3)
        assert mean_entropy(post) == pytest.approx(np.log(1000.0), rel=1e-10)

    def test_half_half(self):
        post = np.array([[0.5, 0.5, 0.0, 0.0]])
        assert mean_entropy(post) == pytest.approx(np.log(2.0), rel=1e-12)

    def test_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            post = random_posteriors(rng, 9, 6)
            h = mean_entropy(post)
            assert 0.0 <= h <= np.log(6.0) + 1e-12


class TestEntropyRegularizedPerplexity:
    def test_uniform_is_twice_log_c(self):
        c = 1000
        post = np.full((5, c), 1.0 / c)
        labels = np.arange(5)
        assert entropy_regularized_perplexity(post, labels) == pytest.approx(
            2.0 * np.log(c), rel=1e-10
        )

    def test_correct_one_hot_is_zero(self):
        labels = np.array([0, 3, 1])
        assert entropy_regularized_perplexity(one_hot(labels, 4), labels) == 0.0

    def test_identity_with_components(self):
        rng = np.random.default_rng(2)
        post = random_posteriors(rng, 50, 10)
        labels = rng.integers(0, 10, 50)
        direct = entropy_regularized_perplexity(post, labels)
        composed = np.log(perplexity(post, labels)) + mean_entropy(post)
        assert direct == pytest.approx(composed, abs=1e-12)

    @given(st.integers(min_value=0, max_value=10_000), st.integers(2, 12), st.integers(1, 40))
    @settings(max_examples=60, deadline=None)
    def test_identity_property(self, seed, c, m):
        rng = np.random.default_rng(seed)
        post = random_posteriors(rng, m, c)
        labels = rng.integers(0, c, m)
        direct = entropy_regularized_perplexity(post, labels)
        composed = np.log(perplexity(post, labels)) + mean_entropy(post)
        assert abs(direct - composed) < 1e-12


class TestRecordAndInvariance:
    def test_record_consistency(self):
        rng = np.random.default_rng(3)
        post = random_posteriors(rng, 30, 8)
        labels = rng.integers(0, 8, 30)
        rec = compute_metrics(post, labels)
        assert rec.num_frames == 30
        assert rec.perplexity == perplexity(post, labels)
        assert rec.accuracy == accuracy(post, labels)
        assert rec.mean_entropy == mean_entropy(post)
        assert abs(rec.erp - (np.log(rec.perplexity) + rec.mean_entropy)) < 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        post = random_posteriors(rng, 25, 5)
        labels = rng.integers(0, 5, 25)
        perm = rng.permutation(25)
        a = compute_metrics(post, labels)
        b = compute_metrics(post[perm], labels[perm])
        assert abs(a.perplexity - b.perplexity) < 1e-12 * a.perplexity
        assert a.accuracy == b.accuracy
        assert abs(a.mean_entropy - b.mean_entropy) < 1e-12
        assert abs(a.erp - b.erp) < 1e-12


class TestValidation:
    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            perplexity(np.zeros((0, 3)), np.zeros(0, dtype=int))
        with pytest.raises(ValueError):
            mean_entropy(np.zeros((0, 3)))

    def test_label_out_of_range(self):
        post = np.full((2, 3), 1 / 3)
        with pytest.raises(ValueError, match="labels"):
            perplexity(post, np.array([0, 3]))
        with pytest.raises(ValueError, match="labels"):
            accuracy(post, np.array([-1, 0]))

    def test_unnormalized_rejected(self):
        with pytest.raises(ValueError, match="sum to 1"):
            perplexity(np.full((2, 3), 0.5), np.array([0, 1]))

    def test_negative_rejected(self):
        post = np.array([[1.5, -0.5, 0.0]])
        with pytest.raises(ValueError, match="negative"):
            mean_entropy(post)
