import numpy as np
import pytest

from rks import (
    FrameDataset,
    KernelFamily,
    KernelSpec,
    approximation_report,
    central_difference,
    exact_kernel_matrix,
    kernel_exact,
    kernel_logreg_fit,
    kernel_logreg_predict,
    make_concentric_circles,
    sample_projection_bank,
    feature_map_batch,
)

RBF = KernelSpec(KernelFamily.GAUSSIAN_RBF, 1.0)
LAP = KernelSpec(KernelFamily.LAPLACIAN, 1.0)


class TestExactKernelMatrix:
    def test_single_point(self):
        K = exact_kernel_matrix(RBF, np.array([[1.0, 2.0]]))
        np.testing.assert_array_equal(K, [[1.0]])

    def test_exactly_symmetric_unit_diagonal(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((40, 3))
        for spec in (RBF, LAP):
            K = exact_kernel_matrix(spec, X)
            np.testing.assert_array_equal(K, K.T)
            np.testing.assert_array_equal(np.diag(K), np.ones(40))

    def test_matches_scalar_kernel(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((10, 4))
        K = exact_kernel_matrix(LAP, X)
        for i in range(10):
            for j in range(10):
                assert K[i, j] == pytest.approx(kernel_exact(LAP, X[i], X[j]), rel=1e-12)

    def test_positive_semidefinite(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((50, 5))
        for spec in (RBF, LAP):
            eigenvalues = np.linalg.eigvalsh(exact_kernel_matrix(spec, X))
            assert eigenvalues.min() >= -1e-8

    def test_cap_enforced(self):
        with pytest.raises(ValueError, match="cap"):
            exact_kernel_matrix(RBF, np.zeros((11, 2)), cap=10)


class TestKernelLogreg:
    def test_single_class_rejected(self):
        ds = FrameDataset(
            features=np.zeros((5, 2), dtype=np.float32),
            labels=np.zeros(5, dtype=np.int32),
            num_classes=1,
        )
        with pytest.raises(ValueError, match="2 classes"):
            kernel_logreg_fit(RBF, ds, l2=1e-3)

    def test_l2_required(self):
        ds = make_concentric_circles(20, seed=0)
        with pytest.raises(ValueError, match="l2"):
            kernel_logreg_fit(RBF, ds, l2=0.0)

    def test_separable_reaches_perfect_training_accuracy(self):
        rng = np.random.default_rng(3)
        feats = np.concatenate([rng.normal(-1, 0.2, (10, 2)), rng.normal(1, 0.2, (10, 2))])
        ds = FrameDataset(
            features=feats.astype(np.float32),
            labels=np.repeat([0, 1], 10).astype(np.int32),
            num_classes=2,
        )
        alpha = kernel_logreg_fit(RBF, ds, l2=1e-4)
        probs = kernel_logreg_predict(RBF, ds.features.astype(np.float64), alpha, ds.features)
        assert np.mean(np.argmax(probs, axis=1) == ds.labels) == 1.0

    def test_converges_to_small_gradient(self):
        ds = make_concentric_circles(60, noise=0.1, seed=4)
        spec = KernelSpec(KernelFamily.GAUSSIAN_RBF, 1.0)
        alpha = kernel_logreg_fit(spec, ds, l2=1e-2, max_iters=4000, grad_tol=1e-6)
        # recompute the gradient at the returned point
        K = exact_kernel_matrix(spec, ds.features)
        scores = K @ alpha
        shifted = scores - scores.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        onehot = np.zeros_like(probs)
        onehot[np.arange(len(ds.labels)), ds.labels] = 1.0
        grad = K @ (probs - onehot) / ds.num_frames + 1e-2 * alpha
        assert np.linalg.norm(grad) < 1e-6


class TestCentralDifference:
    def test_constant_function_zero_gradient(self):
        grad = central_difference(lambda x: 3.5, np.array([1.0, -2.0]), eps=1e-5)
        np.testing.assert_array_equal(grad, np.zeros(2))

    def test_quadratic(self):
        grad = central_difference(lambda x: 0.5 * float(x[0] ** 2), np.array([2.0]), eps=1e-6)
        assert grad[0] == pytest.approx(2.0, abs=1e-9)

    def test_eps_must_be_positive(self):
        with pytest.raises(ValueError):
            central_difference(lambda x: 0.0, np.zeros(1), eps=0.0)


class TestApproximationConsistency:
    def test_mean_error_decreases_with_features(self):
        # one inversion allowed across the feature-count ladder
        rng = np.random.default_rng(5)
        X = rng.standard_normal((60, 4))
        K = exact_kernel_matrix(RBF, X)
        means = []
        for count in (1000, 4000, 16000, 64000):
            bank = sample_projection_bank(RBF, 4, count, seed=count)
            phi = feature_map_batch(bank, X).astype(np.float64)
            means.append(float(np.mean(np.abs(phi @ phi.T - K))))
        inversions = sum(b > a for a, b in zip(means, means[1:]))
        assert inversions <= 1

    def test_report_row_per_count_and_determinism(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((100, 3))
        rows = approximation_report(RBF, X, [500], num_pairs=50, seed=1)
        assert len(rows) == 1 and rows[0][0] == 500
        again = approximation_report(RBF, X, [500], num_pairs=50, seed=1)
        assert rows == again

    def test_pooled_rate_measurement(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((300, 5))
        rows = approximation_report(RBF, X, [500, 2000], num_pairs=400, seed=0, banks_per_count=6)
        ratio = rows[0][1] / rows[1][1]
        assert 1.6 <= ratio <= 2.6
