"""Brute-force references for tests and verification.

Everything here is deliberately simple and exact rather than fast: dense
kernel matrices, kernel logistic regression in its dual form, central
finite differences, and a feature-approximation error report. The N^2
pieces enforce a hard cap so an accidental large input fails loudly
instead of hanging.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

from .data import FrameDataset
from .features import sample_projection_bank, feature_map_batch
from .kernels import KernelFamily, KernelSpec, kernel_exact_pairs
from .model import DivergenceError, Model, loss_and_grad

DEFAULT_CAP = 5000


def exact_kernel_matrix(spec: KernelSpec, X: np.ndarray, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Dense kernel matrix K[i, j] = k(x_i, x_j), symmetric, unit diagonal.

    Distances are computed once over the upper triangle and mirrored.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"X must be a matrix, got shape {X.shape}")
    if X.shape[0] > cap:
        raise ValueError(f"{X.shape[0]} rows exceeds the exact-kernel cap of {cap}")
    sigma = spec.bandwidth
    if spec.family is KernelFamily.GAUSSIAN_RBF:
        K = squareform(np.exp(-pdist(X, "sqeuclidean") / (2.0 * sigma * sigma)))
    else:
        K = squareform(np.exp(-pdist(X, "cityblock") / sigma))
    np.fill_diagonal(K, 1.0)
    return K


def kernel_logreg_fit(
    spec: KernelSpec,
    dataset: FrameDataset,
    l2: float,
    max_iters: int = 5000,
    grad_tol: float = 1e-6,
    cap: int = DEFAULT_CAP,
) -> np.ndarray:
    """Fit exact kernel softmax regression, returning dual coefficients.

    Class scores are s_c(x) = sum_j alpha[j, c] k(x_j, x). The objective
    is mean cross-entropy plus (l2/2)*||alpha||^2, minimized by full-batch
    gradient descent with Armijo backtracking, until the gradient norm
    drops below grad_tol or max_iters is hit.
    """
    if dataset.num_classes < 2:
        raise ValueError("kernel logistic regression needs at least 2 classes")
    if l2 <= 0.0:
        raise ValueError("l2 must be positive for a well-posed dual fit")
    n, c = dataset.num_frames, dataset.num_classes
    K = exact_kernel_matrix(spec, dataset.features, cap=cap)
    onehot = np.zeros((n, c))
    onehot[np.arange(n), dataset.labels] = 1.0

    def objective(alpha):
        scores = K @ alpha
        shifted = scores - scores.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        nll = np.mean(log_norm - shifted[np.arange(n), dataset.labels])
        return nll + 0.5 * l2 * np.sum(alpha * alpha)

    alpha = np.zeros((n, c))
    loss = objective(alpha)
    step = 1.0
    for _ in range(max_iters):
        scores = K @ alpha
        shifted = scores - scores.max(axis=1, keepdims=True)
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        grad = K @ (probs - onehot) / n + l2 * alpha
        gnorm = float(np.linalg.norm(grad))
        if not np.isfinite(loss) or not np.isfinite(gnorm):
            raise DivergenceError("kernel logistic regression diverged")
        if gnorm < grad_tol:
            break
        # Armijo backtracking from the last accepted step, allowed to grow
        step = min(step * 2.0, 1e6)
        while True:
            candidate = alpha - step * grad
            cand_loss = objective(candidate)
            if cand_loss <= loss - 1e-4 * step * gnorm * gnorm:
                break
            step *= 0.5
            if step < 1e-18:
                return alpha  # stalled at numerical precision
        alpha, loss = candidate, cand_loss
    return alpha


def kernel_logreg_predict(
    spec: KernelSpec, train_features: np.ndarray, alpha: np.ndarray, X: np.ndarray
) -> np.ndarray:
    """Posterior matrix of new points under a dual-fitted model."""
    train_features = np.asarray(train_features, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    sigma = spec.bandwidth
    if spec.family is KernelFamily.GAUSSIAN_RBF:
        K = np.exp(-cdist(X, train_features, "sqeuclidean") / (2.0 * sigma * sigma))
    else:
        K = np.exp(-cdist(X, train_features, "cityblock") / sigma)
    scores = K @ alpha
    shifted = scores - scores.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def central_difference(f, x: np.ndarray, eps: float) -> np.ndarray:
    """Central finite-difference gradient of a scalar function, 64-bit."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def finite_diff_grad(
    model: Model, features: np.ndarray, labels: np.ndarray, l2: float = 0.0, eps: float = 1e-5
) -> dict[str, np.ndarray]:
    """Finite-difference gradients of the training loss, one array per
    trainable parameter, perturbing the live parameters in place."""
    grads = {}
    for name, param in model.parameters().items():
        def loss_at(values, _param=param):
            _param[...] = values
            return loss_and_grad(model, features, labels, l2=l2)[0]

        original = param.copy()
        grads[name] = central_difference(loss_at, original.copy(), eps)
        param[...] = original
    return grads


def approximation_report(
    spec: KernelSpec,
    X: np.ndarray,
    feature_counts: list[int],
    num_pairs: int = 1000,
    seed: int = 0,
    banks_per_count: int = 1,
) -> list[tuple[int, float, float]]:
    """RMS and max feature-approximation error against the exact kernel.

    Draws num_pairs random distinct row pairs from X once, then for each
    feature count D samples fresh banks (seeds offset by position) and
    compares phi(x).phi(z), accumulated in float64, with the exact kernel
    value. Returns (D, rms_error, max_error) rows. Errors of pairs sharing
    one bank are correlated, so measurements of the 1/sqrt(D) rate should
    pool several banks per count (``banks_per_count``); the default single
    bank is what the approx-check command reports.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need a matrix with at least 2 rows")
    if num_pairs < 1 or banks_per_count < 1:
        raise ValueError("num_pairs and banks_per_count must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    left = rng.integers(0, X.shape[0], size=num_pairs)
    right = rng.integers(0, X.shape[0], size=num_pairs)
    while True:
        clash = left == right
        if not clash.any():
            break
        right[clash] = rng.integers(0, X.shape[0], size=int(clash.sum()))
    exact = kernel_exact_pairs(spec, X[left], X[right])

    rows = []
    for t, count in enumerate(feature_counts):
        sq_sum, abs_max = 0.0, 0.0
        for r in range(banks_per_count):
            bank_seed = seed + 1 + t * banks_per_count + r
            bank = sample_projection_bank(spec, X.shape[1], count, seed=bank_seed)
            fx = feature_map_batch(bank, X[left]).astype(np.float64)
            fz = feature_map_batch(bank, X[right]).astype(np.float64)
            err = np.sum(fx * fz, axis=1) - exact
            sq_sum += float(np.sum(err * err))
            abs_max = max(abs_max, float(np.max(np.abs(err))))
        rows.append((int(count), float(np.sqrt(sq_sum / (num_pairs * banks_per_count))), abs_max))
    return rows
