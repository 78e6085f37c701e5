"""Frame-level evaluation metrics.

All metrics use natural logarithms, and every probability is floored at
``PROB_FLOOR`` before taking a log so float32-underflowed posteriors
cannot produce infinities. The entropy-regularized perplexity is defined
by the double sum

    -(1/m) sum_i sum_k [1(k = y_i) + p(k|x_i)] ln p(k|x_i)

which decomposes exactly into ln(perplexity) + mean entropy; the module
computes it both ways so the identity can be cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricsRecord:
    """Held-out metrics of one model: perplexity, accuracy, mean entropy
    (nats), entropy-regularized perplexity, and the frame count."""

    perplexity: float
    accuracy: float
    mean_entropy: float
    erp: float
    num_frames: int


def perplexity(posteriors: np.ndarray, labels: np.ndarray) -> float:
    """exp of the mean negative log-probability of the correct labels."""
    posteriors, labels = _validate(posteriors, labels)
    correct = posteriors[np.arange(len(labels)), labels]
    return float(np.exp(-np.mean(np.log(np.maximum(correct, PROB_FLOOR)))))


def accuracy(posteriors: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of frames whose argmax class matches the label.

    Argmax ties resolve to the lowest class index.
    """
    posteriors, labels = _validate(posteriors, labels)
    return float(np.mean(np.argmax(posteriors, axis=1) == labels))


def mean_entropy(posteriors: np.ndarray) -> float:
    """Average Shannon entropy of the posterior rows, in nats."""
    posteriors = _validate_posteriors(posteriors)
    logs = np.log(np.maximum(posteriors, PROB_FLOOR))
    return float(-np.mean(np.sum(posteriors * logs, axis=1)))


def entropy_regularized_perplexity(posteriors: np.ndarray, labels: np.ndarray) -> float:
    """The double-sum form; equals ln(perplexity) + mean_entropy.

    Computed directly from its definition, independently of the other two
    metrics, so tests can verify the decomposition identity.
    """
    posteriors, labels = _validate(posteriors, labels)
    m = len(labels)
    weights = posteriors.copy()
    weights[np.arange(m), labels] += 1.0
    logs = np.log(np.maximum(posteriors, PROB_FLOOR))
    return float(-np.sum(weights * logs) / m)


def compute_metrics(posteriors: np.ndarray, labels: np.ndarray) -> MetricsRecord:
    """All four metrics of a posterior matrix in one record."""
    return MetricsRecord(
        perplexity=perplexity(posteriors, labels),
        accuracy=accuracy(posteriors, labels),
        mean_entropy=mean_entropy(posteriors),
        erp=entropy_regularized_perplexity(posteriors, labels),
        num_frames=len(labels),
    )


def _validate_posteriors(posteriors: np.ndarray) -> np.ndarray:
    posteriors = np.asarray(posteriors, dtype=np.float64)
    if posteriors.ndim != 2 or posteriors.shape[0] == 0 or posteriors.shape[1] < 2:
        raise ValueError(f"posteriors must be a non-empty (m, C) matrix, got shape {posteriors.shape}")
    if np.any(posteriors < 0.0):
        raise ValueError("posteriors contain negative entries")
    sums = posteriors.sum(axis=1)
    if np.max(np.abs(sums - 1.0)) > 1e-6:
        raise ValueError("posterior rows must sum to 1")
    return posteriors


def _validate(posteriors: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    posteriors = _validate_posteriors(posteriors)
    labels = np.asarray(labels)
    if labels.shape != (posteriors.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match {posteriors.shape[0]} frames")
    if labels.dtype.kind not in "iu":
        raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.min() < 0 or labels.max() >= posteriors.shape[1]:
        raise ValueError(f"labels must lie in [0, {posteriors.shape[1] - 1}]")
    return posteriors, labels
