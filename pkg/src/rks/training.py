"""Mini-batch SGD training with per-epoch held-out evaluation.

The training loop shuffles frames each epoch with a seeded generator,
applies classical momentum updates, and never stops early: held-out
perplexity typically reaches its minimum well before the final epoch while
the posterior entropy keeps falling, and checkpoint selection over the
full trace is a separate concern (see :mod:`rks.selection`).

Recorded metrics always describe the float32 checkpoint, not the float64
in-memory parameters, so re-evaluating a reloaded checkpoint reproduces
the trace exactly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .data import FrameDataset
from .features import ProjectionBank, feature_map_batch
from .metrics import MetricsRecord, compute_metrics
from .model import DivergenceError, Model, hidden_batch, loss_and_grad, save_model, load_model, _softmax

# target working-set size for chunked feature computation
_CHUNK_FLOATS = 32 * 1024 * 1024


class TrainingDiverged(DivergenceError):
    """Training hit non-finite numbers; carries the partial trace."""

    def __init__(self, message: str, trace: "CheckpointTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""

    learning_rate: float
    max_epochs: int
    minibatch_size: int = 250
    momentum: float = 0.9
    anneal_factor: float = 0.5
    l2: float = 0.0
    seed: int = 0
    eval_every: int = 1

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0.0 < self.anneal_factor <= 1.0:
            raise ValueError("anneal_factor must lie in (0, 1]")
        if self.l2 < 0.0:
            raise ValueError("l2 must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")


@dataclass
class TraceEntry:
    epoch: int
    metrics: MetricsRecord
    checkpoint: str
    model: Model | None = None  # in-memory copy when no run directory


@dataclass
class CheckpointTrace:
    """Per-epoch held-out metrics with resolvable checkpoints."""

    entries: list[TraceEntry] = field(default_factory=list)
    config: TrainConfig | None = None
    run_dir: str | None = None
    learning_rates: list[float] = field(default_factory=list)  # lr used per epoch

    def load_model(self, entry: TraceEntry) -> Model:
        if entry.model is not None:
            return entry.model
        if self.run_dir is None:
            raise ValueError(f"no run directory to resolve checkpoint {entry.checkpoint!r}")
        return load_model(os.path.join(self.run_dir, entry.checkpoint))[0]


def zero_velocity(model: Model) -> dict[str, np.ndarray]:
    """Momentum buffers matching the model's trainable parameters."""
    return {name: np.zeros_like(value) for name, value in model.parameters().items()}


def momentum_update(
    params: dict[str, np.ndarray],
    velocity: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    lr: float,
    momentum: float,
) -> None:
    """Classical momentum, in place: v <- mu*v - lr*g; p <- p + v."""
    for name, p in params.items():
        v = velocity[name]
        v *= momentum
        v -= lr * grads[name]
        p += v
        if not np.all(np.isfinite(v)):
            raise DivergenceError(f"non-finite update in {name}")


def sgd_step(
    model: Model,
    velocity: dict[str, np.ndarray],
    features: np.ndarray,
    labels: np.ndarray,
    lr: float,
    momentum: float,
    l2: float = 0.0,
) -> float:
    """One mini-batch step; mutates model and velocity, returns the loss."""
    loss, grads = loss_and_grad(model, features, labels, l2=l2)
    if not np.isfinite(loss):
        raise DivergenceError(f"non-finite training loss {loss}")
    momentum_update(model.parameters(), velocity, grads, lr, momentum)
    return loss


def evaluate_checkpoint(bank: ProjectionBank, model: Model, dataset: FrameDataset) -> MetricsRecord:
    """Held-out metrics of a model: posteriors for every frame, chunked."""
    if dataset.dim != bank.input_dim:
        raise ValueError(f"dataset dim {dataset.dim} does not match bank input_dim {bank.input_dim}")
    posteriors = _posteriors(bank, model, dataset.features)
    return compute_metrics(posteriors, dataset.labels)


def train(
    bank: ProjectionBank,
    model: Model,
    train_set: FrameDataset,
    heldout: FrameDataset,
    config: TrainConfig,
    run_dir: str | os.PathLike | None = None,
    cache_features: bool = False,
) -> CheckpointTrace:
    """Run mini-batch SGD to max_epochs, recording the full trace.

    Trains the model in place. Every eval_every epochs (and at epoch 0,
    before any update) the held-out metrics are recorded and a checkpoint
    is persisted to ``run_dir`` (kept in memory when run_dir is None). The
    learning rate is multiplied by anneal_factor whenever held-out
    perplexity fails to improve on the best seen so far by at least 0.1%
    relative; it never increases. Features are recomputed from the bank
    per mini-batch unless ``cache_features`` asks for one precomputed
    float32 matrix of the training set.

    There is deliberately no early stopping: the interesting part of the
    trace is after the perplexity minimum.
    """
    if train_set.dim != bank.input_dim or heldout.dim != bank.input_dim:
        raise ValueError("dataset dimensions must match the bank input_dim")
    trace = CheckpointTrace(entries=[], config=config, run_dir=None if run_dir is None else str(run_dir))
    if run_dir is not None:
        os.makedirs(run_dir, exist_ok=True)

    heldout_feats = _features_chunked(bank, heldout.features)
    _record(trace, model, heldout, heldout_feats, epoch=0, run_dir=run_dir)

    cached = _features_chunked(bank, train_set.features) if cache_features else None
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    velocity = zero_velocity(model)
    lr = config.learning_rate
    best_ppx = trace.entries[0].metrics.perplexity
    n = train_set.num_frames

    for epoch in range(1, config.max_epochs + 1):
        trace.learning_rates.append(lr)
        order = rng.permutation(n)
        for start in range(0, n, config.minibatch_size):
            idx = order[start : start + config.minibatch_size]
            if cached is not None:
                batch = cached[idx]
            else:
                batch = feature_map_batch(bank, train_set.features[idx].astype(np.float64))
            try:
                sgd_step(model, velocity, batch, train_set.labels[idx], lr, config.momentum, config.l2)
            except DivergenceError as exc:
                raise TrainingDiverged(f"diverged in epoch {epoch}: {exc}", trace) from exc
        if epoch % config.eval_every == 0:
            record = _record(trace, model, heldout, heldout_feats, epoch, run_dir)
            if record.perplexity < best_ppx * 0.999:
                best_ppx = record.perplexity
            else:
                lr *= config.anneal_factor
    return trace


def _record(trace, model, heldout, heldout_feats, epoch, run_dir) -> MetricsRecord:
    snapshot = model.quantized()
    name = f"ckpt_epoch{epoch}.rksm"
    if run_dir is not None:
        save_model(snapshot, os.path.join(run_dir, name))
    metrics = compute_metrics(_posteriors_from_features(snapshot, heldout_feats), heldout.labels)
    trace.entries.append(
        TraceEntry(
            epoch=epoch, metrics=metrics, checkpoint=name, model=snapshot if run_dir is None else None
        )
    )
    return metrics


def _features_chunked(bank: ProjectionBank, X: np.ndarray) -> np.ndarray:
    rows = max(1, _CHUNK_FLOATS // max(bank.num_features, 1))
    if X.shape[0] <= rows:
        return feature_map_batch(bank, X.astype(np.float64))
    parts = [
        feature_map_batch(bank, X[i : i + rows].astype(np.float64)) for i in range(0, X.shape[0], rows)
    ]
    return np.concatenate(parts, axis=0)


def _posteriors_from_features(model: Model, feats: np.ndarray) -> np.ndarray:
    rows = max(1, _CHUNK_FLOATS // max(model.feature_dim, 1))
    out = np.empty((feats.shape[0], model.num_classes))
    for i in range(0, feats.shape[0], rows):
        h = hidden_batch(model, feats[i : i + rows])
        scores = h @ model.output_weights.T
        if not np.all(np.isfinite(scores)):
            raise DivergenceError("non-finite class scores during evaluation")
        out[i : i + rows] = _softmax(scores)
    return out


def _posteriors(bank: ProjectionBank, model: Model, X: np.ndarray) -> np.ndarray:
    rows = max(1, _CHUNK_FLOATS // max(bank.num_features, 1))
    out = np.empty((X.shape[0], model.num_classes))
    for i in range(0, X.shape[0], rows):
        feats = feature_map_batch(bank, X[i : i + rows].astype(np.float64))
        out[i : i + rows] = _posteriors_from_features(model, feats)
    return out
