"""Multinomial logistic regression over random features.

The classifier is a single trainable softmax layer on top of a fixed
random feature map, optionally with a narrow bottleneck between the
features and the output layer: a linear bottleneck is a trained low-rank
factorization of the output weights, a sigmoid bottleneck is a trained
nonlinear code layer. Parameters live in float64 while training;
checkpoints store them as float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .features import BankComponent, ProjectionBank, rebuild_bank
from .kernels import KernelFamily, KernelSpec

_MAGIC = b"RKSM"
_VERSION = 1
_BOTTLENECK_CODE = {None: 0, "linear": 1, "sigmoid": 2}
_FAMILY_CODE = {KernelFamily.GAUSSIAN_RBF: 0, KernelFamily.LAPLACIAN: 1}
_FAMILY_FROM_CODE = {v: k for k, v in _FAMILY_CODE.items()}


class DivergenceError(ArithmeticError):
    """Raised when training or inference produces non-finite numbers."""


@dataclass(frozen=True)
class Bottleneck:
    """Narrow layer between the random features and the softmax."""

    kind: str  # "linear" or "sigmoid"
    width: int

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "sigmoid"):
            raise ValueError(f"bottleneck kind must be 'linear' or 'sigmoid', got {self.kind!r}")
        if self.width < 1:
            raise ValueError(f"bottleneck width must be >= 1, got {self.width}")


@dataclass
class Model:
    """Trainable parameters of the softmax classifier.

    ``output_weights`` is (num_classes, hidden_dim) where hidden_dim is the
    bottleneck width, or feature_dim when there is no bottleneck.
    ``projection`` (width, feature_dim) and ``projection_bias`` (width,)
    exist only for bottleneck models; the bias only for the sigmoid kind.
    """

    output_weights: np.ndarray
    feature_dim: int
    num_classes: int
    bottleneck: Bottleneck | None = None
    projection: np.ndarray | None = None
    projection_bias: np.ndarray | None = None
    bank_components: tuple[BankComponent, ...] = field(default=())
    bank_input_dim: int = 0

    @property
    def hidden_dim(self) -> int:
        return self.feature_dim if self.bottleneck is None else self.bottleneck.width

    def parameters(self) -> dict[str, np.ndarray]:
        """Trainable parameter arrays, in a fixed order."""
        params = {"output_weights": self.output_weights}
        if self.projection is not None:
            params["projection"] = self.projection
        if self.projection_bias is not None:
            params["projection_bias"] = self.projection_bias
        return params

    def copy(self) -> "Model":
        return Model(
            output_weights=self.output_weights.copy(),
            feature_dim=self.feature_dim,
            num_classes=self.num_classes,
            bottleneck=self.bottleneck,
            projection=None if self.projection is None else self.projection.copy(),
            projection_bias=None if self.projection_bias is None else self.projection_bias.copy(),
            bank_components=self.bank_components,
            bank_input_dim=self.bank_input_dim,
        )

    def quantized(self) -> "Model":
        """Copy with parameters rounded through float32, matching what a
        saved checkpoint will reload as."""
        out = self.copy()
        out.output_weights = out.output_weights.astype(np.float32).astype(np.float64)
        if out.projection is not None:
            out.projection = out.projection.astype(np.float32).astype(np.float64)
        if out.projection_bias is not None:
            out.projection_bias = out.projection_bias.astype(np.float32).astype(np.float64)
        return out


def init_model(
    feature_dim: int,
    num_classes: int,
    bottleneck: Bottleneck | None = None,
    seed: int = 0,
    bank: ProjectionBank | None = None,
) -> Model:
    """Build a model with zero output weights.

    A bottleneck projection, when present, is initialized from
    Normal(0, 1/feature_dim) with the given seed; the sigmoid bias starts
    at zero. Passing the bank records its sampling recipe so checkpoints
    can reconstruct the feature map.
    """
    if feature_dim < 1:
        raise ValueError(f"feature_dim must be >= 1, got {feature_dim}")
    if num_classes < 2:
        raise ValueError(f"need at least 2 classes, got {num_classes}")
    if bank is not None and bank.num_features != feature_dim:
        raise ValueError(f"bank has {bank.num_features} features, expected {feature_dim}")
    projection = None
    projection_bias = None
    if bottleneck is not None:
        if bottleneck.width >= feature_dim:
            raise ValueError(
                f"bottleneck width {bottleneck.width} must be smaller than feature_dim {feature_dim}"
            )
        rng = np.random.Generator(np.random.Philox(key=seed))
        projection = rng.standard_normal((bottleneck.width, feature_dim)) / np.sqrt(feature_dim)
        if bottleneck.kind == "sigmoid":
            projection_bias = np.zeros(bottleneck.width)
    hidden_dim = feature_dim if bottleneck is None else bottleneck.width
    return Model(
        output_weights=np.zeros((num_classes, hidden_dim)),
        feature_dim=feature_dim,
        num_classes=num_classes,
        bottleneck=bottleneck,
        projection=projection,
        projection_bias=projection_bias,
        bank_components=() if bank is None else bank.components,
        bank_input_dim=0 if bank is None else bank.input_dim,
    )


def hidden_batch(model: Model, features: np.ndarray) -> np.ndarray:
    """Bottleneck activations for a batch of feature rows (float64)."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.feature_dim:
        raise ValueError(f"expected shape (n, {model.feature_dim}), got {features.shape}")
    if model.bottleneck is None:
        return features
    pre = features @ model.projection.T
    if model.bottleneck.kind == "linear":
        return pre
    return expit(pre + model.projection_bias)


def hidden(model: Model, phi: np.ndarray) -> np.ndarray:
    """Bottleneck activations for a single feature vector."""
    return hidden_batch(model, np.asarray(phi, dtype=np.float64)[None, :])[0]


def posterior_batch(model: Model, features: np.ndarray) -> np.ndarray:
    """Class posteriors for a batch of feature rows.

    Softmax is computed with per-row max subtraction; non-finite scores
    raise :class:`DivergenceError`.
    """
    scores = hidden_batch(model, features) @ model.output_weights.T
    if not np.all(np.isfinite(scores)):
        raise DivergenceError("non-finite class scores")
    return _softmax(scores)


def posterior(model: Model, phi: np.ndarray) -> np.ndarray:
    """Class posteriors of a single feature vector; sums to 1."""
    return posterior_batch(model, np.asarray(phi, dtype=np.float64)[None, :])[0]


def loss_and_grad(
    model: Model, features: np.ndarray, labels: np.ndarray, l2: float = 0.0
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy plus (l2/2)*||params||^2 and its exact gradients.

    Returns the loss and one gradient array per entry of
    ``model.parameters()``.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("batch must be a non-empty matrix of feature rows")
    if labels.shape != (features.shape[0],):
        raise ValueError(f"labels shape {labels.shape} does not match batch size {features.shape[0]}")
    if labels.dtype.kind not in "iu":
        raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.min() < 0 or labels.max() >= model.num_classes:
        raise ValueError(f"labels must lie in [0, {model.num_classes - 1}]")
    m = features.shape[0]

    h = hidden_batch(model, features)
    scores = h @ model.output_weights.T
    if not np.all(np.isfinite(scores)):
        raise DivergenceError("non-finite class scores")
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp_scores = np.exp(shifted)
    norm = exp_scores.sum(axis=1)
    nll = float(np.mean(np.log(norm) - shifted[np.arange(m), labels]))

    resid = exp_scores / norm[:, None]
    resid[np.arange(m), labels] -= 1.0
    resid /= m

    grads = {"output_weights": resid.T @ h}
    if model.bottleneck is not None:
        back = resid @ model.output_weights  # (m, width)
        if model.bottleneck.kind == "sigmoid":
            back = back * h * (1.0 - h)
        grads["projection"] = back.T @ features
        if model.projection_bias is not None:
            grads["projection_bias"] = back.sum(axis=0)

    loss = nll
    if l2 > 0.0:
        for name, value in model.parameters().items():
            loss += 0.5 * l2 * float(np.sum(value * value))
            grads[name] += l2 * value
    return loss, grads


def save_model(model: Model, path) -> None:
    """Write a checkpoint: header, bank recipe, then float32 parameters.

    Layout (little-endian): magic "RKSM", version u32, input_dim u32,
    num_classes u32, bottleneck kind u8, width u32, component count u32,
    per component (family u8, sigma f64, num_features u32, seed u64),
    then output weights, projection, and bias as float32 row-major. The
    feature map itself is not stored; it is resampled from the recipe.
    """
    if not model.bank_components:
        raise ValueError("model has no bank recipe; pass bank= to init_model before saving")
    input_dim = _components_input_dim(model)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        kind = None if model.bottleneck is None else model.bottleneck.kind
        width = 0 if model.bottleneck is None else model.bottleneck.width
        fh.write(struct.pack("<IIBI", input_dim, model.num_classes, _BOTTLENECK_CODE[kind], width))
        fh.write(struct.pack("<I", len(model.bank_components)))
        for comp in model.bank_components:
            fh.write(
                struct.pack(
                    "<BdIQ",
                    _FAMILY_CODE[comp.spec.family],
                    comp.spec.bandwidth,
                    comp.num_features,
                    comp.seed,
                )
            )
        fh.write(np.ascontiguousarray(model.output_weights, dtype="<f4").tobytes())
        if model.projection is not None:
            fh.write(np.ascontiguousarray(model.projection, dtype="<f4").tobytes())
        if model.projection_bias is not None:
            fh.write(np.ascontiguousarray(model.projection_bias, dtype="<f4").tobytes())


def load_model(path) -> tuple[Model, ProjectionBank]:
    """Read a checkpoint and rebuild its projection bank from the recipe."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError(f"not a model checkpoint (bad magic {raw[:4]!r})")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    input_dim, num_classes, kind_code, width = struct.unpack_from("<IIBI", raw, 8)
    offset = 8 + struct.calcsize("<IIBI")
    (n_comp,) = struct.unpack_from("<I", raw, offset)
    offset += 4
    components = []
    for _ in range(n_comp):
        code, sigma, cnum, cseed = struct.unpack_from("<BdIQ", raw, offset)
        offset += struct.calcsize("<BdIQ")
        if code not in _FAMILY_FROM_CODE:
            raise ValueError(f"unknown kernel family code {code}")
        components.append(
            BankComponent(spec=KernelSpec(_FAMILY_FROM_CODE[code], sigma), num_features=cnum, seed=cseed)
        )
    bank = rebuild_bank(tuple(components), input_dim)
    feature_dim = bank.num_features

    if kind_code == 0:
        bottleneck = None
        hidden_dim = feature_dim
    elif kind_code == 1:
        bottleneck = Bottleneck("linear", width)
        hidden_dim = width
    elif kind_code == 2:
        bottleneck = Bottleneck("sigmoid", width)
        hidden_dim = width
    else:
        raise ValueError(f"unknown bottleneck code {kind_code}")

    def take(shape):
        nonlocal offset
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(raw):
            raise ValueError("truncated model checkpoint")
        arr = np.frombuffer(raw, dtype="<f4", count=count, offset=offset)
        offset = end
        return arr.reshape(shape).astype(np.float64)

    output_weights = take((num_classes, hidden_dim))
    projection = take((width, feature_dim)) if bottleneck is not None else None
    projection_bias = take((width,)) if kind_code == 2 else None
    if offset != len(raw):
        raise ValueError("trailing bytes in model checkpoint")
    model = Model(
        output_weights=output_weights,
        feature_dim=feature_dim,
        num_classes=num_classes,
        bottleneck=bottleneck,
        projection=projection,
        projection_bias=projection_bias,
        bank_components=bank.components,
        bank_input_dim=bank.input_dim,
    )
    return model, bank


def _components_input_dim(model: Model) -> int:
    # all components of one bank share the input dimension; stored once
    total = sum(c.num_features for c in model.bank_components)
    if total != model.feature_dim or model.bank_input_dim < 1:
        raise ValueError("bank recipe does not match model feature_dim")
    return model.bank_input_dim


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    np.exp(shifted, out=shifted)
    shifted /= shifted.sum(axis=1, keepdims=True)
    return shifted
