"""Random Fourier feature banks approximating shift-invariant kernels.

A projection bank holds frequencies sampled from the kernel's spectral
density (Gaussian frequencies for the Gaussian RBF kernel, Cauchy for the
Laplacian) plus uniform phases. The feature map

    phi_i(x) = sqrt(2/D) * cos(w_i . x + b_i),    i = 1..D

has the property that phi(x) . phi(z) is an unbiased Monte-Carlo estimate
of the exact kernel k(x, z).

Sampling uses the counter-based Philox generator keyed by the bank seed,
and both frequency families are produced by inverse-CDF transforms of one
uniform stream (row-major over the frequency matrix, then the phases), so
a bank is reconstructible bit-for-bit from (spec, input_dim, num_features,
seed). Frequencies and phases are stored as float32; the feature map does
its arithmetic in float64 and stores results as float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .kernels import KernelFamily, KernelSpec

_MAGIC = b"RFFB"
_VERSION = 1
_FAMILY_CODE = {KernelFamily.GAUSSIAN_RBF: 0, KernelFamily.LAPLACIAN: 1}
_FAMILY_FROM_CODE = {v: k for k, v in _FAMILY_CODE.items()}
_COMBINED_CODE = 255

# Largest float32 strictly below 2*pi; keeps phases in [0, 2pi) after rounding.
_PHASE_CAP = np.float32(2.0 * np.pi)
while float(_PHASE_CAP) >= 2.0 * np.pi:
    _PHASE_CAP = np.nextafter(_PHASE_CAP, np.float32(0.0))


@dataclass(frozen=True)
class BankComponent:
    """Sampling recipe for one block of a projection bank."""

    spec: KernelSpec
    num_features: int
    seed: int


@dataclass(frozen=True)
class ProjectionBank:
    """Sampled frequencies and phases defining one random feature map.

    ``components`` records how each block of rows was sampled; plain banks
    have a single component, banks built by :func:`combine_banks` have one
    per member.
    """

    frequencies: np.ndarray  # (num_features, input_dim) float32
    phases: np.ndarray  # (num_features,) float32
    input_dim: int
    num_features: int
    components: tuple[BankComponent, ...]

    def __post_init__(self) -> None:
        if self.frequencies.shape != (self.num_features, self.input_dim):
            raise ValueError(
                f"frequency matrix shape {self.frequencies.shape} does not match "
                f"(num_features={self.num_features}, input_dim={self.input_dim})"
            )
        if self.phases.shape != (self.num_features,):
            raise ValueError(f"phase vector shape {self.phases.shape} != ({self.num_features},)")
        if sum(c.num_features for c in self.components) != self.num_features:
            raise ValueError("component sizes do not sum to num_features")

    @property
    def spec(self) -> KernelSpec:
        """Kernel spec of a plain (single-component) bank."""
        if len(self.components) != 1:
            raise ValueError("combined bank approximates a kernel mixture, not a single kernel")
        return self.components[0].spec

    @property
    def seed(self) -> int:
        if len(self.components) != 1:
            raise ValueError("combined bank has no single seed")
        return self.components[0].seed


def sample_projection_bank(
    spec: KernelSpec, input_dim: int, num_features: int, seed: int
) -> ProjectionBank:
    """Draw a projection bank for the given kernel.

    Gaussian RBF frequencies are Normal(0, 1/sigma^2) per coordinate;
    Laplacian frequencies are Cauchy with scale 1/sigma. Phases are
    Uniform[0, 2pi). Deterministic given the seed.
    """
    if input_dim < 1 or num_features < 1:
        raise ValueError(f"input_dim and num_features must be >= 1, got {input_dim}, {num_features}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random((num_features, input_dim))
    u = np.where(u == 0.0, 2.0**-53, u)  # ndtri(0) is -inf
    if spec.family is KernelFamily.GAUSSIAN_RBF:
        freqs = ndtri(u) / spec.bandwidth
    else:
        freqs = np.tan(np.pi * (u - 0.5)) / spec.bandwidth
    phases = np.minimum((2.0 * np.pi * rng.random(num_features)).astype(np.float32), _PHASE_CAP)
    return ProjectionBank(
        frequencies=freqs.astype(np.float32),
        phases=phases,
        input_dim=input_dim,
        num_features=num_features,
        components=(BankComponent(spec=spec, num_features=num_features, seed=int(seed)),),
    )


def feature_map_batch(bank: ProjectionBank, X: np.ndarray) -> np.ndarray:
    """Map a matrix of row vectors through the bank, one feature row each.

    The projection is contracted with ``einsum`` in a fixed coordinate
    order, never through BLAS, so every output row is bit-identical to a
    single-row call regardless of batch size or thread count.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != bank.input_dim:
        raise ValueError(f"expected shape (n, {bank.input_dim}), got {X.shape}")
    proj = np.einsum(
        "nd,dk->nk", X, np.ascontiguousarray(bank.frequencies.T, dtype=np.float64), optimize=False
    )
    proj += bank.phases.astype(np.float64)
    np.cos(proj, out=proj)
    proj *= np.sqrt(2.0 / bank.num_features)
    return proj.astype(np.float32)


def feature_map(bank: ProjectionBank, x: np.ndarray) -> np.ndarray:
    """Random feature vector of a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != bank.input_dim:
        raise ValueError(f"expected vector of length {bank.input_dim}, got shape {x.shape}")
    return feature_map_batch(bank, x[None, :])[0]


def combine_banks(banks: list[ProjectionBank]) -> ProjectionBank:
    """Concatenate banks into one whose map approximates the average kernel.

    Each member block keeps its own frequencies and phases; the shared
    sqrt(2/D_total) feature scale rescales block j by sqrt(D_j / sum D_j)
    relative to its standalone map, which for equal-size members makes the
    combined inner product approximate the uniform average of the member
    kernels.
    """
    if not banks:
        raise ValueError("need at least one bank to combine")
    input_dim = banks[0].input_dim
    for b in banks[1:]:
        if b.input_dim != input_dim:
            raise ValueError(f"input_dim mismatch: {b.input_dim} != {input_dim}")
    if len(banks) == 1:
        return banks[0]
    components: tuple[BankComponent, ...] = ()
    for b in banks:
        components += b.components
    return ProjectionBank(
        frequencies=np.concatenate([b.frequencies for b in banks], axis=0),
        phases=np.concatenate([b.phases for b in banks]),
        input_dim=input_dim,
        num_features=sum(b.num_features for b in banks),
        components=components,
    )


def rebuild_bank(
    components: tuple[BankComponent, ...] | list[BankComponent], input_dim: int
) -> ProjectionBank:
    """Resample a bank from its component recipes (deterministic)."""
    banks = [sample_projection_bank(c.spec, input_dim, c.num_features, c.seed) for c in components]
    return combine_banks(banks)


def save_bank(bank: ProjectionBank, path) -> None:
    """Write a bank to the binary RFFB format (little-endian).

    Plain banks use the layout: magic "RFFB", version u32, family u8,
    sigma f64, input_dim u32, num_features u32, seed u64, then the
    frequency matrix as float32 row-major, then the phases as float32.
    Combined banks write family 255 with a component table between the
    header and the matrices.
    """
    combined = len(bank.components) > 1
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        if not combined:
            comp = bank.components[0]
            fh.write(
                struct.pack(
                    "<BdIIQ",
                    _FAMILY_CODE[comp.spec.family],
                    comp.spec.bandwidth,
                    bank.input_dim,
                    bank.num_features,
                    comp.seed,
                )
            )
        else:
            fh.write(struct.pack("<BdIIQ", _COMBINED_CODE, 0.0, bank.input_dim, bank.num_features, 0))
            fh.write(struct.pack("<I", len(bank.components)))
            for comp in bank.components:
                fh.write(
                    struct.pack(
                        "<BdIQ",
                        _FAMILY_CODE[comp.spec.family],
                        comp.spec.bandwidth,
                        comp.num_features,
                        comp.seed,
                    )
                )
        fh.write(np.ascontiguousarray(bank.frequencies, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(bank.phases, dtype="<f4").tobytes())


def load_bank(path) -> ProjectionBank:
    """Read a bank written by :func:`save_bank`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != _MAGIC:
        raise ValueError(f"not a projection bank file (bad magic {raw[:4]!r})")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported bank format version {version}")
    family_code, sigma, input_dim, num_features, seed = struct.unpack_from("<BdIIQ", raw, 8)
    offset = 8 + struct.calcsize("<BdIIQ")
    if family_code == _COMBINED_CODE:
        (n_comp,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        components = []
        for _ in range(n_comp):
            code, csigma, cnum, cseed = struct.unpack_from("<BdIQ", raw, offset)
            offset += struct.calcsize("<BdIQ")
            components.append(
                BankComponent(
                    spec=KernelSpec(_family_from_code(code), csigma),
                    num_features=cnum,
                    seed=cseed,
                )
            )
        components = tuple(components)
    else:
        components = (
            BankComponent(
                spec=KernelSpec(_family_from_code(family_code), sigma),
                num_features=num_features,
                seed=seed,
            ),
        )
    freq_bytes = 4 * num_features * input_dim
    phase_bytes = 4 * num_features
    if len(raw) - offset != freq_bytes + phase_bytes:
        raise ValueError("truncated or oversized projection bank file")
    freqs = np.frombuffer(raw, dtype="<f4", count=num_features * input_dim, offset=offset)
    phases = np.frombuffer(raw, dtype="<f4", count=num_features, offset=offset + freq_bytes)
    return ProjectionBank(
        frequencies=freqs.reshape(num_features, input_dim).copy(),
        phases=phases.copy(),
        input_dim=input_dim,
        num_features=num_features,
        components=components,
    )


def _family_from_code(code: int) -> KernelFamily:
    try:
        return _FAMILY_FROM_CODE[code]
    except KeyError:
        raise ValueError(f"unknown kernel family code {code}") from None
