"""Exact shift-invariant kernels (Gaussian RBF and Laplacian)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class KernelFamily(enum.Enum):
    """Supported shift-invariant kernel families."""

    GAUSSIAN_RBF = "rbf"
    LAPLACIAN = "lap"


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family together with its bandwidth.

    The bandwidth is the length scale of the kernel, in the same units as
    distances between input feature vectors.
    """

    family: KernelFamily
    bandwidth: float

    def __post_init__(self) -> None:
        if not isinstance(self.family, KernelFamily):
            raise ValueError(f"unknown kernel family: {self.family!r}")
        bw = float(self.bandwidth)
        if not np.isfinite(bw) or bw <= 0.0:
            raise ValueError(f"bandwidth must be a positive real, got {self.bandwidth!r}")
        object.__setattr__(self, "bandwidth", bw)


def kernel_exact(spec: KernelSpec, x: np.ndarray, z: np.ndarray) -> float:
    """Evaluate the exact kernel between two vectors.

    Gaussian RBF: exp(-||x-z||_2^2 / (2 sigma^2)).
    Laplacian:    exp(-||x-z||_1 / sigma).
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.ndim != 1 or z.ndim != 1 or x.shape != z.shape:
        raise ValueError(f"x and z must be 1-D vectors of equal length, got {x.shape} and {z.shape}")
    return float(_kernel_from_delta(spec, (x - z)[None, :])[0])


def kernel_exact_pairs(spec: KernelSpec, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Row-wise exact kernel: result[i] = k(X[i], Z[i]). 64-bit throughout."""
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if X.ndim != 2 or X.shape != Z.shape:
        raise ValueError(f"X and Z must be matrices of equal shape, got {X.shape} and {Z.shape}")
    return _kernel_from_delta(spec, X - Z)


def _kernel_from_delta(spec: KernelSpec, delta: np.ndarray) -> np.ndarray:
    sigma = spec.bandwidth
    if spec.family is KernelFamily.GAUSSIAN_RBF:
        return np.exp(-np.sum(delta * delta, axis=1) / (2.0 * sigma * sigma))
    return np.exp(-np.sum(np.abs(delta), axis=1) / sigma)
