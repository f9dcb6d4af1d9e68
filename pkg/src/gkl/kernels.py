"""Kernel models.

A :class:`KernelModel` bundles a vectorized evaluator with the metadata the
analysis layer needs (smoothness, dimension restrictions).  Two kernels ship
as built-ins, and more can be added with :func:`register_kernel`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "KernelModel",
    "kernel_eval",
    "kernel_diag",
    "kernel_matrix",
    "get_kernel",
    "register_kernel",
    "available_kernels",
    "GAUSSIAN_W2",
    "WENDLAND_K0",
]


@dataclass(frozen=True)
class KernelModel:
    """Symmetric, strictly positive definite kernel.

    Parameters
    ----------
    name
        Registry identifier.
    evaluator
        Vectorized callable ``(X, Y) -> K`` taking arrays of shape ``(n, d)``
        and ``(m, d)`` and returning the ``(n, m)`` kernel matrix.
    smoothness
        ``float("inf")`` for infinitely smooth kernels, otherwise the
        Sobolev smoothness tau of the native space.
    dim
        Required dimension, or ``None`` when the kernel works in any dimension.
    params
        Free-form parameter record (informational only).
    diag_evaluator
        Optional vectorized ``X -> k(x_i, x_i)``; falls back to one
        evaluator call per row.
    """

    name: str
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    smoothness: float = float("inf")
    dim: int | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    diag_evaluator: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def finite_smoothness(self) -> bool:
        return np.isfinite(self.smoothness)

    def check_points(self, X) -> np.ndarray:
        X = np.asarray(X)
        if X.dtype.kind != "f":
            X = X.astype(float)
        if X.ndim == 0:
            X = X.reshape(1, 1)
        elif X.ndim == 1:
            # a single point when the kernel dimension says so, else 1-D points
            X = X.reshape(1, -1) if self.dim not in (None, 1) else X.reshape(-1, 1)
        if self.dim is not None and X.shape[1] != self.dim:
            raise ValueError(
                f"kernel {self.name!r} expects dimension {self.dim}, got {X.shape[1]}"
            )
        return X

    def __call__(self, X, Y) -> np.ndarray:
        """Kernel matrix between the rows of ``X`` and ``Y``."""
        X = self.check_points(X)
        Y = self.check_points(Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
        return self.evaluator(X, Y)

    def diag(self, X) -> np.ndarray:
        """Values ``k(x, x)`` for every row of ``X``."""
        X = self.check_points(X)
        if self.diag_evaluator is not None:
            return np.asarray(self.diag_evaluator(X))
        return np.array([self.evaluator(x[None, :], x[None, :])[0, 0] for x in X],
                        dtype=X.dtype)


def _sq_dists(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    # explicit differences keep k(x, y) and k(y, x) bitwise identical
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _gaussian_w2(X, Y):
    return np.exp(-4.0 * _sq_dists(X, Y))


def _gaussian_w2_diag(X):
    return np.exp(-4.0 * np.zeros(X.shape[0], dtype=X.dtype))


def _wendland_k0(X, Y):
    r = np.abs(X[:, None, 0] - Y[None, :, 0])
    return np.maximum(1.0 - r, 0.0)


def _wendland_k0_diag(X):
    return np.maximum(1.0 - np.zeros(X.shape[0], dtype=X.dtype), 0.0)


GAUSSIAN_W2 = KernelModel(
    name="gaussian_w2",
    evaluator=_gaussian_w2,
    smoothness=float("inf"),
    params={"width": 2.0},
    diag_evaluator=_gaussian_w2_diag,
)

# the d > 1 normalization of this kernel is not needed here, so it is 1-D only
WENDLAND_K0 = KernelModel(
    name="wendland_k0",
    evaluator=_wendland_k0,
    smoothness=1.0,
    dim=1,
    diag_evaluator=_wendland_k0_diag,
)

_REGISTRY: dict[str, KernelModel] = {
    GAUSSIAN_W2.name: GAUSSIAN_W2,
    WENDLAND_K0.name: WENDLAND_K0,
}


def register_kernel(model: KernelModel, overwrite: bool = False) -> KernelModel:
    if model.name in _REGISTRY and not overwrite:
        raise ValueError(f"kernel {model.name!r} already registered")
    _REGISTRY[model.name] = model
    return model


def get_kernel(name: str) -> KernelModel:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ValueError(
            f"unknown kernel {name!r}; available: {sorted(_REGISTRY)}"
        ) from None


def available_kernels() -> list[str]:
    return sorted(_REGISTRY)


def kernel_eval(model: KernelModel, x, y) -> float:
    """Evaluate ``k(x, y)`` for two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("kernel_eval expects single points")
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    if model.dim is not None and x.shape[0] != model.dim:
        raise ValueError(
            f"kernel {model.name!r} expects dimension {model.dim}, got {x.shape[0]}"
        )
    return float(model.evaluator(x[None, :], y[None, :])[0, 0])


def kernel_diag(model: KernelModel, x) -> float:
    """``k(x, x)``; values above 1 break the normalization the analysis assumes."""
    return kernel_eval(model, x, x)


def kernel_matrix(model: KernelModel, X, Y=None) -> np.ndarray:
    if Y is None:
        Y = X
    return model(X, Y)
