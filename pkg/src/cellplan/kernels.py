"""Kernel functions and Gram matrices shared by the SVM classifier and the SVR."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RBF = "rbf"
LINEAR = "linear"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice plus its parameters.

    kind is either "rbf" or "linear"; gamma is required (and must be
    positive) for the RBF kernel and ignored for the linear one.
    """

    kind: str = RBF
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (RBF, LINEAR):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == RBF:
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("RBF kernel requires gamma > 0")


def default_gamma(n_features: int) -> float:
    """Default RBF width for classification: 1 / n_features."""
    return 1.0 / n_features


def eval_kernel(spec: KernelSpec, x: np.ndarray, y: np.ndarray) -> float:
    """Evaluate k(x, y) for two vectors of equal dimension."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if spec.kind == LINEAR:
        return float(np.dot(x, y))
    d = x - y
    return float(np.exp(-spec.gamma * np.dot(d, d)))


def kernel_row(spec: KernelSpec, x: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Vector of k(x, X[i]) for all rows of X."""
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {x.shape} vs rows of {X.shape}")
    if spec.kind == LINEAR:
        return X @ x
    d2 = np.sum((X - x) ** 2, axis=1)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-spec.gamma * d2)


def gram(spec: KernelSpec, X: np.ndarray) -> np.ndarray:
    """Dense symmetric Gram matrix G[i, j] = k(X[i], X[j]).

    The upper triangle is computed once and mirrored, so symmetry is exact.
    For the RBF kernel the diagonal is set to 1.0 exactly.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array of row vectors")
    m = X.shape[0]
    if spec.kind == LINEAR:
        G = X @ X.T
        # mirror the strict upper triangle to kill BLAS asymmetry noise
        iu = np.triu_indices(m, k=1)
        G[(iu[1], iu[0])] = G[iu]
        return G
    G = np.empty((m, m))
    sq = np.sum(X * X, axis=1)
    for i in range(m):
        d2 = sq[i] + sq[i:] - 2.0 * (X[i:] @ X[i])
        np.maximum(d2, 0.0, out=d2)
        G[i, i:] = np.exp(-spec.gamma * d2)
        G[i:, i] = G[i, i:]
    np.fill_diagonal(G, 1.0)
    return G
