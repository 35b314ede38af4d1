"""Two-step K-means baseline: Lloyd clustering, then nearest-centroid labeling."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Sequence

import numpy as np

from .profiles import HOURLY, Profile
from .svc import LoadClass

K = 3
MAX_ITER = 300


@dataclass
class KmeansFit:
    centroids: np.ndarray            # (3, d)
    labels: np.ndarray               # cluster index per training row
    inertia_history: list[float] = field(repr=False, default_factory=list)
    n_iter: int = 0


@dataclass
class KmeansRef:
    """Reference clusters: 3 centroids and their class names.

    Centroids are 24-dimensional in the standard pipeline (K-means runs on
    hourly profiles); other widths are allowed for granularity experiments.
    """

    centroids: np.ndarray
    centroid_to_class: dict[int, int]

    def __post_init__(self) -> None:
        if self.centroids.shape[0] != K:
            raise ValueError(f"expected {K} centroids")
        if sorted(self.centroid_to_class.values()) != [1, 2, 3]:
            raise ValueError("centroid_to_class must be a bijection onto {1,2,3}")

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _sq_dists(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _farthest_point_init(X: np.ndarray, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    chosen = [int(rng.integers(len(X)))]
    min_d = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(min_d))  # ties resolve to the lowest index
        chosen.append(nxt)
        min_d = np.minimum(min_d, ((X - X[nxt]) ** 2).sum(axis=1))
    return X[chosen].copy()


def fit(X: np.ndarray, seed: int, max_iter: int = MAX_ITER) -> KmeansFit:
    """Lloyd's algorithm with farthest-point seeding, K fixed at 3.

    Deterministic for a fixed (input order, seed).  Runs until the
    assignment stops changing or max_iter sweeps.  Empty clusters are
    reseeded at the point farthest from the surviving centroids.  Requires
    at least 3 distinct rows.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be (n, d)")
    if len(np.unique(X, axis=0)) < K:
        raise ValueError(f"k-means needs at least {K} distinct points")

    centroids = _farthest_point_init(X, K, seed)
    labels = np.full(len(X), -1)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(X, centroids)
        new_labels = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(len(X)), new_labels].sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        for c in range(K):
            members = X[labels == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
            else:
                min_d = _sq_dists(X, centroids).min(axis=1)
                centroids[c] = X[int(np.argmax(min_d))]
    return KmeansFit(centroids=centroids, labels=labels, inertia_history=history, n_iter=n_iter)


def align(
    centroids: np.ndarray,
    X: np.ndarray,
    labels: Sequence[int],
) -> KmeansRef:
    """Name each centroid with the majority class of its assigned training rows.

    If the majorities do not cover {1,2,3}, the permutation with maximum
    total agreement wins, ties resolved in lexicographic permutation order.
    Every cluster must receive at least one training row.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    assign_idx = np.argmin(_sq_dists(X, centroids), axis=1)
    members: dict[int, np.ndarray] = {c: labels[assign_idx == c] for c in range(K)}
    empty = [c for c, rows in members.items() if len(rows) == 0]
    if empty:
        raise ValueError(f"clusters without training profiles: {empty}")

    majority = {}
    for c in range(K):
        vals, counts = np.unique(members[c], return_counts=True)
        best = counts.max()
        majority[c] = int(min(vals[counts == best]))  # majority, ties to lowest label
    if sorted(majority.values()) == [1, 2, 3]:
        return KmeansRef(centroids=np.array(centroids, dtype=float), centroid_to_class=majority)

    best_perm = None
    best_score = -1
    for perm in permutations((1, 2, 3)):
        score = sum(int((members[c] == perm[c]).sum()) for c in range(K))
        if score > best_score:
            best_score = score
            best_perm = perm
    mapping = {c: best_perm[c] for c in range(K)}
    return KmeansRef(centroids=np.array(centroids, dtype=float), centroid_to_class=mapping)


def assign_vector(ref: KmeansRef, x: np.ndarray) -> LoadClass:
    x = np.asarray(x, dtype=float)
    if x.shape != (ref.dim,):
        raise ValueError(
            f"profile dimension {x.shape[0] if x.ndim == 1 else x.shape}, "
            f"expected {ref.dim}"
        )
    d2 = ((ref.centroids - x) ** 2).sum(axis=1)
    # nearest centroid; exact distance ties go to the lowest class label
    order = sorted(range(K), key=lambda c: (d2[c], ref.centroid_to_class[c]))
    return LoadClass(ref.centroid_to_class[order[0]])


def assign(ref: KmeansRef, profile: Profile) -> LoadClass:
    """Class of the centroid nearest to an hourly profile."""
    if profile.granularity != HOURLY and ref.dim == 24:
        raise ValueError("k-means assignment expects hourly profiles")
    return assign_vector(ref, profile.values)
