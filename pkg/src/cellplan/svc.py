"""Soft-margin kernel SVM trained by SMO, composed one-vs-one for 3 classes."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from itertools import combinations
from typing import Sequence

import numpy as np

from . import smo
from .kernels import KernelSpec, gram, kernel_row
from .profiles import Profile

SV_CUTOFF = 1e-10   # alphas at or below this are dropped from the model


class LoadClass(IntEnum):
    ALWAYS_LOADED = 1
    MORNING_PEAK = 2
    EVENING_PEAK = 3


PAIRS = tuple(combinations(sorted(LoadClass), 2))


@dataclass
class TrainDiagnostics:
    iterations: int
    gap: float
    objective: float
    objective_history: np.ndarray = field(repr=False, default=None)
    alphas: np.ndarray = field(repr=False, default=None)  # full vector, zeros included


@dataclass
class BinaryModel:
    """Binary decision function f(x) = sum_i dual_coefs[i] * k(x, sv[i]) + bias.

    dual_coefs holds alpha_i * y_i for the retained support vectors, so it
    already carries the label sign.
    """

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    diagnostics: TrainDiagnostics | None = field(repr=False, default=None)

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]


@dataclass
class MulticlassModel:
    """One binary model per unordered class pair, majority vote at predict time."""

    pairwise: dict[tuple[int, int], BinaryModel]
    n_features: int

    def __post_init__(self) -> None:
        if set(self.pairwise) != set(PAIRS):
            raise ValueError("multiclass model requires exactly the 3 class pairs")


def train_binary(
    X: np.ndarray,
    y: np.ndarray,
    c: float,
    kernel: KernelSpec,
    tol: float = 1e-3,
    max_passes: int | None = None,
    record_history: bool = False,
) -> BinaryModel:
    """Train a binary SVM with labels in {-1, +1}.

    max_passes bounds the solver at max_passes * m pair updates and defaults
    to 10 * m sweeps.  Raises SmoNonConvergence (with the last gap and the
    update count) if the budget runs out, and ValueError on single-class
    input.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (m, d) with one label per row")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("binary labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise ValueError("training set contains a single class")
    if c <= 0 or tol <= 0:
        raise ValueError("C and tol must be positive")
    m = len(y)
    if max_passes is None:
        max_passes = 10 * m

    K = gram(kernel, X)
    result = smo.solve(
        row=lambda t: K[t],
        diag=np.diagonal(K).copy(),
        z=y,
        lin=np.full(m, -1.0),
        c=c,
        tol=tol,
        max_iter=max_passes * m,
        record_history=record_history,
    )
    keep = result.p > SV_CUTOFF
    return BinaryModel(
        support_vectors=X[keep].copy(),
        dual_coefs=result.p[keep] * y[keep],
        bias=result.bias,
        kernel=kernel,
        c=c,
        diagnostics=TrainDiagnostics(
            iterations=result.iterations,
            gap=result.gap,
            objective=result.objective,
            objective_history=result.objective_history,
            alphas=result.p,
        ),
    )


def decision(model: BinaryModel, x: np.ndarray) -> float:
    """Signed distance surrogate: positive means the +1 side of the pair."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError(
            f"feature dimension {x.shape[0] if x.ndim == 1 else x.shape}, "
            f"expected {model.n_features}"
        )
    if len(model.dual_coefs) == 0:
        return model.bias
    return float(model.dual_coefs @ kernel_row(model.kernel, x, model.support_vectors)) + model.bias


def kkt_residual(
    X: np.ndarray, y: np.ndarray, alphas: np.ndarray, bias: float,
    kernel: KernelSpec, c: float,
) -> float:
    """Worst violation of the soft-margin KKT conditions over all points."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    K = gram(kernel, X)
    f = K @ (alphas * y) + bias
    yf = y * f
    worst = 0.0
    for a, v in zip(alphas, yf):
        if a <= SV_CUTOFF:
            worst = max(worst, 1.0 - v)        # expect y*f >= 1
        elif a >= c - SV_CUTOFF:
            worst = max(worst, v - 1.0)        # expect y*f <= 1
        else:
            worst = max(worst, abs(v - 1.0))   # on-margin
    return worst


def train_multiclass(
    X: np.ndarray,
    y: Sequence[int],
    c: float,
    kernel: KernelSpec,
    tol: float = 1e-3,
) -> MulticlassModel:
    """Train the 3-class model as three one-vs-one binary machines.

    All three classes must be present with at least 2 examples each.  The +1
    side of a pair (a, b), a < b, is class a.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    counts = {int(k): int(v) for k, v in zip(*np.unique(y, return_counts=True))}
    missing = [int(lab) for lab in LoadClass if lab not in counts]
    if missing:
        raise ValueError(f"3-class model requires all classes; missing {missing}")
    small = [lab for lab, n in counts.items() if n < 2]
    if small:
        raise ValueError(f"classes with < 2 examples rejected: {small}")

    pairwise = {}
    for a, b in PAIRS:
        mask = (y == a) | (y == b)
        yy = np.where(y[mask] == a, 1.0, -1.0)
        try:
            pairwise[(int(a), int(b))] = train_binary(X[mask], yy, c, kernel, tol)
        except smo.SmoNonConvergence as exc:
            raise RuntimeError(f"pair ({a},{b}) failed to converge: {exc}") from exc
    return MulticlassModel(pairwise=pairwise, n_features=X.shape[1])


def classify(model: MulticlassModel, profile: Profile) -> LoadClass:
    """Majority vote over the pairwise machines.

    Constant-load (degenerate) profiles are routed straight to class 1.
    Ties are broken by the larger sum of |decision| over the pairs a label
    won, then by the smaller label.
    """
    if profile.degenerate:
        return LoadClass.ALWAYS_LOADED
    return classify_vector(model, profile.values)


def classify_vector(model: MulticlassModel, x: np.ndarray) -> LoadClass:
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n_features,):
        raise ValueError(
            f"profile dimension {x.shape[0] if x.ndim == 1 else x.shape}, "
            f"expected {model.n_features}"
        )
    votes = {int(lab): 0 for lab in LoadClass}
    margin = {int(lab): 0.0 for lab in LoadClass}
    for (a, b), bin_model in sorted(model.pairwise.items()):
        f = decision(bin_model, x)
        winner = a if f > 0 else b
        votes[winner] += 1
        margin[winner] += abs(f)
    best = max(votes.values())
    tied = [lab for lab, v in votes.items() if v == best]
    tied.sort(key=lambda lab: (-margin[lab], lab))
    return LoadClass(tied[0])


@dataclass
class EvalResult:
    per_class: dict[int, float]
    total: float
    confusion: np.ndarray       # rows true class, cols predicted, order 1..3


def evaluate(
    model: MulticlassModel,
    profiles: Sequence[Profile],
    labels: Sequence[int],
) -> EvalResult:
    """Accuracy per class, total accuracy, and the 3x3 confusion matrix."""
    if len(profiles) == 0:
        raise ValueError("empty evaluation set")
    if len(profiles) != len(labels):
        raise ValueError("profiles and labels differ in length")
    confusion = np.zeros((3, 3), dtype=int)
    for prof, lab in zip(profiles, labels):
        pred = classify(model, prof)
        confusion[int(lab) - 1, int(pred) - 1] += 1
    per_class = {}
    for lab in LoadClass:
        row = confusion[int(lab) - 1]
        n = int(row.sum())
        per_class[int(lab)] = float(row[int(lab) - 1] / n) if n else float("nan")
    total = float(np.trace(confusion) / confusion.sum())
    return EvalResult(per_class=per_class, total=total, confusion=confusion)
