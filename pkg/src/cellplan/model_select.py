"""Cross-validation and grid search for the classifier (C, gamma) and the
regressor (C, gamma, epsilon)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import smo, svc, svr
from .kernels import RBF, KernelSpec

ACCURACY = "accuracy"
MSE = "mse"

# C and gamma candidates; the gamma list includes the reference value 1.4e-3
DEFAULT_C = (0.1, 1.0, 10.0, 100.0)
DEFAULT_GAMMA = (1e-4, 3e-4, 1e-3, 1.4e-3, 3e-3, 1e-2)
DEFAULT_EPSILON_FRACTIONS = (0.01, 0.05, 0.1)   # of the label range

CARTESIAN = "cartesian"
SEQUENTIAL = "sequential"


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter candidates plus the evaluation protocol.

    metric "accuracy" (maximize) drives the classifier on (X, y) data with
    shuffled k-fold splits; "mse" (minimize) drives the regressor on
    SvrSample lists with contiguous forward-chaining time blocks.
    strategy "sequential" fixes gamma first, then C, then epsilon, instead
    of the full Cartesian sweep.
    """

    c_values: tuple[float, ...] = DEFAULT_C
    gamma_values: tuple[float, ...] = DEFAULT_GAMMA
    epsilon_values: tuple[float, ...] | None = None
    metric: str = ACCURACY
    folds: int = 5
    strategy: str = CARTESIAN

    def __post_init__(self) -> None:
        for name, vals in (("c", self.c_values), ("gamma", self.gamma_values)):
            if not vals or any(v <= 0 for v in vals):
                raise ValueError(f"{name} candidates must be non-empty and positive")
        if self.epsilon_values is not None and (
            not self.epsilon_values or any(v <= 0 for v in self.epsilon_values)
        ):
            raise ValueError("epsilon candidates must be non-empty and positive")
        if self.metric not in (ACCURACY, MSE):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.strategy not in (CARTESIAN, SEQUENTIAL):
            raise ValueError(f"unknown strategy {self.strategy!r}")


def default_epsilons(labels: Sequence[float]) -> tuple[float, ...]:
    """Epsilon candidates scaled to the label range."""
    span = float(np.max(labels) - np.min(labels))
    span = span if span > 0 else 1.0
    return tuple(f * span for f in DEFAULT_EPSILON_FRACTIONS)


def shuffled_folds(n: int, folds: int, seed: int) -> list[np.ndarray]:
    """Deterministically shuffled, nearly equal contiguous validation folds."""
    if folds > n:
        raise ValueError(f"{folds} folds for {n} rows")
    order = np.random.default_rng(seed).permutation(n)
    return [np.sort(chunk) for chunk in np.array_split(order, folds)]


def time_blocks(n: int, folds: int) -> list[np.ndarray]:
    """Contiguous blocks in time order (no shuffling)."""
    if folds > n:
        raise ValueError(f"{folds} blocks for {n} rows")
    return np.array_split(np.arange(n), folds)


def kfold_score_classification(
    X: np.ndarray,
    y: Sequence[int],
    c: float,
    gamma: float,
    folds: int = 5,
    seed: int = 0,
    tol: float = 1e-3,
) -> float:
    """Mean held-out accuracy over shuffled folds.

    A fold whose training part lacks a class (or has a class with fewer
    than 2 rows) is skipped with a warning; if every fold is skipped a
    ValueError is raised.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    kernel = KernelSpec(RBF, gamma)
    scores = []
    for k, val_idx in enumerate(shuffled_folds(len(y), folds, seed)):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[val_idx] = False
        y_train = y[train_mask]
        counts = {lab: int((y_train == lab).sum()) for lab in (1, 2, 3)}
        if any(v < 2 for v in counts.values()):
            warnings.warn(f"fold {k} skipped: training class counts {counts}")
            continue
        model = svc.train_multiclass(X[train_mask], y_train, c, kernel, tol)
        preds = [int(svc.classify_vector(model, X[i])) for i in val_idx]
        scores.append(float(np.mean([p == y[i] for p, i in zip(preds, val_idx)])))
    if not scores:
        raise ValueError("all folds skipped")
    return float(np.mean(scores))


def kfold_score_regression(
    samples: Sequence[svr.SvrSample],
    c: float,
    gamma: float,
    epsilon: float,
    folds: int = 4,
    tol: float = 1e-3,
) -> float:
    """Mean held-out MSE with forward-chaining time blocks.

    Data must already be in time order.  Block i is validated against a
    model trained on blocks 0..i-1, so no fold ever trains on data later
    than its validation block.
    """
    blocks = time_blocks(len(samples), folds)
    scores = []
    for i in range(1, len(blocks)):
        train_idx = np.concatenate(blocks[:i])
        model = svr.train([samples[t] for t in train_idx], c, gamma, epsilon, tol)
        preds = [svr.predict(model, samples[t].features) for t in blocks[i]]
        actual = [samples[t].label for t in blocks[i]]
        scores.append(svr.mse(preds, actual))
    return float(np.mean(scores))


@dataclass
class CellScore:
    c: float
    gamma: float
    epsilon: float | None
    score: float | None
    error: str | None = None


@dataclass
class GridResult:
    best: CellScore
    table: list[CellScore] = field(repr=False, default_factory=list)

    def best_params(self) -> dict:
        return {"c": self.best.c, "gamma": self.best.gamma, "epsilon": self.best.epsilon}


def _better(metric: str, a: float, b: float) -> bool:
    return a > b if metric == ACCURACY else a < b


def _score_cell(data, grid: GridSpec, c, gamma, epsilon, seed) -> CellScore:
    try:
        if grid.metric == ACCURACY:
            X, y = data
            score = kfold_score_classification(X, y, c, gamma, grid.folds, seed)
        else:
            score = kfold_score_regression(data, c, gamma, epsilon, grid.folds)
        return CellScore(c, gamma, epsilon, score)
    except (smo.SmoNonConvergence, ValueError, RuntimeError) as exc:
        return CellScore(c, gamma, epsilon, None, error=str(exc))


def grid_search(data, grid: GridSpec, seed: int = 0) -> GridResult:
    """Evaluate the grid and return the optimum with the full score table.

    `data` is (X, y) for the accuracy metric or a time-ordered SvrSample
    list for MSE.  Candidates are visited in ascending (C, gamma, epsilon)
    order and the first optimum wins, so ties break toward the smallest
    parameters.  Failed cells stay in the table with their error; if every
    cell fails a RuntimeError is raised.
    """
    cs = sorted(grid.c_values)
    gammas = sorted(grid.gamma_values)
    if grid.metric == MSE:
        eps_list = sorted(grid.epsilon_values or default_epsilons([s.label for s in data]))
    else:
        eps_list = [None]

    table: list[CellScore] = []

    def sweep(cells) -> CellScore | None:
        best = None
        for c, g, e in cells:
            cell = _score_cell(data, grid, c, g, e, seed)
            table.append(cell)
            if cell.score is not None and (best is None or _better(grid.metric, cell.score, best.score)):
                best = cell
        return best

    if grid.strategy == CARTESIAN:
        best = sweep((c, g, e) for c in cs for g in gammas for e in eps_list)
    else:
        # fix gamma first, then C, then epsilon, like a staged tuning pass
        c0, e0 = cs[0], eps_list[0]
        stage = sweep((c0, g, e0) for g in gammas)
        if stage is not None:
            g_star = stage.gamma
            stage2 = sweep((c, g_star, e0) for c in cs if c != c0)
            best = stage2 if stage2 and _better(grid.metric, stage2.score, stage.score) else stage
            if grid.metric == MSE and len(eps_list) > 1:
                stage3 = sweep((best.c, best.gamma, e) for e in eps_list if e != e0)
                if stage3 and _better(grid.metric, stage3.score, best.score):
                    best = stage3
        else:
            best = None
    if best is None:
        raise RuntimeError("every grid cell failed")
    return GridResult(best=best, table=table)


def write_score_table(path, table: Sequence[CellScore]) -> None:
    """Delimited export `C,gamma,epsilon,metric` for curve plotting."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("C,gamma,epsilon,metric\n")
        for cell in table:
            eps = "" if cell.epsilon is None else repr(float(cell.epsilon))
            score = "" if cell.score is None else repr(float(cell.score))
            fh.write(f"{cell.c!r},{cell.gamma!r},{eps},{score}\n")


def read_score_table(path) -> list[CellScore]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "C,gamma,epsilon,metric":
            raise ValueError(f"{path}: not a score table")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != 4:
                continue
            out.append(
                CellScore(
                    c=float(parts[0]),
                    gamma=float(parts[1]),
                    epsilon=float(parts[2]) if parts[2] else None,
                    score=float(parts[3]) if parts[3] else None,
                )
            )
    return out
