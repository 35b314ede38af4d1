"""Epsilon-insensitive support vector regression over calendar features.

A station's load at a ten-minute interval is regressed on four features:
interval number within the day (1..144), ISO weekday (1=Monday), ISO week
number and a year index.  One model is trained per station on the raw
(unnormalized) bin counts of its history.
"""

from __future__ import annotations

import datetime as dt
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import smo
from .kernels import RBF, KernelSpec, gram, kernel_row
from .profiles import BINS_PER_DAY, LoadSeries

COEF_CUTOFF = 1e-10
_DENSE_GRAM_LIMIT = 4096     # above this many samples kernel rows are cached on demand
_ROW_CACHE = 512


@dataclass(frozen=True)
class FeatureVector4:
    """Calendar features of one prediction target.

    interval k covers [10*(k-1), 10*k) minutes after midnight; the
    10:00-10:10 slot is interval 61.
    """

    interval: int     # 1..144
    weekday: int      # 1..7, ISO (Monday = 1)
    week: int         # 1..52 (ISO week 53 is clamped to 52)
    year_index: int   # 1..N over the training years

    def __post_init__(self) -> None:
        if not 1 <= self.interval <= BINS_PER_DAY:
            raise ValueError(f"interval {self.interval} outside 1..{BINS_PER_DAY}")
        if not 1 <= self.weekday <= 7:
            raise ValueError(f"weekday {self.weekday} outside 1..7")
        if not 1 <= self.week <= 52:
            raise ValueError(f"week {self.week} outside 1..52")
        if self.year_index < 1:
            raise ValueError("year_index must be >= 1")

    def as_array(self) -> np.ndarray:
        return np.array([self.interval, self.weekday, self.week, self.year_index], dtype=float)


@dataclass(frozen=True)
class SvrSample:
    features: FeatureVector4
    label: float    # raw load, non-negative

    def __post_init__(self) -> None:
        if self.label < 0:
            raise ValueError("load labels are non-negative")


def _iso_week(day: dt.date) -> int:
    return min(day.isocalendar()[1], 52)


def day_features(day: dt.date, years: Sequence[int]) -> list[FeatureVector4]:
    """The 144 feature vectors of one calendar day."""
    iso_year = day.isocalendar()[0]
    years = sorted(set(years))
    if iso_year in years:
        year_index = years.index(iso_year) + 1
    else:
        # predicting past the training range: extend the index
        year_index = max(len(years), 1) if iso_year > years[-1] else 1
    week = _iso_week(day)
    weekday = day.isoweekday()
    return [FeatureVector4(b + 1, weekday, week, year_index) for b in range(BINS_PER_DAY)]


def build_features(
    series_list: Sequence[LoadSeries],
    years: Sequence[int] | None = None,
) -> list[SvrSample]:
    """One sample per (day, bin) for a single site's history.

    Labels are the raw bin counts.  `years` fixes the year indexing; by
    default the distinct ISO years present in the data map to 1..N in
    ascending order.  Duplicate (site, date) entries are an error.
    """
    if not series_list:
        return []
    sites = {s.site_id for s in series_list}
    if len(sites) != 1:
        raise ValueError(f"expected one site, got {sorted(sites)}")
    ordered = sorted(series_list, key=lambda s: s.date)
    for a, b in zip(ordered, ordered[1:]):
        if a.date == b.date:
            raise ValueError(f"duplicate day {a.date} for site {a.site_id}")
    if years is None:
        years = sorted({s.date.isocalendar()[0] for s in ordered})
    samples = []
    for s in ordered:
        for feat, label in zip(day_features(s.date, years), s.bins):
            samples.append(SvrSample(feat, float(label)))
    return samples


@dataclass
class SvrModel:
    """f(x) = sum_i coefs[i] * k(scale(x), sv[i]) + bias, coefs = alpha - alpha*."""

    support_vectors: np.ndarray    # scaled feature rows
    coefs: np.ndarray
    bias: float
    kernel: KernelSpec
    c: float
    epsilon: float
    scale_min: np.ndarray
    scale_range: np.ndarray        # 0 marks a constant training feature
    diagnostics: "SvrDiagnostics | None" = field(repr=False, default=None)

    @property
    def n_features(self) -> int:
        return len(self.scale_min)

    def scale(self, x: np.ndarray) -> np.ndarray:
        rng = self.scale_range
        return np.where(rng > 0, (x - self.scale_min) / np.where(rng > 0, rng, 1.0), 0.0)


@dataclass
class SvrDiagnostics:
    iterations: int
    gap: float
    objective: float
    p: np.ndarray = field(repr=False, default=None)   # full 2m box variables


def _samples_to_arrays(samples: Sequence[SvrSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.vstack([s.features.as_array() for s in samples])
    y = np.array([s.label for s in samples], dtype=float)
    return X, y


def _scale_features(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mn = X.min(axis=0)
    rng = X.max(axis=0) - mn
    Xs = np.where(rng > 0, (X - mn) / np.where(rng > 0, rng, 1.0), 0.0)
    return Xs, mn, rng


def train(
    samples: Sequence[SvrSample],
    c: float,
    gamma: float,
    epsilon: float,
    tol: float = 1e-3,
    max_passes: int | None = None,
) -> SvrModel:
    """Fit the epsilon-SVR dual by SMO.

    Features are min-max scaled to [0, 1] per component before kernel
    evaluation; the scaling is stored in the model.  Raises
    SmoNonConvergence with diagnostics when the update budget runs out.
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    if c <= 0 or gamma <= 0 or epsilon <= 0:
        raise ValueError("C, gamma and epsilon must be positive")
    X, y = _samples_to_arrays(samples)
    Xs, mn, rng = _scale_features(X)
    kernel = KernelSpec(RBF, gamma)
    m = len(y)
    n = 2 * m
    if max_passes is None:
        max_passes = 10 * n

    if m <= _DENSE_GRAM_LIMIT:
        K = gram(kernel, Xs)

        def krow(u: int) -> np.ndarray:
            return K[u]
    else:
        sq = np.sum(Xs * Xs, axis=1)
        cache: OrderedDict[int, np.ndarray] = OrderedDict()

        def krow(u: int) -> np.ndarray:
            row = cache.get(u)
            if row is None:
                d2 = sq[u] + sq - 2.0 * (Xs @ Xs[u])
                np.maximum(d2, 0.0, out=d2)
                row = np.exp(-gamma * d2)
                row[u] = 1.0
                cache[u] = row
                if len(cache) > _ROW_CACHE:
                    cache.popitem(last=False)
            else:
                cache.move_to_end(u)
            return row

    def row(t: int) -> np.ndarray:
        return np.tile(krow(t % m), 2)

    z = np.concatenate([np.ones(m), -np.ones(m)])
    lin = np.concatenate([epsilon - y, epsilon + y])
    diag = np.ones(n)
    result = smo.solve(
        row=row, diag=diag, z=z, lin=lin, c=c, tol=tol, max_iter=max_passes * n
    )
    coefs = result.p[:m] - result.p[m:]
    keep = np.abs(coefs) > COEF_CUTOFF
    return SvrModel(
        support_vectors=Xs[keep].copy(),
        coefs=coefs[keep],
        bias=result.bias,
        kernel=kernel,
        c=c,
        epsilon=epsilon,
        scale_min=mn,
        scale_range=rng,
        diagnostics=SvrDiagnostics(
            iterations=result.iterations,
            gap=result.gap,
            objective=result.objective,
            p=result.p,
        ),
    )


def predict(model: SvrModel, x: FeatureVector4 | Sequence[float]) -> float:
    """Raw (unclamped) load prediction for one feature vector."""
    arr = x.as_array() if isinstance(x, FeatureVector4) else np.asarray(x, dtype=float)
    if arr.shape != (model.n_features,):
        raise ValueError(
            f"feature dimension {arr.shape[0] if arr.ndim == 1 else arr.shape}, "
            f"expected {model.n_features}"
        )
    if len(model.coefs) == 0:
        return model.bias
    k = kernel_row(model.kernel, model.scale(arr), model.support_vectors)
    return float(model.coefs @ k) + model.bias


def predict_day(model: SvrModel, weekday: int, week: int, year_index: int) -> np.ndarray:
    """Predicted loads for intervals 1..144, clamped below at 0.

    Entry k-1 equals max(0, predict(model, (k, weekday, week, year_index)))
    exactly: the sweep reuses the single-point path.
    """
    values = np.array([
        predict(model, FeatureVector4(k, weekday, week, year_index))
        for k in range(1, BINS_PER_DAY + 1)
    ])
    return np.maximum(values, 0.0)


def mse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """Mean squared error between two equal-length non-empty vectors."""
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape or p.ndim != 1:
        raise ValueError(f"length mismatch: {p.shape} vs {a.shape}")
    if len(p) == 0:
        raise ValueError("empty vectors")
    d = p - a
    return float(np.mean(d * d))


def normalized_mse(predicted: Sequence[float], actual: Sequence[float]) -> float:
    """MSE divided by the squared range of the actual values.

    Falls back to the plain MSE when the actual vector is constant.
    """
    a = np.asarray(actual, dtype=float)
    raw = mse(predicted, actual)
    span = float(a.max() - a.min())
    return raw / (span * span) if span > 0 else raw


# --- delimited text I/O -----------------------------------------------------

def write_predictions(
    path,
    site_id: str,
    date: dt.date,
    predicted: np.ndarray,
    actual: np.ndarray | None = None,
    append: bool = False,
) -> None:
    """Long-format export: site_id,date,x1,predicted[,actual]."""
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8") as fh:
        if not append:
            cols = "site_id,date,x1,predicted" + (",actual" if actual is not None else "")
            fh.write(cols + "\n")
        for k in range(BINS_PER_DAY):
            row = f"{site_id},{date.isoformat()},{k + 1},{predicted[k]!r}"
            if actual is not None:
                row += f",{actual[k]!r}"
            fh.write(row + "\n")


def read_predictions(path) -> dict[tuple[str, dt.date], np.ndarray]:
    """Per (site, date) 144-vectors from a long-format prediction file."""
    table: dict[tuple[str, dt.date], np.ndarray] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:4] != ["site_id", "date", "x1", "predicted"]:
            raise ValueError(f"{path}: not a prediction file")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) < 4:
                continue
            key = (parts[0], dt.date.fromisoformat(parts[1]))
            vec = table.setdefault(key, np.zeros(BINS_PER_DAY))
            vec[int(parts[2]) - 1] = float(parts[3])
    return table
