"""Seeded synthetic stand-in for the unavailable production traces.

Three station archetypes drive everything: a flat always-loaded shape, a
morning-peak shape (mass between 08:00 and 14:00) and an evening/night
shape wrapping around midnight.  Generators are pure functions of their
seed; no global random state is touched.
"""

from __future__ import annotations

import configparser
import datetime as dt
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .profiles import BINS_PER_DAY, LoadSeries
from .svc import LoadClass

DEFAULT_VOLUME = 120
DEFAULT_NOISE = 0.15
DEFAULT_DATE = dt.date(2013, 3, 4)  # a Monday

# 1-based bin windows of the class definitions (bin k covers
# [10*(k-1), 10*k) minutes after midnight)
MORNING_WINDOW = (49, 84)      # 08:00 .. 14:00
EVENING_START = 109            # 18:00
EVENING_END = 24               # 04:00, wrapping past midnight


@dataclass(frozen=True)
class ClassTemplate:
    label: int
    shape: np.ndarray            # base intensity per bin, values in [0, 1]
    noise_sigma: float
    volume: float                # mean peak user count

    def validate(self) -> None:
        shape = np.asarray(self.shape, dtype=float)
        if shape.shape != (BINS_PER_DAY,):
            raise ValueError(f"shape must have {BINS_PER_DAY} bins")
        if shape.min() < 0 or shape.max() > 1:
            raise ValueError("shape intensities must lie in [0, 1]")
        if self.noise_sigma < 0 or self.volume <= 0:
            raise ValueError("noise_sigma must be >= 0 and volume > 0")
        label = int(self.label)
        if label == LoadClass.ALWAYS_LOADED:
            mean = shape.mean()
            cv = shape.std() / mean if mean else 0.0
            if cv > 0.15:
                raise ValueError(f"always-loaded shape too variable (cv={cv:.3f})")
        elif label == LoadClass.MORNING_PEAK:
            lo, hi = MORNING_WINDOW
            peak = int(np.argmax(shape)) + 1
            if not lo <= peak <= hi:
                raise ValueError(f"morning shape peaks at bin {peak}, outside {MORNING_WINDOW}")
            if shape[lo - 1:hi].sum() < 0.5 * shape.sum():
                raise ValueError("morning shape mass not concentrated in 08:00-14:00")
        elif label == LoadClass.EVENING_PEAK:
            window = _evening_mask()
            peak = int(np.argmax(shape)) + 1
            if not window[peak - 1]:
                raise ValueError(f"evening shape peaks at bin {peak}, outside the night window")
            if shape[window].sum() < 0.5 * shape.sum():
                raise ValueError("evening shape mass not concentrated in the night window")
        else:
            raise ValueError(f"unknown class label {self.label}")


def _evening_mask() -> np.ndarray:
    mask = np.zeros(BINS_PER_DAY, dtype=bool)
    mask[EVENING_START - 1:] = True
    mask[:EVENING_END] = True
    return mask


def _bump(center: float, width: float, baseline: float, wrap: bool = False) -> np.ndarray:
    b = np.arange(BINS_PER_DAY, dtype=float)
    d = np.abs(b - center)
    if wrap:
        d = np.minimum(d, BINS_PER_DAY - d)
    shape = baseline + (1.0 - baseline) * np.exp(-((d / width) ** 2))
    return np.clip(shape, 0.0, 1.0)


def default_templates(
    noise_sigma: float = DEFAULT_NOISE, volume: float = DEFAULT_VOLUME
) -> dict[int, ClassTemplate]:
    """One template per class, tuned so the classes stay well separated."""
    templates = {
        1: ClassTemplate(1, np.full(BINS_PER_DAY, 0.8), noise_sigma, volume),
        2: ClassTemplate(2, _bump(center=65.0, width=10.0, baseline=0.10), noise_sigma, volume),
        3: ClassTemplate(3, _bump(center=132.0, width=14.0, baseline=0.08, wrap=True),
                         noise_sigma, volume),
    }
    for t in templates.values():
        t.validate()
    return templates


def _draw_series(
    template: ClassTemplate, site_id: str, date: dt.date, rng: np.random.Generator
) -> LoadSeries:
    noise = rng.normal(0.0, template.noise_sigma, BINS_PER_DAY)
    factor = np.maximum(1.0 + noise, 0.0)  # multiplicative noise clamped at -1
    counts = np.maximum(np.rint(template.volume * template.shape * factor), 0)
    return LoadSeries(site_id, date, counts.astype(np.int64))


def gen_profiles(
    template: ClassTemplate,
    count: int,
    seed: int,
    date: dt.date = DEFAULT_DATE,
    site_prefix: str = "s",
) -> list[tuple[LoadSeries, LoadClass]]:
    """Draw `count` labeled station-days from one template."""
    if count < 1:
        raise ValueError("count must be >= 1")
    template.validate()
    out = []
    for i in range(count):
        rng = np.random.default_rng([seed, int(template.label), i])
        site = f"{site_prefix}{template.label}{i:04d}"
        out.append((_draw_series(template, site, date, rng), LoadClass(template.label)))
    return out


def gen_mixed(
    templates: dict[int, ClassTemplate],
    count: int,
    seed: int,
    date: dt.date = DEFAULT_DATE,
    site_prefix: str = "s",
) -> tuple[list[LoadSeries], list[LoadClass]]:
    """Labeled set with equal class thirds (remainder goes to low labels first)."""
    per = {lab: count // 3 for lab in (1, 2, 3)}
    for lab in range(1, count % 3 + 1):
        per[lab] += 1
    series, labels = [], []
    for lab in (1, 2, 3):
        for s, y in gen_profiles(templates[lab], per[lab], seed, date, site_prefix):
            series.append(s)
            labels.append(y)
    return series, labels


def gen_weekly(
    weekday_class_map: dict[int, int],
    weeks: int,
    seed: int,
    templates: dict[int, ClassTemplate] | None = None,
    site_id: str = "s0001",
    start: dt.date = dt.date(2013, 1, 7),  # a Monday
) -> tuple[list[LoadSeries], list[LoadClass]]:
    """One site's multi-week history; each day drawn from its weekday's class.

    weekday_class_map maps ISO weekday (1=Monday .. 7=Sunday) to a class
    label and must cover all 7 days.
    """
    if sorted(weekday_class_map) != list(range(1, 8)):
        raise ValueError("weekday_class_map must cover weekdays 1..7")
    templates = templates or default_templates()
    series, labels = [], []
    for d in range(weeks * 7):
        day = start + dt.timedelta(days=d)
        label = weekday_class_map[day.isoweekday()]
        rng = np.random.default_rng([seed, d])
        series.append(_draw_series(templates[label], site_id, day, rng))
        labels.append(LoadClass(label))
    return series, labels


# --- CDR emission -----------------------------------------------------------

def cdr_lines_for_series(
    series: LoadSeries, rng: np.random.Generator
) -> list[tuple[float, str]]:
    """(epoch, csv line) pairs realizing the exact distinct-user counts."""
    midnight = dt.datetime.combine(series.date, dt.time(0), tzinfo=dt.timezone.utc)
    base = midnight.timestamp()
    out = []
    for b, count in enumerate(series.bins):
        for i in range(int(count)):
            user = f"u_{series.site_id}_{series.date.isoformat()}_{b}_{i}"
            ts = base + b * 600 + int(rng.integers(0, 600))
            moment = dt.datetime.fromtimestamp(ts, dt.timezone.utc)
            stamp = moment.strftime("%Y-%m-%dT%H:%M:%SZ")
            out.append((ts, f"{user},{series.site_id},{stamp}"))
    return out


def gen_cdr(
    site_specs: Sequence[tuple[str, ClassTemplate]],
    days: int,
    users_per_site: float | None,
    seed: int,
    start: dt.date = DEFAULT_DATE,
) -> tuple[list[str], list[tuple[LoadSeries, LoadClass]]]:
    """Emit CDR text lines plus the intended per-day load series.

    Ingesting the returned lines reproduces the intended series exactly:
    every bin gets exactly its count of distinct users, one event each.
    users_per_site overrides the template volume when given.
    """
    lines: list[tuple[float, str]] = []
    intended: list[tuple[LoadSeries, LoadClass]] = []
    for si, (site_id, template) in enumerate(site_specs):
        if users_per_site is not None:
            template = ClassTemplate(template.label, template.shape,
                                     template.noise_sigma, float(users_per_site))
        template.validate()
        for d in range(days):
            day = start + dt.timedelta(days=d)
            rng = np.random.default_rng([seed, si, d])
            series = _draw_series(template, site_id, day, rng)
            intended.append((series, LoadClass(template.label)))
            lines.extend(cdr_lines_for_series(series, rng))
    lines.sort(key=lambda pair: (pair[0], pair[1]))
    header = "# fields=user_id,site_id,timestamp format=iso8601"
    return [header] + [text for _, text in lines], intended


# --- template config files ---------------------------------------------------

def load_templates(path) -> dict[int, ClassTemplate]:
    """Read class templates from an INI file.

    Each section [class<label>] may set volume, noise_sigma and shape.
    Shape values: ``constant:<level>``, ``bump:<center>,<width>,<baseline>``
    or ``wrapbump:<center>,<width>,<baseline>`` with the center as a 1-based
    bin number.  Missing keys fall back to the built-in defaults.
    """
    parser = configparser.ConfigParser()
    with open(path, "r", encoding="utf-8") as fh:
        parser.read_file(fh)
    templates = dict(default_templates())
    for label in (1, 2, 3):
        section = f"class{label}"
        if not parser.has_section(section):
            continue
        base = templates[label]
        volume = parser.getfloat(section, "volume", fallback=base.volume)
        sigma = parser.getfloat(section, "noise_sigma", fallback=base.noise_sigma)
        shape = base.shape
        if parser.has_option(section, "shape"):
            shape = _parse_shape(parser.get(section, "shape"))
        t = ClassTemplate(label, shape, sigma, volume)
        t.validate()
        templates[label] = t
    return templates


def _parse_shape(text: str) -> np.ndarray:
    kind, _, args = text.strip().partition(":")
    parts = [float(v) for v in args.split(",")] if args else []
    if kind == "constant":
        (level,) = parts
        return np.full(BINS_PER_DAY, level)
    if kind in ("bump", "wrapbump"):
        center, width, baseline = parts
        return _bump(center - 1.0, width, baseline, wrap=(kind == "wrapbump"))
    raise ValueError(f"unknown shape spec {text!r}")
