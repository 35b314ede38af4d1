"""CDR parsing and per-station daily load profiles.

A day is split into 144 ten-minute bins.  The load of a bin is the number
of DISTINCT users with at least one event at the station inside the bin;
duplicate events of one user inside a bin count once.  Day boundaries are
taken in a configurable timezone (UTC by default).
"""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence
from zoneinfo import ZoneInfo

import numpy as np

BINS_PER_DAY = 144
BIN_MINUTES = 10
HOURS_PER_DAY = 24
TEN_MIN = "10min"
HOURLY = "hourly"

ISO8601 = "iso8601"
EPOCH = "epoch"
AUTO = "auto"


@dataclass(frozen=True)
class CdrRecord:
    user_id: str
    site_id: str
    timestamp: float  # seconds since epoch, UTC


@dataclass(frozen=True)
class CdrFormat:
    """Input dialect: field delimiter and timestamp encoding."""

    delimiter: str = ","
    timestamp_kind: str = AUTO  # iso8601 | epoch | auto


@dataclass
class ParseIssue:
    lineno: int
    reason: str
    line: str


@dataclass
class ParseReport:
    total_lines: int = 0
    parsed: int = 0
    issues: list[ParseIssue] = field(default_factory=list)

    @property
    def error_fraction(self) -> float:
        considered = self.parsed + len(self.issues)
        return len(self.issues) / considered if considered else 0.0


class ParseThresholdError(ValueError):
    """Too many malformed lines for the configured tolerance."""

    def __init__(self, report: ParseReport, threshold: float):
        super().__init__(
            f"{len(report.issues)} malformed lines out of "
            f"{report.parsed + len(report.issues)} exceed the "
            f"{threshold:.1%} error threshold"
        )
        self.report = report


class LoadSeries:
    """Distinct-user counts for one station and one calendar day."""

    __slots__ = ("site_id", "date", "bins")

    def __init__(self, site_id: str, date: dt.date, bins):
        bins = np.asarray(bins, dtype=np.int64)
        if bins.shape != (BINS_PER_DAY,):
            raise ValueError(f"expected {BINS_PER_DAY} bins, got {bins.shape}")
        if (bins < 0).any():
            raise ValueError("bin counts must be non-negative")
        if not site_id:
            raise ValueError("site_id must be non-empty")
        self.site_id = site_id
        self.date = date
        self.bins = bins
        self.bins.flags.writeable = False

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LoadSeries)
            and self.site_id == other.site_id
            and self.date == other.date
            and np.array_equal(self.bins, other.bins)
        )

    def __repr__(self) -> str:
        return f"LoadSeries({self.site_id!r}, {self.date}, total={int(self.bins.sum())})"


@dataclass
class Profile:
    """Normalized daily load shape, either 144 ten-minute or 24 hourly values.

    degenerate is set when the underlying counts were constant (max == min),
    in which case all values are 0 and classifiers route the profile to the
    always-loaded class.
    """

    site_id: str
    date: dt.date
    values: np.ndarray
    granularity: str
    degenerate: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        expected = BINS_PER_DAY if self.granularity == TEN_MIN else HOURS_PER_DAY
        if self.granularity not in (TEN_MIN, HOURLY):
            raise ValueError(f"unknown granularity {self.granularity!r}")
        if self.values.shape != (expected,):
            raise ValueError(f"expected {expected} values, got {self.values.shape}")
        if self.values.min() < 0 or self.values.max() > 1:
            raise ValueError("profile values must lie in [0, 1]")


def _parse_timestamp(text: str, kind: str) -> float:
    if kind == EPOCH:
        return float(text)
    # ISO-8601; a trailing Z means UTC, naive stamps are taken as UTC
    s = text.strip()
    if s.endswith("Z") or s.endswith("z"):
        s = s[:-1] + "+00:00"
    moment = dt.datetime.fromisoformat(s)
    if moment.tzinfo is None:
        moment = moment.replace(tzinfo=dt.timezone.utc)
    return moment.timestamp()


def _looks_like_epoch(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _detect_kind(fields: Sequence[str]) -> str:
    return EPOCH if _looks_like_epoch(fields[2]) else ISO8601


def parse_cdr(
    lines: Iterable[str] | IO[str],
    fmt: CdrFormat | None = None,
    error_threshold: float = 0.01,
) -> tuple[list[CdrRecord], ParseReport]:
    """Parse delimited CDR text into records, in input order.

    Lines starting with '#' are header comments; a `format=iso8601` or
    `format=epoch` token in a header pins the timestamp encoding, otherwise
    it is sniffed from the first well-formed data line.  Each record needs
    at least user_id, site_id and timestamp; extra fields (e.g. tower
    coordinates) are ignored.  Malformed lines are collected in the report;
    if their fraction exceeds error_threshold a ParseThresholdError is
    raised.
    """
    fmt = fmt or CdrFormat()
    kind = fmt.timestamp_kind
    records: list[CdrRecord] = []
    report = ParseReport()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        report.total_lines += 1
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            for token in stripped[1:].replace(",", " ").split():
                if token.startswith("format="):
                    declared = token.split("=", 1)[1].lower()
                    if declared in (ISO8601, EPOCH):
                        kind = declared
            continue
        fields = [f.strip() for f in stripped.split(fmt.delimiter)]
        if len(fields) < 3:
            report.issues.append(ParseIssue(lineno, "expected at least 3 fields", line))
            continue
        user_id, site_id = fields[0], fields[1]
        if not user_id or not site_id:
            report.issues.append(ParseIssue(lineno, "empty user_id or site_id", line))
            continue
        if kind == AUTO:
            kind = _detect_kind(fields)
        try:
            ts = _parse_timestamp(fields[2], kind)
        except (ValueError, OverflowError):
            report.issues.append(ParseIssue(lineno, f"bad {kind} timestamp", line))
            continue
        records.append(CdrRecord(user_id, site_id, ts))
        report.parsed += 1
    if report.error_fraction > error_threshold:
        raise ParseThresholdError(report, error_threshold)
    return records, report


def bin_of(moment: dt.datetime) -> int:
    """0-based ten-minute bin index of a wall-clock moment."""
    return (moment.hour * 60 + moment.minute) // BIN_MINUTES


def build_load_series(
    records: Iterable[CdrRecord],
    tz: str = "UTC",
) -> list[LoadSeries]:
    """Fold records into one LoadSeries per (site, day), distinct users per bin.

    The result is sorted by (site_id, date) so the output is deterministic
    for any input order.
    """
    zone = ZoneInfo(tz)
    seen: dict[tuple[str, dt.date], list[set[str]]] = {}
    for rec in records:
        local = dt.datetime.fromtimestamp(rec.timestamp, zone)
        key = (rec.site_id, local.date())
        per_bin = seen.get(key)
        if per_bin is None:
            per_bin = [set() for _ in range(BINS_PER_DAY)]
            seen[key] = per_bin
        per_bin[bin_of(local)].add(rec.user_id)
    out = []
    for (site, day) in sorted(seen):
        counts = np.fromiter(
            (len(s) for s in seen[(site, day)]), dtype=np.int64, count=BINS_PER_DAY
        )
        out.append(LoadSeries(site, day, counts))
    return out


def _minmax(values: np.ndarray) -> tuple[np.ndarray, bool]:
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return np.zeros(len(values)), True
    return (values - lo) / (hi - lo), False


def normalize(series: LoadSeries) -> Profile:
    """Min-max scale the 144 bins to [0, 1]; constant days come back degenerate."""
    values, degenerate = _minmax(series.bins.astype(float))
    return Profile(series.site_id, series.date, values, TEN_MIN, degenerate)


def aggregate_hourly(series: LoadSeries) -> Profile:
    """Sum each run of 6 bins into an hourly count, then min-max scale."""
    sums = series.bins.reshape(HOURS_PER_DAY, 6).sum(axis=1).astype(float)
    values, degenerate = _minmax(sums)
    return Profile(series.site_id, series.date, values, HOURLY, degenerate)


def to_profiles(series_list: Sequence[LoadSeries], granularity: str = TEN_MIN) -> list[Profile]:
    if granularity == TEN_MIN:
        return [normalize(s) for s in series_list]
    if granularity == HOURLY:
        return [aggregate_hourly(s) for s in series_list]
    raise ValueError(f"unknown granularity {granularity!r}")


def profile_matrix(profiles: Sequence[Profile]) -> np.ndarray:
    """Stack profile values into an (n, d) training matrix."""
    return np.vstack([p.values for p in profiles])


# --- delimited text I/O ----------------------------------------------------

def write_load_series(path, series_list: Sequence[LoadSeries]) -> None:
    header = "site_id,date," + ",".join(f"b{i}" for i in range(BINS_PER_DAY))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for s in series_list:
            fh.write(f"{s.site_id},{s.date.isoformat()},")
            fh.write(",".join(str(int(v)) for v in s.bins))
            fh.write("\n")


def read_load_series(path) -> list[LoadSeries]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("site_id,date,"):
            raise ValueError(f"{path}: not a load-series file")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2 + BINS_PER_DAY:
                raise ValueError(f"{path}:{lineno}: expected {2 + BINS_PER_DAY} fields")
            out.append(
                LoadSeries(
                    parts[0],
                    dt.date.fromisoformat(parts[1]),
                    [int(v) for v in parts[2:]],
                )
            )
    return out


def write_error_report(path, report: ParseReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {len(report.issues)} malformed of {report.total_lines} lines\n")
        for issue in report.issues:
            fh.write(f"{issue.lineno}\t{issue.reason}\t{issue.line}\n")


def iter_station_days(series_list: Sequence[LoadSeries]) -> Iterator[tuple[str, dt.date]]:
    for s in series_list:
        yield s.site_id, s.date
