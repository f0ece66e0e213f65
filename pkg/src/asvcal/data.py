"""Price ingestion, calendar dummies and descriptive statistics.

Input formats:

* price CSV: header ``date,close``, ISO-8601 dates, one row per calendar
  day (the market never closes, so days must be consecutive);
* holiday files: one ISO-8601 date per line, ``#`` comments and blank
  lines allowed, one file per country (JP, CN, DE, US).

Returns are percent log differences, y_t = 100 (ln P_t - ln P_{t-1}),
dated by the later price date.  The design matrix gets one extra trailing
row past the final return date because the volatility transition at the
last observation references the next day's covariates.

Day-of-week dummies cover Sunday, Monday, Tuesday, Thursday, Friday and
Saturday; Wednesday is the omitted baseline absorbed by the constant.
Holiday dummies mark, per country, the day before a holiday, the holiday
itself, and the day after.  Pre/post indicators sit only on non-holiday
days, and (under the default weekend rule) a Saturday or Sunday carries a
holiday-family indicator only when that date itself is a listed holiday.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import _readonly

__all__ = [
    "DataError",
    "PriceSeries",
    "HolidayCalendar",
    "DescriptiveStats",
    "COUNTRIES",
    "WEEKDAY_ORDER",
    "load_price_csv",
    "load_holiday_file",
    "compute_returns",
    "return_dates",
    "extend_dates",
    "build_design_matrix",
    "build_weekday_design",
    "build_constant_design",
    "descriptive_stats",
    "slice_by_weekday",
    "slice_by_holiday_class",
    "write_design_matrix_csv",
]

COUNTRIES = ("JP", "CN", "DE", "US")
HOLIDAY_CLASSES = ("pre", "hol", "post")

# Report order: weeks run Sunday-first.
WEEKDAY_ORDER = ("Sunday", "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday")

# date.weekday(): Monday = 0 .. Sunday = 6.
_WEDNESDAY = 2
_SATURDAY = 5
_SUNDAY = 6
_DUMMY_WEEKDAYS = (
    ("sun", _SUNDAY),
    ("mon", 0),
    ("tue", 1),
    ("thu", 3),
    ("fri", 4),
    ("sat", _SATURDAY),
)


class DataError(ValueError):
    """Raised for malformed input files or inconsistent calendar data."""


@dataclass(frozen=True)
class PriceSeries:
    """Daily closes on strictly consecutive calendar dates."""

    dates: tuple[dt.date, ...]
    prices: np.ndarray

    def __post_init__(self):
        dates = tuple(self.dates)
        prices = _readonly(self.prices)
        if prices.ndim != 1 or len(dates) != prices.size:
            raise DataError("dates and prices must be equal-length vectors")
        if len(dates) < 2:
            raise DataError("need at least two prices to form a return")
        for prev, cur in zip(dates, dates[1:]):
            if (cur - prev).days != 1:
                raise DataError(f"dates must be consecutive days; gap between {prev} and {cur}")
        for d, p in zip(dates, prices):
            if not (p > 0.0 and math.isfinite(p)):
                raise DataError(f"non-positive or non-finite price {p} on {d}")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)


@dataclass(frozen=True)
class HolidayCalendar:
    """Holiday dates of one country."""

    country: str
    holidays: frozenset[dt.date]

    def __post_init__(self):
        if self.country not in COUNTRIES:
            raise DataError(f"unknown country code {self.country!r}; expected one of {COUNTRIES}")
        object.__setattr__(self, "holidays", frozenset(self.holidays))


@dataclass(frozen=True)
class DescriptiveStats:
    obs: int
    mean: float
    sd: float
    min: float
    max: float
    skew: float
    kurt: float

    def __post_init__(self):
        if self.obs < 2:
            raise DataError("descriptive statistics need at least 2 observations")
        if self.sd < 0.0:
            raise DataError("sd must be nonnegative")
        if not self.min <= self.mean <= self.max:
            raise DataError("mean must lie between min and max")


def _parse_date(token: str, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(token.strip())
    except ValueError:
        raise DataError(f"{where}: invalid ISO-8601 date {token.strip()!r}") from None


def load_price_csv(path: str | Path) -> PriceSeries:
    """Read a ``date,close`` CSV into a PriceSeries."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"price file not found: {path}")
    dates: list[dt.date] = []
    prices: list[float] = []
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:2]] != ["date", "close"]:
            raise DataError(f"{path}:1: expected header 'date,close'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise DataError(f"{path}:{lineno}: expected two columns")
            dates.append(_parse_date(row[0], f"{path}:{lineno}"))
            try:
                prices.append(float(row[1]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: invalid price {row[1]!r}") from None
    try:
        return PriceSeries(dates=tuple(dates), prices=np.array(prices))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def load_holiday_file(path: str | Path, country: str) -> HolidayCalendar:
    """Read one-date-per-line holiday list (# comments allowed)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"holiday file not found: {path}")
    holidays = set()
    with path.open() as handle:
        for lineno, line in enumerate(handle, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            holidays.add(_parse_date(text, f"{path}:{lineno}"))
    return HolidayCalendar(country=country, holidays=frozenset(holidays))


def compute_returns(series: PriceSeries) -> np.ndarray:
    """Percent log returns, length len(prices) - 1."""
    log_prices = np.log(series.prices)
    return 100.0 * np.diff(log_prices)


def return_dates(series: PriceSeries) -> tuple[dt.date, ...]:
    """Date of each return: the later of its two price dates."""
    return series.dates[1:]


def extend_dates(dates: tuple[dt.date, ...]) -> tuple[dt.date, ...]:
    """Append the day after the final date (the design needs T+1 rows)."""
    return tuple(dates) + (dates[-1] + dt.timedelta(days=1),)


def _is_weekend(d: dt.date) -> bool:
    return d.weekday() in (_SATURDAY, _SUNDAY)


def _holiday_flags(
    dates: tuple[dt.date, ...],
    calendar: HolidayCalendar,
    apply_weekend_rule: bool,
) -> dict[str, np.ndarray]:
    """Pre / holiday / post indicator vectors for one country.

    Pre and post sit on non-holiday days adjacent to a holiday; with the
    weekend rule active they are additionally restricted to weekdays (a
    weekend date can only carry the holiday indicator itself).
    """
    hol_set = calendar.holidays
    n = len(dates)
    flags = {cls: np.zeros(n) for cls in HOLIDAY_CLASSES}
    one = dt.timedelta(days=1)
    for i, d in enumerate(dates):
        if d in hol_set:
            flags["hol"][i] = 1.0
            continue
        if apply_weekend_rule and _is_weekend(d):
            continue
        if d + one in hol_set:
            flags["pre"][i] = 1.0
        if d - one in hol_set:
            flags["post"][i] = 1.0
    return flags


def build_weekday_design(dates: tuple[dt.date, ...]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Constant plus six day-of-week dummies (Wednesday omitted)."""
    n = len(dates)
    weekdays = np.array([d.weekday() for d in dates])
    columns = [np.ones(n)]
    labels = ["const"]
    for label, code in _DUMMY_WEEKDAYS:
        columns.append((weekdays == code).astype(float))
        labels.append(label)
    return np.column_stack(columns), tuple(labels)


def build_constant_design(n: int) -> tuple[np.ndarray, tuple[str, ...]]:
    return np.ones((n, 1)), ("const",)


def build_design_matrix(
    dates: tuple[dt.date, ...],
    calendars: dict[str, HolidayCalendar],
    apply_weekend_rule: bool = True,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """The 19-column covariate matrix: constant, 6 weekday dummies, then
    pre-holiday, holiday and post-holiday indicators for JP, CN, DE, US.

    ``dates`` must already include the trailing extra day (T+1 rows).
    """
    if set(calendars) != set(COUNTRIES):
        raise DataError(f"calendars must cover exactly {COUNTRIES}, got {sorted(calendars)}")
    for prev, cur in zip(dates, dates[1:]):
        if (cur - prev).days != 1:
            raise DataError(f"dates must be consecutive days; gap between {prev} and {cur}")
    matrix, labels = build_weekday_design(dates)
    columns = [matrix]
    names = list(labels)
    country_flags = {
        country: _holiday_flags(dates, calendars[country], apply_weekend_rule)
        for country in COUNTRIES
    }
    for cls in HOLIDAY_CLASSES:
        for country in COUNTRIES:
            columns.append(country_flags[country][cls][:, None])
            names.append(f"{cls}_{country.lower()}")
    return np.hstack(columns), tuple(names)


def descriptive_stats(values: np.ndarray) -> DescriptiveStats:
    """Sample mean, sd (n-1), extremes, skewness and excess kurtosis.

    Central moments use denominator n; skew = m3 / m2^(3/2) and
    kurt = m4 / m2^2 - 3.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DataError("need a vector of at least 2 values")
    mean = float(x.mean())
    centered = x - mean
    m2 = float(np.mean(centered ** 2))
    m3 = float(np.mean(centered ** 3))
    m4 = float(np.mean(centered ** 4))
    if m2 > 0.0:
        skew = m3 / m2 ** 1.5
        kurt = m4 / m2 ** 2 - 3.0
    else:
        skew = 0.0
        kurt = -3.0
    return DescriptiveStats(
        obs=x.size,
        mean=mean,
        sd=float(x.std(ddof=1)),
        min=float(x.min()),
        max=float(x.max()),
        skew=skew,
        kurt=kurt,
    )


def slice_by_weekday(
    returns: np.ndarray,
    dates: tuple[dt.date, ...],
) -> dict[str, np.ndarray]:
    """Partition returns by the weekday of their date, Sunday first."""
    returns = np.asarray(returns, dtype=float)
    if returns.size != len(dates):
        raise DataError("returns and dates must have equal length")
    weekdays = np.array([d.weekday() for d in dates])
    name_to_code = {name: (WEEKDAY_ORDER.index(name) + 6) % 7 for name in WEEKDAY_ORDER}
    return {name: returns[weekdays == code] for name, code in name_to_code.items()}


def slice_by_holiday_class(
    returns: np.ndarray,
    dates: tuple[dt.date, ...],
    calendars: dict[str, HolidayCalendar],
    apply_weekend_rule: bool = True,
) -> dict[tuple[str, str], np.ndarray]:
    """Group returns into (class, country) buckets matching the design
    matrix indicators; keys like ("hol", "JP")."""
    returns = np.asarray(returns, dtype=float)
    if returns.size != len(dates):
        raise DataError("returns and dates must have equal length")
    if set(calendars) != set(COUNTRIES):
        raise DataError(f"calendars must cover exactly {COUNTRIES}, got {sorted(calendars)}")
    out: dict[tuple[str, str], np.ndarray] = {}
    for country in COUNTRIES:
        flags = _holiday_flags(tuple(dates), calendars[country], apply_weekend_rule)
        for cls in HOLIDAY_CLASSES:
            out[(cls, country)] = returns[flags[cls] == 1.0]
    return out


def write_design_matrix_csv(
    path: str | Path,
    dates: tuple[dt.date, ...],
    matrix: np.ndarray,
    labels: tuple[str, ...],
) -> None:
    """Audit export: one labeled row per date."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(("date",) + tuple(labels))
        for d, row in zip(dates, matrix):
            writer.writerow([d.isoformat()] + [f"{v:.17g}" for v in row])
