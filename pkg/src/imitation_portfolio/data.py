"""Load daily price and short-rate CSV files and estimate (r, v, sigma).

Estimators, with daily log-returns ``x`` and 252 trading days per year:

    sigma = std(x, ddof=1) * sqrt(252)
    mu    = mean(x) * 252 + sigma^2 / 2      (arithmetic drift of the GBM)
    r     = mean of the rate observations
    v     = mu - r
"""
from __future__ import annotations

import csv
import datetime as dt
import io
import math
import os
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable

import numpy as np

from .errors import ContractError, DomainError

TRADING_DAYS = 252
MIN_RETURNS = 30


class DataError(ValueError):
    """A data file is malformed; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


@dataclass(frozen=True)
class PriceSeries:
    dates: tuple[dt.date, ...]
    closes: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        closes = np.asarray(self.closes, dtype=float)
        if len(closes) != len(self.dates):
            raise ContractError("dates and closes differ in length")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ContractError("dates must be strictly increasing")
        if not np.all(np.isfinite(closes)) or np.any(closes <= 0):
            raise DomainError("closing prices must be positive and finite")
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def reordered(self) -> bool:
        return any("sorted" in w for w in self.warnings)

    def log_returns(self) -> np.ndarray:
        return np.diff(np.log(self.closes))


@dataclass(frozen=True)
class RateSeries:
    dates: tuple[dt.date, ...]
    rates: np.ndarray


@dataclass(frozen=True)
class EstimatedParams:
    r_hat: float
    v_hat: float
    sigma_hat: float
    mu_hat: float
    sample_span_years: float
    observations_used: int
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _open(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    return source, False


def _read_rows(source, value_col: str) -> list[tuple[int, dt.date, float]]:
    handle, owned = _open(source)
    try:
        text = handle.read()
    finally:
        if owned:
            handle.close()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("file is empty") from None
    names = [h.strip().lower() for h in header]
    missing = {"date", value_col} - set(names)
    if missing:
        raise DataError(f"header lacks column(s) {sorted(missing)}", 1)
    i_date, i_val = names.index("date"), names.index(value_col)
    rows = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) <= max(i_date, i_val):
            raise DataError(f"expected at least {max(i_date, i_val) + 1} fields", line)
        try:
            date = dt.date.fromisoformat(row[i_date].strip())
        except ValueError:
            raise DataError(f"bad ISO date {row[i_date]!r}", line) from None
        try:
            value = float(row[i_val])
        except ValueError:
            raise DataError(f"bad {value_col} value {row[i_val]!r}", line) from None
        if not math.isfinite(value):
            raise DataError(f"non-finite {value_col} value", line)
        rows.append((line, date, value))
    return rows


def _sorted_unique(rows, kind: str):
    warnings = []
    if any(b[1] < a[1] for a, b in zip(rows, rows[1:])):
        warnings.append(f"{kind} rows were out of date order and have been sorted")
        rows = sorted(rows, key=lambda r: r[1])
    for a, b in zip(rows, rows[1:]):
        if a[1] == b[1]:
            raise DataError(f"duplicate date {b[1].isoformat()}", b[0])
    return rows, warnings


def load_prices_csv(source) -> PriceSeries:
    """Read a ``date,close`` CSV (path or text stream).

    Out-of-order rows are sorted and reported in ``warnings``; duplicate dates,
    malformed rows and non-positive prices raise :class:`DataError`.
    """
    rows = _read_rows(source, "close")
    if not rows:
        raise DataError("no price rows")
    for line, date, value in rows:
        if value <= 0:
            raise DataError(f"non-positive close {value} on {date.isoformat()}", line)
    rows, warnings = _sorted_unique(rows, "price")
    return PriceSeries(tuple(r[1] for r in rows), np.array([r[2] for r in rows]), tuple(warnings))


def load_rates_csv(source) -> RateSeries:
    """Read a ``date,rate`` CSV of annualised decimal rates."""
    rows = _read_rows(source, "rate")
    if not rows:
        raise DataError("no rate rows")
    rows, _ = _sorted_unique(rows, "rate")
    return RateSeries(tuple(r[1] for r in rows), np.array([r[2] for r in rows]))


def estimate_market_params(prices: PriceSeries, rates: Iterable[float] | RateSeries) -> EstimatedParams:
    """Annualised (r, v, sigma) from daily closes and short-rate observations.

    Calendar gaps are ignored: consecutive rows are one trading day apart.
    """
    rate_values = np.asarray(rates.rates if isinstance(rates, RateSeries) else list(rates), dtype=float)
    if rate_values.size == 0:
        raise ContractError("at least one rate observation is required")
    returns = prices.log_returns()
    if len(returns) < MIN_RETURNS:
        raise ContractError(f"need at least {MIN_RETURNS} log-returns, got {len(returns)}")
    sigma = float(np.std(returns, ddof=1)) * math.sqrt(TRADING_DAYS)
    if not sigma > 0:
        raise DomainError("estimated volatility is zero; the price series is constant")
    mu = float(np.mean(returns)) * TRADING_DAYS + 0.5 * sigma**2
    r = float(np.mean(rate_values))
    span = (prices.dates[-1] - prices.dates[0]).days / 365.25
    return EstimatedParams(r_hat=r, v_hat=mu - r, sigma_hat=sigma, mu_hat=mu,
                           sample_span_years=span, observations_used=len(returns),
                           warnings=list(prices.warnings))


def drift_standard_error(sigma: float, n_returns: int) -> float:
    """Standard error of the annualised drift estimate: sigma / sqrt(years)."""
    return sigma / math.sqrt(n_returns / TRADING_DAYS)


def write_prices_csv(path, dates: Iterable[dt.date], closes: Iterable[float]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date", "close"])
        for d, c in zip(dates, closes):
            writer.writerow([d.isoformat(), repr(float(c))])


def business_days(start: dt.date, count: int) -> list[dt.date]:
    """``count`` consecutive weekdays starting at ``start`` (holidays ignored)."""
    out, day = [], start
    while len(out) < count:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out
