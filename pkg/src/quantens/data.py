"""Forecast/price data model and CSV panel IO.

A probabilistic forecast for one (day, hour) is a curve of 99 percentile
values on the fixed probability grid 0.01 .. 0.99. Panels stack those curves
over days and hours; an expert panel stacks several named panels that share
identical day/hour coverage.

CSV schemas:
    expert forecast: header ``date,hour,q01,q02,...,q99`` (hour 1..24)
    prices:          header ``date,hour,price``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import CoverageError, NonFiniteError, SchemaError

N_QUANTILES = 99
HOURS = 24

#: p_i = i/100 for i = 1..99: equidistant, symmetric about 0.5.
PROB_GRID = np.arange(1, N_QUANTILES + 1) / 100.0
PROB_GRID.setflags(write=False)

QUANTILE_COLUMNS = [f"q{i:02d}" for i in range(1, N_QUANTILES + 1)]
MEDIAN_IDX = 49  # 0-based index of the 50th percentile


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def _check_contiguous_days(days: np.ndarray, source: str) -> None:
    if len(days) == 0:
        raise SchemaError(f"{source}: no rows")
    gaps = np.diff(days.astype("datetime64[D]").astype(np.int64))
    if np.any(gaps < 1):
        raise CoverageError(f"{source}: duplicate days in index")
    if np.any(gaps > 1):
        first = days[np.argmax(gaps > 1)]
        raise CoverageError(f"{source}: gap in dates after {first}")


@dataclass(frozen=True)
class ForecastPanel:
    """Percentile forecasts over contiguous days x 24 hours.

    values[d, h, i] is the (i+1)-th percentile (EUR/MWh) for day d, delivery
    hour h+1. Curves are non-decreasing along the last axis.
    """

    days: np.ndarray  # datetime64[D], shape (n_days,)
    values: np.ndarray  # float64, shape (n_days, 24, 99)
    name: str = ""
    n_rearranged: int = 0  # raw rows that needed sorting at load time

    def __post_init__(self):
        days = np.asarray(self.days, dtype="datetime64[D]")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 3 or values.shape[1:] != (HOURS, N_QUANTILES):
            raise SchemaError(
                f"panel values must have shape (days, {HOURS}, {N_QUANTILES}), "
                f"got {values.shape}"
            )
        if len(days) != values.shape[0]:
            raise CoverageError("day index length does not match values")
        _check_contiguous_days(days, self.name or "panel")
        if not np.isfinite(values).all():
            raise NonFiniteError(f"{self.name or 'panel'}: non-finite forecast value")
        if np.any(np.diff(values, axis=2) < 0):
            raise SchemaError(f"{self.name or 'panel'}: quantile curves not sorted")
        assert values.shape[0] * HOURS * N_QUANTILES == values.size
        object.__setattr__(self, "days", _freeze(days))
        object.__setattr__(self, "values", _freeze(values))

    @property
    def n_days(self) -> int:
        return len(self.days)

    def median(self) -> np.ndarray:
        """Median forecasts, shape (n_days, 24)."""
        return self.values[:, :, MEDIAN_IDX]

    def mean(self) -> np.ndarray:
        """Distribution means (average of the 99 percentiles), shape (n_days, 24)."""
        return self.values.mean(axis=2)

    def restrict(self, days: np.ndarray) -> "ForecastPanel":
        mask = np.isin(self.days, days)
        return ForecastPanel(self.days[mask], self.values[mask], self.name,
                             self.n_rearranged)

    def to_frame(self) -> pd.DataFrame:
        n = self.n_days
        frame = pd.DataFrame(
            self.values.reshape(n * HOURS, N_QUANTILES), columns=QUANTILE_COLUMNS
        )
        frame.insert(0, "hour", np.tile(np.arange(1, HOURS + 1), n))
        frame.insert(0, "date", np.repeat(self.days.astype(str), HOURS))
        return frame

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class ExpertPanel:
    """A pool of named expert panels with identical day/hour coverage.

    values[k, d, h, i] is expert k's (i+1)-th percentile for day d, hour h+1.
    """

    names: tuple[str, ...]
    days: np.ndarray  # datetime64[D]
    values: np.ndarray  # float64, shape (n_experts, n_days, 24, 99)
    n_rearranged: tuple[int, ...] = ()

    def __post_init__(self):
        names = tuple(self.names)
        if len(names) == 0:
            raise CoverageError("expert panel needs at least one expert")
        if len(set(names)) != len(names):
            raise CoverageError(f"duplicate expert names: {sorted(names)}")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        days = np.asarray(self.days, dtype="datetime64[D]")
        if values.shape != (len(names), len(days), HOURS, N_QUANTILES):
            raise CoverageError(
                f"expert values shape {values.shape} does not match "
                f"{len(names)} experts x {len(days)} days"
            )
        rearranged = tuple(self.n_rearranged) or (0,) * len(names)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "days", _freeze(days))
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "n_rearranged", rearranged)

    @classmethod
    def from_panels(cls, panels: Sequence[ForecastPanel]) -> "ExpertPanel":
        if not panels:
            raise CoverageError("expert panel needs at least one expert")
        ref = panels[0]
        for p in panels[1:]:
            if len(p.days) != len(ref.days) or np.any(p.days != ref.days):
                raise CoverageError(
                    f"mismatched coverage: expert '{p.name}' does not share "
                    f"the day index of '{ref.name}'"
                )
        return cls(
            names=tuple(p.name for p in panels),
            days=ref.days,
            values=np.stack([p.values for p in panels]),
            n_rearranged=tuple(p.n_rearranged for p in panels),
        )

    @property
    def n_experts(self) -> int:
        return len(self.names)

    @property
    def n_days(self) -> int:
        return len(self.days)

    def expert(self, name: str) -> ForecastPanel:
        try:
            k = self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown expert '{name}'") from None
        return ForecastPanel(self.days, self.values[k], name,
                             self.n_rearranged[k])

    def subset(self, names: Iterable[str]) -> "ExpertPanel":
        names = list(names)
        idx = []
        for n in names:
            if n not in self.names:
                raise KeyError(f"unknown expert '{n}'")
            idx.append(self.names.index(n))
        return ExpertPanel(
            names=tuple(names),
            days=self.days,
            values=self.values[idx],
            n_rearranged=tuple(self.n_rearranged[i] for i in idx),
        )

    def restrict(self, days: np.ndarray) -> "ExpertPanel":
        mask = np.isin(self.days, days)
        return ExpertPanel(self.names, self.days[mask], self.values[:, mask],
                           self.n_rearranged)


@dataclass(frozen=True)
class PriceSeries:
    """Realized hourly day-ahead prices over contiguous days.

    Negative prices are valid (the day-ahead market allows them).
    """

    days: np.ndarray  # datetime64[D]
    values: np.ndarray  # float64, shape (n_days, 24)

    def __post_init__(self):
        days = np.asarray(self.days, dtype="datetime64[D]")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != HOURS:
            raise SchemaError(f"price values must have shape (days, {HOURS})")
        if len(days) != values.shape[0]:
            raise CoverageError("day index length does not match values")
        _check_contiguous_days(days, "prices")
        if not np.isfinite(values).all():
            raise NonFiniteError("prices: non-finite price")
        assert values.shape[0] * HOURS == values.size
        object.__setattr__(self, "days", _freeze(days))
        object.__setattr__(self, "values", _freeze(values))

    @property
    def n_days(self) -> int:
        return len(self.days)

    def restrict(self, days: np.ndarray) -> "PriceSeries":
        mask = np.isin(self.days, days)
        return PriceSeries(self.days[mask], self.values[mask])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "date": np.repeat(self.days.astype(str), HOURS),
                "hour": np.tile(np.arange(1, HOURS + 1), self.n_days),
                "price": self.values.reshape(-1),
            }
        )

    def to_csv(self, path: str | Path) -> None:
        self.to_frame().to_csv(path, index=False)


@dataclass(frozen=True)
class AlignedData:
    """Expert panel and prices restricted to their common day range."""

    panel: ExpertPanel
    prices: PriceSeries
    dropped_panel_days: int = 0
    dropped_price_days: int = 0


def _read_csv(path: str | Path, expected_cols: list[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: no rows") from None
    if list(df.columns) != expected_cols:
        missing = [c for c in expected_cols if c not in df.columns]
        extra = [c for c in df.columns if c not in expected_cols]
        detail = []
        if missing:
            detail.append("missing column(s): " + ",".join(missing))
        if extra:
            detail.append("unexpected column(s): " + ",".join(extra))
        raise SchemaError(
            f"{path}: malformed header ({'; '.join(detail) or 'wrong order'})"
        )
    if len(df) == 0:
        raise SchemaError(f"{path}: no rows")
    return df


def _parse_date_hour(df: pd.DataFrame, source: str) -> tuple[pd.Series, pd.Series]:
    dates = pd.to_datetime(df["date"], format="ISO8601", errors="coerce")
    if dates.isna().any():
        row = int(dates.isna().idxmax())
        raise SchemaError(f"{source}: malformed row {row + 2}: bad date "
                          f"{df['date'].iloc[row]!r}")
    hours = pd.to_numeric(df["hour"], errors="coerce")
    if hours.isna().any():
        row = int(hours.isna().idxmax())
        raise SchemaError(f"{source}: malformed row {row + 2}: bad hour")
    if (hours != hours.astype(int)).any():
        row = int((hours != hours.astype(int)).idxmax())
        raise SchemaError(f"{source}: malformed row {row + 2}: bad hour")
    hours = hours.astype(int)
    bad = (hours < 1) | (hours > HOURS)
    if bad.any():
        row = int(bad.idxmax())
        raise SchemaError(f"{source}: invalid hour {hours.iloc[row]} "
                          f"(row {row + 2}, must be 1..{HOURS})")
    return dates, hours


def _to_grid(
    df: pd.DataFrame, dates: pd.Series, hours: pd.Series, value_cols: list[str],
    source: str,
) -> tuple[np.ndarray, np.ndarray]:
    """Reorder long rows into a (days, 24, n_cols) grid, checking coverage."""
    days = np.unique(dates.to_numpy().astype("datetime64[D]"))
    _check_contiguous_days(days, source)
    n_days = len(days)
    if len(df) != n_days * HOURS:
        raise CoverageError(
            f"{source}: {len(df)} rows for {n_days} days; expected "
            f"{n_days * HOURS} (missing hour or duplicate row)"
        )
    day_pos = np.searchsorted(days, dates.to_numpy().astype("datetime64[D]"))
    flat = day_pos * HOURS + (hours.to_numpy() - 1)
    order = np.argsort(flat, kind="stable")
    if np.any(np.diff(flat[order]) != 1) or flat[order][0] != 0:
        raise CoverageError(f"{source}: missing hour or duplicate (date, hour) row")

    raw = np.empty((len(df), len(value_cols)))
    for j, col in enumerate(value_cols):
        vals = pd.to_numeric(df[col], errors="coerce")
        raw_bad = vals.isna() & df[col].notna()
        if raw_bad.any():
            row = int(raw_bad.idxmax())
            raise SchemaError(
                f"{source}: malformed row {row + 2}: non-numeric {col}="
                f"{df[col].iloc[row]!r}"
            )
        raw[:, j] = vals.to_numpy(dtype=np.float64)
    if not np.isfinite(raw).all():
        row = int(np.argmax(~np.isfinite(raw).all(axis=1)))
        raise NonFiniteError(f"{source}: non-finite value in row {row + 2}")
    grid = raw[order].reshape(n_days, HOURS, len(value_cols))
    return days, grid


def load_quantile_panel(path: str | Path, name: str = "") -> ForecastPanel:
    """Load one expert forecast CSV (``date,hour,q01..q99``).

    Raw percentile rows that are not non-decreasing (empirical quantiles of
    simulated samples can cross) are sorted ascending; the count of such rows
    is recorded on the returned panel.
    """
    source = name or str(path)
    df = _read_csv(path, ["date", "hour"] + QUANTILE_COLUMNS)
    dates, hours = _parse_date_hour(df, source)
    days, grid = _to_grid(df, dates, hours, QUANTILE_COLUMNS, source)
    needs_sort = np.any(np.diff(grid, axis=2) < 0, axis=2)
    n_rearranged = int(needs_sort.sum())
    if n_rearranged:
        grid = np.sort(grid, axis=2)
    return ForecastPanel(days, grid, name=name or Path(path).stem,
                         n_rearranged=n_rearranged)


def load_expert_panel(paths: Sequence[str | Path],
                      names: Sequence[str] | None = None) -> ExpertPanel:
    """Load and validate a pool of expert forecast CSVs into one panel.

    All files must cover identical (day, hour) sets; coverage mismatches,
    malformed rows, non-finite values and missing files each raise a distinct
    error type.
    """
    paths = list(paths)
    if names is None:
        names = [Path(p).stem for p in paths]
    if len(names) != len(paths):
        raise CoverageError("names and paths must have equal length")
    panels = [load_quantile_panel(p, n) for p, n in zip(paths, names)]
    return ExpertPanel.from_panels(panels)


def load_prices(path: str | Path) -> PriceSeries:
    """Load the realized price CSV (``date,hour,price``)."""
    df = _read_csv(path, ["date", "hour", "price"])
    dates, hours = _parse_date_hour(df, str(path))
    days, grid = _to_grid(df, dates, hours, ["price"], str(path))
    return PriceSeries(days, grid[:, :, 0])


def align(panel: ExpertPanel, prices: PriceSeries) -> AlignedData:
    """Restrict panel and prices to their common days.

    Idempotent: aligning an already-aligned pair drops nothing.
    """
    common = np.intersect1d(panel.days, prices.days)
    if len(common) == 0:
        raise CoverageError("empty intersection between panel and price days")
    return AlignedData(
        panel=panel.restrict(common),
        prices=prices.restrict(common),
        dropped_panel_days=panel.n_days - len(common),
        dropped_price_days=prices.n_days - len(common),
    )
