"""Monthly index ingestion: CSV parsing, CPI deflation, returns, period compounding.

Returns (not levels) are the canonical representation downstream. Deflation
divides same-dated nominal and CPI levels (end-of-month convention).
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_DATE_RE = re.compile(r"^(\d{4})-(\d{2})$")


class DataError(ValueError):
    """Malformed or misaligned market data."""


def _parse_month(stamp: str) -> tuple[int, int]:
    m = _DATE_RE.match(stamp.strip())
    if m is None:
        raise DataError(f"bad date stamp {stamp!r}, expected YYYY-MM")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise DataError(f"bad month in {stamp!r}")
    return year, month


def _month_index(stamp: str) -> int:
    year, month = _parse_month(stamp)
    return 12 * year + (month - 1)


def _check_consecutive(dates: list[str]) -> None:
    idx = [_month_index(d) for d in dates]
    for i in range(1, len(idx)):
        if idx[i] == idx[i - 1]:
            raise DataError(f"duplicate month {dates[i]}")
        if idx[i] != idx[i - 1] + 1:
            raise DataError(f"calendar gap between {dates[i - 1]} and {dates[i]}")


@dataclass(frozen=True)
class IndexSeries:
    """Monthly index levels on a gap-free year-month axis."""

    dates: tuple[str, ...]
    levels: np.ndarray
    name: str = "index"

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "dates", tuple(self.dates))
        if levels.ndim != 1 or len(levels) != len(self.dates):
            raise DataError("dates and levels must have equal length")
        if len(levels) < 2:
            raise DataError("index series needs at least 2 observations")
        if not np.all(np.isfinite(levels)) or np.any(levels <= 0):
            raise DataError("non-positive index level")
        _check_consecutive(list(self.dates))

    def __len__(self):
        return len(self.levels)


@dataclass(frozen=True)
class AssetPanel:
    """Gross real monthly returns, shape (months, M), on a shared date axis.

    ``dates[i]`` labels the month in which return ``i`` was earned.
    """

    dates: tuple[str, ...]
    returns: np.ndarray
    asset_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        r = np.asarray(self.returns, dtype=float)
        if r.ndim == 1:
            r = r[:, None]
        object.__setattr__(self, "returns", r)
        object.__setattr__(self, "dates", tuple(self.dates))
        names = tuple(self.asset_names) or tuple(f"asset{i}" for i in range(r.shape[1]))
        object.__setattr__(self, "asset_names", names)
        if r.ndim != 2 or r.shape[0] < 1:
            raise DataError("panel needs a non-empty (months x M) return matrix")
        if len(names) != r.shape[1]:
            raise DataError("asset_names length does not match column count")
        if len(self.dates) != r.shape[0]:
            raise DataError("date axis length does not match return rows")
        if not np.all(np.isfinite(r)) or np.any(r <= 0):
            raise DataError("gross returns must be positive and finite")

    @property
    def n_months(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


def load_index_csv(path) -> IndexSeries:
    """Read a ``date,<name>`` CSV of monthly levels; rows are sorted by date."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) != 2 or header[0].strip().lower() != "date":
            raise DataError(f"{path}: line 1: header must be 'date,<name>'")
        name = header[1].strip()
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}: line {lineno}: expected 2 fields, got {len(row)}")
            try:
                month = _month_index(row[0])
            except DataError as exc:
                raise DataError(f"{path}: line {lineno}: {exc}") from None
            try:
                level = float(row[1])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: bad number {row[1]!r}") from None
            if not np.isfinite(level) or level <= 0:
                raise DataError(f"{path}: line {lineno}: non-positive index level {row[1].strip()}")
            rows.append((month, row[0].strip(), level))
    rows.sort(key=lambda t: t[0])
    for (m0, d0, _), (m1, d1, _) in zip(rows, rows[1:]):
        if m1 == m0:
            raise DataError(f"{path}: duplicate month {d1}")
        if m1 != m0 + 1:
            raise DataError(f"{path}: calendar gap between {d0} and {d1}")
    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 rows")
    return IndexSeries([r[1] for r in rows], [r[2] for r in rows], name=name)


def deflate(nominal: IndexSeries, cpi: IndexSeries) -> IndexSeries:
    if nominal.dates != cpi.dates:
        raise DataError(
            f"date axes differ: {nominal.name} {nominal.dates[0]}..{nominal.dates[-1]} "
            f"vs {cpi.name} {cpi.dates[0]}..{cpi.dates[-1]}"
        )
    return IndexSeries(nominal.dates, nominal.levels / cpi.levels, name=nominal.name)


def to_returns(series: IndexSeries) -> np.ndarray:
    lv = series.levels
    return lv[1:] / lv[:-1]


def build_panel(series_list, names, dates) -> AssetPanel:
    cols = [np.asarray(s, dtype=float) for s in series_list]
    if not cols:
        raise DataError("no return series given")
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise DataError("return series have mismatched lengths")
    if len(dates) != n:
        raise DataError("date axis length does not match returns")
    return AssetPanel(tuple(dates), np.column_stack(cols), tuple(names))


def panel_from_indexes(indexes: list[IndexSeries], cpi: IndexSeries | None = None) -> AssetPanel:
    """Deflate (optional) each index, convert to returns, and align into a panel."""
    base = indexes[0].dates
    for s in indexes[1:]:
        if s.dates != base:
            raise DataError(f"date axes differ between {indexes[0].name} and {s.name}")
    real = [deflate(s, cpi) if cpi is not None else s for s in indexes]
    return build_panel([to_returns(s) for s in real], [s.name for s in real], base[1:])


def compound_to_periods(monthly, months_per_period: int) -> np.ndarray:
    """Multiply consecutive monthly gross returns into per-period gross returns.

    Works on (months, M) or batched (L, months, M) arrays.
    """
    if months_per_period < 1:
        raise DataError("months_per_period must be a positive integer")
    r = np.asarray(monthly, dtype=float)
    squeeze = r.ndim == 1
    if squeeze:
        r = r[:, None]
    n_months = r.shape[-2]
    if n_months % months_per_period:
        raise DataError(
            f"incomplete final period: {n_months} months is not a multiple of {months_per_period}"
        )
    if months_per_period == 1:
        out = r.copy()
    else:
        shape = r.shape[:-2] + (n_months // months_per_period, months_per_period, r.shape[-1])
        out = np.prod(r.reshape(shape), axis=-2)
    return out[:, 0] if squeeze else out


def write_panel_csv(panel: AssetPanel, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *panel.asset_names])
        for d, row in zip(panel.dates, panel.returns):
            w.writerow([d, *(repr(float(v)) for v in row)])


def load_panel_csv(path) -> AssetPanel:
    """Read ``date,<name1>,...`` rows of gross monthly returns."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() not in ("date", "period"):
            raise DataError(f"{path}: line 1: header must be 'date,<name1>,...'")
        names = [h.strip() for h in header[1:]]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: line {lineno}: expected {len(header)} fields")
            try:
                vals = [float(v) for v in row[1:]]
            except ValueError:
                raise DataError(f"{path}: line {lineno}: bad number") from None
            if any(not np.isfinite(v) or v <= 0 for v in vals):
                raise DataError(f"{path}: line {lineno}: gross returns must be positive")
            dates.append(row[0].strip())
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return AssetPanel(tuple(dates), np.array(rows), tuple(names))
