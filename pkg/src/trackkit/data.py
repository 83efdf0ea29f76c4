"""Price panels, simple returns and the rolling window plan."""

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DataError,
    EmptyUniverseError,
    InfeasiblePlanError,
    InsufficientDataError,
    OrderingError,
    ParseError,
)


@dataclass(frozen=True)
class PricePanel:
    dates: tuple
    asset_ids: tuple
    prices: np.ndarray          # T x n, NaN marks a missing cell
    index_prices: np.ndarray    # length T
    index_id: str = "index"

    @property
    def T(self):
        return self.prices.shape[0]

    @property
    def n(self):
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnPanel:
    dates: tuple                # date of the later price in each ratio
    asset_ids: tuple
    returns: np.ndarray
    index_returns: np.ndarray

    @property
    def T(self):
        return self.returns.shape[0]


@dataclass(frozen=True)
class RollingPlan:
    in_len: int
    out_len: int
    step: int
    windows: tuple              # (train_start, train_end, test_start, test_end), end exclusive

    def __len__(self):
        return len(self.windows)


def _cell(text, row, col):
    text = text.strip()
    if text == "" or text.lower() in ("na", "nan", "null"):
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"cannot parse {text!r} at row {row}, column {col!r}", row=row, column=col) from None


def load_prices(path, index_col=None):
    """Read a ``date,<tickers...>,<index>`` CSV into a :class:`PricePanel`.

    The index column defaults to the last column.  Rows are sorted by date
    (ISO dates sort lexically); a repeated date raises :class:`OrderingError`.
    Empty or ``NA`` cells become NaN and are left for
    :func:`filter_complete_assets`; the index itself must be complete.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3:
        raise DataError(f"{path}: need a date column, at least one asset and an index column")
    if index_col is None:
        index_col = header[-1]
    if index_col not in header[1:]:
        raise DataError(f"{path}: index column {index_col!r} not in header")
    j_index = header.index(index_col)
    asset_cols = [j for j in range(1, len(header)) if j != j_index]

    dates, values = [], []
    for r, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"row {r} has {len(row)} fields, header has {len(header)}", row=r)
        dates.append(row[0].strip())
        values.append([_cell(row[j], r, header[j]) for j in range(1, len(header))])
    if not dates:
        raise InsufficientDataError(f"{path}: no data rows")
    if len(set(dates)) != len(dates):
        seen, dup = set(), None
        for d in dates:
            if d in seen:
                dup = d
                break
            seen.add(d)
        raise OrderingError(f"date {dup!r} appears more than once")

    order = sorted(range(len(dates)), key=lambda i: dates[i])
    data = np.array(values, dtype=float)[order]
    dates = tuple(dates[i] for i in order)
    index_prices = data[:, j_index - 1]
    if np.any(~np.isfinite(index_prices)) or np.any(index_prices <= 0):
        raise DataError(f"index column {index_col!r} has missing or non-positive prices")
    prices = data[:, [j - 1 for j in asset_cols]]
    return PricePanel(dates, tuple(header[j] for j in asset_cols), prices, index_prices, index_col)


def filter_complete_assets(panel):
    """Keep only assets with a complete, strictly positive price history."""
    p = panel.prices
    with np.errstate(invalid="ignore"):
        ok = np.all(np.isfinite(p) & (p > 0), axis=0)
    if not ok.any():
        raise EmptyUniverseError("no asset has a complete price history")
    keep = np.flatnonzero(ok)
    return replace(panel, asset_ids=tuple(panel.asset_ids[j] for j in keep), prices=p[:, keep].copy())


def compute_returns(panel):
    """Simple returns ``p[t+1]/p[t] - 1`` for assets and index."""
    if panel.T < 2:
        raise InsufficientDataError("need at least two price rows to form a return")
    p, J = panel.prices, panel.index_prices
    return ReturnPanel(tuple(panel.dates[1:]), tuple(panel.asset_ids), p[1:] / p[:-1] - 1.0, J[1:] / J[:-1] - 1.0)


def make_windows(T_returns, in_len=504, out_len=63, step=63):
    """Greedy rolling plan; a window is kept only if its whole test range fits."""
    if min(in_len, out_len) < 1 or step < 1:
        raise InfeasiblePlanError("window lengths and step must be positive")
    if in_len + out_len > T_returns:
        raise InfeasiblePlanError(f"in_len + out_len = {in_len + out_len} exceeds {T_returns} return rows")
    windows = []
    start = 0
    while start + in_len + out_len <= T_returns:
        windows.append((start, start + in_len, start + in_len, start + in_len + out_len))
        start += step
    return RollingPlan(in_len, out_len, step, tuple(windows))
