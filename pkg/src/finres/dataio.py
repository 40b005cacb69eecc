"""Loading, validating and transforming dated monthly panels.

Also holds the per-series summaries (moments, ADF unit-root test) used to
describe the inputs before modelling.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import NumericalError, ParseError, ValidationError

_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")
_DAY_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")

# MacKinnon (2010) response-surface coefficients, one unit root:
# crit(T) = tau_inf + b1/T + b2/T**2 + b3/T**3, rows are the 1%, 5%, 10% levels.
_ADF_SURFACE = {
    "c": (
        (-3.43035, -6.5393, -16.786, -79.433),
        (-2.86154, -2.8903, -4.234, -40.040),
        (-2.56677, -1.5384, -2.809, 0.0),
    ),
    "ct": (
        (-3.95877, -9.0531, -28.428, -134.155),
        (-3.41049, -4.3904, -9.036, -45.374),
        (-3.12705, -2.5856, -3.925, -22.380),
    ),
}
ADF_LEVELS = ("1%", "5%", "10%")


def parse_month(label: str) -> tuple[int, int]:
    m = _MONTH_RE.match(label)
    if m is None:
        raise ValueError(f"expected YYYY-MM, got {label!r}")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise ValueError(f"month out of range in {label!r}")
    return year, month


def month_index(label: str) -> int:
    year, month = parse_month(label)
    return year * 12 + (month - 1)


def month_label(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


@dataclass(frozen=True)
class TimeSeriesPanel:
    """Dated T x k matrix of observations with named columns.

    ``dates`` are ``YYYY-MM`` labels at consecutive months.
    """

    dates: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        dates = tuple(str(d) for d in self.dates)
        columns = tuple(str(c) for c in self.columns)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValidationError("panel values must be a 2-D matrix")
        T, k = values.shape
        if T < 2 or k < 1:
            raise ValidationError(f"panel needs T >= 2 and k >= 1, got T={T}, k={k}")
        if len(dates) != T:
            raise ValidationError(f"{len(dates)} dates for {T} rows")
        if len(columns) != k:
            raise ValidationError(f"{len(columns)} column names for {k} columns")
        if len(set(columns)) != k:
            dup = sorted({c for c in columns if columns.count(c) > 1})
            raise ValidationError(f"duplicate column names: {dup}")
        if not np.all(np.isfinite(values)):
            r, c = np.argwhere(~np.isfinite(values))[0]
            raise ValidationError(f"non-finite value at row {r}, column {columns[c]!r}")
        try:
            idx = [month_index(d) for d in dates]
        except ValueError as exc:
            raise ValidationError(str(exc)) from None
        for a, b, d in zip(idx, idx[1:], dates[1:]):
            if b == a:
                raise ValidationError(f"duplicate date {d}")
            if b != a + 1:
                raise ValidationError(f"dates not consecutive months at {d}")
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.columns.index(name)]
        except ValueError:
            raise ValidationError(f"unknown column {name!r}") from None

    def select(self, names: Sequence[str]) -> "TimeSeriesPanel":
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise ValidationError(f"unknown columns {missing}")
        cols = [self.columns.index(n) for n in names]
        return TimeSeriesPanel(self.dates, tuple(names), self.values[:, cols])

    def slice_rows(self, start: int, stop: int | None = None) -> "TimeSeriesPanel":
        return TimeSeriesPanel(self.dates[start:stop], self.columns, self.values[start:stop])

    @classmethod
    def from_columns(cls, dates: Sequence[str], data: dict[str, Sequence[float]]):
        names = list(data)
        return cls(tuple(dates), tuple(names), np.column_stack([np.asarray(data[n], float) for n in names]))


def _read_rows(source) -> tuple[list[list[str]], str | None]:
    if isinstance(source, (str, Path)):
        path = str(source)
        with open(source, newline="", encoding="utf-8") as fh:
            text = fh.read()
    else:
        path = getattr(source, "name", None)
        text = source.read()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows, path


def _parse_float(cell: str, line: int, col: str, path) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", line=line, column=col, path=path) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite cell {cell!r}", line=line, column=col, path=path)
    return v


def load_panel(source, schema: Sequence[str] | None = None) -> TimeSeriesPanel:
    """Read a panel CSV.

    The first header cell must be ``date``. Dates are ``YYYY-MM``; if every
    date is ``YYYY-MM-DD`` the rows are averaged into calendar months with
    :func:`align_monthly`. Lines starting with ``#`` are treated as comments.
    ``schema``, when non-empty, is the exact expected list of series columns.
    """
    rows, path = _read_rows(source)
    if not rows:
        raise ParseError("empty input", path=path)
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "date":
        raise ParseError("first header cell must be 'date'", line=1, path=path)
    columns = header[1:]
    if not columns:
        raise ParseError("no series columns", line=1, path=path)
    seen = set()
    for c in columns:
        if c in seen:
            raise ParseError(f"duplicate column name {c!r}", line=1, column=c, path=path)
        seen.add(c)
    if schema:
        if list(schema) != columns:
            raise ParseError(f"columns {columns} do not match expected {list(schema)}", line=1, path=path)

    dates: list[str] = []
    values: list[list[float]] = []
    # line numbers count only non-comment lines; header is line 1
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, found {len(row)}", line=lineno, path=path)
        dates.append(row[0].strip())
        values.append([_parse_float(cell.strip(), lineno, col, path) for cell, col in zip(row[1:], columns)])

    if all(_DAY_RE.match(d) for d in dates) and dates:
        arr = np.array(values, dtype=float)
        months, first = align_monthly(dates, arr[:, 0])
        cols = [first]
        for j in range(1, arr.shape[1]):
            cols.append(align_monthly(dates, arr[:, j])[1])
        return TimeSeriesPanel(tuple(months), tuple(columns), np.column_stack(cols))

    seen_dates: dict[int, int] = {}
    for i, d in enumerate(dates):
        line = i + 2
        try:
            mi = month_index(d)
        except ValueError as exc:
            raise ParseError(f"unparseable date: {exc}", line=line, column="date", path=path) from None
        if mi in seen_dates:
            raise ParseError(f"duplicate date {d}", line=line, column="date", path=path)
        seen_dates[mi] = line
    try:
        return TimeSeriesPanel(tuple(dates), tuple(columns), np.array(values, dtype=float))
    except ValidationError as exc:
        raise ParseError(str(exc), path=path) from None


def save_panel(panel: TimeSeriesPanel, dest, comment: str | None = None) -> None:
    """Write a panel CSV that :func:`load_panel` reads back bit-identically."""
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", *panel.columns])
    for d, row in zip(panel.dates, panel.values):
        writer.writerow([d, *(repr(float(v)) for v in row)])
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text, encoding="utf-8")
    else:
        dest.write(text)


def log_diff(series: Iterable[float]) -> np.ndarray:
    """First difference of natural logs; output is one element shorter."""
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("log_diff needs a 1-D series of length >= 2")
    bad = np.flatnonzero(~(x > 0))
    if bad.size:
        raise ValidationError(f"log_diff domain error: value {x[bad[0]]!r} at index {bad[0]} is not positive")
    return np.diff(np.log(x))


def align_monthly(dates: Sequence[str], values: Sequence[float]) -> tuple[list[str], np.ndarray]:
    """Average daily/weekly observations within each calendar month.

    Input dates are ``YYYY-MM-DD`` (``YYYY-MM`` is accepted and passes through
    as one observation per month). Every month between the first and last
    observation must contain data.
    """
    vals = np.asarray(values, dtype=float)
    if len(dates) != vals.size:
        raise ValidationError("dates and values differ in length")
    if vals.size == 0:
        raise ValidationError("align_monthly needs at least one observation")
    keys = []
    prev = None
    for i, d in enumerate(dates):
        m = _DAY_RE.match(d)
        if m is not None:
            y, mo, day = int(m.group(1)), int(m.group(2)), int(m.group(3))
            if not (1 <= mo <= 12 and 1 <= day <= 31):
                raise ValidationError(f"invalid date {d!r} at index {i}")
            ordkey = (y, mo, day)
        else:
            try:
                y, mo = parse_month(d)
            except ValueError:
                raise ValidationError(f"invalid date {d!r} at index {i}") from None
            ordkey = (y, mo, 0)
        if prev is not None and ordkey <= prev:
            raise ValidationError(f"dates not strictly increasing at index {i} ({d})")
        prev = ordkey
        keys.append(y * 12 + mo - 1)
    keys_arr = np.asarray(keys)
    first, last = keys_arr[0], keys_arr[-1]
    sums = np.zeros(last - first + 1)
    counts = np.zeros(last - first + 1, dtype=int)
    np.add.at(sums, keys_arr - first, vals)
    np.add.at(counts, keys_arr - first, 1)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValidationError(f"no observations in month {month_label(first + empty[0])}")
    labels = [month_label(i) for i in range(first, last + 1)]
    return labels, sums / counts


@dataclass(frozen=True)
class AdfResult:
    statistic: float
    chosen_lag: int
    critical_values: dict[str, float]
    reject_at: dict[str, bool]
    nobs: int
    include_trend: bool = False


@dataclass(frozen=True)
class DescriptiveStats:
    mean: float
    sd: float
    skewness: float
    kurtosis: float
    adf_stat: float
    adf_reject_1pct: bool
    adf_lag: int | None = None
    adf: AdfResult | None = None


def adf_critical_values(nobs: int, include_trend: bool = False) -> dict[str, float]:
    table = _ADF_SURFACE["ct" if include_trend else "c"]
    out = {}
    for level, (tau, b1, b2, b3) in zip(ADF_LEVELS, table):
        out[level] = tau + b1 / nobs + b2 / nobs**2 + b3 / nobs**3
    return out


def _ols_t_last(y: np.ndarray, X: np.ndarray, col: int) -> tuple[float, float]:
    """Return (t-ratio of column ``col``, residual sum of squares)."""
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise NumericalError("singular ADF regression matrix")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    dof = X.shape[0] - X.shape[1]
    rinv = np.linalg.solve(r, np.eye(r.shape[0]))
    var = rss / dof * float(rinv[col] @ rinv[col])
    return float(beta[col] / math.sqrt(var)) if var > 0 else -math.inf, rss


def _adf_design(y: np.ndarray, lag: int, start: int, include_trend: bool):
    """Regression rows for dy[t], t = start..n-2 (indices into the differences)."""
    dy = np.diff(y)
    rows = np.arange(start, dy.size)
    cols = [np.ones(rows.size)]
    if include_trend:
        cols.append(rows + 1.0)
    cols.append(y[rows])
    for p in range(1, lag + 1):
        cols.append(dy[rows - p])
    return dy[rows], np.column_stack(cols), 2 if include_trend else 1


def adf_test(series: Sequence[float], max_lag: int = 12, include_trend: bool = False) -> AdfResult:
    """Augmented Dickey-Fuller test with intercept (and optional linear trend).

    The augmentation lag is the AIC minimiser over ``0..max_lag`` on a common
    estimation sample; the chosen model is then re-fitted on all usable rows.
    """
    y = np.asarray(series, dtype=float)
    if max_lag < 0:
        raise ValidationError("max_lag must be nonnegative")
    if y.ndim != 1 or y.size <= max_lag + 10:
        raise ValidationError(f"series of length {y.size} too short for max_lag={max_lag}")
    if not np.all(np.isfinite(y)):
        raise ValidationError("series contains non-finite values")

    best_lag, best_aic = 0, math.inf
    for lag in range(max_lag + 1):
        dep, X, _ = _adf_design(y, lag, max_lag, include_trend)
        _, rss = _ols_t_last(dep, X, 0)
        n = dep.size
        aic = n * math.log(rss / n) + 2 * X.shape[1] if rss > 0 else -math.inf
        if aic < best_aic - 1e-12:
            best_aic, best_lag = aic, lag
    dep, X, level_col = _adf_design(y, best_lag, best_lag, include_trend)
    stat, _ = _ols_t_last(dep, X, level_col)
    nobs = dep.size
    crit = adf_critical_values(nobs, include_trend)
    return AdfResult(
        statistic=stat,
        chosen_lag=best_lag,
        critical_values=crit,
        reject_at={lvl: stat < cv for lvl, cv in crit.items()},
        nobs=nobs,
        include_trend=include_trend,
    )


def describe(series: Sequence[float], max_lag: int = 12, include_trend: bool = False) -> DescriptiveStats:
    """Mean, sample sd, skewness, excess kurtosis and ADF statistic.

    Skewness and kurtosis are the plain standardised central moments (divisor
    T, no small-sample correction). The ADF lag cap shrinks for short series;
    when even lag 0 is impossible the ADF fields are NaN.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("describe needs at least two observations")
    mean = float(np.mean(x))
    dev = x - mean
    sd = float(np.sqrt(dev @ dev / (x.size - 1)))
    m2 = float(np.mean(dev**2))
    if m2 > 0 and sd > 0:
        skew = float(np.mean(dev**3) / m2**1.5)
        kurt = float(np.mean(dev**4) / m2**2 - 3.0)
    else:
        skew = kurt = 0.0
    lag_cap = min(max_lag, x.size - 11)
    adf = None
    if lag_cap >= 0 and sd > 0:
        try:
            adf = adf_test(x, lag_cap, include_trend)
        except NumericalError:
            adf = None
    return DescriptiveStats(
        mean=mean,
        sd=sd,
        skewness=skew,
        kurtosis=kurt,
        adf_stat=adf.statistic if adf else math.nan,
        adf_reject_1pct=bool(adf.reject_at["1%"]) if adf else False,
        adf_lag=adf.chosen_lag if adf else None,
        adf=adf,
    )


def standardize(series: Sequence[float]) -> np.ndarray:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValidationError("standardize needs a 1-D series of length >= 2")
    sd = float(np.std(x, ddof=1))
    if not sd > 0:
        raise ValidationError("cannot standardize a zero-variance series")
    return (x - x.mean()) / sd


def adf_stars(result: AdfResult | None) -> str:
    if result is None:
        return ""
    for level, stars in (("1%", "***"), ("5%", "**"), ("10%", "*")):
        if result.reject_at[level]:
            return stars
    return ""


def write_describe_csv(panel: TimeSeriesPanel, dest: TextIO, max_lag: int = 12, include_trend: bool = False,
                       comment: str | None = None) -> list[DescriptiveStats]:
    """Descriptive-statistics table: ``series,mean,sd,skewness,kurtosis,adf,lag``."""
    if comment:
        dest.write(f"# {comment}\n")
    writer = csv.writer(dest, lineterminator="\n")
    writer.writerow(["series", "mean", "sd", "skewness", "kurtosis", "adf", "lag"])
    out = []
    for name in panel.columns:
        st = describe(panel.column(name), max_lag, include_trend)
        out.append(st)
        adf_cell = "" if math.isnan(st.adf_stat) else f"{st.adf_stat:.4f}{adf_stars(st.adf)}"
        writer.writerow([
            name, f"{st.mean:.4f}", f"{st.sd:.4f}", f"{st.skewness:.4f}", f"{st.kurtosis:.4f}",
            adf_cell, "" if st.adf_lag is None else st.adf_lag,
        ])
    return out
