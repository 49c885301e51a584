"""Return-series ingestion, rolling windows, and reference-state augmentation.

Input files are monthly panels keyed by YYYYMM with returns in percent:

* the Fama-French 49-industry file (text or CSV layout, value-weighted
  monthly block, -99.99/-999 missing sentinels),
* the Fama-French factors file (Mkt-RF, SMB, HML, RF columns), from which
  the market benchmark is reconstructed as (Mkt-RF) + RF,
* generic two-column CSVs for a benchmark or T-bill series.

Windows slice the aligned panel into overlapping estimation periods with
equal state probabilities, put states in canonical (benchmark-sorted)
order, and, when the chosen reference return is not on the benchmark grid,
add one zero-probability state at the reference so downstream checks and
models can treat the reference as an observed benchmark return.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import DiscreteReturnDistribution, DistributionError
from .milp.model import AssetPanel

MISSING_SENTINELS = (-99.99, -999.0)

_YYYYMM_RE = re.compile(r"^\d{6}$")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def _month_index(yyyymm: int) -> int:
    year, month = divmod(int(yyyymm), 100)
    if not 1 <= month <= 12:
        raise DataError(f"bad month stamp {yyyymm}")
    return year * 12 + (month - 1)


def add_months(yyyymm: int, k: int) -> int:
    idx = _month_index(yyyymm) + k
    year, month = divmod(idx, 12)
    return year * 100 + month + 1


@dataclass(frozen=True)
class ReturnSeries:
    """A contiguous monthly return series; NaN marks a recorded gap."""

    dates: np.ndarray  # YYYYMM ints
    values: np.ndarray  # percent returns, NaN for gaps
    label: str = ""

    def __post_init__(self):
        d = np.asarray(self.dates, dtype=int)
        v = np.asarray(self.values, dtype=float)
        if d.size != v.size:
            raise DataError(f"{self.label or 'series'}: {d.size} dates vs {v.size} values")
        if d.size == 0:
            raise DataError(f"{self.label or 'series'}: empty series")
        idx = np.array([_month_index(x) for x in d])
        if np.any(np.diff(idx) != 1):
            raise DataError(f"{self.label or 'series'}: dates must be contiguous months")
        d = d.copy(); d.flags.writeable = False
        v = v.copy(); v.flags.writeable = False
        object.__setattr__(self, "dates", d)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.dates.size

    @property
    def has_gaps(self) -> bool:
        return bool(np.any(np.isnan(self.values)))

    def slice_range(self, start: int, end: int) -> "ReturnSeries":
        """Inclusive YYYYMM range slice."""
        mask = (self.dates >= start) & (self.dates <= end)
        if not mask.any():
            raise DataError(f"{self.label}: no data in [{start}, {end}]")
        return ReturnSeries(self.dates[mask], self.values[mask], self.label)


def _tokenize(line: str) -> list[str]:
    if "," in line:
        return [t.strip() for t in line.split(",")]
    return line.split()


def _looks_like_names(tokens: list[str]) -> bool:
    words = [t for t in tokens if t]
    if not words:
        return False
    numeric = sum(1 for t in words if re.fullmatch(r"-?\d+(\.\d+)?", t))
    return numeric == 0


def _parse_table(
    path, section_markers: tuple[str, ...] | None
) -> tuple[list[str], list[int], np.ndarray]:
    """Scan a Fama-French style file for one monthly YYYYMM table.

    Returns (column names, dates, value matrix rows x columns). When
    ``section_markers`` is given the table is searched after the first line
    containing all markers; otherwise the first header + YYYYMM block wins.
    """
    lines = Path(path).read_text().splitlines()
    start = 0
    if section_markers:
        for i, line in enumerate(lines):
            if all(marker.lower() in line.lower() for marker in section_markers):
                start = i + 1
                break
    names: list[str] | None = None
    dates: list[int] = []
    rows: list[list[float]] = []
    for ln in range(start, len(lines)):
        tokens = _tokenize(lines[ln])
        tokens = [t for t in tokens if t != ""]
        if not tokens:
            if dates:
                break  # blank line ends the block
            continue
        if _YYYYMM_RE.match(tokens[0]):
            if names is None:
                raise DataError(f"{path}: line {ln + 1}: data row before any header")
            try:
                values = [float(t) for t in tokens[1:]]
            except ValueError as exc:
                raise DataError(f"{path}: line {ln + 1}: non-numeric field ({exc})") from exc
            if len(values) != len(names):
                raise DataError(
                    f"{path}: line {ln + 1}: expected {len(names)} fields, got {len(values)}"
                )
            dates.append(int(tokens[0]))
            rows.append(values)
        elif dates:
            break  # next section starts
        elif _looks_like_names(tokens):
            names = [t for t in tokens if t]
    if names is None or not dates:
        raise DataError(f"{path}: no monthly data table found")
    return names, dates, np.asarray(rows, dtype=float)


def parse_ff49(path) -> list[ReturnSeries]:
    """Parse the 49-industry monthly file (value-weighted block only).

    Missing sentinels (-99.99, -999) become NaN gaps; windows that overlap
    them are rejected later rather than imputed.
    """
    try:
        names, dates, matrix = _parse_table(
            path, ("average value weighted returns", "monthly")
        )
    except DataError:
        names, dates, matrix = _parse_table(path, None)
    if len(names) != 49:
        raise DataError(f"{path}: expected 49 industry columns, found {len(names)}")
    for sentinel in MISSING_SENTINELS:
        matrix[matrix == sentinel] = np.nan
    date_arr = np.asarray(dates, dtype=int)
    return [
        ReturnSeries(date_arr, matrix[:, j], names[j].strip()) for j in range(len(names))
    ]


def parse_series(path, column: int = 1, label: str | None = None) -> ReturnSeries:
    """Parse a generic (YYYYMM, value) series; ``column`` picks the value field.

    Header and prose lines are skipped. Duplicate or missing months raise.
    """
    dates: list[int] = []
    values: list[float] = []
    seen: set[int] = set()
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        tokens = [t for t in _tokenize(raw) if t != ""]
        if not tokens or not _YYYYMM_RE.match(tokens[0]):
            if dates:
                break
            continue
        stamp = int(tokens[0])
        if stamp in seen:
            raise DataError(f"{path}: line {ln}: duplicate month {stamp}")
        if len(tokens) <= column:
            raise DataError(f"{path}: line {ln}: missing value column {column}")
        try:
            value = float(tokens[column])
        except ValueError as exc:
            raise DataError(f"{path}: line {ln}: bad value ({exc})") from exc
        seen.add(stamp)
        dates.append(stamp)
        values.append(value)
    if not dates:
        raise DataError(f"{path}: no (YYYYMM, value) rows found")
    try:
        return ReturnSeries(np.asarray(dates), np.asarray(values),
                            label or Path(path).stem)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def parse_ff_factors(path) -> dict[str, ReturnSeries]:
    """Parse the Fama-French factors file into one series per column."""
    names, dates, matrix = _parse_table(path, None)
    date_arr = np.asarray(dates, dtype=int)
    return {
        name.strip(): ReturnSeries(date_arr, matrix[:, j], name.strip())
        for j, name in enumerate(names)
    }


def market_from_factors(factors: dict[str, ReturnSeries]) -> ReturnSeries:
    """Reconstruct the market benchmark as (Mkt-RF) + RF."""
    try:
        mkt_rf = factors["Mkt-RF"]
        rf = factors["RF"]
    except KeyError as exc:
        raise DataError(f"factors file lacks column {exc}") from exc
    if not np.array_equal(mkt_rf.dates, rf.dates):
        raise DataError("Mkt-RF and RF columns cover different months")
    return ReturnSeries(mkt_rf.dates, mkt_rf.values + rf.values, "Mkt")


def align(series: list[ReturnSeries]) -> list[ReturnSeries]:
    """Slice all series to their common contiguous date range."""
    start = max(int(s.dates[0]) for s in series)
    end = min(int(s.dates[-1]) for s in series)
    if _month_index(start) > _month_index(end):
        raise DataError("series have no overlapping months")
    return [s.slice_range(start, end) for s in series]


@dataclass(frozen=True)
class EstimationWindow:
    """One estimation period in canonical (benchmark-sorted) state order.

    Before augmentation every state has probability 1/n. ``riskfree`` keeps
    the original month order (only its geometric mean is ever used) and is
    not extended by augmentation.
    """

    start: int
    end: int
    panel: AssetPanel
    benchmark: DiscreteReturnDistribution
    riskfree: np.ndarray
    augmented: bool = False

    def __post_init__(self):
        if np.any(np.diff(self.benchmark.returns) < 0):
            raise DataError("window benchmark must be sorted ascending")
        rf = np.asarray(self.riskfree, dtype=float).copy()
        rf.flags.writeable = False
        object.__setattr__(self, "riskfree", rf)


def window_count(total_months: int, window: int, step: int) -> int:
    if window < 1 or step < 1:
        raise DataError("window and step must be positive")
    if total_months < window:
        raise DataError(f"need at least {window} months, have {total_months}")
    return (total_months - window) // step + 1


def rolling_windows(
    industries: list[ReturnSeries],
    benchmark: ReturnSeries,
    riskfree: ReturnSeries,
    window: int = 36,
    step: int = 12,
) -> tuple[list[EstimationWindow], list[dict]]:
    """Build overlapping estimation windows over pre-aligned series.

    Windows overlapping a missing month in any industry (or the benchmark or
    T-bill series) are not built; they are returned in the second list as
    {start, end, gaps} reports instead of being imputed.
    """
    all_series = industries + [benchmark, riskfree]
    ref_dates = all_series[0].dates
    for s in all_series[1:]:
        if not np.array_equal(s.dates, ref_dates):
            raise DataError(
                f"series {s.label!r} is not aligned with {all_series[0].label!r}; "
                "call align() first"
            )
    total = len(ref_dates)
    count = window_count(total, window, step)
    matrix = np.vstack([s.values for s in industries])  # m x T
    labels = tuple(s.label for s in industries)

    windows: list[EstimationWindow] = []
    rejected: list[dict] = []
    for w in range(count):
        sl = slice(w * step, w * step + window)
        start, end = int(ref_dates[sl][0]), int(ref_dates[sl][-1])
        gaps = [industries[j].label for j in range(len(industries))
                if np.any(np.isnan(matrix[j, sl]))]
        if np.any(np.isnan(benchmark.values[sl])):
            gaps.append(benchmark.label or "benchmark")
        if np.any(np.isnan(riskfree.values[sl])):
            gaps.append(riskfree.label or "riskfree")
        if gaps:
            rejected.append({"start": start, "end": end, "gaps": gaps})
            continue
        bench_slice = benchmark.values[sl]
        order = np.argsort(bench_slice, kind="stable")
        probs = np.full(window, 1.0 / window)
        windows.append(
            EstimationWindow(
                start=start,
                end=end,
                panel=AssetPanel(matrix[:, sl][:, order], labels, probs),
                benchmark=DiscreteReturnDistribution(bench_slice[order], probs),
                riskfree=riskfree.values[sl],
            )
        )
    return windows, rejected


REFERENCE_MODES = ("rf", "median")


def reference_point(window: EstimationWindow, mode: str) -> float:
    """Reference return for a window: T-bill geometric mean or benchmark median.

    The median of an even-length benchmark is the lower middle order
    statistic, which keeps the reference on the observed benchmark grid.
    """
    if mode == "rf":
        gross = 1.0 + window.riskfree / 100.0
        if np.any(gross <= 0):
            raise DataError("T-bill gross returns must be positive")
        n = window.riskfree.size
        return float(100.0 * (np.prod(gross) ** (1.0 / n) - 1.0))
    if mode == "median":
        y = window.benchmark.returns  # already sorted
        return float(y[(y.size - 1) // 2])
    raise ValueError(f"unknown reference mode {mode!r}, expected one of {REFERENCE_MODES}")


def load_panel_csv(path) -> tuple[tuple[str, ...], np.ndarray]:
    """Read an asset panel CSV: header of labels, one row of returns per state.

    A leading date column (empty/'date'-style header over YYYYMM values) is
    dropped. Returns (labels, m x n matrix) with assets as rows.
    """
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise DataError(f"{path}: need a header row and at least one state row")
    header = _tokenize(lines[0])
    first_data = [t for t in _tokenize(lines[1]) if t != ""]
    drop_first = bool(
        header
        and header[0].strip().lower() in ("", "date", "month", "yyyymm")
        and first_data
        and _YYYYMM_RE.match(first_data[0])
    )
    labels = [h for h in (header[1:] if drop_first else header) if h]
    if not labels:
        raise DataError(f"{path}: no asset labels in header")
    rows = []
    for ln, raw in enumerate(lines[1:], start=2):
        tokens = [t for t in _tokenize(raw) if t != ""]
        if drop_first:
            tokens = tokens[1:]
        if len(tokens) != len(labels):
            raise DataError(
                f"{path}: line {ln}: expected {len(labels)} fields, got {len(tokens)}"
            )
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise DataError(f"{path}: line {ln}: bad value ({exc})") from exc
    matrix = np.asarray(rows, dtype=float).T  # assets x states
    return tuple(labels), matrix


def augment_reference_state(window: EstimationWindow, r: float) -> EstimationWindow:
    """Ensure the reference return is on the benchmark grid.

    If it already coincides with a benchmark return the window is returned
    unchanged. Otherwise one probability-zero state is inserted at the
    sorted position with every return (benchmark and all assets) equal to
    the reference, which leaves every distribution functional unchanged.
    """
    if not np.isfinite(r):
        raise DataError(f"reference must be finite, got {r}")
    y = window.benchmark.returns
    if float(np.min(np.abs(y - r))) <= 1e-9:
        return window
    pos = int(np.searchsorted(y, r))
    new_y = np.insert(y, pos, r)
    new_p = np.insert(window.benchmark.probs, pos, 0.0)
    new_x = np.insert(window.panel.returns, pos, r, axis=1)
    return replace(
        window,
        panel=AssetPanel(new_x, window.panel.asset_labels, new_p),
        benchmark=DiscreteReturnDistribution(new_y, new_p),
        augmented=True,
    )
