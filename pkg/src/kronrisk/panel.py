"""Rate-curve panel ingestion and return tensorization.

File contract (bit-exact): UTF-8 CSV in long format with the header
``date,country,maturity_years,rate``.  Dates are ISO-8601 YYYY-MM-DD,
rates are decimal percentage points (2.5 means 2.5%), a blank rate field
marks a missing observation, and rows may appear in any order.  Loading
canonicalizes the axes: dates chronological, maturities ascending,
countries alphabetical.  Combinations never mentioned in the file count
as missing too.

Returns tensorize as one (I_m, I_c) sample per consecutive date pair,
entry (i, j) holding the return of maturity i in country j.  Column j of
a sample is country j's domestic curve move; row i is the cross-country
move at maturity i.  First differences are the default return since
rates can be negative; log ratios are available for strictly positive
panels.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from datetime import date

import numpy as np

from .errors import (DegenerateDataError, DataError, MissingDataError,
                     PanelFormatError)
from .tensor import DenseTensor

__all__ = [
    "CurvePanel",
    "ReturnSet",
    "PanelReport",
    "load_curve_panel",
    "panel_to_csv",
    "forward_fill",
    "compute_returns",
    "validate_panel",
    "RETURN_METHODS",
]

_HEADER = ["date", "country", "maturity_years", "rate"]
_ISO_DATE = re.compile(r"\d{4}-\d{2}-\d{2}$")

RETURN_METHODS = ("first_difference", "log_ratio")


def _maturity_label(years: float) -> str:
    return f"{years:g}y"


@dataclass(frozen=True)
class CurvePanel:
    """A (date, maturity, country) grid of rates with a missing mask.

    ``rates`` has shape (T+1, I_m, I_c) in percentage points; entries
    where ``missing`` is True are not observations (stored as NaN by the
    loader).  T+1 dates support T returns.
    """

    timestamps: tuple[date, ...]
    maturities: tuple[float, ...]
    countries: tuple[str, ...]
    rates: np.ndarray
    missing: np.ndarray

    def __post_init__(self) -> None:
        ts, mats, ctys = self.timestamps, self.maturities, self.countries
        if not ts or not mats or not ctys:
            raise ValueError("panel axes must be nonempty")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")
        if any(b <= a for a, b in zip(mats, mats[1:])):
            raise ValueError("maturities must be strictly increasing")
        if len(set(ctys)) != len(ctys):
            raise ValueError("country codes must be unique")
        rates = np.array(self.rates, dtype=np.float64)
        mask = np.array(self.missing, dtype=bool)
        shape = (len(ts), len(mats), len(ctys))
        if rates.shape != shape or mask.shape != shape:
            raise ValueError(f"grid shape {rates.shape}/{mask.shape} does not "
                             f"match axes {shape}")
        if not np.all(np.isfinite(rates[~mask])):
            raise ValueError("observed rates must be finite")
        rates.flags.writeable = False
        mask.flags.writeable = False
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "missing", mask)

    @property
    def maturity_labels(self) -> tuple[str, ...]:
        return tuple(_maturity_label(m) for m in self.maturities)

    def missing_cells(self) -> list[tuple[date, str, float]]:
        """Coordinates of every missing cell as (date, country, maturity)."""
        out = []
        for ti, mi, ci in zip(*np.nonzero(self.missing)):
            out.append((self.timestamps[ti], self.countries[ci], self.maturities[mi]))
        return out


@dataclass(frozen=True)
class ReturnSet:
    """Tensorized returns plus the axis labels they inherit."""

    samples: tuple[DenseTensor, ...]
    method: str
    maturities: tuple[float, ...]
    countries: tuple[str, ...]
    timestamps: tuple[date, ...]  # end date of each return interval

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("a return set needs at least one sample")
        dims = self.samples[0].dims
        if any(s.dims != dims for s in self.samples):
            raise ValueError("all return samples must share dims")
        if dims != (len(self.maturities), len(self.countries)):
            raise ValueError(f"sample dims {dims} do not match axis labels")
        if len(self.timestamps) != len(self.samples):
            raise ValueError("one timestamp per return sample required")

    @property
    def maturity_labels(self) -> tuple[str, ...]:
        return tuple(_maturity_label(m) for m in self.maturities)


@dataclass(frozen=True)
class PanelReport:
    """Validation findings for a panel; empty tuples mean a clean panel."""

    missing_cells: tuple[tuple[date, str, float], ...]
    non_monotone_pairs: tuple[tuple[date, date], ...]
    constant_series: tuple[str, ...]
    filled_cells: int
    date_count: int
    maturity_count: int
    country_count: int
    median_spacing_days: float

    @property
    def issues(self) -> tuple[str, ...]:
        out = []
        for d, c, m in self.missing_cells:
            out.append(f"missing cell at ({d.isoformat()}, {c}, {_maturity_label(m)})")
        for a, b in self.non_monotone_pairs:
            out.append(f"non-monotone timestamps {a.isoformat()} -> {b.isoformat()}")
        for name in self.constant_series:
            out.append(f"constant series {name}")
        return tuple(out)


def _decode(source) -> str:
    if isinstance(source, (str, bytes)) and not isinstance(source, bytes):
        with open(source, "r", encoding="utf-8") as fh:
            return fh.read()
    if hasattr(source, "read"):
        raw = source.read()
        return raw.decode("utf-8") if isinstance(raw, bytes) else raw
    with open(source, "r", encoding="utf-8") as fh:  # PathLike
        return fh.read()


def load_curve_panel(source, fmt: str = "csv") -> CurvePanel:
    """Parse a long-format panel file (path or open stream).

    Cells are validated one by one; duplicates, malformed dates and
    non-numeric rates name the offending line.  Missing combinations end
    up in the mask, never silently filled.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported panel format {fmt!r}")
    text = _decode(source)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise PanelFormatError("empty panel file") from None
    if header != _HEADER:
        raise PanelFormatError(f"malformed header {header!r}, "
                               f"expected {','.join(_HEADER)!r}")
    cells: dict[tuple[date, str, float], float | None] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise PanelFormatError(f"line {lineno}: expected 4 fields, got {len(row)}")
        raw_date, country, raw_mat, raw_rate = row
        if not _ISO_DATE.match(raw_date):
            raise PanelFormatError(f"line {lineno}: date {raw_date!r} is not YYYY-MM-DD")
        try:
            day = date.fromisoformat(raw_date)
        except ValueError as exc:
            raise PanelFormatError(f"line {lineno}: {exc}") from exc
        if not country:
            raise PanelFormatError(f"line {lineno}: empty country code")
        try:
            maturity = float(raw_mat)
        except ValueError:
            raise PanelFormatError(f"line {lineno}: maturity {raw_mat!r} "
                                   f"is not numeric") from None
        if not np.isfinite(maturity) or maturity <= 0:
            raise PanelFormatError(f"line {lineno}: maturity must be a positive "
                                   f"number of years, got {raw_mat!r}")
        if raw_rate == "":
            rate = None
        else:
            try:
                rate = float(raw_rate)
            except ValueError:
                raise PanelFormatError(f"line {lineno}: rate {raw_rate!r} "
                                       f"is not numeric") from None
            if not np.isfinite(rate):
                raise PanelFormatError(f"line {lineno}: rate must be finite")
        key = (day, country, maturity)
        if key in cells:
            raise PanelFormatError(
                f"line {lineno}: duplicate cell ({raw_date}, {country}, {raw_mat})")
        cells[key] = rate
    if not cells:
        raise PanelFormatError("panel file has no data rows")

    timestamps = tuple(sorted({k[0] for k in cells}))
    countries = tuple(sorted({k[1] for k in cells}))
    maturities = tuple(sorted({k[2] for k in cells}))
    t_index = {v: i for i, v in enumerate(timestamps)}
    c_index = {v: i for i, v in enumerate(countries)}
    m_index = {v: i for i, v in enumerate(maturities)}
    shape = (len(timestamps), len(maturities), len(countries))
    rates = np.full(shape, np.nan)
    mask = np.ones(shape, dtype=bool)
    for (day, country, maturity), rate in cells.items():
        if rate is not None:
            idx = (t_index[day], m_index[maturity], c_index[country])
            rates[idx] = rate
            mask[idx] = False
    return CurvePanel(timestamps=timestamps, maturities=maturities,
                      countries=countries, rates=rates, missing=mask)


def panel_to_csv(panel: CurvePanel) -> str:
    """Render a panel in the long-format contract, full precision.

    Rows are emitted date-major, then by country, then maturity, so the
    output is deterministic.  Missing cells become blank rate fields.
    """
    lines = [",".join(_HEADER)]
    for ti, day in enumerate(panel.timestamps):
        for ci, country in enumerate(panel.countries):
            for mi, maturity in enumerate(panel.maturities):
                if panel.missing[ti, mi, ci]:
                    rate = ""
                else:
                    rate = repr(float(panel.rates[ti, mi, ci]))
                lines.append(f"{day.isoformat()},{country},{maturity:g},{rate}")
    return "\n".join(lines) + "\n"


def forward_fill(panel: CurvePanel) -> tuple[CurvePanel, int]:
    """Fill missing cells from the previous date's value of the series.

    Returns the filled panel and the number of cells filled.  Cells with
    no earlier observation stay missing.
    """
    rates = panel.rates.copy()
    mask = panel.missing.copy()
    filled = 0
    for ti in range(1, rates.shape[0]):
        takeable = mask[ti] & ~mask[ti - 1]
        if np.any(takeable):
            rates[ti][takeable] = rates[ti - 1][takeable]
            mask[ti][takeable] = False
            filled += int(np.count_nonzero(takeable))
    return CurvePanel(timestamps=panel.timestamps, maturities=panel.maturities,
                      countries=panel.countries, rates=rates, missing=mask), filled


def compute_returns(panel: CurvePanel, method: str = "first_difference") -> ReturnSet:
    """Turn T+1 dates of rates into T return tensors.

    first_difference subtracts consecutive rates (percentage points);
    log_ratio takes log(rate_next / rate_prev) and requires strictly
    positive rates.  Any missing cell is an error here; apply a fill
    policy first if that is intended.
    """
    if method not in RETURN_METHODS:
        raise ValueError(f"unknown return method {method!r}, "
                         f"expected one of {RETURN_METHODS}")
    if np.any(panel.missing):
        cells = panel.missing_cells()
        shown = ", ".join(f"({d.isoformat()}, {c}, {_maturity_label(m)})"
                          for d, c, m in cells[:5])
        more = "" if len(cells) <= 5 else f" and {len(cells) - 5} more"
        raise MissingDataError(f"panel has {len(cells)} missing cells: "
                               f"{shown}{more}", cells=cells)
    if len(panel.timestamps) < 2:
        raise DegenerateDataError("need at least 2 dates to compute returns")
    if method == "first_difference":
        x = panel.rates[1:] - panel.rates[:-1]
    else:
        if np.any(panel.rates <= 0):
            ti, mi, ci = [int(v[0]) for v in np.nonzero(panel.rates <= 0)]
            raise DataError(
                f"log_ratio requires positive rates; "
                f"rate {panel.rates[ti, mi, ci]} at "
                f"({panel.timestamps[ti].isoformat()}, {panel.countries[ci]}, "
                f"{panel.maturity_labels[mi]})")
        x = np.log(panel.rates[1:] / panel.rates[:-1])
    return ReturnSet(samples=tuple(DenseTensor(s) for s in x),
                     method=method,
                     maturities=panel.maturities,
                     countries=panel.countries,
                     timestamps=panel.timestamps[1:])


def validate_panel(panel: CurvePanel, filled_cells: int = 0) -> PanelReport:
    """Inspect a panel without mutating it.

    Reports missing-cell coordinates, timestamp ordering problems (none
    for loader-produced panels, which sort), constant series, axis sizes
    and the median date spacing.  ``filled_cells`` passes through a fill
    count so reports after a fill policy stay informative.
    """
    non_monotone = tuple((a, b) for a, b in zip(panel.timestamps, panel.timestamps[1:])
                         if b <= a)
    constant = []
    for ci, country in enumerate(panel.countries):
        for mi, label in enumerate(panel.maturity_labels):
            series = panel.rates[:, mi, ci]
            observed = series[~panel.missing[:, mi, ci]]
            if observed.size >= 2 and np.all(observed == observed[0]):
                constant.append(f"{country}/{label}")
    if len(panel.timestamps) > 1:
        gaps = [(b - a).days for a, b in zip(panel.timestamps, panel.timestamps[1:])]
        median_gap = float(np.median(gaps))
    else:
        median_gap = 0.0
    return PanelReport(missing_cells=tuple(panel.missing_cells()),
                       non_monotone_pairs=non_monotone,
                       constant_series=tuple(constant),
                       filled_cells=filled_cells,
                       date_count=len(panel.timestamps),
                       maturity_count=len(panel.maturities),
                       country_count=len(panel.countries),
                       median_spacing_days=median_gap)
