"""CSV / FRED-MD ingestion and FRED-MD stationarity transforms."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from pdsla.errors import MissingDataUnderFailPolicy, NonPositiveUnderLog, ParseError, UsageError
from pdsla.panel import Panel

NA_POLICIES = ("drop_rows", "fail", "truncate_to_complete_span")
FREDMD_DATE_COLUMN = "sasdate"
# rows lost at the start of the sample by each transform code
TCODE_LAG = {1: 0, 2: 1, 3: 2, 4: 0, 5: 1, 6: 2, 7: 2}


def _longest_complete_run(complete: np.ndarray) -> slice:
    best = (0, 0)
    start = None
    for i, ok in enumerate(list(complete) + [False]):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            if i - start > best[1] - best[0]:
                best = (start, i)
            start = None
    return slice(*best)


def load_csv(
    path,
    date_column: Optional[str] = None,
    fredmd_mode: bool = False,
    na_policy: str = "truncate_to_complete_span",
    columns: Optional[Sequence[str]] = None,
) -> Panel:
    """Read a panel from CSV.

    In ``fredmd_mode`` the first row after the header holds transformation
    codes; they are stored on the panel but not applied. ``na_policy``:

    ``drop_rows``
        drop every row with a missing value (dates of kept rows are preserved)
    ``fail``
        raise :class:`MissingDataUnderFailPolicy` on any missing value
    ``truncate_to_complete_span``
        keep the longest contiguous block of complete rows; this changes T
    """
    if na_policy not in NA_POLICIES:
        raise UsageError(f"na_policy must be one of {NA_POLICIES}")
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise
    except Exception as exc:  # pandas raises several parser error types
        raise ParseError(f"cannot parse {path}: {exc}") from exc
    if frame.shape[1] == 0:
        raise ParseError(f"{path} has no columns")
    if fredmd_mode and date_column is None:
        date_column = FREDMD_DATE_COLUMN if FREDMD_DATE_COLUMN in frame.columns else frame.columns[0]
    tcodes = None
    if fredmd_mode:
        if frame.shape[0] < 1:
            raise ParseError("FRED-MD file lacks the transform-code row")
        code_row = frame.iloc[0]
        frame = frame.iloc[1:].reset_index(drop=True)
    dates = None
    if date_column is not None:
        if date_column not in frame.columns:
            raise ParseError(f"date column {date_column!r} not found")
        dates = frame[date_column].to_numpy()
        frame = frame.drop(columns=[date_column])
    if columns is not None:
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise ParseError(f"columns not found: {missing}")
        frame = frame[list(columns)]
    names = [str(c) for c in frame.columns]
    if fredmd_mode:
        try:
            tcodes = [int(float(code_row[c])) for c in names]
        except ValueError as exc:
            raise ParseError(f"bad transform code row: {exc}") from exc
    blank = frame.apply(lambda col: col.str.strip().isin(["", "NA", "NaN", "nan", "."]))
    try:
        values = frame.mask(blank).astype(float).to_numpy()
    except ValueError as exc:
        raise ParseError(f"non-numeric entry in {path}: {exc}") from exc
    # FRED-MD releases often end with empty lines
    keep = ~np.all(np.isnan(values), axis=1)
    values = values[keep]
    if dates is not None:
        dates = dates[keep]
    complete = ~np.any(np.isnan(values), axis=1)
    if not complete.all():
        if na_policy == "fail":
            bad = int(np.argmin(complete))
            raise MissingDataUnderFailPolicy(f"missing value in data row {bad + 1}")
        if na_policy == "drop_rows":
            rows = complete
        else:
            rows = _longest_complete_run(complete)
        values = values[rows]
        if dates is not None:
            dates = dates[rows]
    if values.shape[0] == 0:
        raise ParseError("no complete rows left after missing-data handling")
    return Panel(values, names, None if dates is None else list(dates), tcodes)


def _transform(x: np.ndarray, code: int, name: str) -> np.ndarray:
    """Transformed series aligned with the input (leading NaNs where undefined)."""
    if code in (4, 5, 6) and np.any(x <= 0):
        raise NonPositiveUnderLog(f"series {name!r} has non-positive values; code {code} needs logs")
    out = np.full(x.shape, np.nan)
    if code == 1:
        out[:] = x
    elif code == 2:
        out[1:] = np.diff(x)
    elif code == 3:
        out[2:] = np.diff(x, 2)
    elif code == 4:
        out[:] = np.log(x)
    elif code == 5:
        out[1:] = np.diff(np.log(x))
    elif code == 6:
        out[2:] = np.diff(np.log(x), 2)
    elif code == 7:
        growth = np.full(x.shape, np.nan)
        growth[1:] = x[1:] / x[:-1] - 1.0
        out[2:] = np.diff(growth[1:])
    else:
        raise UsageError(f"transform code must be in 1..7, got {code}")
    return out


def apply_tcodes(panel: Panel, codes: Optional[Sequence[int]] = None) -> Panel:
    """Column-wise FRED-MD transforms, trimmed to the span where every column is defined.

    Codes: 1 level, 2 first difference, 3 second difference, 4 log,
    5 log difference, 6 second log difference, 7 change in growth rate.
    """
    if codes is None:
        if panel.tcodes is None:
            raise UsageError("no transform codes given and panel carries none")
        codes = panel.tcodes
    codes = [int(c) for c in codes]
    if len(codes) != panel.K:
        raise UsageError(f"{len(codes)} codes for {panel.K} columns")
    for c in codes:
        if c not in TCODE_LAG:
            raise UsageError(f"transform code must be in 1..7, got {c}")
    cols = [_transform(panel.values[:, k], c, panel.names[k]) for k, c in enumerate(codes)]
    lost = max(TCODE_LAG[c] for c in codes)
    values = np.column_stack(cols)[lost:]
    dates = None if panel.dates is None else panel.dates[lost:]
    return Panel(values, panel.names, dates, codes)


def write_fredmd_csv(panel: Panel, path, codes: Optional[Sequence[int]] = None) -> None:
    """Write ``panel`` in FRED-MD layout (``sasdate`` column, transform-code row)."""
    codes = codes if codes is not None else panel.tcodes
    if codes is None:
        raise UsageError("FRED-MD layout needs transform codes")
    dates = panel.dates if panel.dates is not None else [str(t + 1) for t in range(panel.T)]
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join([FREDMD_DATE_COLUMN, *panel.names]) + "\n")
        fh.write(",".join(["Transform:", *[str(int(c)) for c in codes]]) + "\n")
        for t in range(panel.T):
            fh.write(",".join([dates[t], *[repr(float(v)) for v in panel.values[t]]]) + "\n")
