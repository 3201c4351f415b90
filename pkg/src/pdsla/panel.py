"""The ``Panel`` container shared by every other module."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from pdsla.errors import DimensionMismatch, UnknownVariable


@dataclass(frozen=True)
class Panel:
    """T x K matrix of observations with variable names.

    ``tcodes`` holds FRED-MD transformation codes when the panel was read from a
    file in that layout; they are informational and never applied implicitly.
    """

    values: np.ndarray
    names: tuple
    dates: Optional[tuple] = None
    tcodes: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionMismatch("panel values must be 2-d")
        names = tuple(str(n) for n in self.names)
        if len(names) != values.shape[1]:
            raise DimensionMismatch(f"{len(names)} names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DimensionMismatch("variable names must be unique")
        if not np.all(np.isfinite(values)):
            raise DimensionMismatch("panel contains missing or non-finite values")
        if self.dates is not None and len(self.dates) != values.shape[0]:
            raise DimensionMismatch("dates length does not match number of rows")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)
        if self.dates is not None:
            object.__setattr__(self, "dates", tuple(str(d) for d in self.dates))
        if self.tcodes is not None:
            object.__setattr__(self, "tcodes", tuple(int(c) for c in self.tcodes))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def index(self, name) -> int:
        """Column index of ``name``; integers are accepted as positional ids."""
        if isinstance(name, (int, np.integer)) and not isinstance(name, bool):
            if 0 <= name < self.K:
                return int(name)
            raise UnknownVariable(name, self.names)
        try:
            return self.names.index(str(name))
        except ValueError:
            raise UnknownVariable(name, self.names) from None

    def column(self, name) -> np.ndarray:
        return self.values[:, self.index(name)]

    def select(self, names: Sequence) -> "Panel":
        idx = [self.index(n) for n in names]
        tcodes = None if self.tcodes is None else tuple(self.tcodes[i] for i in idx)
        return Panel(self.values[:, idx], [self.names[i] for i in idx], self.dates, tcodes)

    def to_csv(self, path, date_column: str = "date") -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = ([date_column] if self.dates is not None else []) + list(self.names)
            writer.writerow(header)
            for t in range(self.T):
                row = [repr(float(v)) for v in self.values[t]]
                if self.dates is not None:
                    row.insert(0, self.dates[t])
                writer.writerow(row)
