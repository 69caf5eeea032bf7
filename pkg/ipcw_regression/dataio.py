"""
Reading datasets from CSV and writing results as CSV or JSON.

Dataset CSV columns: ``time``, ``status`` (0 = censored, j >= 1 = cause j),
covariates ``x1`` .. ``xp`` and optionally an integer stratum column ``z``.
Other columns are carried along and can be used as a plain response.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import IO, TYPE_CHECKING, Any

import numpy as np

from .datastructures import Dataset, OutcomeSpec, Stratifier
from .exceptions import DatasetFormatError

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence
    from pathlib import Path

COVARIATE = re.compile(r"^x(\d+)$")
INTERCEPT = "intercept"
STRATUM = "z"
PSEUDO_COLUMN = "pseudo_y"


def format_number(value: float | None) -> str:
    """17 significant digits, enough to read back the same double."""
    if value is None:
        return ""
    return f"{value:.17g}"


@dataclass(frozen=True, eq=False)
class CsvTable:
    """
    A parsed dataset file. ``rows`` keep the original cell text so it can be
    written back unchanged; ``line_numbers`` are the file lines of the rows
    (the header is line 1).
    """

    fieldnames: tuple[str, ...]
    rows: tuple[dict[str, str], ...]
    line_numbers: tuple[int, ...]
    times: np.ndarray
    statuses: np.ndarray
    covariate_names: tuple[str, ...]
    covariates: np.ndarray

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in self.fieldnames:
            msg = f"no such column, available: {', '.join(self.fieldnames)}"
            raise DatasetFormatError(msg, column=name)
        return np.array(
            [
                _number(row[name], line, name)
                for row, line in zip(self.rows, self.line_numbers, strict=True)
            ]
        )

    def design_names(self, intercept: bool = True) -> tuple[str, ...]:
        return ((INTERCEPT,) if intercept else ()) + self.covariate_names

    def design(self, intercept: bool = True) -> np.ndarray:
        if not intercept and not self.covariate_names:
            msg = "no covariate columns (x1, x2, ...) and no intercept"
            raise DatasetFormatError(msg)
        if intercept:
            return np.column_stack([np.ones(len(self)), self.covariates])
        return self.covariates

    def design_index(self, name: str, intercept: bool = True) -> int:
        names = self.design_names(intercept)
        if name not in names:
            msg = f"not a covariate, available: {', '.join(self.covariate_names)}"
            raise DatasetFormatError(msg, column=name)
        return names.index(name)

    def strata(
        self,
        intercept: bool = True,
        strata_col: str | None = None,
        strata_k: int | None = None,
        strata_on: str | None = None,
        strata_factors: Sequence[str] | None = None,
    ) -> tuple[np.ndarray, int]:
        """
        Stratum labels and the number of strata. At most one of ``strata_col``,
        ``strata_k`` and ``strata_factors`` may be given.
        """
        if strata_col is not None:
            labels = self.column(strata_col)
            for label, line in zip(labels, self.line_numbers, strict=True):
                if label < 0 or label != int(label):
                    msg = f"stratum must be a non-negative integer, got {label:g}"
                    raise DatasetFormatError(msg, row=line, column=strata_col)
            labels = labels.astype(int)
            return labels, int(labels.max()) + 1

        design = self.design(intercept)
        if strata_k is not None:
            stratifier = Stratifier.quantize(
                self.design_index(strata_on, intercept), strata_k
            )
        elif strata_factors:
            stratifier = Stratifier.factor_subset(
                [self.design_index(name, intercept) for name in strata_factors]
            )
        elif STRATUM in self.fieldnames:
            return self.strata(intercept, strata_col=STRATUM)
        else:
            stratifier = Stratifier.trivial()
        return stratifier.assign(design), stratifier.stratum_count

    def to_dataset(
        self,
        outcome: OutcomeSpec,
        intercept: bool = True,
        **stratification: Any,
    ) -> Dataset:
        labels, count = self.strata(intercept, **stratification)
        return Dataset.from_arrays(
            self.times,
            self.statuses,
            self.design(intercept),
            outcome,
            strata=labels,
            stratum_count=count,
        )


def _number(value: str | None, line: int, column: str) -> float:
    if value is None or not value.strip():
        msg = "missing value"
        raise DatasetFormatError(msg, row=line, column=column)
    try:
        number = float(value)
    except ValueError:
        msg = f"not a number: {value!r}"
        raise DatasetFormatError(msg, row=line, column=column) from None
    if not math.isfinite(number):
        msg = f"not a finite number: {value!r}"
        raise DatasetFormatError(msg, row=line, column=column)
    return number


def _time(value: str | None, line: int) -> float:
    number = _number(value, line, "time")
    if number <= 0:
        msg = f"exit time must be positive, got {value!r}"
        raise DatasetFormatError(msg, row=line, column="time")
    return number


def _status(value: str | None, line: int) -> int:
    number = _number(value, line, "status")
    if number < 0 or number != int(number):
        msg = f"status must be 0 (censored) or a cause j >= 1, got {value!r}"
        raise DatasetFormatError(msg, row=line, column="status")
    return int(number)


def read_table(path: Path) -> CsvTable:
    try:
        handle = path.open(newline="", encoding="utf-8-sig")
    except OSError as e:
        msg = f"unable to read {path}: {e.strerror}"
        raise DatasetFormatError(msg) from e

    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            msg = "empty file, expected a header with time and status"
            raise DatasetFormatError(msg, row=1)
        reader.fieldnames = [name.strip() for name in reader.fieldnames]
        fieldnames = tuple(reader.fieldnames)

        for required in ("time", "status"):
            if required not in fieldnames:
                msg = "required column missing from header"
                raise DatasetFormatError(msg, row=1, column=required)

        covariate_names = tuple(
            sorted(
                (name for name in fieldnames if COVARIATE.match(name)),
                key=lambda name: int(COVARIATE.match(name).group(1)),
            )
        )

        rows, lines, times, statuses, covariates = [], [], [], [], []
        for row in reader:
            line = reader.line_num
            if None in row:
                msg = "more cells than header columns"
                raise DatasetFormatError(msg, row=line)
            times.append(_time(row["time"], line))
            statuses.append(_status(row["status"], line))
            covariates.append(
                [_number(row[name], line, name) for name in covariate_names]
            )
            rows.append(row)
            lines.append(line)

    if not rows:
        msg = "no data rows"
        raise DatasetFormatError(msg, row=2)

    return CsvTable(
        fieldnames=fieldnames,
        rows=tuple(rows),
        line_numbers=tuple(lines),
        times=np.array(times, dtype=float),
        statuses=np.array(statuses, dtype=int),
        covariate_names=covariate_names,
        covariates=np.array(covariates, dtype=float).reshape(
            len(rows), len(covariate_names)
        ),
    )


def write_csv(
    stream: IO[str], header: Sequence[str], rows: Iterable[Sequence[Any]]
) -> None:
    w = csv.writer(
        stream,
        delimiter=",",
        quotechar='"',
        quoting=csv.QUOTE_MINIMAL,
        lineterminator="\n",
    )
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) if isinstance(v, float) else v for v in row])


def write_pseudo(stream: IO[str], table: CsvTable, values: np.ndarray) -> None:
    """The input rows unchanged plus a ``pseudo_y`` column."""
    header = (*table.fieldnames, PSEUDO_COLUMN)
    write_csv(
        stream,
        header,
        (
            [row[name] for name in table.fieldnames] + [float(value)]
            for row, value in zip(table.rows, values, strict=True)
        ),
    )


def jsonable(value: Any) -> Any:
    """Plain JSON types; NaN and infinities become null."""
    if isinstance(value, dict):
        return {str(jsonable(k)): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(stream: IO[str], payload: Any) -> None:
    json.dump(jsonable(payload), stream, indent=2)
    stream.write("\n")
