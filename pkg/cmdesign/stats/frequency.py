"""
Frequency tables of observed rows.

A table holds one column per observed variable plus ``count``; a cell is a
value or missing. On disk it is a UTF-8 CSV whose missing cells are the
literal ``NA``.
"""

import logging
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import pandas as pd

from cmdesign.errors import DataMismatch

logger = logging.getLogger(__name__)

MISSING = "NA"
COUNT = "count"
ENCODING = "UTF-8"


def _cell(value) -> object:
    """Normalizes a cell: None for missing, int where the text is integral."""
    if value is None or (not isinstance(value, str) and pd.api.types.is_scalar(value)
                         and pd.isna(value)):
        return None
    if isinstance(value, str):
        text = value.strip()
        if text == MISSING or text == "":
            return None
        try:
            return int(text)
        except ValueError:
            try:
                number = float(text)
            except ValueError:
                return text
            return int(number) if number.is_integer() else number
    if isinstance(value, float) and value.is_integer():
        return int(value)
    return value


class FrequencyTable:
    """Counts of observed rows over named columns."""

    def __init__(self, frame: pd.DataFrame) -> None:
        if COUNT not in frame.columns:
            raise DataMismatch("frequency table needs a 'count' column")
        columns = [c for c in frame.columns if c != COUNT]
        frame = frame[columns + [COUNT]].copy()
        for c in columns:
            # object dtype keeps None for missing cells; map() would infer float and NaN
            frame[c] = pd.Series([_cell(v) for v in frame[c]], index=frame.index, dtype=object)
        try:
            counts = pd.to_numeric(frame[COUNT], errors="raise")
        except (ValueError, TypeError):
            raise DataMismatch("counts must be numbers") from None
        if (counts < 0).any():
            raise DataMismatch("counts must be non-negative")
        frame[COUNT] = counts
        self.frame = frame.reset_index(drop=True)

    def __repr__(self) -> str:
        return (f"FrequencyTable(columns={list(self.columns)}, rows={len(self)}, "
                f"total={self.total()})")

    def __len__(self) -> int:
        return len(self.frame)

    @classmethod
    def from_records(cls, columns: Sequence[str],
                     rows: Iterable[tuple[Sequence, float]]) -> "FrequencyTable":
        """Builds a table from (values, count) pairs; None marks a missing cell."""
        columns = list(columns)
        records = []
        for values, count in rows:
            values = list(values)
            if len(values) != len(columns):
                raise DataMismatch(
                    f"row has {len(values)} values for {len(columns)} columns")
            records.append(values + [count])
        frame = pd.DataFrame(records, columns=columns + [COUNT], dtype=object)
        return cls(frame)

    @classmethod
    def from_counts(cls, columns: Sequence[str],
                    counts: Mapping[tuple, float]) -> "FrequencyTable":
        return cls.from_records(columns, ((k, v) for k, v in counts.items()))

    @classmethod
    def read_csv(cls, path: str | Path) -> "FrequencyTable":
        try:
            frame = pd.read_csv(path, dtype=str, keep_default_na=False,
                                encoding=ENCODING)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise DataMismatch(f"cannot read frequency table {path}: {e}") from None
        logger.debug("Read %d rows from %s", len(frame), path)
        return cls(frame)

    def to_csv(self, path: str | Path | None = None) -> str:
        """Writes the CSV form; returns the text as well."""
        text = self.frame.to_csv(index=False, na_rep=MISSING, lineterminator="\n")
        if path is not None:
            Path(path).write_text(text, encoding=ENCODING)
        return text

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(c for c in self.frame.columns if c != COUNT)

    def total(self) -> float:
        return float(self.frame[COUNT].sum())

    def rows(self) -> Iterator[tuple[dict, float]]:
        """Yields (column -> value-or-None, count) pairs."""
        columns = self.columns
        for record in self.frame.itertuples(index=False, name=None):
            values = dict(zip(columns, record[:-1]))
            yield values, float(record[-1])

    def aggregated(self) -> "FrequencyTable":
        """Merges duplicate rows, keeping first-seen order."""
        keyed = self.frame.copy()
        for c in self.columns:
            keyed[c] = keyed[c].map(lambda v: MISSING if v is None else str(v))
        groups = keyed.groupby(list(self.columns), sort=False, dropna=False)[COUNT].sum()
        merged = groups.reset_index()
        return FrequencyTable(merged)

    def require_columns(self, required: Iterable[str],
                        optional: Iterable[str] = ()) -> None:
        """Checks the columns against what a design records."""
        required = list(required)
        missing = [c for c in required if c not in self.columns]
        if missing:
            raise DataMismatch(f"data lack column(s) {', '.join(missing)}",
                               missing=missing)
        allowed = set(required) | set(optional)
        extra = [c for c in self.columns if c not in allowed]
        if extra:
            raise DataMismatch(f"data have unknown column(s) {', '.join(extra)}",
                               extra=extra)
