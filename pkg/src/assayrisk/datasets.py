"""Reading validation datasets from CSV.

Required columns: ``series_id``, ``replicate``, ``level`` and either
``rel_error_pct`` or both ``nominal`` and ``measured``. Comma delimited,
UTF-8, '.' as decimal separator, no empty cells.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import TextIO, Union

from .errors import DatasetFormatError
from .tolerance import ValidationDataset

BASE_COLUMNS = ("series_id", "replicate", "level")
REL_COLUMNS = ("rel_error_pct",)
PAIR_COLUMNS = ("nominal", "measured")


def _number(text: str, column: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DatasetFormatError(f"line {line}: column {column!r} is not a number: {text!r}") from None
    if not math.isfinite(value):
        raise DatasetFormatError(f"line {line}: column {column!r} must be finite")
    return value


def read_dataset(source: Union[str, Path, TextIO]) -> dict[float, ValidationDataset]:
    """Parse a dataset file into one :class:`ValidationDataset` per level,
    keyed and ordered by ascending level."""
    if isinstance(source, (str, Path)):
        try:
            with open(source, newline="", encoding="utf-8") as fh:
                return read_dataset(fh)
        except UnicodeDecodeError as exc:
            raise DatasetFormatError(f"dataset is not valid UTF-8: {exc}") from None
        except OSError as exc:
            raise DatasetFormatError(f"cannot read dataset: {exc}") from None

    reader = csv.DictReader(source)
    header = [h.strip() for h in (reader.fieldnames or [])]
    reader.fieldnames = header
    missing = [c for c in BASE_COLUMNS if c not in header]
    if missing:
        raise DatasetFormatError(f"missing required column(s): {', '.join(missing)}")
    has_rel = "rel_error_pct" in header
    has_pair = all(c in header for c in PAIR_COLUMNS)
    if has_rel == has_pair or (has_rel and any(c in header for c in PAIR_COLUMNS)):
        raise DatasetFormatError(
            "dataset must carry exactly one of: rel_error_pct, or nominal and measured"
        )
    value_cols = REL_COLUMNS if has_rel else PAIR_COLUMNS

    per_level: dict[float, list] = {}
    for line, row in enumerate(reader, start=2):
        if None in row:
            raise DatasetFormatError(f"line {line}: more cells than header columns")
        for col in BASE_COLUMNS + value_cols:
            cell = row.get(col)
            if cell is None or cell.strip() == "":
                raise DatasetFormatError(f"line {line}: missing value in column {col!r}")
        rep_value = _number(row["replicate"], "replicate", line)
        if not rep_value.is_integer():
            raise DatasetFormatError(f"line {line}: replicate must be an integer")
        level = _number(row["level"], "level", line)
        if level <= 0:
            raise DatasetFormatError(f"line {line}: level must be positive")
        series = row["series_id"].strip()
        values = tuple(_number(row[c], c, line) for c in value_cols)
        if not has_rel and values[0] <= 0:
            raise DatasetFormatError(f"line {line}: nominal must be positive")
        per_level.setdefault(level, []).append((series, int(rep_value)) + values)

    if not per_level:
        raise DatasetFormatError("dataset has no rows")
    out = {}
    for level in sorted(per_level):
        records = per_level[level]
        if has_rel:
            out[level] = ValidationDataset.from_records(records, level)
        else:
            out[level] = ValidationDataset.from_pairs(records, level)
    return out
