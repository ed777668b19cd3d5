"""Readers for the CSV artifacts a run directory exposes.

Every reader validates the header and each data row against the
documented column layout and reports violations with the offending
file and 1-based line number. Files are opened read-only and never
touched otherwise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


class SchemaError(ValueError):
    """An input file does not match its documented column layout."""


@dataclass(frozen=True)
class Column:
    name: str
    cast: type


GW_COLUMNS = tuple(
    Column(name, float)
    for name in ("dt", "G", "W", "sigma_G2", "g_stderr", "w_stderr", "s2_stderr")
)

SUMMARY_COLUMNS = (
    Column("lattice", str),
    Column("N_nn", int),
    Column("lambda_max", float),
    Column("Lambda", float),
    Column("var_direct", float),
    Column("var_eq10", float),
    Column("tau_eq4", float),
    Column("tau_eq9", float),
    Column("tau_eq11", float),
    Column("verdict", str),
)

SWEEP_COLUMNS = (
    Column("label", str),
    Column("dims", int),
    Column("n_sites", int),
    Column("n_nn", int),
    Column("lambda_max", float),
    Column("lambda_stderr", float),
    Column("var_dlambda", float),
    Column("var_stderr", float),
)


def read_table(path, columns) -> list[tuple]:
    """Parse a CSV file against `columns`, raising SchemaError on mismatch."""
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")
    expected = [col.name for col in columns]
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}:1: empty file")
        if header != expected:
            raise SchemaError(f"{path}:1: header {header!r}, expected {expected!r}")
        for lineno, raw in enumerate(reader, start=2):
            if len(raw) != len(columns):
                raise SchemaError(
                    f"{path}:{lineno}: {len(raw)} fields, expected {len(columns)}"
                )
            parsed = []
            for col, field in zip(columns, raw):
                if col.cast is str:
                    parsed.append(field)
                    continue
                try:
                    parsed.append(col.cast(field))
                except ValueError:
                    raise SchemaError(
                        f"{path}:{lineno}: column {col.name!r}: "
                        f"{field!r} is not a valid {col.cast.__name__}"
                    ) from None
            rows.append(tuple(parsed))
    if not rows:
        raise SchemaError(f"{path}:2: no data rows")
    return rows
