"""CSV/JSONL emission with full round-trip float precision.

All numeric cells are written with 17 significant digits so figure
regressions can compare numerically; missing values are empty cells.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".17g")
    return str(value)


def write_csv(path: str | Path, fieldnames: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_cell(row.get(name)) for name in fieldnames])
    return path


def write_jsonl(path: str | Path, fieldnames: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for row in rows:
            record = {}
            for name in fieldnames:
                value = row.get(name)
                if isinstance(value, float) and math.isnan(value):
                    value = None
                record[name] = value
            handle.write(json.dumps(record) + "\n")
    return path


def write_rows(
    path: str | Path, fieldnames: list[str], rows: list[dict], fmt: str = "csv"
) -> Path:
    if fmt == "csv":
        return write_csv(path, fieldnames, rows)
    if fmt == "jsonl":
        return write_jsonl(path, fieldnames, rows)
    raise ValueError(f"unknown output format {fmt!r}")


def read_csv(path: str | Path) -> tuple[list[str], list[dict]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty CSV") from None
        rows = [dict(zip(header, line)) for line in reader]
    return header, rows
