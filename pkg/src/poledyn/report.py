"""CSV/JSON writers for orbits, interval sets and experiment reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .precision import format_number


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def write_orbit_csv(path, orbit) -> Path:
    return write_csv(path, ["step", "value"], orbit.rows())


def read_orbit_csv(path) -> list[str]:
    with Path(path).open(newline="") as fh:
        return [row["value"] for row in csv.DictReader(fh)]


def write_intervals_csv(path, levels) -> Path:
    rows = [(k, i, a, b) for k, s in enumerate(levels) for i, a, b in s.rows()]
    return write_csv(path, ["level", "index", "a", "b"], rows)


def read_intervals_csv(path) -> dict[int, list[tuple[str, str]]]:
    out: dict[int, list[tuple[str, str]]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(int(row["level"]), []).append((row["a"], row["b"]))
    return out


def cells_csv(path, cells, columns) -> Path:
    """Flatten selected report cell fields into a CSV matrix."""
    rows = []
    for c in cells:
        row = []
        for col in columns:
            v = c
            for part in col.split("."):
                v = v.get(part) if isinstance(v, dict) else None
            row.append("" if v is None else (format_number(v) if not isinstance(v, (int, float, str)) else v))
        rows.append(row)
    return write_csv(path, columns, rows)
