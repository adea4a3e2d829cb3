"""CSV and JSON artifacts with a commented provenance header, and their readers."""

from __future__ import annotations

import csv
import json
from pathlib import Path


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        raise TypeError("split complex values into real and imaginary columns")
    return str(v)


def write_csv(path, columns: list, rows, header: dict | None = None) -> Path:
    """Header lines ``# key: value``, then a column row, then data (floats via repr)."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}: {val}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> tuple:
    """(header dict, column names, rows as lists of str)."""
    header, body = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(":")
                header[key.strip()] = val.strip()
            else:
                body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        return header, [], []
    return header, rows[0], rows[1:]


def write_json(path, data: dict, header: dict | None = None) -> Path:
    path = Path(path)
    out = dict(data)
    if header:
        out["header"] = header
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    try:
        return float(o)
    except (TypeError, ValueError):
        return repr(o)
