"""CSV and JSON formats for histograms, the 512x512 matrix, fringe series and reports.

Schemas (all CSV files have a header row):

* histogram: ``outcome_bits,count``; outcome_bits is the N-character bit string,
  register[0] first.  Exact-mode files hold probabilities in ``count``.
* matrix: ``row,col,count``; row is the integer of the first half of the bits,
  col of the second half (9 + 9 for 18 qubits); only nonzero cells are listed.
  In exact mode ``count`` holds a probability.
* fringes: ``theta,expectation,stderr``.

JSON is plain RFC 8259: infinities are written as the strings ``"Infinity"``
and ``"-Infinity"`` and turned back into floats by :func:`load_json`.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .analysis import FringeSeries

INF_SENTINEL = "Infinity"
_SPECIAL = {"Infinity": math.inf, "-Infinity": -math.inf, "NaN": math.nan}


def _fmt(x: float) -> str:
    return repr(float(x))


def _encode(obj):
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        if math.isnan(obj):
            return "NaN"
        if math.isinf(obj):
            return INF_SENTINEL if obj > 0 else "-" + INF_SENTINEL
        return obj
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    return obj


def _decode(obj):
    if isinstance(obj, str) and obj in _SPECIAL:
        return _SPECIAL[obj]
    if isinstance(obj, dict):
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_encode(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def save_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj))
    return path


def load_json(path):
    return _decode(json.loads(Path(path).read_text()))


def _number(raw: str):
    return int(raw) if raw.isdigit() else float(raw)


def _writer(path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_histogram_csv(counts: dict[int, float], n_qubits: int, path) -> Path:
    path = Path(path)
    fh, w = _writer(path)
    with fh:
        w.writerow(["outcome_bits", "count"])
        for k in sorted(counts):
            v = counts[k]
            w.writerow([format(k, f"0{n_qubits}b"), v if isinstance(v, int) else _fmt(v)])
    return path


def read_histogram_csv(path) -> tuple[dict[int, float], int | None]:
    """Returns (counts, n_qubits); n_qubits is None for an empty file."""
    counts, width = {}, None
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            bits = row["outcome_bits"]
            width = len(bits)
            counts[int(bits, 2)] = _number(row["count"])
    return counts, width


def matrix_cell(outcome: int, n_qubits: int) -> tuple[int, int]:
    low = n_qubits - n_qubits // 2
    return outcome >> low, outcome & ((1 << low) - 1)


def write_matrix_csv(values: dict[int, float], n_qubits: int, path) -> Path:
    path = Path(path)
    fh, w = _writer(path)
    with fh:
        w.writerow(["row", "col", "count"])
        for k in sorted(values):
            if values[k]:
                r, c = matrix_cell(k, n_qubits)
                v = values[k]
                w.writerow([r, c, v if isinstance(v, int) else _fmt(v)])
    return path


def read_matrix_csv(path) -> dict[tuple[int, int], float]:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[int(row["row"]), int(row["col"])] = _number(row["count"])
    return out


def write_fringe_csv(series: FringeSeries, path) -> Path:
    path = Path(path)
    fh, w = _writer(path)
    with fh:
        w.writerow(["theta", "expectation", "stderr"])
        for t, e, s in series.points:
            w.writerow([_fmt(t), _fmt(e), _fmt(s)])
    return path


def read_fringe_csv(path, n_qubits: int) -> FringeSeries:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((float(row["theta"]), float(row["expectation"]), float(row["stderr"])))
    thetas, values, errors = zip(*rows) if rows else ((), (), ())
    return FringeSeries(n_qubits, list(thetas), list(values), list(errors))
