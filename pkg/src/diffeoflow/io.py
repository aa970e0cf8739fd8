"""On-disk formats: displacement files and byte-stable JSON reports.

A displacement file is one JSON header line

    {"dim": ..., "half_width": ..., "points_per_axis": ...,
     "class_hint": ..., "components": ...}

followed by one CSV line per component holding the row-major node samples.
Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly, so write-read-write is byte identical. A diffeomorphism
adds a JSON sidecar carrying its decay class and Jacobian margin.

Reports are serialized by a small recursive dumper instead of ``json.dumps``
so that float formatting is pinned down: identical inputs produce identical
bytes on every platform, which the verification pipeline relies on.
"""

from __future__ import annotations

import json

import numpy as np

from .decay import DecayClass, class_from_name, extrapolation_for
from .errors import FileFormatError
from .fields import DisplacementField, Grid

HEADER_KEYS = ("dim", "half_width", "points_per_axis", "class_hint", "components")
SIDECAR_SUFFIX = ".meta.json"


def _format_float(x: float) -> str:
    if np.isnan(x):
        return "NaN"
    if np.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(float(x), ".17g")


def stable_json_dumps(obj) -> str:
    """Serialize to JSON with pinned float formatting and key order."""
    pieces = []
    _dump(obj, pieces)
    return "".join(pieces)


def _dump(obj, pieces: list):
    if obj is None:
        pieces.append("null")
    elif isinstance(obj, bool) or isinstance(obj, np.bool_):
        pieces.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        pieces.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        pieces.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        pieces.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _dump(obj.tolist(), pieces)
    elif isinstance(obj, (list, tuple)):
        pieces.append("[")
        for i, item in enumerate(obj):
            if i:
                pieces.append(", ")
            _dump(item, pieces)
        pieces.append("]")
    elif isinstance(obj, dict):
        pieces.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if i:
                pieces.append(", ")
            if not isinstance(key, str):
                raise FileFormatError(f"JSON keys must be strings, got {type(key).__name__}")
            pieces.append(json.dumps(key))
            pieces.append(": ")
            _dump(value, pieces)
        pieces.append("}")
    else:
        raise FileFormatError(f"cannot serialize {type(obj).__name__}")


def write_report(path: str, report: dict):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(stable_json_dumps(report))
        fh.write("\n")


def write_displacement(path: str, displacement: DisplacementField,
                       class_hint: DecayClass | None = None):
    """Write a displacement file: JSON header line, then one CSV row per component."""
    grid = displacement.grid
    header = {
        "dim": grid.dim,
        "half_width": grid.half_width,
        "points_per_axis": grid.points_per_axis,
        "class_hint": class_hint.value if class_hint is not None else None,
        "components": grid.dim,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(stable_json_dumps(header))
        fh.write("\n")
        flat = displacement.values.reshape(grid.dim, -1)
        for row in flat:
            fh.write(",".join(_format_float(v) for v in row))
            fh.write("\n")


def read_displacement(path: str) -> tuple:
    """Read a displacement file; returns ``(DisplacementField, DecayClass | None)``."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FileFormatError(f"{path}: empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: bad header line: {exc}")
    if not isinstance(header, dict):
        raise FileFormatError(f"{path}: header line is not a JSON object")
    if set(header) != set(HEADER_KEYS):
        raise FileFormatError(
            f"{path}: header keys {sorted(header)} do not match {sorted(HEADER_KEYS)}"
        )
    try:
        dim = int(header["dim"])
        half_width = float(header["half_width"])
        points = int(header["points_per_axis"])
        class_name = header["class_hint"]
        components = int(header["components"])
    except (TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: incomplete header: {exc}")
    class_hint = None if class_name is None else class_from_name(class_name)
    try:
        grid = Grid(dim, half_width, points)
    except Exception as exc:
        raise FileFormatError(f"{path}: bad grid parameters: {exc}")
    if components != dim:
        raise FileFormatError(
            f"{path}: {components} components cannot form a displacement on R^{dim}"
        )
    rows = [row for row in lines[1:] if row.strip()]
    if len(rows) != components:
        raise FileFormatError(f"{path}: expected {components} component rows, found {len(rows)}")
    expected = grid.node_count
    data = np.empty((dim, expected))
    for i, row in enumerate(rows):
        tokens = row.split(",")
        if len(tokens) != expected:
            raise FileFormatError(
                f"{path}: component {i} has {len(tokens)} samples, expected {expected}"
            )
        try:
            data[i] = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad sample in component {i}: {exc}")
    if not np.all(np.isfinite(data)):
        raise FileFormatError(f"{path}: displacement samples must be finite")
    extrap = "zero" if class_hint is None else extrapolation_for(class_hint)
    field = DisplacementField(grid, data.reshape((dim,) + grid.shape), extrap)
    return field, class_hint


def write_diffeo(path: str, diffeo):
    """Displacement file plus a ``.meta.json`` sidecar with class and margin."""
    write_displacement(path, diffeo.displacement, diffeo.decay_class)
    sidecar = {
        "decay_class": diffeo.decay_class.value,
        "epsilon": diffeo.epsilon,
    }
    write_report(path + SIDECAR_SUFFIX, sidecar)


def read_diffeo(path: str, det_threshold: float | None = None):
    """Rebuild a diffeomorphism written by :func:`write_diffeo`.

    The sidecar is optional; without it the class hint from the header is
    trusted (or the displacement classified when there is none). The
    Jacobian margin is always re-measured, never read.
    """
    from .group import DEFAULT_DET_THRESHOLD, Diffeo

    displacement, class_hint = read_displacement(path)
    decay_class = class_hint
    try:
        with open(path + SIDECAR_SUFFIX, "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except FileNotFoundError:
        sidecar = None
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}{SIDECAR_SUFFIX}: bad sidecar: {exc}")
    if sidecar is not None:
        try:
            decay_class = class_from_name(sidecar["decay_class"])
        except (KeyError, TypeError) as exc:
            raise FileFormatError(f"{path}{SIDECAR_SUFFIX}: incomplete sidecar: {exc}")
    threshold = DEFAULT_DET_THRESHOLD if det_threshold is None else det_threshold
    return Diffeo(displacement, decay_class, threshold)


def write_time_series_csv(path: str, result):
    """Per-step diagnostics of a flow as CSV, one row per step boundary."""
    diag = result.diagnostics
    columns = ["t", "sup_displacement", "bound_sup", "bound_defect",
               "sup_jacobian", "min_det", "alpha", "beta"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns))
        fh.write("\n")
        for k in range(result.times.shape[0]):
            row = [result.times[k]] + [diag[name][k] for name in columns[1:]]
            fh.write(",".join(_format_float(v) for v in row))
            fh.write("\n")
