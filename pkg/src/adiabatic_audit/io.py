"""CSV and JSON writers.

Floats are written with 17 significant digits so that every value
round-trips exactly; non-finite values become ``nan`` in CSV and ``null`` in
JSON.  Files are UTF-8 with LF line endings and keys keep insertion order.
"""

import csv
import json
import math
from pathlib import Path

import numpy as np


def format_float(x):
    x = float(x)
    if not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return f"{x:.17g}"


def _json_scalar(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format_float(x) if math.isfinite(x) else "null"
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    raise TypeError(f"cannot serialize {type(x).__name__}")


def dumps_json(obj, indent=2, _level=0):
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {dumps_json(v, indent, _level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json_scalar(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps_json(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    return _json_scalar(obj)


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj) + "\n")
    return path


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def trajectory_table(times, states, coefficients, distance, deficiency, extra=None):
    """Header and rows for a trajectory export.

    Columns: ``t``, ``re_psi_i``/``im_psi_i`` per amplitude, ``abs_a_n`` per
    level, ``distance``, ``deficiency`` and then any ``extra`` columns.
    """
    states = np.asarray(states)
    coefficients = np.asarray(coefficients)
    dim, levels = states.shape[1], coefficients.shape[1]
    header = ["t"]
    for i in range(dim):
        header += [f"re_psi_{i + 1}", f"im_psi_{i + 1}"]
    header += [f"abs_a_{n + 1}" for n in range(levels)] + ["distance", "deficiency"]
    extra = extra or {}
    header += list(extra)
    columns = [np.asarray(times, dtype=float)]
    for i in range(dim):
        columns += [states[:, i].real, states[:, i].imag]
    columns += [np.abs(coefficients[:, n]) for n in range(levels)]
    columns += [np.asarray(distance, dtype=float), np.asarray(deficiency, dtype=float)]
    columns += [np.asarray(v, dtype=float) for v in extra.values()]
    rows = [[float(c[k]) for c in columns] for k in range(len(times))]
    return header, rows


def write_trajectory_csv(path, times, states, coefficients, distance, deficiency, extra=None):
    header, rows = trajectory_table(times, states, coefficients, distance, deficiency, extra)
    return write_csv(path, header, rows)


def read_trajectory_csv(path):
    """Column name -> float array."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return {name: data[:, i] if data.size else np.array([]) for i, name in enumerate(header)}


def write_reports_json(path, reports):
    return write_json(path, [r.to_dict() for r in reports])


def load_matrix_file(path):
    """Sampled Hamiltonian: ``times`` plus ``matrices`` of shape ``(n, dim, dim)``.

    ``.npz`` files hold arrays ``times`` and ``matrices``; ``.json`` files hold
    ``times``, ``real`` and optionally ``imag`` nested lists.
    """
    path = Path(path)
    if path.suffix == ".npz":
        with np.load(path) as data:
            times, matrices = np.asarray(data["times"], float), np.asarray(data["matrices"], complex)
    else:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        matrices = np.asarray(data["real"], dtype=float).astype(complex)
        if "imag" in data:
            matrices = matrices + 1j * np.asarray(data["imag"], dtype=float)
        times = np.asarray(data["times"], dtype=float)
    if matrices.ndim != 3 or matrices.shape[0] != times.shape[0] or matrices.shape[1] != matrices.shape[2]:
        raise ValueError(f"{path}: expected matrices of shape (len(times), dim, dim), got {matrices.shape}")
    if times.shape[0] >= 2 and np.any(np.diff(times) <= 0):
        raise ValueError(f"{path}: times must be strictly increasing")
    return times, matrices
