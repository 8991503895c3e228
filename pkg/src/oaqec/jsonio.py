"""JSON file formats for matrices and channels.

Matrix::

    {"rows": 2, "cols": 2, "data": [[1, 0], [0, 0], [0, 0], [1, 0]]}

with row-major ``[re, im]`` pairs. A nested array of reals such as
``[[0, 1], [1, 0]]`` is accepted as shorthand.

Channel::

    {"dim_in": n, "dim_out": m, "kraus": [<matrix>, ...], "subnormalized": false}
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .channels import Channel, ChannelError


class InputError(ValueError):
    """A malformed or inconsistent input file."""


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InputError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise InputError(f"{where}: non-finite value {value!r}")
    return float(value)


def matrix_from_json(obj, source: str = "<matrix>") -> np.ndarray:
    if isinstance(obj, list):
        if not obj or not all(isinstance(row, list) for row in obj):
            raise InputError(f"{source}: nested shorthand must be a non-empty list of rows")
        cols = len(obj[0])
        if cols == 0 or any(len(row) != cols for row in obj):
            raise InputError(f"{source}: rows of the nested shorthand have unequal or zero length")
        vals = [_number(v, f"{source}: entry [{i}][{j}]") for i, row in enumerate(obj) for j, v in enumerate(row)]
        return np.array(vals, dtype=np.complex128).reshape(len(obj), cols)
    if not isinstance(obj, dict):
        raise InputError(f"{source}: expected a matrix object or nested array")
    for key in ("rows", "cols", "data"):
        if key not in obj:
            raise InputError(f"{source}: missing field {key!r}")
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if not (isinstance(rows, int) and isinstance(cols, int)) or rows <= 0 or cols <= 0:
        raise InputError(f"{source}: rows and cols must be positive integers")
    if not isinstance(data, list) or len(data) != rows * cols:
        got = len(data) if isinstance(data, list) else type(data).__name__
        raise InputError(f"{source}: data has length {got}, expected rows*cols = {rows * cols}")
    out = np.empty(rows * cols, dtype=np.complex128)
    for k, pair in enumerate(data):
        if not isinstance(pair, list) or len(pair) != 2:
            raise InputError(f"{source}: data[{k}] is not an [re, im] pair")
        out[k] = complex(_number(pair[0], f"{source}: data[{k}]"), _number(pair[1], f"{source}: data[{k}]"))
    return out.reshape(rows, cols)


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=np.complex128)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "data": [[float(z.real), float(z.imag)] for z in m.reshape(-1)],
    }


def channel_from_json(obj, source: str = "<channel>") -> Channel:
    if not isinstance(obj, dict):
        raise InputError(f"{source}: expected a channel object")
    for key in ("dim_in", "dim_out", "kraus"):
        if key not in obj:
            raise InputError(f"{source}: missing field {key!r}")
    if not isinstance(obj["kraus"], list) or not obj["kraus"]:
        raise InputError(f"{source}: kraus must be a non-empty list")
    kraus = [matrix_from_json(k, f"{source}: kraus[{i}]") for i, k in enumerate(obj["kraus"])]
    try:
        return Channel(int(obj["dim_in"]), int(obj["dim_out"]), tuple(kraus), bool(obj.get("subnormalized", False)))
    except ChannelError as exc:
        raise InputError(f"{source}: {exc}") from exc


def channel_to_json(ch: Channel) -> dict:
    out = {"dim_in": ch.dim_in, "dim_out": ch.dim_out, "kraus": [matrix_to_json(k) for k in ch.kraus]}
    if ch.subnormalized:
        out["subnormalized"] = True
    return out


def load_json(path) -> object:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read file ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc})") from exc


def parse_matrix_file(path) -> np.ndarray:
    return matrix_from_json(load_json(path), str(path))


def parse_channel_file(path) -> Channel:
    return channel_from_json(load_json(path), str(path))


def parse_observables_file(path) -> list[np.ndarray]:
    """A list of real vectors, or ``{"observables": [...]}``."""
    obj = load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("observables")
    if not isinstance(obj, list) or not all(isinstance(v, list) for v in obj):
        raise InputError(f"{path}: expected a list of real vectors")
    return [np.array([_number(x, f"{path}: observable {i}[{j}]") for j, x in enumerate(v)])
            for i, v in enumerate(obj)]


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, two-space indent, round-trip floats."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_channel_file(path, ch: Channel) -> None:
    Path(path).write_text(dumps(channel_to_json(ch)))
