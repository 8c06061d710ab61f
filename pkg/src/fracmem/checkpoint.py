"""Checkpoint files: one JSON header line followed by raw float64 field data.

Layout (version 1)::

    {"format": "fracmem-checkpoint", "version": 1, "grid": {...}, "params": {...},
     "t": ..., "step": ..., "dtype": "<f8", "shape": [...], "fields": ["u", "v"]}\\n
    <u values, C order, little-endian float64>
    <v values, ...>
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "fracmem-checkpoint"
VERSION = 1


def write_checkpoint(path, grid, params, t: float, step: int, fields: dict) -> Path:
    path = Path(path)
    names = list(fields)
    arrays = [np.ascontiguousarray(fields[k], dtype="<f8") for k in names]
    header = {
        "format": FORMAT,
        "version": VERSION,
        "grid": grid.as_dict(),
        "params": params.as_dict(),
        "t": t,
        "step": step,
        "dtype": "<f8",
        "shape": list(arrays[0].shape) if arrays else [],
        "fields": names,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for arr in arrays:
            fh.write(arr.tobytes())
    return path


def read_checkpoint(path):
    """Return (header, {name: array})."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != FORMAT:
            raise ValueError(f"{path}: not a checkpoint file")
        if header.get("version") != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        shape = tuple(header["shape"])
        count = int(np.prod(shape))
        fields = {}
        for name in header["fields"]:
            data = np.frombuffer(fh.read(8 * count), dtype=header["dtype"])
            if data.size != count:
                raise ValueError(f"{path}: truncated field {name!r}")
            fields[name] = data.reshape(shape).copy()
    return header, fields
