"""Result files: CSV tables, the run manifest and binary operator dumps.

CSV files start with ``#`` comment lines naming the experiment, the
config digest, the seed and the library version, followed by a header
row and data rows.  Floats are written with 17 significant digits so
they round-trip exactly.

An operator dump is ``b"HGFFOP1\\n"``, a little-endian ``uint64`` header
length, a UTF-8 JSON header and then the dense blocks ``D_k`` as
little-endian float64 in column-major order, at the offsets listed in
the header.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

__all__ = [
    "format_value",
    "write_csv",
    "read_csv_rows",
    "data_digest",
    "write_manifest",
    "read_manifest",
    "write_operator_dump",
    "read_operator_dump",
]

_MAGIC = b"HGFFOP1\n"


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, meta: dict, header, rows) -> str:
    """Write one table; returns the digest of its header and data rows."""
    lines = [f"# {k}: {v}" for k, v in meta.items()]
    body = [",".join(header)] + [",".join(format_value(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines + body) + "\n")
    return hashlib.sha256("\n".join(body).encode("utf-8")).hexdigest()


def read_csv_rows(path):
    """Header and data lines of a result CSV (comment lines dropped)."""
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if not line.startswith("#")]


def data_digest(path) -> str:
    return hashlib.sha256("\n".join(read_csv_rows(path)).encode("utf-8")).hexdigest()


def write_manifest(path, manifest: dict):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_operator_dump(path, op, version: str):
    """Write all blocks ``D_k`` of a Hadamard operator."""
    blocks = []
    offset = 0
    dense = []
    for blk in op.blocks:
        D = np.asfortranarray(blk.dense(), dtype="<f8")
        blocks.append({"k": blk.k, "rows": int(D.shape[0]), "cols": int(D.shape[1]),
                       "col_start": int(blk.cols.start), "offset": offset})
        offset += D.nbytes
        dense.append(D)
    header = {
        "format": 1,
        "version": version,
        "mode": op.mode,
        "flow_digest": op.flow.digest(),
        "h": op.h,
        "n_sites": op.size,
        "dtype": "<f8",
        "order": "F",
        "blocks": blocks,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for D in dense:
            fh.write(D.tobytes(order="F"))


def read_operator_dump(path):
    """Return ``(header, [D_1, ..., D_M])``."""
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path} is not an operator dump")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size).decode("utf-8"))
        payload = fh.read()
    mats = []
    for b in header["blocks"]:
        count = b["rows"] * b["cols"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=b["offset"])
        mats.append(arr.reshape((b["rows"], b["cols"]), order="F"))
    return header, mats
