"""Binary checkpoints for MPS and MPO.

Layout (all integers little-endian):

    magic     8 bytes  b"AGPMPS\\x00\\x01"
    version   uint32
    hlen      uint32   length of the JSON header in bytes
    header    hlen bytes of UTF-8 JSON: kind, site count, shapes, metadata
    data      site tensors in order, C-ordered complex128 ('<c16')
"""

from __future__ import annotations

import json
import struct
from dataclasses import fields

import numpy as np

from .mps import MPO, MPS

MAGIC = b"AGPMPS\x00\x01"
VERSION = 1
_DT = np.dtype("<c16")


def _write(path, kind: str, tensors, meta: dict) -> None:
    header = {
        "kind": kind,
        "L": len(tensors),
        "shapes": [list(t.shape) for t in tensors],
        "dtype": "complex128-le",
        "meta": meta,
    }
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(hb)))
        fh.write(hb)
        for t in tensors:
            fh.write(np.ascontiguousarray(t, dtype=_DT).tobytes())


def _read(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise ValueError(f"{path}: not an MPS/MPO checkpoint")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version > VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        header = json.loads(fh.read(hlen).decode())
        tensors = []
        for shape in header["shapes"]:
            n = int(np.prod(shape))
            buf = fh.read(n * _DT.itemsize)
            if len(buf) != n * _DT.itemsize:
                raise ValueError(f"{path}: truncated data")
            tensors.append(np.frombuffer(buf, dtype=_DT).reshape(shape).astype(complex))
    return header, tensors


def save_mps(psi: MPS, path, meta: dict | None = None) -> None:
    _write(path, "MPS", psi.tensors, {"center": psi.center, **(meta or {})})


def load_mps(path) -> MPS:
    header, tensors = _read(path)
    if header["kind"] != "MPS":
        raise ValueError(f"{path} holds an {header['kind']}, not an MPS")
    return MPS(tensors, center=header["meta"].get("center"))


def save_mpo(op: MPO, path, meta: dict | None = None) -> None:
    _write(path, "MPO", op.tensors, dict(meta or {}))


def load_mpo(path) -> MPO:
    header, tensors = _read(path)
    if header["kind"] != "MPO":
        raise ValueError(f"{path} holds an {header['kind']}, not an MPO")
    return MPO(tensors)


def read_meta(path) -> dict:
    return _read(path)[0]["meta"]


def save_agp_result(res, path, meta: dict | None = None) -> None:
    """Gauge potential MPO plus its scalar diagnostics in the header."""
    diag = {f.name: getattr(res, f.name) for f in fields(res) if f.name != "agp"}
    diag = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in diag.items()}
    save_mpo(res.agp, path, {"agp_result": diag, **(meta or {})})


def load_agp_result(path):
    from .agp import AgpResult

    header, tensors = _read(path)
    diag = header["meta"]["agp_result"]
    return AgpResult(agp=MPO(tensors), **diag)
