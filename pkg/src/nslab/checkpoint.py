"""Binary checkpoints for spectral vorticity fields.

Layout (little-endian):

    bytes 0:4    magic "HSNS"
    u32          format version (currently 1)
    i32          K (mode truncation)
    i32          n_nodes
    f64 x 4      z_max, delta_ref, nu, t
    u32          CRC32 of the payload
    payload      (2K+1) * n_nodes complex128 profiles, modes alpha = -K..K,
                 real/imag interleaved 8-byte floats

A JSON sidecar (<path>.meta.json) carries creation time and an optional config
hash; timestamps never enter the binary payload, so roundtrips stay bit-exact.
"""

from __future__ import annotations

import json
import os
import struct
import time
import zlib

import numpy as np

from .fieldkit import SpectralField, build_graded_grid

MAGIC = b"HSNS"
VERSION = 1
_HEADER = struct.Struct("<4sIii4dI")


class CheckpointError(ValueError):
    """Malformed checkpoint: bad magic, version, truncation, or checksum."""


def save_checkpoint(path: str, field: SpectralField, nu: float, t: float,
                    config_hash: str | None = None) -> None:
    grid = field.grid
    payload = np.ascontiguousarray(field.coeffs.astype("<c16", copy=False)).tobytes()
    header = _HEADER.pack(MAGIC, VERSION, field.K, grid.n_nodes,
                          grid.z_max, grid.delta_ref, float(nu), float(t),
                          zlib.crc32(payload) & 0xFFFFFFFF)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(payload)
    os.replace(tmp, path)
    meta = {"created": time.strftime("%Y-%m-%dT%H:%M:%S"), "config_hash": config_hash,
            "format_version": VERSION}
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(meta, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path: str) -> tuple[SpectralField, dict]:
    """Read a checkpoint; returns (field, header record).  Bit-exact roundtrip."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CheckpointError("checkpoint truncated: header incomplete")
    magic, version, K, n_nodes, z_max, delta_ref, nu, t, crc = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}: not a checkpoint file")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    expected = (2 * K + 1) * n_nodes * 16
    payload = raw[_HEADER.size:]
    if len(payload) != expected:
        raise CheckpointError(
            f"checkpoint truncated: payload {len(payload)} bytes, expected {expected}")
    if zlib.crc32(payload) & 0xFFFFFFFF != crc:
        raise CheckpointError("checksum failure: payload corrupted")
    coeffs = np.frombuffer(payload, dtype="<c16").reshape(2 * K + 1, n_nodes).copy()
    grid = build_graded_grid(z_max, n_nodes, delta_ref)
    field = SpectralField(grid, coeffs)
    field.real = field.reality_defect() < 1e-12
    return field, {"nu": nu, "t": t, "K": K, "n_nodes": n_nodes,
                   "z_max": z_max, "delta_ref": delta_ref}
