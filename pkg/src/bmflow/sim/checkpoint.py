"""Binary field checkpoints.

Layout (all little-endian):

    offset  size  content
    0       4     magic b"BMQT"
    4       4     format version (u32) = 1
    8       4     grid size N (u32)
    12      8     time (f64)
    20      32    SHA-256 digest of the model parameters
    52      ...   f64 arrays in C order: u (3, N, N, N), Q (5, N, N, N)
                  with components Q11, Q12, Q13, Q22, Q23, theta (N, N, N)
"""
from __future__ import annotations

import struct

import numpy as np

from .state import FieldState

MAGIC = b"BMQT"
VERSION = 1
HEADER = struct.Struct("<4sIId32s")


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, state: FieldState, digest: bytes) -> None:
    if len(digest) != 32:
        raise CheckpointError("parameter digest must be 32 bytes")
    n = state.n
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, n, float(state.time), digest))
        for arr, comps in ((state.u, 3), (state.q, 5), (state.theta[None], 1)):
            if arr.shape != (comps, n, n, n):
                raise CheckpointError(f"field shape {arr.shape} does not match N={n}")
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path, expect_digest: bytes | None = None):
    """Return (state, digest); with ``expect_digest`` a mismatch is an error."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER.size:
        raise CheckpointError("truncated header")
    magic, version, n, time, digest = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported format version {version}")
    count = 9 * n**3
    if len(raw) != HEADER.size + 8 * count:
        raise CheckpointError("payload size does not match the grid size")
    if expect_digest is not None and digest != expect_digest:
        raise CheckpointError("parameter digest mismatch")
    data = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(float)
    data = data.reshape(9, n, n, n)
    return FieldState(data[:3].copy(), data[3:8].copy(), data[8].copy(), time), digest
