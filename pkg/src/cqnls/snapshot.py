"""Binary field snapshots.

Layout (all little-endian):

    magic     5 bytes   b"CQNLS"
    version   uint16
    d         uint8
    m         uint32
    L         float64
    t         float64
    tag       uint8     0 = psi, 1 = v
    u2_mean   float64
    beta      float64
    flags     uint32
    crc32     uint32    over every preceding header byte and the payload
    payload   m^d complex samples as interleaved (re, im) float64, row-major

Reading validates version, length and checksum before returning anything.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import ChecksumMismatch, SnapshotError, TruncatedSnapshot, VersionMismatch

MAGIC = b"CQNLS"
VERSION = 1
_HEAD = struct.Struct("<5sHBIddBddI")
_CRC = struct.Struct("<I")
TAGS = {"psi": 0, "v": 1}
_TAG_NAMES = {v: k for k, v in TAGS.items()}


@dataclass
class Snapshot:
    field: np.ndarray
    d: int
    m: int
    L: float
    t: float
    tag: str
    u2_mean: float = 0.0
    beta: float = 0.0
    flags: int = 0

    def header(self):
        return {
            "version": VERSION,
            "d": self.d,
            "m": self.m,
            "L": self.L,
            "t": self.t,
            "tag": self.tag,
            "u2_mean": self.u2_mean,
            "beta": self.beta,
            "flags": self.flags,
        }


def encode(snap):
    if snap.tag not in TAGS:
        raise SnapshotError(f"unknown variable tag {snap.tag!r}")
    arr = np.asarray(snap.field, dtype=np.complex128)
    if arr.shape != (snap.m,) * snap.d:
        raise SnapshotError(f"field shape {arr.shape} does not match m={snap.m}, d={snap.d}")
    payload = np.ascontiguousarray(arr).astype("<c16").tobytes()
    head = _HEAD.pack(MAGIC, VERSION, snap.d, snap.m, snap.L, snap.t, TAGS[snap.tag], snap.u2_mean, snap.beta, snap.flags)
    crc = zlib.crc32(payload, zlib.crc32(head))
    return head + _CRC.pack(crc) + payload


def decode(data, header_only=False):
    if len(data) < _HEAD.size + _CRC.size:
        raise TruncatedSnapshot(f"file has {len(data)} bytes, shorter than the {_HEAD.size + _CRC.size}-byte header")
    magic, version, d, m, L, t, tag, u2_mean, beta, flags = _HEAD.unpack_from(data, 0)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}; not a snapshot file")
    if version != VERSION:
        raise VersionMismatch(f"snapshot format version {version}, this build reads version {VERSION}")
    (crc,) = _CRC.unpack_from(data, _HEAD.size)
    expected = 16 * m**d
    payload = data[_HEAD.size + _CRC.size :]
    if len(payload) < expected:
        raise TruncatedSnapshot(f"payload has {len(payload)} bytes, expected {expected}")
    if len(payload) > expected:
        raise SnapshotError(f"payload has {len(payload) - expected} trailing bytes")
    if zlib.crc32(payload, zlib.crc32(data[: _HEAD.size])) != crc:
        raise ChecksumMismatch("snapshot checksum does not match its contents")
    if tag not in _TAG_NAMES:
        raise SnapshotError(f"unknown variable tag {tag}")
    field = None
    if not header_only:
        field = np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape((m,) * d)
    return Snapshot(field, d, m, L, t, _TAG_NAMES[tag], u2_mean, beta, flags)


def write(path, snap):
    with open(path, "wb") as fh:
        fh.write(encode(snap))


def read(path, header_only=False):
    with open(path, "rb") as fh:
        return decode(fh.read(), header_only=header_only)


def from_state(grid, state, beta, tag="v"):
    """Snapshot of a VState (tag "v") or of psi = 1 + u (tag "psi")."""
    from . import model

    if tag == "v":
        return Snapshot(state.v, grid.d, grid.m, grid.L, state.t, "v", state.u2_mean, beta)
    psi = model.psi_from_u(model.u_from_v(grid, state))
    return Snapshot(psi, grid.d, grid.m, grid.L, state.t, "psi", 0.0, beta)
