"""Binary snapshot persistence for phase-space states.

Layout (little-endian throughout):

    magic   4s   b"KGH1"
    version u16  format version, currently 1
    n       u8   spatial dimension
    M       u32  points per dimension
    extent  f64  box edge length
    time    f64  stamp of the state
    role    u8   0 = evolution snapshot, 1 = asymptotic pair
    crc     u32  CRC32 of the 28 header bytes above

followed by the payload: u then udot, each as complex128 in C order
(interleaved re/im f64 pairs), 2 * 2 * 8 * M^n bytes total.  States are
stored in the physical representation; round trips are bit exact.
"""

import struct
import zlib

import numpy as np

from .errors import (
    SnapshotChecksumError,
    SnapshotFormatError,
    SnapshotTruncatedError,
    SnapshotVersionError,
)
from .propagator import PhaseState
from .spectral import PHYSICAL, Field, Grid

MAGIC = b"KGH1"
VERSION = 1
HEADER_STRUCT = struct.Struct("<4sHBIddB")
CRC_STRUCT = struct.Struct("<I")

ROLE_SNAPSHOT = 0
ROLE_ASYMPTOTIC = 1


def write_snapshot(state, path, role=ROLE_SNAPSHOT):
    """Serialize a PhaseState (converted to physical representation) to path."""
    grid = state.grid
    phys = state.in_representation(PHYSICAL)
    header = HEADER_STRUCT.pack(
        MAGIC,
        VERSION,
        grid.dim,
        grid.points_per_dim,
        grid.extent,
        float(state.time),
        role,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(CRC_STRUCT.pack(zlib.crc32(header)))
        fh.write(np.ascontiguousarray(phys.u.data, dtype=np.complex128).tobytes())
        fh.write(np.ascontiguousarray(phys.udot.data, dtype=np.complex128).tobytes())


def read_snapshot(path):
    """Read a snapshot back into a PhaseState; returns (state, role)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_STRUCT.size + CRC_STRUCT.size:
        raise SnapshotTruncatedError(
            f"file holds {len(raw)} bytes, shorter than the {HEADER_STRUCT.size + CRC_STRUCT.size}-byte header"
        )
    header = raw[: HEADER_STRUCT.size]
    magic, version, dim, points, extent, time, role = HEADER_STRUCT.unpack(header)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}; not a snapshot file")
    (crc_stored,) = CRC_STRUCT.unpack(
        raw[HEADER_STRUCT.size : HEADER_STRUCT.size + CRC_STRUCT.size]
    )
    if crc_stored != zlib.crc32(header):
        raise SnapshotChecksumError(
            f"header checksum {crc_stored:#010x} does not match contents "
            f"{zlib.crc32(header):#010x}"
        )
    if version != VERSION:
        raise SnapshotVersionError(
            f"format version {version} is not the supported version {VERSION}"
        )
    count = points**dim
    payload = raw[HEADER_STRUCT.size + CRC_STRUCT.size :]
    expected = 2 * count * 16
    if len(payload) < expected:
        raise SnapshotTruncatedError(
            f"payload holds {len(payload)} bytes, expected {expected} "
            f"for two complex fields on {points}^{dim} points"
        )
    grid = Grid(dim, extent, points)
    flat = np.frombuffer(payload[:expected], dtype="<c16")
    u = flat[:count].reshape(grid.shape).astype(np.complex128)
    udot = flat[count:].reshape(grid.shape).astype(np.complex128)
    state = PhaseState(Field(grid, u, PHYSICAL), Field(grid, udot, PHYSICAL), time)
    return state, role
