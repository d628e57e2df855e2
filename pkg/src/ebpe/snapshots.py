"""Binary state snapshots with a bit-exact round trip.

Layout (little endian): magic "EBPE", version byte 0x01, a flags byte
(bit 0: a surface-noise channel follows the prognostic blocks), u32
(Nx, Ny, Nz), f64 time, then row-major f64 blocks in fixed order
v1, v2, T, rho and optionally Z_rho.  No compression: restart must
reproduce runs bit for bit.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Grid
from .timestep import State

MAGIC = b"EBPE"
VERSION = 1
FLAG_Z_RHO = 0x01

_HEADER = struct.Struct("<4sBBIIId")


class SnapshotError(ValueError):
    """Corrupt, truncated or mismatched snapshot file."""


def write_snapshot(state: State, path, z_rho: np.ndarray | None = None) -> None:
    nx, ny, nlev = state.T.shape
    nz = nlev - 1
    flags = FLAG_Z_RHO if z_rho is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flags, nx, ny, nz, state.t))
        for block in (state.v[0], state.v[1], state.T, state.rho):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
        if z_rho is not None:
            fh.write(np.ascontiguousarray(z_rho, dtype="<f8").tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    buf = fh.read(count)
    if len(buf) != count:
        raise SnapshotError(f"truncated snapshot: {what} ({len(buf)}/{count} bytes)")
    return buf


def read_snapshot(path, grid: Grid | None = None) -> tuple[State, np.ndarray | None]:
    """Read a snapshot; the returned state carries step = 0 (set by the caller
    from time and step size when resuming a run)."""
    with open(path, "rb") as fh:
        header = _read_exact(fh, _HEADER.size, "header")
        magic, version, flags, nx, ny, nz, t = _HEADER.unpack(header)
        if magic != MAGIC:
            raise SnapshotError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise SnapshotError(f"unsupported snapshot version {version}")
        if grid is not None and (nx, ny, nz) != (grid.nx, grid.ny, grid.nz):
            raise SnapshotError(
                f"snapshot dimensions ({nx},{ny},{nz}) do not match the "
                f"active grid ({grid.nx},{grid.ny},{grid.nz})"
            )
        nlev = nz + 1

        def block(shape, what):
            n = int(np.prod(shape))
            raw = _read_exact(fh, 8 * n, what)
            return np.frombuffer(raw, dtype="<f8").reshape(shape).copy()

        v = np.empty((2, nx, ny, nlev))
        v[0] = block((nx, ny, nlev), "v1")
        v[1] = block((nx, ny, nlev), "v2")
        T = block((nx, ny, nlev), "T")
        rho = block((nx, ny), "rho")
        z_rho = None
        if flags & FLAG_Z_RHO:
            z_rho = block((nx, ny), "Z_rho")
        trailing = fh.read(1)
        if trailing:
            raise SnapshotError("snapshot has trailing bytes past the field blocks")
    state = State(v=v, T=T, rho=rho, t=t, step=0)
    return state, z_rho
