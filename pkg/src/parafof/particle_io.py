"""Particle snapshot files (binary and text) and result tables.

Binary layout (little-endian, no padding)::

    magic   4 bytes  b"FOF1"
    version u32      currently 1
    count   u64
    extent  3 x f64
    periodic u8      0 or 1
    records count x (u64 id, 3 x f64 position)

The text form is a CSV with one comment line carrying the box::

    # box=<ex>,<ey>,<ez> periodic=<0|1>
    id,x,y,z

Floats are written with ``repr`` so both forms round-trip bit-exactly.
:func:`load_particles` sniffs the magic to pick the reader.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .engine import GroupCatalog
from .geometry import Box
from .particles import Particles

MAGIC = b"FOF1"
VERSION = 1

_HEADER = struct.Struct("<4sIQ3dB")
_RECORD_DTYPE = np.dtype([("id", "<u8"), ("pos", "<f8", (3,))])


def write_particles_binary(path, particles: Particles, box: Box) -> None:
    path = Path(path)
    header = _HEADER.pack(
        MAGIC,
        VERSION,
        particles.n,
        float(box.extent[0]),
        float(box.extent[1]),
        float(box.extent[2]),
        1 if box.periodic else 0,
    )
    records = np.zeros(particles.n, dtype=_RECORD_DTYPE)
    records["id"] = particles.ids
    records["pos"] = particles.positions
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def read_particles_binary(path) -> tuple[Particles, Box]:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    magic, version, count, ex, ey, ez, periodic = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    if periodic not in (0, 1):
        raise ValueError(f"{path}: periodic flag must be 0 or 1, got {periodic}")
    body = blob[_HEADER.size :]
    expected = count * _RECORD_DTYPE.itemsize
    if len(body) != expected:
        raise ValueError(
            f"{path}: body holds {len(body)} bytes but header promises {expected}"
        )
    records = np.frombuffer(body, dtype=_RECORD_DTYPE)
    particles = Particles(records["id"].copy(), records["pos"].copy())
    return particles, Box(np.array([ex, ey, ez]), periodic=bool(periodic))


def write_particles_text(path, particles: Particles, box: Box) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        ex, ey, ez = (float(v) for v in box.extent)
        fh.write(f"# box={ex!r},{ey!r},{ez!r} periodic={1 if box.periodic else 0}\n")
        fh.write("id,x,y,z\n")
        for pid, (x, y, z) in zip(particles.ids, particles.positions):
            fh.write(f"{int(pid)},{float(x)!r},{float(y)!r},{float(z)!r}\n")


def read_particles_text(path) -> tuple[Particles, Box]:
    path = Path(path)
    with open(path, "r") as fh:
        first = fh.readline().strip()
        if not first.startswith("# box="):
            raise ValueError(f"{path}: missing '# box=' header line")
        try:
            boxpart, perpart = first[2:].split(" ")
            extents = [float(v) for v in boxpart.split("=", 1)[1].split(",")]
            periodic = int(perpart.split("=", 1)[1])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: malformed header {first!r}") from exc
        if len(extents) != 3 or periodic not in (0, 1):
            raise ValueError(f"{path}: malformed header {first!r}")
        header = fh.readline().strip()
        if header != "id,x,y,z":
            raise ValueError(f"{path}: expected 'id,x,y,z' header, got {header!r}")
        ids, rows = [], []
        for ln, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise ValueError(f"{path}:{ln}: expected 4 fields, got {len(parts)}")
            ids.append(int(parts[0]))
            rows.append([float(parts[1]), float(parts[2]), float(parts[3])])
    particles = Particles(
        np.asarray(ids, dtype=np.uint64),
        np.asarray(rows, dtype=np.float64).reshape(-1, 3),
    )
    return particles, Box(np.asarray(extents), periodic=bool(periodic))


def save_particles(path, particles: Particles, box: Box, fmt: str = "auto") -> None:
    """Write a snapshot; ``fmt`` is ``binary``, ``text`` or ``auto`` (text for
    .csv/.txt extensions, binary otherwise)."""
    if fmt == "auto":
        fmt = "text" if Path(path).suffix.lower() in (".csv", ".txt") else "binary"
    if fmt == "binary":
        write_particles_binary(path, particles, box)
    elif fmt == "text":
        write_particles_text(path, particles, box)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def load_particles(path) -> tuple[Particles, Box]:
    """Read a snapshot, sniffing binary vs text by the leading magic."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        return read_particles_binary(path)
    return read_particles_text(path)


def write_catalog_csv(path, catalog: GroupCatalog) -> None:
    """Group table: ``group_id,size`` rows in catalog order."""
    with open(path, "w", newline="") as fh:
        fh.write("group_id,size\n")
        for root, size in zip(catalog.roots, catalog.sizes):
            fh.write(f"{int(root)},{int(size)}\n")


def write_membership_csv(path, particle_ids, group_ids) -> None:
    """Membership table: ``particle_id,group_id`` rows."""
    pids = np.asarray(particle_ids, dtype=np.uint64)
    gids = np.asarray(group_ids, dtype=np.uint64)
    if pids.shape != gids.shape:
        raise ValueError("particle and group id columns must match in length")
    with open(path, "w", newline="") as fh:
        fh.write("particle_id,group_id\n")
        for pid, gid in zip(pids, gids):
            fh.write(f"{int(pid)},{int(gid)}\n")
