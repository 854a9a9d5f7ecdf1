"""Synthetic particle sets and periodic volume replication."""

from __future__ import annotations

import numpy as np

from .geometry import Box
from .particles import Particles


def generate(
    kind: str,
    n: int,
    box: Box,
    seed: int,
    n_blobs: int = 32,
    blob_width: float | None = None,
) -> Particles:
    """Seeded random particles inside ``box``.

    ``kind="uniform"`` scatters independently; ``kind="blobs"`` draws each
    particle from one of ``n_blobs`` Gaussian clumps of width ``blob_width``
    (default: 2% of the smallest extent) around uniform centres.
    """
    n = int(n)
    if n < 0:
        raise ValueError(f"particle count must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        pos = rng.random((n, 3)) * box.extent
    elif kind == "blobs":
        n_blobs = int(n_blobs)
        if n_blobs < 1:
            raise ValueError(f"blob count must be >= 1, got {n_blobs}")
        if blob_width is None:
            blob_width = 0.02 * float(np.min(box.extent))
        centres = rng.random((n_blobs, 3)) * box.extent
        which = rng.integers(n_blobs, size=n)
        pos = centres[which] + rng.normal(0.0, blob_width, (n, 3))
        if box.periodic:
            pos = np.mod(pos, box.extent)
            pos[pos == box.extent] = 0.0
        else:
            pos = np.clip(pos, 0.0, np.nextafter(box.extent, 0.0))
    else:
        raise ValueError(f"unknown kind {kind!r} (expected 'uniform' or 'blobs')")
    return Particles(np.arange(n, dtype=np.uint64), pos)


def replicate(particles: Particles, box: Box, times: int) -> tuple[Particles, Box]:
    """Tile the volume ``times`` per axis (``times**3`` copies total).

    Copy ``(i, j, k)`` is shifted by ``(i, j, k) * extent`` and its particles
    get IDs ``replica_index * (max_id + 1) + original_id``, so every new ID
    decodes back to its source. ``times=1`` returns an identical copy.
    """
    times = int(times)
    if times < 1:
        raise ValueError(f"replication factor must be >= 1, got {times}")
    n = particles.n
    stride = int(particles.ids.max()) + 1 if n else 1
    n_copies = times**3
    if n and (n_copies - 1) * stride + (stride - 1) > np.iinfo(np.uint64).max:
        raise ValueError("replicated ids would overflow 64 bits")

    new_box = Box(box.extent * times, periodic=box.periodic)
    if n == 0:
        return Particles(particles.ids.copy(), particles.positions.copy()), new_box

    shifts = np.array(
        [
            (i, j, k)
            for i in range(times)
            for j in range(times)
            for k in range(times)
        ],
        dtype=np.float64,
    ) * box.extent
    pos = (particles.positions[None, :, :] + shifts[:, None, :]).reshape(-1, 3)
    replica = np.repeat(np.arange(n_copies, dtype=np.uint64), n)
    ids = replica * np.uint64(stride) + np.tile(particles.ids, n_copies)
    return Particles(ids, pos), new_box
