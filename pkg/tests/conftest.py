"""Shared fixtures: seeded random problem instances."""

from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, settings

from parafof import Box, Particles

settings.register_profile(
    "suite",
    max_examples=40,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("suite")


def random_instance(seed: int, n_min: int = 10, n_max: int = 2000):
    """One seeded clustering problem: (particles, box, linking length).

    Varies box shape, periodicity, population style (uniform, clumped, mixed,
    with occasional exact duplicates) and linking length around the mean
    interparticle spacing, so group structure ranges from dust to percolation.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_min, n_max + 1))
    periodic = bool(rng.integers(2))
    if rng.integers(2):
        extent = np.full(3, rng.uniform(4.0, 20.0))
    else:
        extent = rng.uniform(4.0, 20.0, size=3)
    box = Box(extent, periodic=periodic)

    style = rng.integers(4)
    if style == 0:
        pos = rng.random((n, 3)) * extent
    else:
        n_blobs = int(rng.integers(3, 20))
        width = rng.uniform(0.01, 0.08) * float(extent.min())
        centres = rng.random((n_blobs, 3)) * extent
        pos = centres[rng.integers(n_blobs, size=n)] + rng.normal(0, width, (n, 3))
        if style == 2 and n >= 20:  # mixed: a uniform background too
            k = n // 3
            pos[:k] = rng.random((k, 3)) * extent
        pos = np.mod(pos, extent)
        pos[pos == extent] = 0.0
    if style == 3 and n >= 10:  # exact duplicates stress zero distances
        k = n // 10
        pos[-k:] = pos[:k]

    spacing = float((np.prod(extent) / n) ** (1.0 / 3.0))
    l = rng.uniform(0.4, 1.1) * spacing
    l = min(l, 0.45 * float(extent.min()))

    ids = rng.permutation(n).astype(np.uint64)
    if rng.integers(2):
        ids = ids + np.uint64(int(rng.integers(1, 10_000)))
    return Particles(ids, pos), box, l
