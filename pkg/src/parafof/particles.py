"""Particle container shared by the finder, the oracles and the I/O layer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Particles:
    """A set of point particles.

    Attributes
    ----------
    ids : numpy.ndarray
        Unique ``uint64`` identifiers, one per particle. IDs survive
        redistribution across domains, so group membership is always reported
        against them rather than against storage order.
    positions : numpy.ndarray
        ``float64`` coordinates, shape ``(n, 3)``.
    """

    ids: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        ids = np.ascontiguousarray(self.ids, dtype=np.uint64)
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (n, 3), got {pos.shape}")
        if ids.ndim != 1 or ids.shape[0] != pos.shape[0]:
            raise ValueError("ids and positions must have matching lengths")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions contain non-finite coordinates")
        if ids.size and np.unique(ids).size != ids.size:
            raise ValueError("particle ids must be unique")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "positions", pos)

    @property
    def n(self) -> int:
        return self.ids.shape[0]

    def __len__(self) -> int:
        return self.n

    @classmethod
    def from_positions(cls, positions) -> "Particles":
        """Particles with ids equal to their storage index."""
        pos = np.asarray(positions, dtype=np.float64)
        return cls(np.arange(pos.shape[0], dtype=np.uint64), pos)
