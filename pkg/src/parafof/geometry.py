"""Simulation box, linking length, cell grid and proximity-task enumeration.

Particles are binned into a uniform grid whose cells are at least one linking
length on a side. Then every particle pair closer than the linking length is
either inside one cell (covered by that cell's *self* task) or inside two
cells whose boxes come within a linking length of each other (covered by a
*pair* task). In a periodic box a pair task targets one specific periodic
image of its second cell, recorded as a precomputed position shift, so the
inner distance loops never re-derive wrapping.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .particles import Particles

__all__ = [
    "Box",
    "LinkingLength",
    "CellGrid",
    "ProximityTask",
    "min_image_dist2",
    "wrap_positions",
    "build_grid",
    "task_arrays",
    "make_tasks",
]


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned simulation volume ``[0, extent) ** 3``.

    ``periodic`` applies to all three axes at once: either every face wraps
    onto the opposite face, or none does.
    """

    extent: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        ext = np.asarray(self.extent, dtype=np.float64)
        if ext.ndim == 0:
            ext = np.full(3, float(ext))
        ext = np.ascontiguousarray(ext)
        if ext.shape != (3,):
            raise ValueError(f"extent must be a scalar or length-3, got shape {ext.shape}")
        if not np.all(np.isfinite(ext)) or not np.all(ext > 0):
            raise ValueError(f"extents must be finite and positive, got {ext}")
        object.__setattr__(self, "extent", ext)
        object.__setattr__(self, "periodic", bool(self.periodic))


@dataclass(frozen=True)
class LinkingLength:
    """Distance below which two particles are direct neighbours (strict <)."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not np.isfinite(v) or v <= 0:
            raise ValueError(f"linking length must be finite and positive, got {v}")
        object.__setattr__(self, "value", v)

    @property
    def l2(self) -> float:
        return self.value * self.value


def as_linking_length(l) -> LinkingLength:
    return l if isinstance(l, LinkingLength) else LinkingLength(float(l))


def min_image_dist2(a, b, box: Box):
    """Squared distance between positions ``a`` and ``b`` (broadcastable
    ``(..., 3)`` arrays), taking the nearest periodic image when the box
    wraps. Positions are expected to lie inside the box."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    if box.periodic:
        d = d - box.extent * np.round(d / box.extent)
    return np.sum(d * d, axis=-1)


def wrap_positions(positions: np.ndarray, box: Box) -> np.ndarray:
    """Copy of ``positions`` folded into ``[0, extent)``.

    Periodic boxes wrap; non-periodic boxes require the input to already be
    inside the volume and raise otherwise.
    """
    pos = np.asarray(positions, dtype=np.float64)
    if box.periodic:
        wrapped = np.mod(pos, box.extent)
        # fp rounding can land a tiny negative exactly on the upper face
        wrapped[wrapped == box.extent] = 0.0
        return wrapped
    if pos.size and ((pos < 0).any() or (pos >= box.extent).any()):
        raise ValueError("positions fall outside the non-periodic box")
    return pos.copy()


@dataclass(frozen=True, eq=False)
class CellGrid:
    """Uniform cell binning of one particle set.

    ``dims`` is ``max(1, floor(extent / l))`` per axis, so every cell edge is
    at least one linking length (except on axes too thin to split, which get
    a single cell). Membership is stored CSR-style: ``order`` lists particle
    indices grouped by cell, ``starts[c]:starts[c+1]`` delimits cell ``c``.
    """

    dims: tuple[int, int, int]
    cell_edge: np.ndarray
    starts: np.ndarray
    order: np.ndarray
    positions: np.ndarray
    box: Box

    @property
    def cell_count(self) -> int:
        return int(np.prod(self.dims))

    @property
    def n_particles(self) -> int:
        return self.order.shape[0]

    def cell_index_of(self, positions) -> np.ndarray:
        """Flat (C-order) cell index for each wrapped position."""
        pos = np.asarray(positions, dtype=np.float64)
        coords = np.floor(pos / self.cell_edge).astype(np.int64)
        coords = np.clip(coords, 0, np.asarray(self.dims, dtype=np.int64) - 1)
        dx, dy, dz = self.dims
        return (coords[..., 0] * dy + coords[..., 1]) * dz + coords[..., 2]

    def bin_members(self, cell: int) -> np.ndarray:
        return self.order[self.starts[cell] : self.starts[cell + 1]]

    @property
    def bins(self) -> list[np.ndarray]:
        return [self.bin_members(c) for c in range(self.cell_count)]


@dataclass(frozen=True)
class ProximityTask:
    """One unit of pair-search work.

    ``kind`` is ``"self"`` (all ordered pairs inside one cell) or ``"pair"``
    (cross product of two cells, with ``shift`` added to the second cell's
    positions to select one periodic image).
    """

    kind: str
    cell_a: int
    cell_b: int
    shift: tuple[float, float, float] = (0.0, 0.0, 0.0)


def _validate_grid_inputs(box: Box, l: LinkingLength) -> None:
    if box.periodic and not np.all(l.value < box.extent / 2):
        raise ValueError(
            f"periodic boxes need l < extent/2 for unambiguous nearest images "
            f"(l={l.value}, extent={box.extent})"
        )


def build_grid(particles: Particles, box: Box, l) -> CellGrid:
    """Bin ``particles`` into the uniform grid for linking length ``l``."""
    l = as_linking_length(l)
    _validate_grid_inputs(box, l)
    dims_arr = np.maximum(1, np.floor(box.extent / l.value).astype(np.int64))
    dims = (int(dims_arr[0]), int(dims_arr[1]), int(dims_arr[2]))
    cell_edge = box.extent / dims_arr
    wrapped = wrap_positions(particles.positions, box)

    grid = CellGrid(
        dims=dims,
        cell_edge=cell_edge,
        starts=np.zeros(1, dtype=np.int64),
        order=np.zeros(0, dtype=np.int64),
        positions=wrapped,
        box=box,
    )
    flat = grid.cell_index_of(wrapped)
    counts = np.bincount(flat, minlength=grid.cell_count)
    starts = np.zeros(grid.cell_count + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    order = np.argsort(flat, kind="stable").astype(np.int64)
    object.__setattr__(grid, "starts", starts)
    object.__setattr__(grid, "order", order)
    return grid


def _half_offsets(ks: tuple[int, int, int]) -> np.ndarray:
    offs = [
        o
        for o in product(*(range(-k, k + 1) for k in ks))
        if o > (0, 0, 0)
    ]
    return np.asarray(offs, dtype=np.int64).reshape(-1, 3)


def task_arrays(grid: CellGrid, box: Box, l) -> tuple[np.ndarray, np.ndarray, int]:
    """Proximity tasks in array form: ``(cells, shifts, n_self)``.

    ``cells`` is ``(T, 2)`` int64 (self tasks first, ``cell_a == cell_b``),
    ``shifts`` is the matching ``(T, 3)`` float64 position offset applied to
    the second cell. Order is deterministic: self tasks by cell index, pair
    tasks by (cell_a, cell_b, image code).
    """
    l = as_linking_length(l)
    lx2 = l.l2
    dims = np.asarray(grid.dims, dtype=np.int64)
    dy, dz = int(dims[1]), int(dims[2])
    ncells = grid.cell_count
    counts = np.diff(grid.starts)
    nonempty = np.flatnonzero(counts > 0).astype(np.int64)

    # Stencil radius: adjacent cells always; one cell further only on axes
    # where the cell edge equals l exactly (box-to-box gap == l qualifies).
    ks = tuple(2 if grid.cell_edge[d] <= l.value else 1 for d in range(3))
    offsets = _half_offsets(ks)

    # Per-offset squared gap between a cell's box and the offset image's box;
    # independent of which cell, since all cells share one edge length.
    per_axis_gap = np.maximum(0, np.abs(offsets) - 1) * grid.cell_edge
    off_gap2 = np.sum(per_axis_gap * per_axis_gap, axis=1)
    keep = off_gap2 <= lx2
    offsets, off_gap2 = offsets[keep], off_gap2[keep]

    if nonempty.size == 0 or offsets.shape[0] == 0:
        cells = np.repeat(nonempty, 2).reshape(-1, 2)
        return cells, np.zeros((nonempty.size, 3)), int(nonempty.size)

    cx = nonempty // (dy * dz)
    cy = (nonempty // dz) % dy
    cz = nonempty % dz
    coords = np.stack([cx, cy, cz], axis=1)  # (C, 3)

    raw = coords[:, None, :] + offsets[None, :, :]  # (C, M, 3)
    if box.periodic:
        nb_coords = np.mod(raw, dims)
        wrap = (raw - nb_coords) // dims
        valid = np.ones(raw.shape[:2], dtype=bool)
    else:
        nb_coords = raw
        wrap = np.zeros_like(raw)
        valid = np.all((raw >= 0) & (raw < dims), axis=2)

    ca = np.broadcast_to(nonempty[:, None], valid.shape)
    cb = (nb_coords[..., 0] * dy + nb_coords[..., 1]) * dz + nb_coords[..., 2]
    g2 = np.broadcast_to(off_gap2[None, :], valid.shape)

    valid = valid & (cb != ca)  # a cell paired with its own image is a no-op
    valid = valid & (counts[np.clip(cb, 0, ncells - 1)] > 0)

    ca, cb = ca[valid], cb[valid]
    w, g2 = wrap[valid], g2[valid]

    # Canonical orientation: low cell first; the image flips with it.
    swap = ca > cb
    ca2 = np.where(swap, cb, ca)
    cb2 = np.where(swap, ca, cb)
    w = np.where(swap[:, None], -w, w)

    wcode = (w[:, 0] + 1) * 9 + (w[:, 1] + 1) * 3 + (w[:, 2] + 1)
    pairkey = ca2.astype(np.uint64) * np.uint64(ncells) + cb2.astype(np.uint64)
    fullkey = pairkey * np.uint64(27) + wcode.astype(np.uint64)

    fullkey, first_idx = np.unique(fullkey, return_index=True)
    g2 = g2[first_idx]

    pairkey = fullkey // np.uint64(27)
    wcode = (fullkey % np.uint64(27)).astype(np.int64)

    # Per cell pair keep every image strictly closer than l; a pair whose
    # only qualifying images sit exactly at gap l keeps just its first image
    # (those tasks cannot produce links but the pair still formally qualifies).
    strict = g2 < lx2
    _, group_starts, group_counts = np.unique(
        pairkey, return_index=True, return_counts=True
    )
    has_strict = np.add.reduceat(strict.astype(np.int64), group_starts) > 0
    select = strict.copy()
    select[group_starts[~has_strict]] = True

    pairkey, wcode = pairkey[select], wcode[select]
    pa = (pairkey // np.uint64(ncells)).astype(np.int64)
    pb = (pairkey % np.uint64(ncells)).astype(np.int64)
    wvec = np.stack([wcode // 9 - 1, (wcode // 3) % 3 - 1, wcode % 3 - 1], axis=1)

    n_self = int(nonempty.size)
    cells = np.concatenate(
        [np.repeat(nonempty, 2).reshape(-1, 2), np.stack([pa, pb], axis=1)]
    )
    shifts = np.concatenate(
        [np.zeros((n_self, 3)), wvec.astype(np.float64) * box.extent[None, :]]
    )
    return np.ascontiguousarray(cells), np.ascontiguousarray(shifts), n_self


def make_tasks(grid: CellGrid, box: Box, l) -> list[ProximityTask]:
    """Proximity tasks as objects; see :func:`task_arrays` for ordering."""
    cells, shifts, n_self = task_arrays(grid, box, l)
    tasks = []
    for t in range(cells.shape[0]):
        kind = "self" if t < n_self else "pair"
        tasks.append(
            ProximityTask(
                kind=kind,
                cell_a=int(cells[t, 0]),
                cell_b=int(cells[t, 1]),
                shift=(float(shifts[t, 0]), float(shifts[t, 1]), float(shifts[t, 2])),
            )
        )
    return tasks
