"""Shared-memory group finder: threads drain a queue of proximity tasks and
link close particle pairs through the lock-free union-find.

Tasks are claimed with an atomic cursor (fetch-add on a shared counter), so
scheduling is dynamic without any lock. Group sizes are then tallied either
serially or by per-thread hash tables that are flushed into a shared array
with atomic adds; both routes produce bit-identical size arrays.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._atomics import atomic_add
from .geometry import Box, as_linking_length, build_grid, task_arrays
from .particles import Particles
from .unionfind import UnionFind, _find, _union_concurrent

#: groups smaller than this are dropped from catalogs unless asked otherwise
DEFAULT_MIN_SIZE = 20

_EMPTY = np.uint64(0xFFFFFFFFFFFFFFFF)
_HASH_MULT = np.uint64(0x9E3779B97F4A7C15)


@njit(nogil=True, cache=True)
def _fof_worker(parent, pos, starts, order, cells, shifts, lx2, cursor):
    n_tasks = np.uint64(cells.shape[0])
    while True:
        t = atomic_add(cursor, 0, np.uint64(1))
        if t >= n_tasks:
            break
        ti = np.int64(t)
        ca = cells[ti, 0]
        cb = cells[ti, 1]
        a0 = starts[ca]
        a1 = starts[ca + 1]
        if ca == cb:
            for ui in range(a0, a1):
                i = order[ui]
                xi = pos[i, 0]
                yi = pos[i, 1]
                zi = pos[i, 2]
                for vi in range(ui + 1, a1):
                    j = order[vi]
                    dx = xi - pos[j, 0]
                    dy = yi - pos[j, 1]
                    dz = zi - pos[j, 2]
                    if dx * dx + dy * dy + dz * dz < lx2:
                        _union_concurrent(parent, np.uint64(i), np.uint64(j))
        else:
            b0 = starts[cb]
            b1 = starts[cb + 1]
            sx = shifts[ti, 0]
            sy = shifts[ti, 1]
            sz = shifts[ti, 2]
            for ui in range(a0, a1):
                i = order[ui]
                xi = pos[i, 0]
                yi = pos[i, 1]
                zi = pos[i, 2]
                for vi in range(b0, b1):
                    j = order[vi]
                    dx = xi - (pos[j, 0] + sx)
                    dy = yi - (pos[j, 1] + sy)
                    dz = zi - (pos[j, 2] + sz)
                    if dx * dx + dy * dy + dz * dz < lx2:
                        _union_concurrent(parent, np.uint64(i), np.uint64(j))


@njit(cache=True)
def _sizes_serial(parent, gs):
    for i in range(parent.shape[0]):
        root, _ = _find(parent, np.uint64(i))
        gs[np.int64(root)] += np.uint64(1)


@njit(nogil=True, cache=True)
def _sizes_chunk(parent, gs, start, stop):
    # Per-thread open-addressed table: power-of-two capacity, Fibonacci
    # hashing, linear probing. Only non-root members are inserted, so no
    # entry can ever describe a group of total size 1.
    cap = np.int64(16)
    need = (stop - start) * 2
    while cap < need:
        cap *= 2
    keys = np.full(cap, _EMPTY, dtype=np.uint64)
    vals = np.zeros(cap, dtype=np.uint64)
    mask = np.uint64(cap - 1)
    for i in range(start, stop):
        iu = np.uint64(i)
        root, _ = _find(parent, iu)
        if root == iu:
            continue  # the root's own +1 is applied after the flush
        h = (root * _HASH_MULT) & mask
        while True:
            k = keys[h]
            if k == root:
                vals[h] += np.uint64(1)
                break
            if k == _EMPTY:
                keys[h] = root
                vals[h] = np.uint64(1)
                break
            h = (h + np.uint64(1)) & mask
    for s in range(cap):
        if keys[s] != _EMPTY:
            atomic_add(gs, np.int64(keys[s]), vals[s])
    return keys, vals


_warmed = False


def _ensure_warm() -> None:
    """Compile the hot kernels on the calling thread (cached across runs)."""
    global _warmed
    if _warmed:
        return
    parent = np.zeros(1, dtype=np.uint64)
    pos = np.zeros((1, 3))
    starts = np.array([0, 1], dtype=np.int64)
    order = np.zeros(1, dtype=np.int64)
    cells = np.zeros((1, 2), dtype=np.int64)
    shifts = np.zeros((1, 3))
    cursor = np.zeros(1, dtype=np.uint64)
    _fof_worker(parent, pos, starts, order, cells, shifts, 1.0, cursor)
    _sizes_serial(parent, np.zeros(1, dtype=np.uint64))
    _sizes_chunk(parent, np.zeros(1, dtype=np.uint64), 0, 1)
    _warmed = True


def run_local_fof(
    particles: Particles, box: Box, l, thread_count: int = 1
) -> UnionFind:
    """Find all friends-of-friends groups of ``particles`` in ``box``.

    Returns the quiesced union-find: two particles share a root exactly when
    some chain of strictly-closer-than-``l`` steps connects them. With
    ``thread_count > 1`` the proximity tasks are processed by that many OS
    threads racing on the shared forest.
    """
    l = as_linking_length(l)
    thread_count = int(thread_count)
    if thread_count < 1:
        raise ValueError(f"thread_count must be >= 1, got {thread_count}")
    grid = build_grid(particles, box, l)
    cells, shifts, _ = task_arrays(grid, box, l)
    uf = UnionFind(particles.n)
    if cells.shape[0] == 0:
        return uf
    _ensure_warm()
    cursor = np.zeros(1, dtype=np.uint64)
    args = (
        uf.parent,
        grid.positions,
        grid.starts,
        grid.order,
        cells,
        shifts,
        l.l2,
        cursor,
    )
    if thread_count == 1:
        _fof_worker(*args)
    else:
        with ThreadPoolExecutor(max_workers=thread_count) as pool:
            futures = [pool.submit(_fof_worker, *args) for _ in range(thread_count)]
            for fut in futures:
                fut.result()
    return uf


def compute_group_sizes_serial(uf: UnionFind) -> np.ndarray:
    """Group size at each root slot, zero elsewhere (single-threaded tally)."""
    gs = np.zeros(len(uf), dtype=np.uint64)
    _ensure_warm()
    _sizes_serial(uf.parent, gs)
    return gs


def _chunk_bounds(n: int, parts: int) -> list[tuple[int, int]]:
    return [(k * n // parts, (k + 1) * n // parts) for k in range(parts)]


def compute_group_sizes_parallel(
    uf: UnionFind, thread_count: int = 1, collect_tables: bool = False
):
    """Group size at each root slot, zero elsewhere, tallied by
    ``thread_count`` threads over contiguous index chunks.

    Bit-identical to :func:`compute_group_sizes_serial`. With
    ``collect_tables`` the per-thread hash tables (keys, counts) are returned
    as well, for inspection.
    """
    thread_count = int(thread_count)
    if thread_count < 1:
        raise ValueError(f"thread_count must be >= 1, got {thread_count}")
    n = len(uf)
    gs = np.zeros(n, dtype=np.uint64)
    _ensure_warm()
    bounds = _chunk_bounds(n, thread_count)
    if thread_count == 1:
        tables = [_sizes_chunk(uf.parent, gs, *bounds[0])]
    else:
        with ThreadPoolExecutor(max_workers=thread_count) as pool:
            futures = [
                pool.submit(_sizes_chunk, uf.parent, gs, a, b) for a, b in bounds
            ]
            tables = [fut.result() for fut in futures]
    # every root counts itself once
    gs[uf.parent == np.arange(n, dtype=np.uint64)] += np.uint64(1)
    if collect_tables:
        return gs, tables
    return gs


@dataclass(frozen=True, eq=False)
class GroupCatalog:
    """Groups that passed the size threshold, largest first (ties broken by
    ascending root id). ``roots`` hold global particle indices."""

    roots: np.ndarray
    sizes: np.ndarray
    min_size: int

    @property
    def n_groups(self) -> int:
        return self.roots.shape[0]

    def __len__(self) -> int:
        return self.n_groups

    def size_multiset(self) -> list[int]:
        return sorted(int(s) for s in self.sizes)


def extract_catalog(
    uf: UnionFind, group_size: np.ndarray, min_size: int = DEFAULT_MIN_SIZE
) -> GroupCatalog:
    """Select groups with ``size >= min_size`` from a quiesced forest."""
    min_size = int(min_size)
    if min_size < 1:
        raise ValueError(f"min_size must be >= 1, got {min_size}")
    roots = np.flatnonzero(group_size >= np.uint64(min_size)).astype(np.uint64)
    sizes = group_size[roots.astype(np.int64)]
    order = np.lexsort((roots, -sizes.astype(np.int64)))
    return GroupCatalog(roots=roots[order], sizes=sizes[order], min_size=min_size)


def membership_table(
    uf: UnionFind, catalog: GroupCatalog, ids: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(particle id, group root) pairs for particles in catalogued groups,
    in particle storage order."""
    labels = uf.find_all()
    if ids is None:
        ids = np.arange(len(uf), dtype=np.uint64)
    keep = np.isin(labels, catalog.roots)
    return np.asarray(ids, dtype=np.uint64)[keep], labels[keep]
