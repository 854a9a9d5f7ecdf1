"""Disjoint-set forest over particle indices.

The forest is a flat ``uint64`` parent array where ``parent[i] == i`` marks a
root. Merging always points the larger root at the smaller one, so the root of
every set is its minimum member and parent values only ever decrease. Lookups
compress paths, but only once a walk is at least two hops deep — short chains
are left alone so that quiescent scans are write-free.

Two update modes are provided: a plain serial union, and a lock-free union
whose link step is a compare-exchange retry loop safe under concurrent calls
from nogil threads.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ._atomics import atomic_cas, atomic_load, atomic_store

#: Walks shallower than this many hops perform no compression writes.
COMPRESS_MIN_DEPTH = 2


@njit(nogil=True, cache=True)
def _find(parent, i):
    # Returns (root, slots_rewritten).
    root = np.uint64(i)
    hops = 0
    while True:
        p = atomic_load(parent, root)
        if p == root:
            break
        root = p
        hops += 1
    writes = 0
    if hops >= COMPRESS_MIN_DEPTH:
        # Re-walk from i, pointing every traversed slot at the root. The
        # re-read guard (stop once the stored value is <= root) keeps racing
        # compressions from ever pointing a slot below its own root.
        v = np.uint64(i)
        while True:
            pv = atomic_load(parent, v)
            if pv <= root:
                break
            atomic_store(parent, v, root)
            writes += 1
            v = pv
    return root, writes


@njit(nogil=True, cache=True)
def _union_concurrent(parent, i, j):
    while True:
        ri, _ = _find(parent, i)
        rj, _ = _find(parent, j)
        if ri == rj:
            return
        # CAS against the root find just returned: if another thread merged
        # that root in the meantime the exchange fails and we retry with
        # fresh roots, so no established link is ever overwritten.
        if rj < ri:
            if atomic_cas(parent, ri, ri, rj) == ri:
                return
        else:
            if atomic_cas(parent, rj, rj, ri) == rj:
                return


@njit(cache=True)
def _union_serial(parent, i, j):
    ri, _ = _find(parent, i)
    rj, _ = _find(parent, j)
    if ri == rj:
        return
    if rj < ri:
        parent[ri] = rj
    else:
        parent[rj] = ri


@njit(nogil=True, cache=True)
def _union_batch(parent, edges):
    for k in range(edges.shape[0]):
        _union_concurrent(parent, edges[k, 0], edges[k, 1])


@njit(nogil=True, cache=True)
def _update_root_reread(parent, slot, new_root):
    # Compare-exchange against a value read immediately beforehand; reports
    # whether the slot was still unchanged when the exchange ran.
    old = atomic_load(parent, slot)
    prev = atomic_cas(parent, slot, old, new_root)
    return prev == old


@njit(cache=True)
def _find_all(parent, out):
    total_writes = 0
    for i in range(parent.shape[0]):
        root, writes = _find(parent, np.uint64(i))
        out[i] = root
        total_writes += writes
    return total_writes


class UnionFind:
    """Union-find forest over the index set ``0..n-1``.

    Parameters
    ----------
    n : int
        Number of elements; each starts as its own singleton root.
    """

    __slots__ = ("parent",)

    def __init__(self, n: int):
        n = int(n)
        if n < 0:
            raise ValueError(f"element count must be >= 0, got {n}")
        self.parent = np.arange(n, dtype=np.uint64)

    @classmethod
    def from_parent(cls, parent) -> "UnionFind":
        """Wrap an explicit parent array (copied). Every entry must satisfy
        ``parent[i] <= i`` — roots are minimum members by construction."""
        arr = np.asarray(parent, dtype=np.uint64).copy()
        if arr.ndim != 1:
            raise ValueError("parent array must be one-dimensional")
        if arr.size and (arr > np.arange(arr.size, dtype=np.uint64)).any():
            raise ValueError("parent[i] must be <= i for every slot")
        uf = cls(0)
        uf.parent = arr
        return uf

    def __len__(self) -> int:
        return self.parent.shape[0]

    def _check_index(self, i: int) -> np.uint64:
        i = int(i)
        if not 0 <= i < len(self):
            raise IndexError(f"index {i} out of range for {len(self)} elements")
        return np.uint64(i)

    def find(self, i: int) -> int:
        """Root of ``i``'s set, compressing the walked path when it is at
        least :data:`COMPRESS_MIN_DEPTH` hops deep."""
        root, _ = _find(self.parent, self._check_index(i))
        return int(root)

    def find_traced(self, i: int) -> tuple[int, int]:
        """Like :meth:`find` but also reports how many slots the compression
        pass rewrote."""
        root, writes = _find(self.parent, self._check_index(i))
        return int(root), int(writes)

    def union_serial(self, i: int, j: int) -> None:
        """Merge the sets of ``i`` and ``j``; single-threaded callers only."""
        _union_serial(self.parent, self._check_index(i), self._check_index(j))

    def union_concurrent(self, i: int, j: int) -> None:
        """Merge the sets of ``i`` and ``j``; safe from concurrent threads."""
        _union_concurrent(self.parent, self._check_index(i), self._check_index(j))

    def union_edges(self, edges) -> None:
        """Apply ``union_concurrent`` over an ``(m, 2)`` array of index pairs
        in one nogil call (threads running this in parallel genuinely race)."""
        arr = np.ascontiguousarray(edges, dtype=np.uint64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("edges must have shape (m, 2)")
        if arr.size and int(arr.max()) >= len(self):
            raise IndexError("edge endpoint out of range")
        _union_batch(self.parent, arr)

    # -- slot-level atomic contract -------------------------------------
    def load(self, slot: int) -> int:
        """Atomic read of one parent slot."""
        return int(_load_slot(self.parent, self._check_index(slot)))

    def compare_exchange(self, slot: int, expected: int, desired: int) -> bool:
        """Atomically replace ``parent[slot]`` with ``desired`` iff it still
        equals ``expected``; True on success."""
        prev = _cas_slot(
            self.parent,
            self._check_index(slot),
            np.uint64(int(expected)),
            np.uint64(int(desired)),
        )
        return int(prev) == int(expected)

    def store(self, slot: int, value: int) -> None:
        """Atomic write of one parent slot; callers keep values monotone."""
        _store_slot(self.parent, self._check_index(slot), np.uint64(int(value)))

    def atomic_update_root(self, slot: int, new_root: int) -> bool:
        """Point ``slot`` at ``new_root`` unless the slot changes under the
        caller: the value is re-read and the exchange runs against that fresh
        read, reporting False if the slot moved during the attempt."""
        return bool(
            _update_root_reread(
                self.parent, self._check_index(slot), np.uint64(int(new_root))
            )
        )

    # -- bulk queries ---------------------------------------------------
    def find_all(self) -> np.ndarray:
        """Root label for every element (compresses all chains to depth <= 1)."""
        out = np.empty(len(self), dtype=np.uint64)
        _find_all(self.parent, out)
        return out

    def find_all_traced(self) -> tuple[np.ndarray, int]:
        """(labels, total compression writes) for a full scan."""
        out = np.empty(len(self), dtype=np.uint64)
        writes = _find_all(self.parent, out)
        return out, int(writes)

    def roots(self) -> np.ndarray:
        """Indices that are currently their own parent."""
        return np.flatnonzero(self.parent == np.arange(len(self), dtype=np.uint64))


@njit(cache=True)
def _load_slot(parent, slot):
    return atomic_load(parent, slot)


@njit(cache=True)
def _cas_slot(parent, slot, expected, desired):
    return atomic_cas(parent, slot, expected, desired)


@njit(cache=True)
def _store_slot(parent, slot, value):
    atomic_store(parent, slot, value)
