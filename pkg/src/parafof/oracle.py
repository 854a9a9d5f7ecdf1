"""Reference group finders and partition comparison.

Two deliberately independent implementations of the same clustering:

* :func:`naive_fof` — the quadratic textbook method: scan all particle pairs,
  link the close ones through a tiny self-contained union-find.
* :func:`bfs_fof` — breadth-first traversal of an explicit neighbour graph,
  with candidate neighbours from a k-d tree and distances re-checked by hand.

Neither shares code with the production engine (no shared grid, no shared
union-find), so agreement between all three is meaningful evidence.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import Box, as_linking_length
from .particles import Particles

#: naive_fof is quadratic; refuse inputs where that stops being a desk job.
NAIVE_MAX_N = 100_000


@dataclass(frozen=True, eq=False)
class Partition:
    """A partition of particle IDs into groups.

    Canonical form: ``rep`` maps every ID to the smallest ID in its group,
    so two partitions are equal exactly when their ``rep`` dicts are equal.
    """

    rep: dict[int, int] = field(default_factory=dict)

    @classmethod
    def from_labels(cls, ids, labels) -> "Partition":
        """Build from arbitrary group labels (anything equal-comparable)."""
        ids = np.asarray(ids, dtype=np.uint64)
        labels = np.asarray(labels)
        if ids.shape != labels.shape:
            raise ValueError("ids and labels must have the same shape")
        order = np.argsort(labels, kind="stable")
        sorted_ids = ids[order]
        sorted_labels = labels[order]
        rep: dict[int, int] = {}
        start = 0
        n = ids.size
        while start < n:
            stop = start
            while stop < n and sorted_labels[stop] == sorted_labels[start]:
                stop += 1
            block = sorted_ids[start:stop]
            m = int(block.min())
            for pid in block:
                rep[int(pid)] = m
            start = stop
        return cls(rep)

    @property
    def ids(self) -> set[int]:
        return set(self.rep)

    def group_of(self, pid: int) -> int:
        return self.rep[pid]

    def blocks(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for pid, r in self.rep.items():
            out.setdefault(r, []).append(pid)
        for members in out.values():
            members.sort()
        return out

    def sizes(self) -> list[int]:
        """Multiset of group sizes, sorted ascending."""
        counts: dict[int, int] = {}
        for r in self.rep.values():
            counts[r] = counts.get(r, 0) + 1
        return sorted(counts.values())

    def n_groups(self) -> int:
        return len(set(self.rep.values()))


def partitions_equal(a: Partition, b: Partition) -> tuple[bool, tuple[int, int] | None]:
    """Whether two partitions over the same IDs are identical.

    Returns ``(True, None)`` on equality, else ``(False, (u, v))`` where the
    pair is grouped together in one partition and apart in the other. Raises
    ``ValueError`` when the partitions cover different ID sets.
    """
    if a.ids != b.ids:
        raise ValueError("partitions cover different particle ID sets")
    for u, ra in a.rep.items():
        rb = b.rep[u]
        if ra == rb:
            continue
        # reps are minimum members, so a mismatch yields a witness directly:
        # either a's rep for u is not with u in b, or b's rep is not in a.
        if b.rep.get(ra) != rb:
            return False, (min(u, ra), max(u, ra))
        return False, (min(u, rb), max(u, rb))
    return True, None


class _MiniUF:
    """Minimal list-based union-find (the oracle keeps its own)."""

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        p = self.parent
        root = i
        while p[root] != root:
            root = p[root]
        while p[i] != root:
            p[i], i = root, p[i]
        return root

    def union(self, i: int, j: int) -> None:
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            if rj < ri:
                ri, rj = rj, ri
            self.parent[rj] = ri


def _pair_dist2_rows(pos: np.ndarray, i: int, box: Box) -> np.ndarray:
    d = pos[i + 1 :] - pos[i]
    if box.periodic:
        d = d - box.extent * np.round(d / box.extent)
    return np.einsum("ij,ij->i", d, d)


def naive_fof(particles: Particles, box: Box, l) -> Partition:
    """Quadratic all-pairs reference clustering (strict ``r < l``)."""
    l = as_linking_length(l)
    n = particles.n
    if n > NAIVE_MAX_N:
        raise ValueError(f"naive_fof is O(n^2); refusing n={n} > {NAIVE_MAX_N}")
    pos = np.mod(particles.positions, box.extent) if box.periodic else particles.positions
    uf = _MiniUF(n)
    lx2 = l.l2
    for i in range(n - 1):
        hits = np.nonzero(_pair_dist2_rows(pos, i, box) < lx2)[0]
        for j in hits:
            uf.union(i, i + 1 + int(j))
    labels = [uf.find(i) for i in range(n)]
    return Partition.from_labels(particles.ids, labels)


def bfs_fof(particles: Particles, box: Box, l) -> Partition:
    """Breadth-first-search reference clustering over an explicit neighbour
    graph (k-d tree candidates, re-filtered with strict ``r < l``)."""
    l = as_linking_length(l)
    n = particles.n
    if n == 0:
        return Partition({})
    if box.periodic:
        pos = np.mod(particles.positions, box.extent)
        pos[pos == box.extent] = 0.0
        tree = cKDTree(pos, boxsize=box.extent)
    else:
        pos = particles.positions
        tree = cKDTree(pos)
    # candidate lists include the <= boundary; re-check strictly by hand
    candidates = tree.query_ball_point(pos, l.value, return_sorted=True)
    neighbours: list[list[int]] = []
    for i, cand in enumerate(candidates):
        cand = np.asarray(cand, dtype=np.int64)
        cand = cand[cand != i]
        if cand.size:
            d = pos[cand] - pos[i]
            if box.periodic:
                d = d - box.extent * np.round(d / box.extent)
            keep = np.einsum("ij,ij->i", d, d) < l.l2
            neighbours.append(cand[keep].tolist())
        else:
            neighbours.append([])

    labels = np.full(n, -1, dtype=np.int64)
    for seed in range(n):
        if labels[seed] >= 0:
            continue
        labels[seed] = seed
        queue = deque([seed])
        while queue:
            u = queue.popleft()
            for v in neighbours[u]:
                if labels[v] < 0:
                    labels[v] = seed
                    queue.append(v)
    return Partition.from_labels(particles.ids, labels)
