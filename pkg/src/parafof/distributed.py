"""Multi-domain group finding: local passes on every rank, then a boundary
exchange and a replicated merge that stitches cross-domain fragments.

The box is tiled into one axis-aligned block per rank. Each rank finds groups
among its own particles (non-periodically — wrapping is a cross-domain
affair), shifts its local roots into a global ID space via a prefix scan, and
sends the particles lying within a linking length of each neighbouring domain
image to that neighbour. Receivers turn close foreign/local pairs into
fragment links; the links are allgathered so every rank runs the identical
deterministic merge, after which exactly one rank — the one whose global-ID
interval contains the final representative — owns each merged group.
"""

from __future__ import annotations

import hashlib
from bisect import bisect_right
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .comm import InProcessComm, ProtocolError, run_on_ranks
from .engine import (
    DEFAULT_MIN_SIZE,
    GroupCatalog,
    compute_group_sizes_parallel,
    run_local_fof,
)
from .geometry import Box, as_linking_length, wrap_positions
from .particles import Particles

__all__ = [
    "DomainDecomposition",
    "GroupLink",
    "pack_links",
    "unpack_links",
    "pack_boundary",
    "unpack_boundary",
    "scan_offset",
    "relabel_global",
    "exchange_boundary_links",
    "allgather_links",
    "merge_global",
    "run_distributed_fof",
    "distributed_fof",
    "DistributedResult",
]

# wire formats: little-endian, no padding
BOUNDARY_DTYPE = np.dtype(
    [("pid", "<u8"), ("pos", "<f8", (3,)), ("gid", "<u8"), ("fsize", "<u8")]
)
LINK_DTYPE = np.dtype(
    [("id_a", "<u8"), ("size_a", "<u8"), ("id_b", "<u8"), ("size_b", "<u8")]
)


class GroupLink(NamedTuple):
    """Two group fragments observed within one linking length of each other,
    each carried with its global fragment ID and local member count."""

    id_a: int
    size_a: int
    id_b: int
    size_b: int


@dataclass(frozen=True, eq=False)
class DomainDecomposition:
    """Axis-aligned tiling of the box: one half-open block per rank."""

    los: np.ndarray
    his: np.ndarray

    def __post_init__(self):
        los = np.ascontiguousarray(self.los, dtype=np.float64)
        his = np.ascontiguousarray(self.his, dtype=np.float64)
        if los.ndim != 2 or los.shape[1] != 3 or los.shape != his.shape:
            raise ValueError("los/his must both have shape (n_ranks, 3)")
        if los.shape[0] < 1:
            raise ValueError("need at least one rank")
        if not np.all(his > los):
            raise ValueError("every domain must have positive extent")
        object.__setattr__(self, "los", los)
        object.__setattr__(self, "his", his)

    @property
    def n_ranks(self) -> int:
        return self.los.shape[0]

    @classmethod
    def slabs(cls, box: Box, n_ranks: int, axis: int | None = None) -> "DomainDecomposition":
        """Equal-width slices along one axis (the longest one by default)."""
        n_ranks = int(n_ranks)
        if n_ranks < 1:
            raise ValueError(f"rank count must be >= 1, got {n_ranks}")
        if axis is None:
            axis = int(np.argmax(box.extent))
        if axis not in (0, 1, 2):
            raise ValueError(f"axis must be 0, 1 or 2, got {axis}")
        cuts = box.extent[axis] * np.arange(n_ranks + 1) / n_ranks
        los = np.zeros((n_ranks, 3))
        his = np.broadcast_to(box.extent, (n_ranks, 3)).copy()
        los[:, axis] = cuts[:-1]
        his[:, axis] = cuts[1:]
        return cls(los, his)

    @classmethod
    def blocks(cls, box: Box, n_ranks: int) -> "DomainDecomposition":
        """Near-cubic blocks: the rank count is factored and the factors are
        assigned greedily to the currently-longest axis."""
        n_ranks = int(n_ranks)
        if n_ranks < 1:
            raise ValueError(f"rank count must be >= 1, got {n_ranks}")
        factors = _prime_factors_desc(n_ranks)
        splits = np.ones(3, dtype=np.int64)
        for f in factors:
            axis = int(np.argmax(box.extent / splits))
            splits[axis] *= f
        per_axis_cuts = [
            box.extent[d] * np.arange(splits[d] + 1) / splits[d] for d in range(3)
        ]
        los, his = [], []
        for i0 in range(splits[0]):
            for i1 in range(splits[1]):
                for i2 in range(splits[2]):
                    idx = (i0, i1, i2)
                    los.append([per_axis_cuts[d][idx[d]] for d in range(3)])
                    his.append([per_axis_cuts[d][idx[d] + 1] for d in range(3)])
        return cls(np.asarray(los), np.asarray(his))

    @classmethod
    def from_boxes(cls, box: Box, los, his) -> "DomainDecomposition":
        """Explicit blocks; must tile the box exactly (checked by volume and
        bounds — assignment errors flag residual gaps at use time)."""
        dec = cls(np.asarray(los, float), np.asarray(his, float))
        if (dec.los < 0).any() or (dec.his > box.extent + 1e-12).any():
            raise ValueError("domain blocks must lie inside the box")
        vol = np.prod(dec.his - dec.los, axis=1).sum()
        if not np.isclose(vol, np.prod(box.extent), rtol=1e-9):
            raise ValueError("domain blocks do not fill the box")
        return dec

    def assign(self, positions: np.ndarray) -> np.ndarray:
        """Owning rank of each position (containment in ``[lo, hi)``)."""
        pos = np.asarray(positions, dtype=np.float64)
        out = np.full(pos.shape[0], -1, dtype=np.int64)
        for r in range(self.n_ranks):
            mask = np.all((pos >= self.los[r]) & (pos < self.his[r]), axis=1)
            out[mask] = r
        if (out < 0).any():
            bad = int(np.flatnonzero(out < 0)[0])
            raise ValueError(
                f"position {pos[bad]} is not covered by any domain block"
            )
        return out

    def split(self, particles: Particles, box: Box) -> list[Particles]:
        """Partition ``particles`` by owning rank (positions wrapped first)."""
        pos = wrap_positions(particles.positions, box)
        owner = self.assign(pos)
        return [
            Particles(particles.ids[owner == r], pos[owner == r])
            for r in range(self.n_ranks)
        ]


def _prime_factors_desc(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        while n % d == 0:
            out.append(d)
            n //= d
        d += 1
    if n > 1:
        out.append(n)
    return sorted(out, reverse=True)


# -- wire packing -------------------------------------------------------


def pack_links(links) -> bytes:
    arr = np.zeros(len(links), dtype=LINK_DTYPE)
    for k, (ia, sa, ib, sb) in enumerate(links):
        arr[k] = (ia, sa, ib, sb)
    return arr.tobytes()


def unpack_links(blob: bytes) -> list[GroupLink]:
    if len(blob) % LINK_DTYPE.itemsize:
        raise ValueError("link payload is not a whole number of records")
    arr = np.frombuffer(blob, dtype=LINK_DTYPE)
    return [
        GroupLink(int(r["id_a"]), int(r["size_a"]), int(r["id_b"]), int(r["size_b"]))
        for r in arr
    ]


def pack_boundary(pids, positions, gids, fsizes) -> bytes:
    n = len(pids)
    arr = np.zeros(n, dtype=BOUNDARY_DTYPE)
    arr["pid"] = pids
    arr["pos"] = positions
    arr["gid"] = gids
    arr["fsize"] = fsizes
    return arr.tobytes()


def unpack_boundary(blob: bytes) -> np.ndarray:
    if len(blob) % BOUNDARY_DTYPE.itemsize:
        raise ValueError("boundary payload is not a whole number of records")
    return np.frombuffer(blob, dtype=BOUNDARY_DTYPE)


# -- protocol steps -----------------------------------------------------


def scan_offset(comm: InProcessComm, local_count: int) -> int:
    """This rank's global-ID offset: total particle count on lower ranks
    (inclusive prefix sum minus the local contribution)."""
    local_count = int(local_count)
    return comm.scan_sum(local_count) - local_count


def relabel_global(uf, node_offset: int) -> np.ndarray:
    """Global group ID for every local particle: local root + ID offset."""
    return uf.find_all() + np.uint64(int(node_offset))


def _point_box_gap2(pos: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    d = np.maximum(np.maximum(lo - pos, pos - hi), 0.0)
    return np.einsum("ij,ij->i", d, d)


def _box_box_gap2(lo_a, hi_a, lo_b, hi_b) -> float:
    d = np.maximum(np.maximum(lo_b - hi_a, lo_a - hi_b), 0.0)
    return float(np.dot(d, d))


def _wrap_codes(periodic: bool):
    if not periodic:
        return [(0, 0, 0)]
    return [
        (w0, w1, w2)
        for w0 in (-1, 0, 1)
        for w1 in (-1, 0, 1)
        for w2 in (-1, 0, 1)
    ]


def _send_images(
    decomp: DomainDecomposition, box: Box, l2: float, src: int, dst: int
) -> list[tuple[int, int, int]]:
    """Wrap vectors w for which src must ship boundary particles to dst's
    image ``dst_box + w * extent``; sorted, shared by sender and receiver."""
    out = []
    ext = box.extent
    lo_s, hi_s = decomp.los[src], decomp.his[src]
    for w in sorted(_wrap_codes(box.periodic)):
        if src == dst and w == (0, 0, 0):
            continue
        shift = np.asarray(w, dtype=np.float64) * ext
        gap2 = _box_box_gap2(lo_s, hi_s, decomp.los[dst] + shift, decomp.his[dst] + shift)
        if gap2 < l2:
            out.append(w)
    return out


def exchange_boundary_links(
    comm: InProcessComm,
    decomp: DomainDecomposition,
    box: Box,
    l,
    particles: Particles,
    gids: np.ndarray,
    fsizes: np.ndarray,
) -> list[GroupLink]:
    """Ship boundary particles to every neighbouring domain image and turn
    close local/foreign pairs into fragment links.

    Senders pre-shift positions into the receiver's frame (one message per
    qualifying (rank, wrap) image, empty ones included so the schedules
    agree), so receivers compare plain Euclidean distances. A link is emitted
    only for pairs whose global group IDs differ; both ranks of a pair see
    the bridge, so duplicates are expected downstream.
    """
    l = as_linking_length(l)
    lx2 = l.l2
    rank, size = comm.rank, comm.size
    pos = particles.positions
    ext = box.extent

    # phase 1: send to every qualifying image of every other domain
    for dst in range(size):
        for w in _send_images(decomp, box, lx2, rank, dst):
            shift = np.asarray(w, dtype=np.float64) * ext
            near = _point_box_gap2(pos, decomp.los[dst] + shift, decomp.his[dst] + shift) < lx2
            sel = np.flatnonzero(near)
            payload = pack_boundary(
                particles.ids[sel], pos[sel] - shift, gids[sel], fsizes[sel]
            )
            comm.send(dst, payload)

    # phase 2: receive in the mirrored deterministic order and build links
    links: list[GroupLink] = []
    for src in range(size):
        for w in _send_images(decomp, box, lx2, src, rank):
            foreign = unpack_boundary(comm.recv(src))
            if foreign.shape[0] == 0 or pos.shape[0] == 0:
                continue
            shift = np.asarray(w, dtype=np.float64) * ext
            # foreign particles live in src's block shifted into our frame
            cand = np.flatnonzero(
                _point_box_gap2(pos, decomp.los[src] - shift, decomp.his[src] - shift)
                < lx2
            )
            if cand.size == 0:
                continue
            fpos = foreign["pos"]
            d = pos[cand][:, None, :] - fpos[None, :, :]
            close = np.einsum("ijk,ijk->ij", d, d) < lx2
            li, fj = np.nonzero(close)
            for a, b in zip(li, fj):
                ga = int(gids[cand[a]])
                gb = int(foreign["gid"][b])
                if ga == gb:
                    continue
                links.append(
                    GroupLink(ga, int(fsizes[cand[a]]), gb, int(foreign["fsize"][b]))
                )
    return links


def allgather_links(comm: InProcessComm, links: list[GroupLink]) -> list[GroupLink]:
    """Every rank's links concatenated in rank order, identical everywhere."""
    blobs = comm.allgather(pack_links(links), label="allgather_links")
    out: list[GroupLink] = []
    for blob in blobs:
        out.extend(unpack_links(blob))
    return out


def merge_global(links) -> dict[int, tuple[int, int]]:
    """Merge fragment links into final groups.

    Returns ``{fragment gid: (representative gid, merged total size)}`` for
    every gid appearing in ``links``. Deterministic for a given link order:
    fragments get dense indices by first occurrence, unions are by merged
    size with ties won by the lower dense index, and each fragment's member
    count is added exactly once no matter how many links carry it.
    """
    dense: dict[int, int] = {}
    gid_of: list[int] = []
    frag_size: list[int] = []
    parent: list[int] = []
    merged: list[int] = []

    def intern(gid: int, fsize: int) -> int:
        idx = dense.get(gid)
        if idx is None:
            idx = len(gid_of)
            dense[gid] = idx
            gid_of.append(gid)
            frag_size.append(fsize)
            parent.append(idx)
            merged.append(fsize)
            return idx
        if frag_size[idx] != fsize:
            raise ProtocolError(
                f"fragment {gid} announced with conflicting sizes "
                f"{frag_size[idx]} and {fsize}"
            )
        return idx

    def find(i: int) -> int:
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for id_a, size_a, id_b, size_b in links:
        ia = intern(int(id_a), int(size_a))
        ib = intern(int(id_b), int(size_b))
        ra, rb = find(ia), find(ib)
        if ra == rb:
            continue
        if merged[ra] > merged[rb] or (merged[ra] == merged[rb] and ra < rb):
            win, lose = ra, rb
        else:
            win, lose = rb, ra
        parent[lose] = win
        merged[win] += merged[lose]

    return {
        gid: (gid_of[find(idx)], merged[find(idx)]) for gid, idx in dense.items()
    }


def _merge_digest(merge: dict[int, tuple[int, int]]) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for gid in sorted(merge):
        rep, total = merge[gid]
        h.update(np.asarray([gid, rep, total], dtype="<u8").tobytes())
    return h.digest()


@dataclass(frozen=True, eq=False)
class DistributedResult:
    """Per-rank view of a distributed run. ``catalog`` and ``owned_counts``
    are identical on every rank; membership columns cover local particles."""

    catalog: GroupCatalog
    member_ids: np.ndarray
    member_gids: np.ndarray
    owned_counts: list[int]
    node_offset: int
    n_ranks: int


def run_distributed_fof(
    comm: InProcessComm,
    particles: Particles,
    decomp: DomainDecomposition,
    box: Box,
    l,
    thread_count: int = 1,
    min_size: int = DEFAULT_MIN_SIZE,
) -> DistributedResult:
    """One rank's share of a distributed run over its domain's particles."""
    l = as_linking_length(l)
    size = comm.size
    if decomp.n_ranks != size:
        raise ValueError(
            f"decomposition has {decomp.n_ranks} blocks for {size} ranks"
        )

    # local pass: wrapping is handled by the exchange once domains split the box
    local_box = box if size == 1 else Box(box.extent, periodic=False)
    uf = run_local_fof(particles, local_box, l, thread_count)
    gs = compute_group_sizes_parallel(uf, thread_count)

    n_local = particles.n
    offset = scan_offset(comm, n_local)
    counts = comm.allgather(n_local, label="allgather_counts")
    interval_starts = [0]
    for c in counts:
        interval_starts.append(interval_starts[-1] + int(c))

    labels = uf.find_all()
    gids = labels + np.uint64(offset)
    fsizes = gs[labels.astype(np.int64)]

    if size == 1:
        all_links: list[GroupLink] = []
    else:
        links = exchange_boundary_links(comm, decomp, box, l, particles, gids, fsizes)
        all_links = allgather_links(comm, links)
    merge = merge_global(all_links)

    digests = comm.allgather(_merge_digest(merge), label="merge_digest")
    if len(set(digests)) > 1:
        raise ProtocolError("ranks disagree on the merged group map")

    # resolve each local root to its final representative and total size
    local_roots = np.unique(labels).astype(np.int64)
    rep_by_root = np.empty(local_roots.size, dtype=np.uint64)
    total_by_root = np.empty(local_roots.size, dtype=np.uint64)
    owned: dict[int, int] = {}
    for k, r in enumerate(local_roots):
        g = int(r) + offset
        rep, total = merge.get(g, (g, int(gs[r])))
        rep_by_root[k] = rep
        total_by_root[k] = total
        if interval_starts[comm.rank] <= rep < interval_starts[comm.rank + 1]:
            owned[rep] = total

    final_gid = rep_by_root[np.searchsorted(local_roots, labels.astype(np.int64))]

    owned_payload = np.asarray(sorted(owned.items()), dtype="<u8").tobytes()
    gathered = comm.allgather(owned_payload, label="owned_groups")
    owned_counts = []
    roots_all: list[int] = []
    sizes_all: list[int] = []
    for blob in gathered:
        pairs = np.frombuffer(blob, dtype="<u8").reshape(-1, 2)
        owned_counts.append(pairs.shape[0])
        roots_all.extend(int(x) for x in pairs[:, 0])
        sizes_all.extend(int(x) for x in pairs[:, 1])

    roots_arr = np.asarray(roots_all, dtype=np.uint64)
    sizes_arr = np.asarray(sizes_all, dtype=np.uint64)
    keep = sizes_arr >= np.uint64(int(min_size))
    roots_arr, sizes_arr = roots_arr[keep], sizes_arr[keep]
    order = np.lexsort((roots_arr, -sizes_arr.astype(np.int64)))
    catalog = GroupCatalog(
        roots=roots_arr[order], sizes=sizes_arr[order], min_size=int(min_size)
    )

    member_keep = np.isin(final_gid, catalog.roots)
    return DistributedResult(
        catalog=catalog,
        member_ids=particles.ids[member_keep],
        member_gids=final_gid[member_keep],
        owned_counts=owned_counts,
        node_offset=offset,
        n_ranks=size,
    )


def distributed_fof(
    particles: Particles,
    box: Box,
    l,
    n_ranks: int,
    thread_count: int = 1,
    decomposition: str | DomainDecomposition = "slabs",
    min_size: int = DEFAULT_MIN_SIZE,
    timeout: float = 60.0,
) -> DistributedResult:
    """Split ``particles`` across ``n_ranks`` simulated ranks, run the
    distributed finder, and return the merged view (catalog identical on all
    ranks; membership columns concatenated in rank order)."""
    if isinstance(decomposition, DomainDecomposition):
        decomp = decomposition
    elif decomposition == "slabs":
        decomp = DomainDecomposition.slabs(box, n_ranks)
    elif decomposition == "blocks":
        decomp = DomainDecomposition.blocks(box, n_ranks)
    else:
        raise ValueError(f"unknown decomposition {decomposition!r}")
    parts = decomp.split(particles, box)

    def rank_main(comm: InProcessComm) -> DistributedResult:
        return run_distributed_fof(
            comm, parts[comm.rank], decomp, box, l,
            thread_count=thread_count, min_size=min_size,
        )

    results = run_on_ranks(n_ranks, rank_main, timeout=timeout)
    member_ids = np.concatenate([r.member_ids for r in results]) if results else np.zeros(0, np.uint64)
    member_gids = np.concatenate([r.member_gids for r in results]) if results else np.zeros(0, np.uint64)
    first = results[0]
    return DistributedResult(
        catalog=first.catalog,
        member_ids=member_ids,
        member_gids=member_gids,
        owned_counts=first.owned_counts,
        node_offset=0,
        n_ranks=n_ranks,
    )
