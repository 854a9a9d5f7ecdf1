"""Reference clusterings and the partition comparison they hang on."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parafof import Box, Particles, bfs_fof, naive_fof, partitions_equal
from parafof.generate import generate
from parafof.oracle import NAIVE_MAX_N, Partition

from conftest import random_instance


def P(*positions):
    return Particles.from_positions(np.asarray(positions, dtype=np.float64))


class TestPartition:
    def test_from_labels_uses_minimum_member_as_rep(self):
        part = Partition.from_labels([10, 11, 12, 13], ["a", "b", "a", "b"])
        assert part.rep == {10: 10, 12: 10, 11: 11, 13: 11}
        assert part.sizes() == [2, 2]
        assert part.n_groups() == 2

    def test_from_labels_shuffled_ids(self):
        part = Partition.from_labels([42, 7, 99], [0, 0, 1])
        assert part.group_of(42) == 7
        assert part.group_of(7) == 7
        assert part.group_of(99) == 99

    def test_blocks_enumeration(self):
        part = Partition.from_labels([3, 1, 2], [5, 5, 6])
        assert part.blocks() == {1: [1, 3], 2: [2]}

    def test_equal_partitions(self):
        a = Partition.from_labels([1, 2, 3], [0, 0, 1])
        b = Partition.from_labels([3, 2, 1], [9, 4, 4])
        ok, witness = partitions_equal(a, b)
        assert ok and witness is None

    def test_mismatched_universes_raise(self):
        a = Partition.from_labels([1, 2], [0, 0])
        b = Partition.from_labels([1, 3], [0, 0])
        with pytest.raises(ValueError):
            partitions_equal(a, b)

    def test_witness_pair_is_classified_differently(self):
        a = Partition.from_labels([1, 2, 3, 4], [0, 0, 1, 1])
        b = Partition.from_labels([1, 2, 3, 4], [0, 1, 1, 0])
        ok, witness = partitions_equal(a, b)
        assert not ok
        u, v = witness
        together_a = a.group_of(u) == a.group_of(v)
        together_b = b.group_of(u) == b.group_of(v)
        assert together_a != together_b

    @given(
        st.integers(min_value=1, max_value=12),
        st.lists(st.integers(0, 3), min_size=1, max_size=12),
        st.lists(st.integers(0, 3), min_size=1, max_size=12),
    )
    def test_witness_property_on_random_partitions(self, n, la, lb):
        ids = list(range(n))
        a = Partition.from_labels(ids, [la[i % len(la)] for i in range(n)])
        b = Partition.from_labels(ids, [lb[i % len(lb)] for i in range(n)])
        ok, witness = partitions_equal(a, b)
        assert ok == (a.rep == b.rep)
        if not ok:
            u, v = witness
            assert (a.group_of(u) == a.group_of(v)) != (b.group_of(u) == b.group_of(v))


class TestKnownClusterings:
    def test_chain_links_transitively(self):
        particles = P([1.0, 1, 1], [1.4, 1, 1], [1.8, 1, 1], [5.0, 1, 1])
        box = Box(10.0)
        for fn in (naive_fof, bfs_fof):
            part = fn(particles, box, 0.5)
            assert part.sizes() == [1, 3]

    def test_exactly_linking_length_is_not_a_friend(self):
        particles = P([1.0, 1, 1], [2.0, 1, 1])
        box = Box(10.0)
        for fn in (naive_fof, bfs_fof):
            assert fn(particles, box, 1.0).sizes() == [1, 1]
            assert fn(particles, box, 1.0 + 1e-9).sizes() == [2]

    def test_coincident_particles_always_link(self):
        particles = P([2.0, 2, 2], [2.0, 2, 2 + 1e-12], [8.0, 8, 8])
        box = Box(10.0)
        for fn in (naive_fof, bfs_fof):
            assert fn(particles, box, 0.1).sizes() == [1, 2]

    def test_periodic_wrap_links_across_the_boundary(self):
        particles = P([0.1, 5, 5], [9.9, 5, 5])
        closed = Box(10.0, periodic=True)
        open_box = Box(10.0)
        for fn in (naive_fof, bfs_fof):
            assert fn(particles, closed, 0.3).sizes() == [2]
            assert fn(particles, open_box, 0.3).sizes() == [1, 1]

    def test_empty_and_single(self):
        box = Box(5.0)
        empty = Particles.from_positions(np.zeros((0, 3)))
        for fn in (naive_fof, bfs_fof):
            assert fn(empty, box, 0.5).rep == {}
            assert fn(P([1.0, 1, 1]), box, 0.5).sizes() == [1]

    def test_far_separated_clumps_give_one_group_each(self):
        # 8 tight clumps, widths far below the clump separation: the group
        # count must equal the clump count (verified against both routes)
        box = Box(20.0, periodic=True)
        particles = generate("blobs", 400, box, seed=2024, n_blobs=8, blob_width=0.05)
        got = naive_fof(particles, box, 0.6)
        assert got.n_groups() == 8
        ok, _ = partitions_equal(got, bfs_fof(particles, box, 0.6))
        assert ok


class TestOracleAgreement:
    @pytest.mark.parametrize("seed", range(30))
    def test_both_references_always_agree(self, seed):
        particles, box, l = random_instance(seed, 10, 320)
        ok, witness = partitions_equal(
            naive_fof(particles, box, l), bfs_fof(particles, box, l)
        )
        assert ok, f"oracles disagree on pair {witness}"


class TestGuards:
    def test_quadratic_route_refuses_huge_inputs(self):
        n = NAIVE_MAX_N + 1
        particles = Particles(
            np.arange(n, dtype=np.uint64),
            np.random.default_rng(0).random((n, 3)),
        )
        with pytest.raises(ValueError):
            naive_fof(particles, Box(2.0), 0.01)
