"""Threaded finder, group-size tallies, and catalog extraction."""

from __future__ import annotations

import numpy as np
import pytest

from parafof import (
    Box,
    Particles,
    bfs_fof,
    compute_group_sizes_parallel,
    compute_group_sizes_serial,
    extract_catalog,
    membership_table,
    naive_fof,
    partitions_equal,
    run_local_fof,
)
from parafof.engine import _EMPTY
from parafof.oracle import Partition

from conftest import random_instance


def finder_partition(particles, box, l, threads=1):
    uf = run_local_fof(particles, box, l, thread_count=threads)
    return Partition.from_labels(particles.ids, uf.find_all())


class TestAgainstReferences:
    @pytest.mark.parametrize("seed", range(12))
    def test_matches_both_references(self, seed):
        particles, box, l = random_instance(seed + 500, 10, 900)
        threads = (seed % 4) + 1
        found = finder_partition(particles, box, l, threads)
        for oracle in (naive_fof, bfs_fof):
            ok, witness = partitions_equal(found, oracle(particles, box, l))
            assert ok, f"differs from {oracle.__name__} at {witness}"

    def test_exact_linking_length_pairs_stay_apart(self):
        # cross-cell pair at exactly l, and a second pair just under
        pos = np.array(
            [
                [0.95, 5.0, 5.0],
                [1.95, 5.0, 5.0],
                [5.00, 5.0, 5.0],
                [5.00, 5.0, 5.0 + 1.0 - 1e-12],
            ]
        )
        particles = Particles.from_positions(pos)
        uf = run_local_fof(particles, Box(10.0), 1.0)
        labels = uf.find_all()
        assert labels[0] != labels[1]
        assert labels[2] == labels[3]

    def test_periodic_wrap_pair(self):
        particles = Particles.from_positions(
            np.array([[0.05, 2.0, 2.0], [3.95, 2.0, 2.0]])
        )
        box = Box(4.0, periodic=True)
        labels = run_local_fof(particles, box, 0.2).find_all()
        assert labels[0] == labels[1]

    def test_empty_and_single_inputs(self):
        box = Box(5.0)
        empty = Particles.from_positions(np.zeros((0, 3)))
        assert len(run_local_fof(empty, box, 1.0)) == 0
        one = Particles.from_positions(np.array([[1.0, 1, 1]]))
        assert list(run_local_fof(one, box, 1.0).find_all()) == [0]

    def test_thread_count_validation(self):
        particles = Particles.from_positions(np.array([[1.0, 1, 1]]))
        with pytest.raises(ValueError):
            run_local_fof(particles, Box(5.0), 1.0, thread_count=0)


class TestThreadInvariance:
    @pytest.mark.parametrize("seed", (11, 23))
    def test_same_labels_for_any_thread_count(self, seed):
        particles, box, l = random_instance(seed + 900, 3000, 6000)
        baseline = run_local_fof(particles, box, l, thread_count=1).find_all()
        for threads in (2, 4, 8):
            labels = run_local_fof(particles, box, l, thread_count=threads).find_all()
            assert np.array_equal(labels, baseline), f"threads={threads} differ"

    def test_repeated_threaded_runs_are_identical(self):
        particles, box, l = random_instance(1234, 2000, 4000)
        runs = [
            run_local_fof(particles, box, l, thread_count=4).find_all()
            for _ in range(3)
        ]
        assert np.array_equal(runs[0], runs[1])
        assert np.array_equal(runs[1], runs[2])


class TestGroupSizes:
    def test_serial_tally_shape(self):
        particles, box, l = random_instance(77, 200, 800)
        uf = run_local_fof(particles, box, l)
        gs = compute_group_sizes_serial(uf)
        labels = uf.find_all()
        roots = np.unique(labels)
        # size lives at the root slot, zero everywhere else, total n
        assert gs.sum() == particles.n
        assert (gs[np.setdiff1d(np.arange(particles.n), roots)] == 0).all()
        for r in roots:
            assert gs[int(r)] == (labels == r).sum()

    @pytest.mark.parametrize("threads", (1, 2, 4, 8))
    def test_parallel_tally_is_bit_identical_to_serial(self, threads):
        particles, box, l = random_instance(threads * 31, 500, 3000)
        uf = run_local_fof(particles, box, l, thread_count=2)
        serial = compute_group_sizes_serial(uf)
        parallel = compute_group_sizes_parallel(uf, thread_count=threads)
        assert np.array_equal(serial, parallel)

    def test_tables_never_hold_singleton_groups(self):
        particles, box, l = random_instance(404, 2000, 5000)
        uf = run_local_fof(particles, box, l, thread_count=2)
        gs, tables = compute_group_sizes_parallel(uf, 4, collect_tables=True)
        seen_any = False
        for keys, vals in tables:
            live = keys != _EMPTY
            assert (vals[live] >= 1).all()
            for key in keys[live]:
                seen_any = True
                assert gs[int(key)] >= 2, "hash table entry for a lone particle"
        assert seen_any  # the instance does contain non-trivial groups

    def test_all_singletons_leave_tables_empty(self):
        # spread far beyond the linking length: nothing may be tabulated
        grid_pts = np.stack(
            np.meshgrid(*[np.arange(4) * 2.0 + 1.0] * 3), axis=-1
        ).reshape(-1, 3)
        particles = Particles.from_positions(grid_pts)
        uf = run_local_fof(particles, Box(8.0), 0.5)
        gs, tables = compute_group_sizes_parallel(uf, 3, collect_tables=True)
        assert (gs == 1).all()
        for keys, _ in tables:
            assert (keys == _EMPTY).all()


class TestCatalog:
    def make(self, seed=55, min_size=3):
        particles, box, l = random_instance(seed, 1000, 3000)
        uf = run_local_fof(particles, box, l)
        gs = compute_group_sizes_parallel(uf)
        return particles, uf, gs, extract_catalog(uf, gs, min_size=min_size)

    def test_threshold_filters_small_groups(self):
        _, _, gs, catalog = self.make()
        assert (catalog.sizes >= 3).all()
        assert catalog.n_groups == int((gs >= 3).sum())

    def test_sorted_by_size_then_root(self):
        _, _, _, catalog = self.make()
        sizes = catalog.sizes.astype(np.int64)
        roots = catalog.roots.astype(np.int64)
        for k in range(1, len(catalog)):
            assert sizes[k] < sizes[k - 1] or (
                sizes[k] == sizes[k - 1] and roots[k] > roots[k - 1]
            )

    def test_default_threshold_is_twenty(self):
        particles, uf, gs, _ = self.make()
        catalog = extract_catalog(uf, gs)
        assert catalog.min_size == 20
        assert (catalog.sizes >= 20).all()

    def test_threshold_validation(self):
        _, uf, gs, _ = self.make()
        with pytest.raises(ValueError):
            extract_catalog(uf, gs, min_size=0)

    def test_membership_covers_exactly_the_catalogued_groups(self):
        particles, uf, gs, catalog = self.make(seed=56)
        ids, gids = membership_table(uf, catalog, ids=particles.ids)
        assert set(np.unique(gids)) == set(catalog.roots.tolist())
        counts = {int(r): int(s) for r, s in zip(catalog.roots, catalog.sizes)}
        for root in counts:
            assert (gids == root).sum() == counts[root]
        # membership ids are real particle ids
        assert set(ids.tolist()) <= set(particles.ids.tolist())
