"""Scaling-benchmark bookkeeping (small inputs; no performance claims here)."""

from __future__ import annotations

import numpy as np
import pytest

from parafof import Box, Particles
from parafof.bench import CSV_HEADER, run_bench, write_bench_csv
from parafof.generate import generate, replicate


@pytest.fixture(scope="module")
def small_input():
    box = Box(5.0, periodic=True)
    return generate("uniform", 300, box, seed=9), box


class TestRunBench:
    def test_strong_rows_and_efficiency(self, small_input):
        particles, box = small_input
        recs = run_bench(particles, box, 0.3, "strong", [(1, 1), (2, 1)], repeats=2)
        assert [r.label for r in recs] == ["strong-t1r1", "strong-t2r1"]
        assert all(r.n_particles == particles.n for r in recs)
        assert recs[0].efficiency == pytest.approx(1.0)
        t0, t1 = recs[0].time_s, recs[1].time_s
        assert recs[1].efficiency == pytest.approx(t0 / (2 * t1))
        assert all(r.time_s > 0 for r in recs)
        assert all(r.time_sd_s >= 0 for r in recs)

    def test_weak_rows_replicate_the_volume(self, small_input):
        particles, box = small_input
        recs = run_bench(
            particles, box, 0.3, "weak", [(1, 1), (8, 1)], repeats=1, warmup=False
        )
        assert recs[0].n_particles == particles.n
        assert recs[1].n_particles == 8 * particles.n  # 2x2x2 copies
        assert recs[0].efficiency == pytest.approx(1.0)
        assert recs[1].efficiency == pytest.approx(recs[0].time_s / recs[1].time_s)

    def test_weak_rejects_non_cube_growth(self, small_input):
        particles, box = small_input
        with pytest.raises(ValueError, match="perfect cubes"):
            run_bench(particles, box, 0.3, "weak", [(1, 1), (2, 1)], repeats=1)

    def test_single_repeat_has_zero_spread(self, small_input):
        particles, box = small_input
        recs = run_bench(particles, box, 0.3, "strong", [(1, 1)], repeats=1, warmup=False)
        assert recs[0].time_sd_s == 0.0

    def test_ranked_units_run_the_distributed_path(self, small_input):
        particles, box = small_input
        recs = run_bench(particles, box, 0.3, "strong", [(1, 1), (1, 2)], repeats=1)
        assert recs[1].ranks == 2 and recs[1].time_s > 0

    def test_input_validation(self, small_input):
        particles, box = small_input
        with pytest.raises(ValueError, match="mode"):
            run_bench(particles, box, 0.3, "sideways", [(1, 1)])
        with pytest.raises(ValueError, match="repeats"):
            run_bench(particles, box, 0.3, "strong", [(1, 1)], repeats=0)
        with pytest.raises(ValueError, match="unit"):
            run_bench(particles, box, 0.3, "strong", [])


class TestReplicate:
    def test_tiles_are_shifted_copies(self):
        box = Box((2.0, 3.0, 4.0), periodic=True)
        p = Particles(np.array([0, 5], np.uint64), np.array([[0.5, 1.0, 1.5], [1.5, 2.0, 3.0]]))
        big, big_box = replicate(p, box, 2)
        assert big.n == 16
        np.testing.assert_allclose(big_box.extent, [4.0, 6.0, 8.0])
        assert big_box.periodic
        # ids stay unique; each original position appears in each octant
        assert np.unique(big.ids).size == 16
        shifted = p.positions + np.array([2.0, 3.0, 4.0])
        found = (np.abs(big.positions[:, None, :] - shifted[None, :, :]) < 1e-12).all(2)
        assert found.any(0).all()

    def test_identity_when_times_is_one(self):
        box = Box(2.0)
        p = Particles(np.array([3], np.uint64), np.array([[0.5, 0.5, 0.5]]))
        q, qbox = replicate(p, box, 1)
        assert q.n == 1 and np.array_equal(q.positions, p.positions)
        assert np.array_equal(qbox.extent, box.extent)

    def test_rejects_bad_times(self):
        p = Particles(np.array([0], np.uint64), np.array([[0.1, 0.1, 0.1]]))
        with pytest.raises(ValueError):
            replicate(p, Box(1.0), 0)


class TestCsv:
    def test_csv_layout(self, tmp_path, small_input):
        particles, box = small_input
        recs = run_bench(particles, box, 0.3, "strong", [(1, 1)], repeats=1, warmup=False)
        f = tmp_path / "bench.csv"
        write_bench_csv(f, recs)
        lines = f.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        fields = lines[1].split(",")
        assert fields[0] == "strong-t1r1"
        assert fields[1] == str(particles.n)
        assert fields[2:4] == ["1", "1"]
        float(fields[4]), float(fields[5])  # parseable scientific notation
        assert fields[6] == "1.0000"
