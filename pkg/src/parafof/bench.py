"""Strong/weak scaling measurements of the group finder."""

from __future__ import annotations

import time
from dataclasses import dataclass
from statistics import mean, stdev

from .distributed import distributed_fof
from .engine import compute_group_sizes_parallel, run_local_fof
from .generate import replicate
from .geometry import Box
from .particles import Particles

CSV_HEADER = "label,n_particles,threads,ranks,time_s,time_sd_s,efficiency"


@dataclass(frozen=True)
class BenchRecord:
    label: str
    n_particles: int
    threads: int
    ranks: int
    time_s: float
    time_sd_s: float
    efficiency: float


def _one_run(particles: Particles, box: Box, l, threads: int, ranks: int) -> float:
    """Seconds for one complete find (grouping + size tally), monotonic clock.

    Snapshot loading/generation stays outside the timed region."""
    t0 = time.perf_counter()
    if ranks == 1:
        uf = run_local_fof(particles, box, l, thread_count=threads)
        compute_group_sizes_parallel(uf, thread_count=threads)
    else:
        distributed_fof(particles, box, l, n_ranks=ranks, thread_count=threads)
    return time.perf_counter() - t0


def run_bench(
    particles: Particles,
    box: Box,
    l,
    mode: str,
    units: list[tuple[int, int]],
    repeats: int = 3,
    warmup: bool = True,
) -> list[BenchRecord]:
    """Measure each ``(threads, ranks)`` unit ``repeats`` times.

    ``mode="strong"`` keeps the input fixed; ``mode="weak"`` replicates the
    volume so the particle count grows with the worker count (which must
    therefore grow by perfect cubes between rows). Each unit gets one
    unrecorded warmup run before timing; reported spread is the sample
    standard deviation (0 for a single repeat). Efficiency is relative to
    the first row: ``T0*u0/(Ti*ui)`` for strong scaling, ``T0/Ti`` for weak.
    """
    if mode not in ("strong", "weak"):
        raise ValueError(f"mode must be 'strong' or 'weak', got {mode!r}")
    repeats = int(repeats)
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if not units:
        raise ValueError("need at least one (threads, ranks) unit")

    base_units = units[0][0] * units[0][1]
    rows: list[tuple[str, int, int, int, float, float]] = []
    for threads, ranks in units:
        u = threads * ranks
        if mode == "weak":
            factor, rem = divmod(u, base_units)
            times_axis = round(factor ** (1.0 / 3.0))
            if rem or times_axis**3 != factor:
                raise ValueError(
                    f"weak scaling needs worker growth by perfect cubes; "
                    f"{u} workers vs baseline {base_units} gives factor {u / base_units}"
                )
            bench_particles, bench_box = replicate(particles, box, times_axis)
        else:
            bench_particles, bench_box = particles, box
        if warmup:
            _one_run(bench_particles, bench_box, l, threads, ranks)
        samples = [
            _one_run(bench_particles, bench_box, l, threads, ranks)
            for _ in range(repeats)
        ]
        rows.append(
            (
                f"{mode}-t{threads}r{ranks}",
                bench_particles.n,
                threads,
                ranks,
                mean(samples),
                stdev(samples) if repeats > 1 else 0.0,
            )
        )

    t0 = rows[0][4]
    records = []
    for label, n, threads, ranks, t, sd in rows:
        u = threads * ranks
        if mode == "strong":
            eff = (t0 * base_units) / (t * u) if t > 0 else float("nan")
        else:
            eff = t0 / t if t > 0 else float("nan")
        records.append(BenchRecord(label, n, threads, ranks, t, sd, eff))
    return records


def write_bench_csv(path, records: list[BenchRecord]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(
                f"{r.label},{r.n_particles},{r.threads},{r.ranks},"
                f"{r.time_s:.6e},{r.time_sd_s:.6e},{r.efficiency:.4f}\n"
            )
