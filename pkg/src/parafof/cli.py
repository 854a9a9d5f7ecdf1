"""Command line front end: gen / run / verify / bench."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import run_bench, write_bench_csv
from .distributed import distributed_fof
from .engine import (
    DEFAULT_MIN_SIZE,
    compute_group_sizes_parallel,
    extract_catalog,
    membership_table,
    run_local_fof,
)
from .generate import generate
from .geometry import Box
from .oracle import Partition, bfs_fof, naive_fof, partitions_equal
from .particle_io import (
    load_particles,
    save_particles,
    write_catalog_csv,
    write_membership_csv,
)


def _parse_box(text: str) -> np.ndarray:
    parts = [float(v) for v in text.split(",")]
    if len(parts) == 1:
        return np.full(3, parts[0])
    if len(parts) == 3:
        return np.asarray(parts)
    raise argparse.ArgumentTypeError(
        f"box must be one extent or three comma-separated extents, got {text!r}"
    )


def _parse_int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"need positive integers, got {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parafof",
        description="Friends-of-friends particle group finder "
        "(threaded, with simulated multi-rank runs).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate a synthetic particle snapshot")
    p_gen.add_argument("--kind", choices=("uniform", "blobs"), default="uniform")
    p_gen.add_argument("--n", type=int, required=True, help="particle count")
    p_gen.add_argument("--box", type=_parse_box, required=True,
                       help="box extent: one value or ex,ey,ez")
    p_gen.add_argument("--periodic", action="store_true")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--blobs", type=int, default=32, help="clump count (kind=blobs)")
    p_gen.add_argument("--width", type=float, default=None,
                       help="clump width (kind=blobs)")
    p_gen.add_argument("--format", choices=("auto", "binary", "text"), default="auto")
    p_gen.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="find groups and write catalogs")
    p_run.add_argument("--in", dest="infile", required=True)
    p_run.add_argument("--linking-length", "-l", type=float, required=True)
    p_run.add_argument("--threads", type=int, default=1)
    p_run.add_argument("--ranks", type=int, default=1)
    p_run.add_argument("--decomp", choices=("slabs", "blocks"), default="slabs")
    p_run.add_argument("--min-size", type=int, default=DEFAULT_MIN_SIZE)
    p_run.add_argument("--catalog", default=None, help="group table output path")
    p_run.add_argument("--membership", default=None, help="membership table output path")

    p_verify = sub.add_parser(
        "verify", help="cross-check the finder against the reference implementations"
    )
    p_verify.add_argument("--in", dest="infile", required=True)
    p_verify.add_argument("--linking-length", "-l", type=float, required=True)
    p_verify.add_argument("--threads", type=int, default=1)
    p_verify.add_argument("--ranks", type=int, default=1)
    p_verify.add_argument("--decomp", choices=("slabs", "blocks"), default="slabs")
    p_verify.add_argument("--oracle", choices=("naive", "bfs", "both"), default="both")

    p_bench = sub.add_parser("bench", help="strong/weak scaling measurements")
    p_bench.add_argument("--in", dest="infile", required=True)
    p_bench.add_argument("--linking-length", "-l", type=float, required=True)
    p_bench.add_argument("--mode", choices=("strong", "weak"), required=True)
    p_bench.add_argument("--threads-list", type=_parse_int_list, default=[1])
    p_bench.add_argument("--ranks-list", type=_parse_int_list, default=[1])
    p_bench.add_argument("--repeats", type=int, default=3)
    p_bench.add_argument("--out", required=True, help="CSV output path")
    p_bench.add_argument("--no-plot", action="store_true",
                         help="skip the figure next to the CSV")
    return parser


def _finder_partition(particles, box, l, threads, ranks, decomp) -> Partition:
    if ranks == 1:
        uf = run_local_fof(particles, box, l, thread_count=threads)
        return Partition.from_labels(particles.ids, uf.find_all())
    result = distributed_fof(
        particles, box, l, n_ranks=ranks, thread_count=threads,
        decomposition=decomp, min_size=1,
    )
    return Partition.from_labels(result.member_ids, result.member_gids)


def _cmd_gen(args) -> int:
    box = Box(args.box, periodic=args.periodic)
    particles = generate(
        args.kind, args.n, box, args.seed, n_blobs=args.blobs, blob_width=args.width
    )
    save_particles(args.out, particles, box, fmt=args.format)
    print(f"wrote {particles.n} particles to {args.out}")
    return 0


def _cmd_run(args) -> int:
    particles, box = load_particles(args.infile)
    if args.ranks == 1:
        uf = run_local_fof(particles, box, args.linking_length, thread_count=args.threads)
        gs = compute_group_sizes_parallel(uf, thread_count=args.threads)
        catalog = extract_catalog(uf, gs, min_size=args.min_size)
        member_ids, member_gids = membership_table(uf, catalog, ids=particles.ids)
    else:
        result = distributed_fof(
            particles, box, args.linking_length,
            n_ranks=args.ranks, thread_count=args.threads,
            decomposition=args.decomp, min_size=args.min_size,
        )
        catalog = result.catalog
        member_ids, member_gids = result.member_ids, result.member_gids
    print(
        f"{particles.n} particles -> {catalog.n_groups} groups "
        f"with >= {catalog.min_size} members"
        + (f" (largest: {int(catalog.sizes[0])})" if catalog.n_groups else "")
    )
    if args.catalog:
        write_catalog_csv(args.catalog, catalog)
        print(f"catalog: {args.catalog}")
    if args.membership:
        write_membership_csv(args.membership, member_ids, member_gids)
        print(f"membership: {args.membership}")
    return 0


def _cmd_verify(args) -> int:
    particles, box = load_particles(args.infile)
    found = _finder_partition(
        particles, box, args.linking_length, args.threads, args.ranks, args.decomp
    )
    oracles = []
    if args.oracle in ("naive", "both"):
        oracles.append(("naive", naive_fof))
    if args.oracle in ("bfs", "both"):
        oracles.append(("bfs", bfs_fof))
    for name, fn in oracles:
        expected = fn(particles, box, args.linking_length)
        ok, witness = partitions_equal(found, expected)
        if not ok:
            u, v = witness
            print(f"MISMATCH vs {name}: particles {u} and {v} classified differently")
            return 1
        print(f"match vs {name} ({expected.n_groups()} groups)")
    print("OK")
    return 0


def _cmd_bench(args) -> int:
    particles, box = load_particles(args.infile)
    units = [(t, r) for r in args.ranks_list for t in args.threads_list]
    records = run_bench(
        particles, box, args.linking_length,
        mode=args.mode, units=units, repeats=args.repeats,
    )
    write_bench_csv(args.out, records)
    print(f"bench table: {args.out}")
    if not args.no_plot:
        from .plotting import render_scaling_figure

        fig_path = Path(args.out).with_suffix(".png")
        render_scaling_figure(records, args.mode, fig_path)
        print(f"bench figure: {fig_path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen": _cmd_gen,
        "run": _cmd_run,
        "verify": _cmd_verify,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
