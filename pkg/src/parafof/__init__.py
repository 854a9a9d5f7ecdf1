"""parafof: parallel friends-of-friends particle group finder.

Particles closer than a linking length are friends; groups are the connected
components of the friendship graph. The finder runs on one box with any
number of threads over a lock-free union-find, or across simulated
distributed ranks that merge their boundary-spanning groups explicitly.
"""

from .bench import BenchRecord, run_bench, write_bench_csv
from .comm import InProcessComm, ProtocolError, make_comms, run_on_ranks
from .distributed import (
    DistributedResult,
    DomainDecomposition,
    GroupLink,
    distributed_fof,
    merge_global,
    run_distributed_fof,
)
from .engine import (
    DEFAULT_MIN_SIZE,
    GroupCatalog,
    compute_group_sizes_parallel,
    compute_group_sizes_serial,
    extract_catalog,
    membership_table,
    run_local_fof,
)
from .generate import generate, replicate
from .geometry import (
    Box,
    CellGrid,
    LinkingLength,
    ProximityTask,
    build_grid,
    make_tasks,
    min_image_dist2,
)
from .oracle import Partition, bfs_fof, naive_fof, partitions_equal
from .particle_io import load_particles, save_particles
from .particles import Particles
from .unionfind import UnionFind

__version__ = "0.1.0"

__all__ = [
    "BenchRecord",
    "Box",
    "CellGrid",
    "DEFAULT_MIN_SIZE",
    "DistributedResult",
    "DomainDecomposition",
    "GroupCatalog",
    "GroupLink",
    "InProcessComm",
    "LinkingLength",
    "Partition",
    "Particles",
    "ProtocolError",
    "ProximityTask",
    "UnionFind",
    "bfs_fof",
    "build_grid",
    "compute_group_sizes_parallel",
    "compute_group_sizes_serial",
    "distributed_fof",
    "extract_catalog",
    "generate",
    "load_particles",
    "make_comms",
    "make_tasks",
    "membership_table",
    "merge_global",
    "min_image_dist2",
    "naive_fof",
    "partitions_equal",
    "replicate",
    "run_bench",
    "run_distributed_fof",
    "run_local_fof",
    "run_on_ranks",
    "save_particles",
    "write_bench_csv",
]
