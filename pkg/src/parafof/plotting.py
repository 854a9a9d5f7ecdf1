"""Scaling figures rendered next to the benchmark tables."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchRecord


def render_scaling_figure(records: list[BenchRecord], mode: str, path) -> None:
    """Two panels: wall time vs workers (with the ideal-scaling guide) and
    efficiency vs workers. Writes ``path`` (format from its extension)."""
    if not records:
        raise ValueError("nothing to plot")
    units = [r.threads * r.ranks for r in records]
    times = [r.time_s for r in records]
    sds = [r.time_sd_s for r in records]
    effs = [r.efficiency for r in records]

    if mode == "strong":
        ideal = [times[0] * units[0] / u for u in units]
        ideal_label = "ideal 1/workers"
    else:
        ideal = [times[0]] * len(units)
        ideal_label = "ideal flat"

    fig, (ax_t, ax_e) = plt.subplots(1, 2, figsize=(9.0, 3.8))

    ax_t.errorbar(units, times, yerr=sds, marker="o", capsize=3, label="measured")
    ax_t.plot(units, ideal, "--", color="gray", label=ideal_label)
    ax_t.set_xscale("log", base=2)
    ax_t.set_yscale("log")
    ax_t.set_xlabel("workers (threads x ranks)")
    ax_t.set_ylabel("wall time [s]")
    ax_t.set_title(f"{mode} scaling: time")
    ax_t.legend()

    ax_e.plot(units, effs, marker="s", color="tab:green")
    ax_e.axhline(1.0, ls="--", color="gray")
    ax_e.set_xscale("log", base=2)
    ax_e.set_ylim(0.0, 1.2)
    ax_e.set_xlabel("workers (threads x ranks)")
    ax_e.set_ylabel("parallel efficiency")
    ax_e.set_title(f"{mode} scaling: efficiency")

    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
