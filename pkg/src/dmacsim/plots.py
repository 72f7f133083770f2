"""Static SVG line charts of sweep results."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import RunReport, ideal_utilization  # noqa: E402

# fixed salt and no timestamp so identical data gives identical files
matplotlib.rcParams["svg.hashsalt"] = "dmacsim"
_SVG_META = {"Date": None, "Creator": "dmacsim"}


def _numeric_size(r: RunReport) -> int | None:
    return int(r.size) if r.size.isdigit() else None


def plot_sweep(reports: Sequence[RunReport], out_dir: Path) -> list[Path]:
    """One file per latency: a curve per configuration plus the ideal bound."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_latency: dict[int, dict[str, list[tuple[int, float]]]] = defaultdict(lambda: defaultdict(list))
    for r in reports:
        n = _numeric_size(r)
        if n is not None:
            by_latency[r.latency][r.config].append((n, r.steady_state_utilization))
    paths = []
    for L in sorted(by_latency):
        fig = sweep_figure(L, by_latency[L])
        path = out_dir / f"utilization_L{L}.svg"
        fig.savefig(path, format="svg", metadata=_SVG_META)
        plt.close(fig)
        paths.append(path)
    return paths


def sweep_figure(latency: int, curves: dict[str, list[tuple[int, float]]]):
    """Figure for one latency; the first line is the ideal bound."""
    sizes = sorted({n for pts in curves.values() for n, _ in pts})
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(sizes, [ideal_utilization(n) for n in sizes], "k--", label="ideal")
    for name, pts in curves.items():
        pts = sorted(pts)
        ax.plot([n for n, _ in pts], [u for _, u in pts], marker="o", label=name)
    ax.set_xscale("log", base=2)
    ax.set_ylim(0, 1.02)
    ax.set_xlabel("transfer size [B]")
    ax.set_ylabel("steady-state bus utilization")
    ax.set_title(f"one-way memory latency {latency} cycles")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return fig


def plot_miss_sweep(reports: Sequence[RunReport], out_dir: Path) -> Path:
    """Utilization against hit rate, one curve per transfer size."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves: dict[str, list[tuple[float, float]]] = defaultdict(list)
    for r in reports:
        curves[r.size].append((r.hit_rate, r.steady_state_utilization))
    fig, ax = plt.subplots(figsize=(6, 4))
    for size in sorted(curves, key=lambda s: int(s) if s.isdigit() else 0):
        pts = sorted(curves[size])
        ax.plot([h for h, _ in pts], [u for _, u in pts], marker="o", label=f"{size} B")
    ax.set_xlabel("speculation hit rate")
    ax.set_ylabel("steady-state bus utilization")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    path = out_dir / "miss_sweep.svg"
    fig.savefig(path, format="svg", metadata=_SVG_META)
    plt.close(fig)
    return path
