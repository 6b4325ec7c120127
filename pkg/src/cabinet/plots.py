"""Render metrics figures next to the delimited output.

The CSV stays the contract; these figures are a convenience view of the
same rows (per-round commit latency and throughput, plus side-by-side
paired comparisons).
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

__all__ = ["load_rows_csv", "render_compare_figures", "render_metrics_figures"]


def load_rows_csv(path) -> list[dict]:
    """Read metrics rows back from a CSV, skipping the summary comments."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(line for line in fh if not line.startswith("#"))
        for row in reader:
            rows.append(row)
    return rows


def _series(rows):
    if rows and isinstance(rows[0], dict):
        rounds = [int(r["round"]) for r in rows]
        lat = [float(r["commit_latency_ms"]) for r in rows]
        tput = [float(r["throughput_ops_per_s"]) for r in rows]
        algo = rows[0]["algo"] if rows else ""
    else:
        rounds = [r.round for r in rows]
        lat = [r.commit_latency_ms for r in rows]
        tput = [r.throughput_ops_per_s for r in rows]
        algo = rows[0].algo if rows else ""
    return rounds, lat, tput, algo


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_metrics_figures(rows, out_dir, stem: str = "metrics") -> list[Path]:
    """Write <stem>_latency.png and <stem>_throughput.png under out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rounds, lat, tput, algo = _series(rows)
    written = []

    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(rounds, lat, marker="o", ms=2.5, lw=1, label=algo or None)
    ax.set_xlabel("round")
    ax.set_ylabel("commit latency (ms)")
    if algo:
        ax.legend(frameon=False)
    written.append(_save(fig, out / f"{stem}_latency.png"))

    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(rounds, tput, marker="o", ms=2.5, lw=1, color="tab:green", label=algo or None)
    ax.set_xlabel("round")
    ax.set_ylabel("throughput (ops/s)")
    if algo:
        ax.legend(frameon=False)
    written.append(_save(fig, out / f"{stem}_throughput.png"))
    return written


def render_compare_figures(cab_rows, base_rows, out_dir, stem: str = "compare") -> list[Path]:
    """Overlay cabinet and baseline per-round latency and throughput."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for metric, ylabel in (("lat", "commit latency (ms)"), ("tput", "throughput (ops/s)")):
        fig, ax = plt.subplots(figsize=(6, 3.2))
        for rows, style in ((cab_rows, "-o"), (base_rows, "--s")):
            rounds, lat, tput, algo = _series(rows)
            ax.plot(rounds, lat if metric == "lat" else tput, style, ms=2.5, lw=1, label=algo)
        ax.set_xlabel("round")
        ax.set_ylabel(ylabel)
        ax.legend(frameon=False)
        suffix = "latency" if metric == "lat" else "throughput"
        written.append(_save(fig, out / f"{stem}_{suffix}.png"))
    return written
