"""Score-distribution histograms.

All classes share one equal-width bin grid spanning the column's observed
range, so per-class distributions are directly comparable.  The text
layout is one header line per class followed by ``edge_low edge_high
count`` rows; a constant column collapses to a single degenerate bin and
is flagged explicitly.  An optional matplotlib rendering of the same data
can be written next to the text file.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import FormatError


@dataclass(frozen=True)
class HistogramData:
    column: str
    edges: np.ndarray              # bins + 1 edges, shared by all classes
    counts: dict[str, np.ndarray]  # class name -> per-bin trial counts
    degenerate: bool = False


def build_histogram(values_by_class: Mapping[str, Sequence[float]],
                    n_bins: int, column: str) -> HistogramData:
    """Bin every class over the pooled [min, max] range."""
    if n_bins < 1:
        raise ValueError("need at least one bin")
    pooled = np.concatenate([np.asarray(v, dtype=np.float64)
                             for v in values_by_class.values()
                             if len(v)]) if values_by_class else np.array([])
    if pooled.size == 0:
        raise ValueError("no scores to histogram")
    if not np.all(np.isfinite(pooled)):
        raise ValueError("scores contain a non-finite value")

    lo, hi = float(pooled.min()), float(pooled.max())
    if lo == hi:
        counts = {name: np.array([len(v)])
                  for name, v in values_by_class.items()}
        return HistogramData(column=column, edges=np.array([lo, hi]),
                             counts=counts, degenerate=True)

    edges = np.linspace(lo, hi, n_bins + 1)
    counts = {}
    for name, vals in values_by_class.items():
        c, _ = np.histogram(np.asarray(vals, dtype=np.float64), bins=edges)
        counts[name] = c
    return HistogramData(column=column, edges=edges, counts=counts)


def write_histogram(path, hist: HistogramData) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# histogram column={hist.column} bins={hist.edges.size - 1}\n")
        if hist.degenerate:
            f.write(f"# degenerate: constant column, single bin at "
                    f"{hist.edges[0]:.9g}\n")
        for name, counts in hist.counts.items():
            f.write(f"class {name} total {int(counts.sum())}\n")
            for k, c in enumerate(counts):
                f.write(f"{hist.edges[k]:.9g} {hist.edges[k + 1]:.9g} {int(c)}\n")


def load_histogram(path) -> HistogramData:
    """Inverse of write_histogram (used for round-trip checks)."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# histogram column="):
        raise FormatError(f"{path}: missing histogram header")
    column = lines[0].split("column=")[1].split()[0]
    degenerate = any(line.startswith("# degenerate") for line in lines[:2])
    counts: dict[str, list[int]] = {}
    edges: list[float] = []
    current = None
    for line in lines[1:]:
        if line.startswith("#") or not line.strip():
            continue
        if line.startswith("class "):
            current = line.split()[1]
            counts[current] = []
            first_class = len(counts) == 1
            continue
        lo, hi, c = line.split()
        if current is None:
            raise FormatError(f"{path}: bin row before any class header")
        if first_class:
            if not edges:
                edges.append(float(lo))
            edges.append(float(hi))
        counts[current].append(int(c))
    return HistogramData(column=column, edges=np.asarray(edges),
                         counts={k: np.asarray(v) for k, v in counts.items()},
                         degenerate=degenerate)


def render_histogram(hist: HistogramData, path) -> None:
    """Draw per-class step histograms of the shared bins to an image file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    if hist.degenerate:
        names = list(hist.counts)
        ax.bar(range(len(names)),
               [int(hist.counts[n][0]) for n in names],
               tick_label=names)
        ax.set_title(f"{hist.column}: constant column at {hist.edges[0]:.6g}")
        ax.set_ylabel("trials")
    else:
        for name, counts in hist.counts.items():
            ax.stairs(counts, hist.edges, label=name, fill=True, alpha=0.45)
        ax.set_xlabel(hist.column)
        ax.set_ylabel("trials")
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
