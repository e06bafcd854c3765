"""Matplotlib figures written next to the CSV/JSON output."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .lattice import SiteSet  # noqa: E402
from .report import raster  # noqa: E402

# Fixed salt and no date stamp keep SVG output byte-identical across reruns.
RC = {
    "svg.hashsalt": "frogmodel",
    "font.size": 9,
    "axes.linewidth": 0.8,
    "figure.dpi": 100,
}
_NO_DATE = {"svg": {"Date": None}, "png": {"Software": None}}


def _save(fig, path: Path) -> Path:
    fmt = Path(path).suffix.lstrip(".")
    fig.savefig(path, format=fmt, metadata=_NO_DATE.get(fmt))
    plt.close(fig)
    return path


def render_shape(sites: SiteSet, n: int, path: Path, title: str | None = None) -> Path:
    """Scaled discovered set as filled unit cells on [-1.1, 1.1]^2 (SVG or PNG by suffix)."""
    img = raster(sites, n)
    half = (img.shape[0] - 1) // 2
    ext = (half + 0.5) / n
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.imshow(img, cmap="Greys", vmin=0, vmax=1, extent=(-ext, ext, -ext, ext),
                  interpolation="nearest", origin="upper")
        ax.set_xlim(-1.1, 1.1)
        ax.set_ylim(-1.1, 1.1)
        ax.set_aspect("equal")
        ax.plot([1, 0, -1, 0, 1], [0, 1, 0, -1, 0], lw=0.6, color="tab:red", ls="--")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_distance_trend(medians: dict[int, float], path: Path) -> Path:
    ns = sorted(medians)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.plot(ns, [medians[n] for n in ns], marker="o")
        ax.set_xscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel("median Hausdorff distance (L1)")
        fig.tight_layout()
        return _save(fig, path)


def plot_coexistence(labels: list[str], freqs: list[float], intervals: list[tuple[float, float]],
                     path: Path) -> Path:
    x = np.arange(len(labels))
    lo = [f - a for f, (a, _) in zip(freqs, intervals)]
    hi = [b - f for f, (_, b) in zip(freqs, intervals)]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.errorbar(x, freqs, yerr=[lo, hi], fmt="o", capsize=3)
        ax.set_xticks(x, labels, rotation=20)
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("coexistence frequency")
        fig.tight_layout()
        return _save(fig, path)
