"""Figure rendering for the CLI report path.

Renders the FTLE map and the extracted structures to PNG next to the CSV
output.  The Agg backend is forced and the PNG metadata pinned so repeated
runs of the same analysis produce byte-identical images.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .lcs import FieldGrid, RidgeSet  # noqa: E402

_PNG_META = {"Software": "geolcs"}
_DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)
    return path


def _field_panel(ax, grid: FieldGrid):
    ax0, ax1 = grid.axes
    data = np.where(grid.valid, grid.ftle, np.nan)
    mesh = ax.pcolormesh(ax0, ax1, data.T, shading="nearest", cmap="viridis")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.set_aspect("equal")
    return mesh


def plot_field(grid: FieldGrid, outdir, name: str = "ftle.png") -> str:
    """FTLE heat map of a 2-d field."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    mesh = _field_panel(ax, grid)
    fig.colorbar(mesh, ax=ax, label="FTLE")
    ax.set_title(f"{grid.meta.get('field', 'flow')} on "
                 f"{grid.meta.get('manifold', 'chart')}  "
                 f"(t0={grid.t0:g}, T={grid.T:g}, {grid.regime})")
    fig.tight_layout()
    return _save(fig, os.path.join(outdir, name))


def plot_ridges(grid: FieldGrid, ridge_sets: list[RidgeSet], outdir,
                name: str = "ridges.png") -> str:
    """FTLE map with the extracted structures drawn on top."""
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    mesh = _field_panel(ax, grid)
    fig.colorbar(mesh, ax=ax, label="FTLE")
    styles = {"level_set": dict(color="w", lw=1.2),
              "ridge": dict(color="r", lw=0.9, ls="--")}
    seen = set()
    for rs in ridge_sets:
        style = styles.get(rs.extraction_mode, dict(color="k", lw=1.0))
        for pl in rs.polylines:
            label = None
            if rs.extraction_mode not in seen:
                label = rs.extraction_mode.replace("_", " ")
                seen.add(rs.extraction_mode)
            ax.plot(pl.points[:, 0], pl.points[:, 1], label=label, **style)
    if seen:
        ax.legend(loc="upper right", fontsize=8)
    ax.set_title("LCS candidates")
    fig.tight_layout()
    return _save(fig, os.path.join(outdir, name))


def plot_spectrum(grid: FieldGrid, outdir, name: str = "spectrum.png") -> str:
    """Histogram of the dominant eigenvalue over valid nodes (any dimension)."""
    vals = grid.lambda1[grid.valid]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.hist(vals, bins=60, color="steelblue")
    ax.set_xlabel("dominant eigenvalue")
    ax.set_ylabel("nodes")
    ax.set_title(f"spectrum, {grid.regime} regime")
    fig.tight_layout()
    return _save(fig, os.path.join(outdir, name))


def render_report_figures(grid: FieldGrid, ridge_sets: list[RidgeSet],
                          outdir) -> list[str]:
    """The standard figure set for one analysis."""
    written = []
    if grid.dim == 2:
        written.append(plot_field(grid, outdir))
        if ridge_sets:
            written.append(plot_ridges(grid, ridge_sets, outdir))
    else:
        written.append(plot_spectrum(grid, outdir))
    return written
