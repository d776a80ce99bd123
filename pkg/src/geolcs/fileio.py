"""Serialization of fields and ridge sets.

Scalar arrays go to one CSV per quantity (one value per line, row-major
node order, 17 significant digits so doubles round-trip exactly); grid
metadata, including a run-length encoding of the invalid-node mask and the
config hash, goes to ``meta.json``.  Ridge sets go to ``ridges.json`` (full
per-point diagnostics) plus a flat ``ridges.csv`` for plotting.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Optional

import numpy as np

from .errors import GeolcsError
from .lcs import FieldGrid, Polyline, RidgeSet

FORMAT_VERSION = 1


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def rle_encode(mask: np.ndarray) -> list[int]:
    """Run lengths of a flat boolean mask, starting with a True run.

    The first entry counts leading True values (possibly zero), then runs
    alternate False/True/...
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    runs = []
    current = True
    count = 0
    for v in flat:
        if v == current:
            count += 1
        else:
            runs.append(count)
            current = v
            count = 1
    runs.append(count)
    return runs


def rle_decode(runs: list[int], size: int) -> np.ndarray:
    out = np.empty(size, dtype=bool)
    pos = 0
    current = True
    for run in runs:
        out[pos:pos + run] = current
        pos += run
        current = not current
    if pos != size:
        raise GeolcsError("run-length data does not match the grid size")
    return out


def _write_column(path, values):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in np.asarray(values).ravel():
            fh.write(_fmt(v) + "\n")


def _read_column(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        return np.array([float(line) for line in fh if line.strip()])


def write_field(grid: FieldGrid, outdir, config_hash: Optional[str] = None) -> list[str]:
    """Write the field CSVs and meta.json into ``outdir``; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    written = []
    scalars = {"lambda1.csv": grid.lambda1, "ftle.csv": grid.ftle,
               "gap.csv": grid.gap}
    for i in range(grid.dim):
        scalars[f"xi1_{i}.csv"] = grid.xi1[..., i]
    for name, arr in scalars.items():
        path = os.path.join(outdir, name)
        _write_column(path, arr)
        written.append(path)
    meta = {
        "format_version": FORMAT_VERSION,
        "window": [list(b) for b in grid.window],
        "resolution": list(grid.resolution),
        "t0": grid.t0,
        "T": grid.T,
        "regime": grid.regime,
        "config_hash": config_hash,
        "invalid_rle": rle_encode(grid.valid),
        "meta": {k: v for k, v in grid.meta.items()},
    }
    path = os.path.join(outdir, "meta.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written


def read_field(outdir) -> FieldGrid:
    """Rebuild a FieldGrid from a directory written by write_field."""
    with open(os.path.join(outdir, "meta.json"), "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    res = tuple(int(n) for n in meta["resolution"])
    size = int(np.prod(res))
    dim = len(res)
    valid = rle_decode(meta["invalid_rle"], size).reshape(res)
    lam = _read_column(os.path.join(outdir, "lambda1.csv")).reshape(res)
    ftle = _read_column(os.path.join(outdir, "ftle.csv")).reshape(res)
    gap = _read_column(os.path.join(outdir, "gap.csv")).reshape(res)
    xi = np.stack([_read_column(os.path.join(outdir, f"xi1_{i}.csv")).reshape(res)
                   for i in range(dim)], axis=-1)
    return FieldGrid(window=tuple(tuple(b) for b in meta["window"]),
                     resolution=res, t0=meta["t0"], T=meta["T"],
                     regime=meta["regime"], lambda1=lam, ftle=ftle, gap=gap,
                     xi1=xi, valid=valid, meta=dict(meta.get("meta") or {}))


def write_ridges(ridges: RidgeSet, outdir, basename: str = "ridges") -> list[str]:
    """Write ridges.json (round-trippable) and ridges.csv (plot-ready)."""
    os.makedirs(outdir, exist_ok=True)
    doc = {
        "format_version": FORMAT_VERSION,
        "extraction_mode": ridges.extraction_mode,
        "window": [list(b) for b in ridges.window],
        "cell": list(ridges.cell),
        "level": ridges.level,
        "quantile": ridges.quantile,
        "min_gap": ridges.min_gap,
        "min_value": ridges.min_value,
        "polylines": [
            {
                "points": pl.points.tolist(),
                "lambda1": pl.lambda1.tolist(),
                "normal": pl.normal.tolist(),
                "angle": pl.angle.tolist(),
                "gap": pl.gap.tolist(),
            }
            for pl in ridges.polylines
        ],
    }
    jpath = os.path.join(outdir, f"{basename}.json")
    with open(jpath, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_sanitize(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    cpath = os.path.join(outdir, f"{basename}.csv")
    with open(cpath, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,lambda1,angle\n")
        for k, pl in enumerate(ridges.polylines):
            if k:
                fh.write("\n")  # blank line separates polylines for plotting
            for p, lam, ang in zip(pl.points, pl.lambda1, pl.angle):
                fh.write(f"{_fmt(p[0])},{_fmt(p[1])},{_fmt(lam)},{_fmt(ang)}\n")
    return [jpath, cpath]


def _sanitize(obj):
    """Replace NaN/inf with null for strict-JSON friendliness."""
    if isinstance(obj, float):
        return obj if np.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_sanitize(v) for v in obj]
    return obj


def _restore(values):
    return np.array([np.nan if v is None else v for v in values], dtype=float)


def read_ridges(path) -> RidgeSet:
    """Rebuild a RidgeSet from a ridges.json file."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    polylines = []
    for pl in doc["polylines"]:
        pts = np.array([[np.nan if c is None else c for c in p]
                        for p in pl["points"]], dtype=float).reshape(-1, 2)
        nrm = np.array([[np.nan if c is None else c for c in p]
                        for p in pl["normal"]], dtype=float).reshape(-1, 2)
        polylines.append(Polyline(points=pts, lambda1=_restore(pl["lambda1"]),
                                  normal=nrm, angle=_restore(pl["angle"]),
                                  gap=_restore(pl["gap"])))
    return RidgeSet(polylines=polylines,
                    extraction_mode=doc["extraction_mode"],
                    window=tuple(tuple(b) for b in doc["window"]),
                    cell=tuple(doc["cell"]),
                    level=doc["level"], quantile=doc["quantile"],
                    min_gap=doc["min_gap"], min_value=doc["min_value"])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
