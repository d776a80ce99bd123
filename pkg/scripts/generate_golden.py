#!/usr/bin/env python3
"""Regenerate the committed double-gyre golden data.

The golden field is the production scenario (tests/golden/double_gyre/
prod.cfg) recomputed on a 4x-refined grid (node count 4(n-1)+1 per axis, so
every production node is also a golden node) with 10x tighter integrator
tolerances.  Committed artifacts:

  golden_ftle.csv, golden_lambda1.csv   golden values at the production nodes
  golden_levelset.json/.csv             q = 0.95 level set of the full golden grid
  golden_meta.json                      golden config text + summary numbers
  prod_hashes.json                      sha256 of the production `lcs` outputs

Run from the repository root:  python3 scripts/generate_golden.py [--threads N]
"""

import argparse
import dataclasses
import json
import os
import sys
import tempfile
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from geolcs import cli  # noqa: E402
from geolcs.config import (build_scenario, compute_configured_field,
                           config_hash, parse_config_file,
                           serialize_config)  # noqa: E402
from geolcs.fileio import sha256_file, write_ridges  # noqa: E402
from geolcs.lcs import extract_level_set, verify_alignment  # noqa: E402

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "golden",
                          "double_gyre")

# production files whose bytes the golden manifest pins (figures excluded:
# they depend on the matplotlib build, not on this package)
HASHED_FILES = ["lambda1.csv", "ftle.csv", "gap.csv", "xi1_0.csv", "xi1_1.csv",
                "meta.json", "ridges.json", "ridges.csv",
                "ridges_hessian.json", "ridges_hessian.csv", "reports.json"]


def refine(cfg):
    grid = dataclasses.replace(
        cfg.grid, resolution=tuple(4 * (n - 1) + 1 for n in cfg.grid.resolution))
    integ = dataclasses.replace(cfg.integrator, abs_tol=cfg.integrator.abs_tol / 10,
                                rel_tol=cfg.integrator.rel_tol / 10)
    return dataclasses.replace(cfg, grid=grid, integrator=integ)


def write_column(path, values):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in np.asarray(values).ravel():
            fh.write(f"{v:.17g}\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    prod_path = os.path.join(GOLDEN_DIR, "prod.cfg")
    cfg = parse_config_file(prod_path)
    golden_cfg = refine(cfg)
    scn = build_scenario(golden_cfg)

    print(f"golden sweep {golden_cfg.grid.resolution} "
          f"tol {golden_cfg.integrator.abs_tol:g} ...", flush=True)
    tic = time.perf_counter()
    grid = compute_configured_field(scn, threads=args.threads)
    print(f"  done in {time.perf_counter() - tic:.0f}s, "
          f"{grid.n_valid} valid nodes", flush=True)

    # golden nodes [::4] must be exactly the production nodes
    prod_axes = [np.linspace(lo, hi, n)
                 for (lo, hi), n in zip(zip(cfg.grid.lo, cfg.grid.hi),
                                        cfg.grid.resolution)]
    for ax_g, ax_p in zip(grid.axes, prod_axes):
        assert np.array_equal(ax_g[::4], ax_p), "axis refinement misaligned"

    write_column(os.path.join(GOLDEN_DIR, "golden_ftle.csv"),
                 grid.ftle[::4, ::4])
    write_column(os.path.join(GOLDEN_DIR, "golden_lambda1.csv"),
                 grid.lambda1[::4, ::4])

    level = extract_level_set(grid, cfg.extract.quantile)
    write_ridges(level, GOLDEN_DIR, basename="golden_levelset")
    align = verify_alignment(level, min_rel_gap=cfg.extract.align_min_rel_gap)

    print("production lcs run ...", flush=True)
    with tempfile.TemporaryDirectory() as tmp:
        rc = cli.main(["lcs", prod_path, "--out", tmp, "--threads",
                       str(args.threads)])
        assert rc == 0, "production lcs run failed"
        hashes = {name: sha256_file(os.path.join(tmp, name))
                  for name in HASHED_FILES}
    with open(os.path.join(GOLDEN_DIR, "prod_hashes.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(hashes, fh, indent=2, sort_keys=True)
        fh.write("\n")

    meta = {
        "golden_config": serialize_config(golden_cfg),
        "golden_config_hash": config_hash(golden_cfg),
        "prod_config_hash": config_hash(cfg),
        "subsample_stride": 4,
        "golden_resolution": list(golden_cfg.grid.resolution),
        "prod_resolution": list(cfg.grid.resolution),
        "golden_level": level.level,
        "golden_levelset_points": level.n_points,
        "golden_alignment_median_deg": align.median_deg,
        "ftle_range": [float(np.nanmin(grid.ftle)), float(np.nanmax(grid.ftle))],
    }
    with open(os.path.join(GOLDEN_DIR, "golden_meta.json"), "w",
              encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print("golden data written to", GOLDEN_DIR)


if __name__ == "__main__":
    main()
