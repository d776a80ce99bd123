"""Command-line entry points.

Subcommands
-----------
ftle <config>      compute the stretching field and write it (CSV + figures)
lcs <config>       field + level-set and ridge extraction + alignment and
                   invariance reports
flowmap <config> --at x1,x2[,x3,x4]   single-seed flow map dump (JSON)
validate <config>  run the scenario invariant suites, print pass/fail lines

Exit status: 0 on success, 1 on validation/runtime failure, 2 on config
errors.  ``--threads N`` controls the sweep worker count (0 = auto); output
bytes never depend on it.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import checks as checks_mod
from .config import (build_scenario, compute_configured_field, config_hash,
                     parse_config_file, resolve_outdir)
from .errors import ConfigError, EmptyInputError, GeolcsError
from .fileio import write_field, write_ridges
from .flow import flow_jacobian_variational
from .lcs import extract_level_set, extract_ridges, verify_alignment, verify_invariance


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolcs",
        description="FTLE fields and LCS ridges on Riemannian, Finsler and "
                    "hypercomplex charts")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="path to the analysis config file")
        p.add_argument("--threads", type=int, default=0,
                       help="sweep worker threads (0 = auto)")
        p.add_argument("--out", default=None,
                       help="output directory (overrides config and "
                            "GEOLCS_OUTDIR)")
        p.add_argument("--no-plots", action="store_true",
                       help="skip figure rendering")

    p_ftle = sub.add_parser("ftle", help="compute and write the FTLE field")
    common(p_ftle)
    p_lcs = sub.add_parser("lcs", help="full analysis: field, extractions, reports")
    common(p_lcs)
    p_fm = sub.add_parser("flowmap", help="single-seed flow map dump")
    p_fm.add_argument("config")
    p_fm.add_argument("--at", required=True,
                      help="seed point, comma separated chart coordinates")
    p_fm.add_argument("--threads", type=int, default=0, help=argparse.SUPPRESS)
    p_val = sub.add_parser("validate", help="run the scenario invariant suites")
    p_val.add_argument("config")
    p_val.add_argument("--threads", type=int, default=0,
                       help="sweep worker threads (0 = auto)")
    return parser


def _threads(args) -> int:
    n = getattr(args, "threads", 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _load_config(path):
    try:
        return parse_config_file(path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc


def _report_path(outdir) -> str:
    return os.path.join(outdir, "reports.json")


def _alignment_doc(report) -> dict:
    return {
        "n_points": report.n_points,
        "n_used": report.n_used,
        "mean_rad": report.mean_rad,
        "median_rad": report.median_rad,
        "p95_rad": report.p95_rad,
        "mean_deg": report.mean_deg,
        "median_deg": report.median_deg,
        "p95_deg": report.p95_deg,
        "min_rel_gap": report.min_rel_gap,
        "threshold_deg": math.degrees(report.threshold_rad),
        "passed": report.passed,
    }


def _invariance_doc(report) -> dict:
    doc = {
        "n_points": report.n_points,
        "n_exited": report.n_exited,
        "delta": report.delta,
        "cell_unit": report.cell_unit,
        "degenerate_empty": report.degenerate_empty,
    }
    if not report.degenerate_empty:
        doc.update(mean_dist=report.mean_dist, max_dist=report.max_dist,
                   p95_dist=report.p95_dist, mean_cells=report.mean_cells,
                   max_cells=report.max_cells)
    return doc


def _write_reports(outdir, doc):
    with open(_report_path(outdir), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_ftle(args) -> int:
    cfg = _load_config(args.config)
    scn = build_scenario(cfg)
    outdir = resolve_outdir(cfg, args.out)
    tic = time.perf_counter()
    grid = compute_configured_field(scn, threads=_threads(args))
    wall = time.perf_counter() - tic
    write_field(grid, outdir, config_hash=config_hash(cfg))
    if cfg.output.plots and not args.no_plots:
        from .plots import render_report_figures
        render_report_figures(grid, [], outdir)
    print(f"field {'x'.join(map(str, grid.resolution))} "
          f"({grid.n_valid} valid nodes) in {wall:.2f}s -> {outdir}")
    if grid.meta.get("coverage_warning"):
        print("warning: more than 10% of nodes left the chart", file=sys.stderr)
    return 0


def _cmd_lcs(args) -> int:
    cfg = _load_config(args.config)
    scn = build_scenario(cfg)
    outdir = resolve_outdir(cfg, args.out)
    threads = _threads(args)
    grid = compute_configured_field(scn, threads=threads)
    write_field(grid, outdir, config_hash=config_hash(cfg))

    reports: dict = {}
    ridge_sets = []
    if grid.dim == 2:
        level = extract_level_set(grid, cfg.extract.quantile)
        crest = extract_ridges(grid, min_gap=cfg.extract.min_gap,
                               min_value=cfg.extract.min_value)
        write_ridges(level, outdir, basename="ridges")
        write_ridges(crest, outdir, basename="ridges_hessian")
        ridge_sets = [level, crest]
        reports["extraction"] = {
            "level_set": {"n_polylines": len(level.polylines),
                          "n_points": level.n_points, "level": level.level,
                          "quantile": level.quantile},
            "ridge": {"n_polylines": len(crest.polylines),
                      "n_points": crest.n_points},
        }
        try:
            align = verify_alignment(
                level, min_rel_gap=cfg.extract.align_min_rel_gap,
                max_median_rad=math.radians(cfg.extract.align_max_median_deg))
            reports["alignment"] = _alignment_doc(align)
        except EmptyInputError:
            reports["alignment"] = {"degenerate_empty": True}
        invar = verify_invariance(level, grid, scn.manifold, scn.field,
                                  cfg=cfg.integrator, delta=cfg.window.delta,
                                  metric_eval=cfg.metric.metric_eval,
                                  finsler=scn.finsler,
                                  fallback_dir=cfg.metric.fallback_dir,
                                  threads=threads)
        reports["invariance"] = _invariance_doc(invar)
    else:
        lam = grid.lambda1[grid.valid]
        gap = grid.gap[grid.valid]
        reports["eigen_stats"] = {
            "lambda1_min": float(lam.min()), "lambda1_max": float(lam.max()),
            "lambda1_mean": float(lam.mean()),
            "gap_min": float(gap.min()), "gap_max": float(gap.max()),
            "note": "no geometric extraction on 4-d charts; raw fields exported",
        }
    _write_reports(outdir, reports)

    if cfg.output.plots and not args.no_plots:
        from .plots import render_report_figures
        render_report_figures(grid, ridge_sets, outdir)

    print(f"lcs analysis -> {outdir}")
    if "alignment" in reports and not reports["alignment"].get("degenerate_empty"):
        a = reports["alignment"]
        print(f"  alignment: median {a['median_deg']:.3f} deg over "
              f"{a['n_used']} points "
              f"({'pass' if a['passed'] else 'above threshold'})")
    if "invariance" in reports and not reports["invariance"].get("degenerate_empty"):
        i = reports["invariance"]
        print(f"  invariance: mean {i['mean_cells']:.3f} cells after "
              f"delta = {i['delta']:g}")
    return 0


def _cmd_flowmap(args) -> int:
    cfg = _load_config(args.config)
    scn = build_scenario(cfg)
    try:
        x = np.array([float(p) for p in args.at.split(",")])
    except ValueError:
        raise ConfigError(f"--at expects comma-separated numbers, got '{args.at}'")
    if len(x) != scn.manifold.dim:
        raise ConfigError(f"--at needs {scn.manifold.dim} coordinates")
    res = flow_jacobian_variational(x, cfg.window.t0, cfg.window.T, scn.field,
                                    cfg.integrator, scn.manifold.domain)
    doc = {
        "seed": x.tolist(),
        "t0": cfg.window.t0,
        "T": cfg.window.T,
        "endpoint": res.endpoint.tolist(),
        "jacobian": res.jacobian.tolist(),
        "det": float(np.linalg.det(res.jacobian)),
        "steps_taken": res.steps_taken,
        "method_tag": res.method_tag,
    }
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def _cmd_validate(args) -> int:
    cfg = _load_config(args.config)
    scn = build_scenario(cfg)
    results = checks_mod.run_checks(scn, threads=_threads(args))
    for r in results:
        print(r.line())
    n_fail = sum(not r.passed for r in results)
    print(f"{len(results) - n_fail}/{len(results)} checks passed")
    return 0 if n_fail == 0 else 1


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"ftle": _cmd_ftle, "lcs": _cmd_lcs,
                "flowmap": _cmd_flowmap, "validate": _cmd_validate}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GeolcsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
