"""Analysis configuration: sectioned key-value files, validation, hashing.

The format is a plain INI-like text: ``[section]`` headers, ``key = value``
lines, ``#`` comments.  Parsing fills every default, validates every range
and rejects unknown keys, so a parsed config is always complete; the
canonical serialization of that config (fixed section and key order,
shortest round-trip float formatting) is what gets hashed into the output
metadata.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .flow import FIELD_PARAMS, FIELDS, IntegratorConfig, VectorFieldSpec, make_field
from .geometry import (HYPERCOMPLEX_STRUCTURES, MANIFOLDS, FinslerNorm,
                       Manifold, randers_norm)

ENV_OUTDIR = "GEOLCS_OUTDIR"
DEFAULT_OUTDIR = "geolcs_out"

# manifolds whose natural Randers drift is nonzero
_DEFAULT_RANDERS_B = {"randers_torus2": (0.2, 0.0)}


@dataclass(frozen=True)
class MetricSection:
    regime: str
    metric_eval: str = "two_point"
    randers_b: Optional[tuple[float, ...]] = None
    bump_amplitude: float = 0.3
    structure: str = "standard"
    fallback_dir: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class WindowSection:
    t0: float
    T: float
    delta: float


@dataclass(frozen=True)
class GridSection:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    resolution: tuple[int, ...]


@dataclass(frozen=True)
class ExtractSection:
    quantile: float = 0.95
    min_gap: float = 0.0
    min_value: float = 0.0
    align_min_rel_gap: float = 1e-8
    align_max_median_deg: float = 10.0


@dataclass(frozen=True)
class OutputSection:
    dir: str = ""
    plots: bool = True


@dataclass(frozen=True)
class AnalysisConfig:
    manifold_id: str
    flow_id: str
    flow_params: tuple[tuple[str, float], ...]
    metric: MetricSection
    window: WindowSection
    grid: GridSection
    integrator: IntegratorConfig
    extract: ExtractSection = dc_field(default_factory=ExtractSection)
    output: OutputSection = dc_field(default_factory=OutputSection)


def _parse_float(raw, line, key):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got '{raw}'", line, key) from None


def _parse_int(raw, line, key):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got '{raw}'", line, key) from None


def _parse_floats(raw, line, key):
    return tuple(_parse_float(p.strip(), line, key) for p in raw.split(","))


def _parse_ints(raw, line, key):
    return tuple(_parse_int(p.strip(), line, key) for p in raw.split(","))


def _parse_bool(raw, line, key):
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got '{raw}'", line, key)


def _split_sections(text: str):
    """Raw text -> {section: {key: (value, line_no)}} with duplicate checks."""
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if current in sections:
                raise ConfigError(f"duplicate section [{current}]", lineno)
            sections[current] = {}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got '{line}'", lineno)
        if current is None:
            raise ConfigError("key outside any [section]", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key in sections[current]:
            raise ConfigError("duplicate key", lineno, key)
        sections[current][key] = (value, lineno)
    return sections


_KNOWN_SECTIONS = ("manifold", "metric", "flow", "window", "grid",
                   "integrator", "extract", "output")


def parse_config(text: str) -> AnalysisConfig:
    """Parse and fully validate a config text; all defaults are filled.

    Raises
    ------
    ConfigError
        Naming the offending line and key for unknown keys, missing
        required keys and out-of-range values.
    """
    sections = _split_sections(text)
    for name in sections:
        if name not in _KNOWN_SECTIONS:
            raise ConfigError(f"unknown section [{name}]")

    def take(section, key, default=None, required=False):
        sec = sections.get(section, {})
        if key not in sec:
            if required:
                raise ConfigError(f"missing required key '{key}' in [{section}]")
            return default, None
        return sec[key]

    def check_no_extra(section, allowed):
        for key, (_, line) in sections.get(section, {}).items():
            if key not in allowed:
                raise ConfigError(f"unknown key in [{section}]", line, key)

    # ------------------------------------------------------------- manifold
    check_no_extra("manifold", {"id"})
    man_id, line = take("manifold", "id", required=True)
    if man_id not in MANIFOLDS:
        raise ConfigError(f"unknown manifold id '{man_id}'; "
                          f"known: {', '.join(sorted(MANIFOLDS))}", line, "id")
    probe = MANIFOLDS[man_id]()
    dim = probe.dim

    # ----------------------------------------------------------------- flow
    check_no_extra("flow", {"id"} | {p for ps in FIELD_PARAMS.values() for p in ps})
    flow_id, line = take("flow", "id", required=True)
    if flow_id not in FIELDS:
        raise ConfigError(f"unknown flow id '{flow_id}'; "
                          f"known: {', '.join(sorted(FIELDS))}", line, "id")
    allowed = set(FIELD_PARAMS[flow_id]) | {"id"}
    params = []
    for key, (value, kline) in sections.get("flow", {}).items():
        if key == "id":
            continue
        if key not in allowed:
            raise ConfigError(f"parameter not accepted by flow '{flow_id}'",
                              kline, key)
        params.append((key, _parse_float(value, kline, key)))
    params.sort()
    field_probe = make_field(flow_id, dict(params))
    if field_probe.dim != dim:
        raise ConfigError(f"flow '{flow_id}' is {field_probe.dim}-d but "
                          f"manifold '{man_id}' is {dim}-d")

    # --------------------------------------------------------------- metric
    check_no_extra("metric", {"regime", "metric_eval", "randers_b",
                              "bump_amplitude", "structure", "fallback_dir"})
    regime, line = take("metric", "regime", default=probe.default_regime)
    if regime not in ("riemannian", "finsler", "hypercomplex"):
        raise ConfigError("regime must be riemannian | finsler | hypercomplex",
                          line, "regime")
    metric_eval, line = take("metric", "metric_eval", default="two_point")
    if metric_eval not in ("two_point", "base_only"):
        raise ConfigError("metric_eval must be two_point | base_only",
                          line, "metric_eval")
    raw_b, line_b = take("metric", "randers_b")
    randers_b = None
    if raw_b is not None:
        randers_b = _parse_floats(raw_b, line_b, "randers_b")
        if len(randers_b) != dim:
            raise ConfigError(f"randers_b needs {dim} components",
                              line_b, "randers_b")
    elif regime == "finsler":
        randers_b = _DEFAULT_RANDERS_B.get(man_id, (0.0,) * dim)
    raw_amp, line_a = take("metric", "bump_amplitude")
    bump_amplitude = 0.3 if raw_amp is None else _parse_float(raw_amp, line_a,
                                                              "bump_amplitude")
    structure, line_s = take("metric", "structure", default="standard")
    if structure not in HYPERCOMPLEX_STRUCTURES:
        raise ConfigError(f"unknown hypercomplex structure '{structure}'",
                          line_s, "structure")
    if regime == "hypercomplex" and dim != 4:
        raise ConfigError("hypercomplex regime requires a 4-d manifold")
    raw_fb, line_f = take("metric", "fallback_dir")
    fallback_dir = None
    if raw_fb is not None:
        fallback_dir = _parse_floats(raw_fb, line_f, "fallback_dir")
        if len(fallback_dir) != dim:
            raise ConfigError(f"fallback_dir needs {dim} components",
                              line_f, "fallback_dir")
        if not any(c != 0.0 for c in fallback_dir):
            raise ConfigError("fallback_dir must be nonzero", line_f,
                              "fallback_dir")
    elif regime == "finsler":
        fallback_dir = tuple(1.0 if i == 0 else 0.0 for i in range(dim))

    # --------------------------------------------------------------- window
    check_no_extra("window", {"t0", "T", "delta"})
    raw_T, line_T = take("window", "T", required=True)
    T = _parse_float(raw_T, line_T, "T")
    if T == 0.0:
        raise ConfigError("T must be nonzero", line_T, "T")
    raw_t0, line_t = take("window", "t0")
    t0 = 0.0 if raw_t0 is None else _parse_float(raw_t0, line_t, "t0")
    raw_d, line_d = take("window", "delta")
    delta = T / 10.0 if raw_d is None else _parse_float(raw_d, line_d, "delta")

    # ----------------------------------------------------------------- grid
    check_no_extra("grid", {"lo", "hi", "resolution"})
    raw_res, line_r = take("grid", "resolution", required=True)
    resolution = _parse_ints(raw_res, line_r, "resolution")
    if len(resolution) != dim:
        raise ConfigError(f"resolution needs {dim} axes", line_r, "resolution")
    if any(r < 8 for r in resolution):
        raise ConfigError("resolution must be at least 8 per axis",
                          line_r, "resolution")
    raw_lo, line_lo = take("grid", "lo")
    raw_hi, line_hi = take("grid", "hi")
    lo = (tuple(b[0] for b in probe.domain.bounds) if raw_lo is None
          else _parse_floats(raw_lo, line_lo, "lo"))
    hi = (tuple(b[1] for b in probe.domain.bounds) if raw_hi is None
          else _parse_floats(raw_hi, line_hi, "hi"))
    if len(lo) != dim or len(hi) != dim:
        raise ConfigError(f"grid lo/hi need {dim} components")
    for i, (a, b) in enumerate(zip(lo, hi)):
        if not a < b:
            raise ConfigError(f"grid axis {i} has lo >= hi")

    # ------------------------------------------------------------ integrator
    check_no_extra("integrator",
                   {"method", "step", "abs_tol", "rel_tol", "max_steps"})
    method, line_m = take("integrator", "method", default="rk45")
    if method not in ("rk4", "rk45"):
        raise ConfigError("method must be rk4 | rk45", line_m, "method")
    raw, line = take("integrator", "step")
    step = 0.01 if raw is None else _parse_float(raw, line, "step")
    if step <= 0:
        raise ConfigError("step must be positive", line, "step")
    raw, line = take("integrator", "abs_tol")
    abs_tol = 1e-9 if raw is None else _parse_float(raw, line, "abs_tol")
    raw, line = take("integrator", "rel_tol")
    rel_tol = 1e-9 if raw is None else _parse_float(raw, line, "rel_tol")
    if abs_tol <= 0 or rel_tol <= 0:
        raise ConfigError("tolerances must be positive", line)
    raw, line = take("integrator", "max_steps")
    max_steps = 1_000_000 if raw is None else _parse_int(raw, line, "max_steps")
    if max_steps <= 0:
        raise ConfigError("max_steps must be positive", line, "max_steps")

    # -------------------------------------------------------------- extract
    check_no_extra("extract", {"quantile", "min_gap", "min_value",
                               "align_min_rel_gap", "align_max_median_deg"})
    raw, line = take("extract", "quantile")
    quantile = 0.95 if raw is None else _parse_float(raw, line, "quantile")
    if not 0.0 < quantile < 1.0:
        raise ConfigError("quantile out of (0,1)", line, "quantile")
    raw, line = take("extract", "min_gap")
    min_gap = 0.0 if raw is None else _parse_float(raw, line, "min_gap")
    raw, line = take("extract", "min_value")
    min_value = 0.0 if raw is None else _parse_float(raw, line, "min_value")
    raw, line = take("extract", "align_min_rel_gap")
    amrg = 1e-8 if raw is None else _parse_float(raw, line, "align_min_rel_gap")
    if not 0.0 <= amrg < 1.0:
        raise ConfigError("align_min_rel_gap out of [0,1)", line,
                          "align_min_rel_gap")
    raw, line = take("extract", "align_max_median_deg")
    ammd = 10.0 if raw is None else _parse_float(raw, line, "align_max_median_deg")
    if ammd <= 0:
        raise ConfigError("align_max_median_deg must be positive", line,
                          "align_max_median_deg")

    # --------------------------------------------------------------- output
    check_no_extra("output", {"dir", "plots"})
    outdir, _ = take("output", "dir", default="")
    raw, line = take("output", "plots")
    plots = True if raw is None else _parse_bool(raw, line, "plots")

    return AnalysisConfig(
        manifold_id=man_id, flow_id=flow_id, flow_params=tuple(params),
        metric=MetricSection(regime=regime, metric_eval=metric_eval,
                             randers_b=randers_b, bump_amplitude=bump_amplitude,
                             structure=structure, fallback_dir=fallback_dir),
        window=WindowSection(t0=t0, T=T, delta=delta),
        grid=GridSection(lo=lo, hi=hi, resolution=resolution),
        integrator=IntegratorConfig(method=method, step=step, abs_tol=abs_tol,
                                    rel_tol=rel_tol, max_steps=max_steps),
        extract=ExtractSection(quantile=quantile, min_gap=min_gap,
                               min_value=min_value, align_min_rel_gap=amrg,
                               align_max_median_deg=ammd),
        output=OutputSection(dir=outdir, plots=plots),
    )


def parse_config_file(path) -> AnalysisConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(c) for c in v)
    return str(v)


def serialize_config(cfg: AnalysisConfig) -> str:
    """Canonical text form; parse(serialize(cfg)) == cfg."""
    lines = ["[manifold]", f"id = {cfg.manifold_id}", ""]
    m = cfg.metric
    lines += ["[metric]", f"regime = {m.regime}",
              f"metric_eval = {m.metric_eval}"]
    if m.randers_b is not None:
        lines.append(f"randers_b = {_fmt(m.randers_b)}")
    lines.append(f"bump_amplitude = {_fmt(m.bump_amplitude)}")
    lines.append(f"structure = {m.structure}")
    if m.fallback_dir is not None:
        lines.append(f"fallback_dir = {_fmt(m.fallback_dir)}")
    lines.append("")
    lines += ["[flow]", f"id = {cfg.flow_id}"]
    for key, val in cfg.flow_params:
        lines.append(f"{key} = {_fmt(val)}")
    lines.append("")
    w = cfg.window
    lines += ["[window]", f"t0 = {_fmt(w.t0)}", f"T = {_fmt(w.T)}",
              f"delta = {_fmt(w.delta)}", ""]
    g = cfg.grid
    lines += ["[grid]", f"lo = {_fmt(g.lo)}", f"hi = {_fmt(g.hi)}",
              f"resolution = {_fmt(g.resolution)}", ""]
    it = cfg.integrator
    lines += ["[integrator]", f"method = {it.method}", f"step = {_fmt(it.step)}",
              f"abs_tol = {_fmt(it.abs_tol)}", f"rel_tol = {_fmt(it.rel_tol)}",
              f"max_steps = {it.max_steps}", ""]
    e = cfg.extract
    lines += ["[extract]", f"quantile = {_fmt(e.quantile)}",
              f"min_gap = {_fmt(e.min_gap)}", f"min_value = {_fmt(e.min_value)}",
              f"align_min_rel_gap = {_fmt(e.align_min_rel_gap)}",
              f"align_max_median_deg = {_fmt(e.align_max_median_deg)}", ""]
    o = cfg.output
    lines += ["[output]", f"dir = {o.dir}", f"plots = {_fmt(o.plots)}", ""]
    return "\n".join(lines)


def config_hash(cfg: AnalysisConfig) -> str:
    return hashlib.sha256(serialize_config(cfg).encode("utf-8")).hexdigest()


def resolve_outdir(cfg: AnalysisConfig, override: Optional[str] = None) -> str:
    """Output directory precedence: CLI flag > config > environment > default."""
    if override:
        return override
    if cfg.output.dir:
        return cfg.output.dir
    return os.environ.get(ENV_OUTDIR, DEFAULT_OUTDIR)


# ---------------------------------------------------------------------------
# scenario construction


@dataclass(frozen=True)
class Scenario:
    """Instantiated objects for one configured analysis."""

    cfg: AnalysisConfig
    manifold: Manifold
    field: VectorFieldSpec
    finsler: Optional[FinslerNorm]

    @property
    def window(self):
        return tuple(zip(self.cfg.grid.lo, self.cfg.grid.hi))


def build_scenario(cfg: AnalysisConfig) -> Scenario:
    """Instantiate the manifold, flow and norm a config refers to."""
    kwargs = {}
    if cfg.manifold_id == "bump_torus2":
        kwargs["amplitude"] = cfg.metric.bump_amplitude
    if cfg.manifold_id == "randers_torus2" and cfg.metric.randers_b is not None:
        kwargs["b"] = cfg.metric.randers_b
    manifold = MANIFOLDS[cfg.manifold_id](**kwargs)
    field = make_field(cfg.flow_id, dict(cfg.flow_params))
    finsler = None
    if cfg.metric.regime == "finsler":
        b = cfg.metric.randers_b or (0.0,) * manifold.dim
        finsler = manifold.finsler
        if finsler is None or cfg.metric.randers_b is not None:
            finsler = randers_norm(manifold.metric, np.asarray(b, dtype=float))
    return Scenario(cfg=cfg, manifold=manifold, field=field, finsler=finsler)


def compute_configured_field(scn: Scenario, threads: int = 1,
                             t0: Optional[float] = None):
    """Run the configured sweep (optionally at a shifted start time)."""
    from .lcs import compute_field
    cfg = scn.cfg
    return compute_field(
        scn.manifold, scn.field,
        cfg.window.t0 if t0 is None else t0, cfg.window.T,
        cfg.grid.resolution, window=scn.window,
        regime=cfg.metric.regime, cfg=cfg.integrator,
        metric_eval=cfg.metric.metric_eval, finsler=scn.finsler,
        fallback_dir=cfg.metric.fallback_dir, threads=threads)
