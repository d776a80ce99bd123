"""Grid evaluation of stretching fields and extraction of LCS candidates.

``compute_field`` sweeps a chart window: per node it integrates the flow
Jacobian, assembles the regime-appropriate deformation tensor, solves the
generalized eigenproblem and records the dominant eigenvalue, the FTLE, the
dominant stretch direction and the spectral gap.  Candidate structures are
then read off a 2-d field in two ways that bracket the theory: iso-contours
of the dominant eigenvalue at a quantile level (the level-set family the
existence argument works with) and second-derivative ridges (points where
the eigenvalue is locally maximal transverse to the structure).  Two
verification operations measure the defining properties: alignment of the
structure normals with the dominant stretch direction, and material
invariance under a short re-analysis offset.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .deformation import gen_eigh_batch, hypercomplex_pullback
from .errors import (DimensionError, EmptyFieldError, EmptyInputError,
                     GeolcsError, MetricError)
from .flow import IntegratorConfig, VectorFieldSpec, advect_batch, flow_jacobian_batch
from .geometry import (FinslerNorm, Manifold, fundamental_tensor,
                       hypercomplex_check)

CHUNK = 4096          # nodes per sweep chunk; fixed so worker count never
                      # changes how the grid is partitioned
COVERAGE_WARN = 0.10  # invalid-node fraction that flags a coverage warning
ZERO_DIRECTION = 1e-12
# relative eigenvalue range below which a field counts as constant: any
# variation under this floor is integration noise, and contours of noise
# are not structures (isometric flows land here)
CONSTANT_FIELD_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Per-node stretching diagnostics over a regular chart window."""

    window: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]
    t0: float
    T: float
    regime: str
    lambda1: np.ndarray        # (*resolution,)
    ftle: np.ndarray           # (*resolution,)
    gap: np.ndarray            # (*resolution,)
    xi1: np.ndarray            # (*resolution, dim)
    valid: np.ndarray          # (*resolution,) bool
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolution)
        if len(self.window) != len(res):
            raise DimensionError("window and resolution dimensions differ")
        for arr, nm in ((self.lambda1, "lambda1"), (self.ftle, "ftle"),
                        (self.gap, "gap"), (self.valid, "valid")):
            if arr.shape != res:
                raise DimensionError(f"{nm} has shape {arr.shape}, expected {res}")
        if self.xi1.shape != res + (len(res),):
            raise DimensionError("xi1 has the wrong shape")
        if np.any(self.lambda1[self.valid] <= 0.0):
            raise GeolcsError("dominant eigenvalue must be positive on valid nodes")

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n)
                     for (lo, hi), n in zip(self.window, self.resolution))

    @property
    def cell(self) -> np.ndarray:
        """Grid spacing per axis."""
        return np.array([(hi - lo) / (n - 1)
                         for (lo, hi), n in zip(self.window, self.resolution)])

    @property
    def n_valid(self) -> int:
        return int(np.sum(self.valid))


@dataclass(frozen=True, eq=False)
class Polyline:
    """One extracted structure with per-point diagnostics."""

    points: np.ndarray    # (k, 2) chart coordinates
    lambda1: np.ndarray   # (k,)
    normal: np.ndarray    # (k, 2) unit normal estimate
    angle: np.ndarray     # (k,) radians in [0, pi/2], vs dominant direction
    gap: np.ndarray       # (k,)

    def __len__(self):
        return len(self.points)

    @property
    def arclength(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


@dataclass(frozen=True, eq=False)
class RidgeSet:
    """Extracted LCS candidates as polylines plus the extraction settings."""

    polylines: list[Polyline]
    extraction_mode: str                 # "level_set" or "ridge"
    window: tuple[tuple[float, float], ...]
    cell: tuple[float, float]
    level: Optional[float] = None
    quantile: Optional[float] = None
    min_gap: float = 0.0
    min_value: float = 0.0

    @property
    def n_points(self) -> int:
        return sum(len(p) for p in self.polylines)

    def all_points(self) -> np.ndarray:
        if not self.polylines:
            return np.empty((0, 2))
        return np.concatenate([p.points for p in self.polylines], axis=0)

    def concatenated(self, attr: str) -> np.ndarray:
        if not self.polylines:
            return np.empty((0,))
        return np.concatenate([getattr(p, attr) for p in self.polylines], axis=0)


# ---------------------------------------------------------------------------
# field sweep


def _grid_nodes(window, resolution):
    axes = [np.linspace(lo, hi, n) for (lo, hi), n in zip(window, resolution)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _sweep_chunk(nodes, t0, T, manifold, field, regime, cfg, metric_eval,
                 finsler, fallback_dir):
    """Flow map -> deformation tensor -> spectrum for one batch of nodes."""
    d = manifold.dim
    ends_raw, F, exited, _, _ = flow_jacobian_batch(
        nodes, t0, T, field, cfg, manifold.domain)
    valid = ~exited
    m = int(valid.sum())
    lam1 = np.full(len(nodes), np.nan)
    gap = np.full(len(nodes), np.nan)
    xi1 = np.full((len(nodes), d), np.nan)
    fallback_count = 0
    if m == 0:
        return lam1, gap, xi1, valid, fallback_count

    x0 = manifold.domain.wrap(nodes[valid])
    x1 = manifold.domain.wrap(ends_raw[valid])
    Fv = F[valid]

    if regime == "riemannian" or regime == "hypercomplex":
        G0 = manifold.metric.matrix(x0)
        G1 = G0 if metric_eval == "base_only" else manifold.metric.matrix(x1)
    else:  # finsler
        t_arr0 = np.full(m, t0)
        t_arr1 = np.full(m, t0 + T)
        y0 = field.eval(x0, t_arr0)
        y1 = field.eval(x1, t_arr1)
        fb = np.asarray(fallback_dir, dtype=float)
        for y in (y0, y1):
            small = np.linalg.norm(y, axis=1) < ZERO_DIRECTION
            if np.any(small):
                fallback_count += int(small.sum())
                y[small] = fb
        G0 = fundamental_tensor(finsler, x0, y0)
        G1 = G0 if metric_eval == "base_only" else fundamental_tensor(finsler, x1, y1)

    if regime == "hypercomplex":
        C = hypercomplex_pullback(Fv, G1, manifold.hypercomplex)
    else:
        C = np.swapaxes(Fv, -1, -2) @ G1 @ Fv
    C = 0.5 * (C + np.swapaxes(C, -1, -2))

    w, V = gen_eigh_batch(C, G0)
    ok = np.isfinite(w[:, 0]) & (w[:, 0] > 0.0)
    lam_v = np.where(ok, w[:, 0], np.nan)
    lam1[valid] = lam_v
    gap[valid] = np.where(ok, w[:, 0] - w[:, 1], np.nan)
    xi1[valid] = np.where(ok[:, None], V[:, :, 0], np.nan)
    if not np.all(ok):
        valid = valid.copy()
        valid[np.flatnonzero(valid)[~ok]] = False
    return lam1, gap, xi1, valid, fallback_count


def compute_field(manifold: Manifold, field: VectorFieldSpec, t0: float, T: float,
                  resolution, window=None, regime: Optional[str] = None,
                  cfg: Optional[IntegratorConfig] = None,
                  metric_eval: str = "two_point",
                  finsler: Optional[FinslerNorm] = None,
                  fallback_dir=None, threads: int = 1) -> FieldGrid:
    """Evaluate the stretching diagnostics on a regular window of the chart.

    Parameters
    ----------
    manifold, field : catalog or user objects; dimensions must agree.
    t0, T : analysis window (T may be negative for backward-time fields).
    resolution : per-axis node counts, each >= 8.
    window : per-axis (lo, hi); defaults to the full chart.
    regime : "riemannian", "finsler" or "hypercomplex"; defaults to the
        manifold's natural regime.
    metric_eval : "two_point" evaluates the pulled-back metric at the
        trajectory endpoint (default); "base_only" evaluates everything at
        the seed.
    finsler : norm override for the finsler regime (defaults to the
        manifold's own).
    fallback_dir : reference direction used where the flow vector vanishes
        (finsler regime only); defaults to the first coordinate axis.
    threads : worker threads for the sweep; 0 picks the host CPU count.
        The grid is cut into fixed-size chunks, so results are
        byte-identical for every thread count.

    Raises
    ------
    EmptyFieldError
        If every node's trajectory leaves the chart.
    """
    if field.dim != manifold.dim:
        raise DimensionError("field and manifold dimensions differ")
    if T == 0.0:
        raise GeolcsError("analysis window must have nonzero duration")
    cfg = cfg or IntegratorConfig()
    regime = regime or manifold.default_regime
    if regime not in ("riemannian", "finsler", "hypercomplex"):
        raise GeolcsError(f"unknown metric regime '{regime}'")
    if metric_eval not in ("two_point", "base_only"):
        raise GeolcsError(f"unknown metric_eval mode '{metric_eval}'")
    if window is None:
        window = manifold.domain.bounds
    window = tuple((float(lo), float(hi)) for lo, hi in window)
    resolution = tuple(int(n) for n in resolution)
    if len(window) != manifold.dim or len(resolution) != manifold.dim:
        raise DimensionError("window/resolution must match the chart dimension")
    if any(n < 8 for n in resolution):
        raise GeolcsError("resolution must be at least 8 nodes per axis")
    for i, ((lo, hi), per) in enumerate(zip(window, manifold.domain.periodic)):
        if not lo < hi:
            raise GeolcsError(f"empty window on axis {i}")
        blo, bhi = manifold.domain.bounds[i]
        if not per and (lo < blo - 1e-12 or hi > bhi + 1e-12):
            raise GeolcsError(f"window leaves the chart on axis {i}")

    if regime == "finsler":
        finsler = finsler or manifold.finsler
        if finsler is None:
            raise GeolcsError("finsler regime requested but no norm available")
        if fallback_dir is None:
            fallback_dir = np.eye(manifold.dim)[0]
    if regime == "hypercomplex":
        if manifold.hypercomplex is None:
            raise GeolcsError("hypercomplex regime requested but no structure available")
        if manifold.dim != 4:
            raise DimensionError("hypercomplex regime requires a 4-d chart")
        report = hypercomplex_check(manifold.hypercomplex)
        if not report.passed:
            raise MetricError(f"invalid hypercomplex structure: {report}")

    nodes = _grid_nodes(window, resolution)
    n = len(nodes)
    lam1 = np.empty(n)
    gap = np.empty(n)
    xi1 = np.empty((n, manifold.dim))
    valid = np.empty(n, dtype=bool)
    fallback_total = 0

    chunks = [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]

    def work(bounds):
        s, e = bounds
        return bounds, _sweep_chunk(nodes[s:e], t0, T, manifold, field, regime,
                                    cfg, metric_eval, finsler, fallback_dir)

    nthreads = threads if threads > 0 else (len(chunks) and min(32, _cpu_count()))
    if nthreads and nthreads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    for (s, e), (cl, cg, cx, cv, fc) in results:
        lam1[s:e] = cl
        gap[s:e] = cg
        xi1[s:e] = cx
        valid[s:e] = cv
        fallback_total += fc

    n_valid = int(valid.sum())
    if n_valid == 0:
        raise EmptyFieldError("every node's trajectory left the chart")
    ftle_arr = np.full(n, np.nan)
    ftle_arr[valid] = np.log(lam1[valid]) / (2.0 * abs(T))

    res = resolution
    meta = {
        "manifold": manifold.name,
        "field": field.name,
        "metric_eval": metric_eval,
        "method": cfg.method,
        "n_invalid": n - n_valid,
        "coverage_warning": (n - n_valid) > COVERAGE_WARN * n,
        "finsler_fallbacks": fallback_total,
    }
    return FieldGrid(window=window, resolution=res, t0=float(t0), T=float(T),
                     regime=regime,
                     lambda1=lam1.reshape(res), ftle=ftle_arr.reshape(res),
                     gap=gap.reshape(res), xi1=xi1.reshape(res + (manifold.dim,)),
                     valid=valid.reshape(res), meta=meta)


def _cpu_count():
    import os
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# marching squares on per-cell corner values


def _cell_segments(xa, xb, ya, yb, sa, sb, sc, sd):
    """Zero crossings of the bilinear interpolant on one cell.

    Corner order: a=(xa,ya), b=(xb,ya), c=(xb,yb), d=(xa,yb); values are
    'signed offsets' (crossing where the sign changes, negative = inside).
    Returns a list of ((x1,y1), (x2,y2)) segments.
    """
    ia, ib, ic, idd = sa < 0, sb < 0, sc < 0, sd < 0
    crossings = {}

    def interp(p, q, sp, sq):
        t = sp / (sp - sq)
        return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

    A, B, C, D = (xa, ya), (xb, ya), (xb, yb), (xa, yb)
    if ia != ib:
        crossings[0] = interp(A, B, sa, sb)
    if ib != ic:
        crossings[1] = interp(B, C, sb, sc)
    if idd != ic:
        crossings[2] = interp(D, C, sd, sc)
    if ia != idd:
        crossings[3] = interp(A, D, sa, sd)

    keys = sorted(crossings)
    if len(keys) == 2:
        return [(crossings[keys[0]], crossings[keys[1]])]
    if len(keys) == 4:
        # ambiguous saddle cell: resolve by the centre average
        centre_inside = (sa + sb + sc + sd) < 0
        if ia:  # corners a, c inside
            pairs = ((0, 1), (2, 3)) if centre_inside else ((0, 3), (1, 2))
        else:   # corners b, d inside
            pairs = ((0, 3), (1, 2)) if centre_inside else ((0, 1), (2, 3))
        return [(crossings[p], crossings[q]) for p, q in pairs]
    return []


def _chain_segments(segments, scale):
    """Join shared-endpoint segments into ordered polylines."""
    if not segments:
        return []
    eps = 1e-9 * scale

    def key(p):
        return (round(p[0] / eps), round(p[1] / eps))

    adj: dict = {}
    seg_pts = []
    for i, (p, q) in enumerate(segments):
        if key(p) == key(q):
            continue
        seg_pts.append((p, q))
        j = len(seg_pts) - 1
        adj.setdefault(key(p), []).append((j, 0))
        adj.setdefault(key(q), []).append((j, 1))

    used = [False] * len(seg_pts)
    polylines = []

    def walk(start_seg, start_end):
        pts = [seg_pts[start_seg][start_end]]
        cur_seg, cur_end = start_seg, start_end
        while True:
            used[cur_seg] = True
            nxt = seg_pts[cur_seg][1 - cur_end]
            pts.append(nxt)
            cands = [(s, e) for s, e in adj.get(key(nxt), [])
                     if not used[s]]
            if not cands:
                return pts
            cur_seg, cur_end = cands[0]

    # open chains first (endpoints of degree 1), then leftover loops
    degree_one = [k for k, v in adj.items() if len(v) == 1]
    for k in degree_one:
        s, e = adj[k][0]
        if not used[s]:
            polylines.append(walk(s, e))
    for s in range(len(seg_pts)):
        if not used[s]:
            polylines.append(walk(s, 0))
    return polylines


def _bilinear(arr, axes, pts):
    """Bilinear sample of a 2-d array at chart points."""
    ax0, ax1 = axes
    h0 = ax0[1] - ax0[0]
    h1 = ax1[1] - ax1[0]
    u = np.clip((pts[:, 0] - ax0[0]) / h0, 0, len(ax0) - 1 - 1e-12)
    v = np.clip((pts[:, 1] - ax1[0]) / h1, 0, len(ax1) - 1 - 1e-12)
    i = u.astype(int)
    j = v.astype(int)
    fu = u - i
    fv = v - j
    return ((1 - fu) * (1 - fv) * arr[i, j] + fu * (1 - fv) * arr[i + 1, j]
            + (1 - fu) * fv * arr[i, j + 1] + fu * fv * arr[i + 1, j + 1])


def _nearest_index(axes, pts):
    ax0, ax1 = axes
    i = np.clip(np.rint((pts[:, 0] - ax0[0]) / (ax0[1] - ax0[0])), 0, len(ax0) - 1)
    j = np.clip(np.rint((pts[:, 1] - ax1[0]) / (ax1[1] - ax1[0])), 0, len(ax1) - 1)
    return i.astype(int), j.astype(int)


def line_angle(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Angle in [0, pi/2] between the lines spanned by u and v (batched)."""
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.abs(np.einsum("...i,...i->...", u, v)) / (nu * nv)
    return np.arccos(np.clip(c, 0.0, 1.0))


def _is_constant(vals: np.ndarray) -> bool:
    if vals.size == 0:
        return True
    vmax = float(np.abs(vals).max())
    return float(vals.max() - vals.min()) <= CONSTANT_FIELD_TOL * max(vmax, 1e-300)


def _gradient_arrays(grid: FieldGrid):
    ax0, ax1 = grid.axes
    lam = np.where(grid.valid, grid.lambda1, np.nan)
    g0 = np.gradient(lam, ax0, axis=0)
    g1 = np.gradient(lam, ax1, axis=1)
    return lam, g0, g1


def _make_polylines(chains, grid, lam, g0, g1):
    """Attach per-point diagnostics to chained contour points."""
    axes = grid.axes
    out = []
    for chain in chains:
        pts = np.asarray(chain)
        lam_p = _bilinear(lam, axes, pts)
        gap_p = _bilinear(np.where(grid.valid, grid.gap, np.nan), axes, pts)
        nx = _bilinear(g0, axes, pts)
        ny = _bilinear(g1, axes, pts)
        nrm = np.stack([nx, ny], axis=1)
        ln = np.linalg.norm(nrm, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            nrm = np.where(ln[:, None] > 0, nrm / np.where(ln == 0, 1, ln)[:, None],
                           np.nan)
        ii, jj = _nearest_index(axes, pts)
        xi = grid.xi1[ii, jj]
        ang = line_angle(nrm, xi)
        out.append(Polyline(points=pts, lambda1=lam_p, normal=nrm,
                            angle=ang, gap=gap_p))
    return out


def extract_level_set(grid: FieldGrid, quantile: float) -> RidgeSet:
    """Iso-contours of the dominant eigenvalue at a quantile level.

    The exact argmax set of the eigenvalue field has measure zero on a
    grid, so the level-set family is parametrised by the quantile q of the
    valid samples (default pipeline uses q = 0.95).  Contours are traced by
    cell-edge interpolation; normals come from the eigenvalue gradient.

    Raises
    ------
    DimensionError
        For non-2-d fields (4-d analyses export raw fields instead).
    """
    if grid.dim != 2:
        raise DimensionError("level-set extraction implemented for 2-d fields only")
    if not 0.0 < quantile < 1.0:
        raise GeolcsError("quantile out of (0,1)")
    vals = grid.lambda1[grid.valid]
    if vals.size == 0:
        raise EmptyFieldError("no valid nodes")
    level = float(np.quantile(vals, quantile))
    if _is_constant(vals):
        return RidgeSet(polylines=[], extraction_mode="level_set",
                        window=grid.window, cell=tuple(grid.cell),
                        level=level, quantile=quantile)

    lam, g0, g1 = _gradient_arrays(grid)
    s = lam - level
    sa, sb, sc, sd = s[:-1, :-1], s[1:, :-1], s[1:, 1:], s[:-1, 1:]
    with np.errstate(invalid="ignore"):
        ia, ib, ic, idd = sa < 0, sb < 0, sc < 0, sd < 0
        finite = (np.isfinite(sa) & np.isfinite(sb)
                  & np.isfinite(sc) & np.isfinite(sd))
    some_in = ia | ib | ic | idd
    all_in = ia & ib & ic & idd
    candidates = finite & some_in & ~all_in

    ax0, ax1 = grid.axes
    segments = []
    for i, j in np.argwhere(candidates):
        segments.extend(_cell_segments(
            ax0[i], ax0[i + 1], ax1[j], ax1[j + 1],
            s[i, j], s[i + 1, j], s[i + 1, j + 1], s[i, j + 1]))
    chains = _chain_segments(segments, float(np.max(grid.cell)))
    polylines = _make_polylines(chains, grid, lam, g0, g1)
    return RidgeSet(polylines=polylines, extraction_mode="level_set",
                    window=grid.window, cell=tuple(grid.cell),
                    level=level, quantile=quantile)


def extract_ridges(grid: FieldGrid, min_gap: float = 0.0,
                   min_value: float = 0.0) -> RidgeSet:
    """Second-derivative ridges of the dominant eigenvalue field.

    A ridge point is a sub-cell root of the directional derivative of the
    eigenvalue along the minor-curvature direction of its Hessian, kept
    when the transverse curvature is negative and the eigenvalue / gap
    thresholds hold.  Roots are traced per cell with locally
    orientation-fixed directions and chained into polylines.
    """
    if grid.dim != 2:
        raise DimensionError("ridge extraction implemented for 2-d fields only")
    if any(n < 16 for n in grid.resolution):
        raise GeolcsError("ridge extraction needs at least 16 nodes per axis")
    if _is_constant(grid.lambda1[grid.valid]):
        return RidgeSet(polylines=[], extraction_mode="ridge",
                        window=grid.window, cell=tuple(grid.cell),
                        min_gap=min_gap, min_value=min_value)

    lam, g0, g1 = _gradient_arrays(grid)
    ax0, ax1 = grid.axes
    h11 = np.gradient(g0, ax0, axis=0)
    h12 = 0.5 * (np.gradient(g0, ax1, axis=1) + np.gradient(g1, ax0, axis=0))
    h22 = np.gradient(g1, ax1, axis=1)

    mean = 0.5 * (h11 + h22)
    rad = np.sqrt(0.25 * (h11 - h22) ** 2 + h12 ** 2)
    mu_min = mean - rad

    # minor-curvature direction: the better-conditioned of the two
    # eigenvector candidate forms (H - mu I) v = 0
    c1x, c1y = h12, mu_min - h11
    c2x, c2y = mu_min - h22, h12
    use1 = np.hypot(c1x, c1y) >= np.hypot(c2x, c2y)
    vx = np.where(use1, c1x, c2x)
    vy = np.where(use1, c1y, c2y)
    deg = np.hypot(vx, vy) < 1e-300
    vx = np.where(deg, 1.0, vx)
    vy = np.where(deg, 0.0, vy)
    norm = np.hypot(vx, vy)
    vx = vx / norm
    vy = vy / norm

    # orientation-fixed directional derivative per cell corner
    def corner(arr):
        return arr[:-1, :-1], arr[1:, :-1], arr[1:, 1:], arr[:-1, 1:]

    vxa, vxb, vxc, vxd = corner(vx)
    vya, vyb, vyc, vyd = corner(vy)
    g0a, g0b, g0c, g0d = corner(g0)
    g1a, g1b, g1c, g1d = corner(g1)

    def orient(px, py):
        s = np.sign(px * vxa + py * vya)
        return np.where(s == 0, 1.0, s)

    ob, oc, od = orient(vxb, vyb), orient(vxc, vyc), orient(vxd, vyd)
    sa = g0a * vxa + g1a * vya
    sb = (g0b * vxb + g1b * vyb) * ob
    sc = (g0c * vxc + g1c * vyc) * oc
    sd = (g0d * vxd + g1d * vyd) * od

    with np.errstate(invalid="ignore"):
        finite = (np.isfinite(sa) & np.isfinite(sb)
                  & np.isfinite(sc) & np.isfinite(sd))
        ia, ib, ic, idd = sa < 0, sb < 0, sc < 0, sd < 0
        curv = corner(mu_min)
        curved = (curv[0] < 0) | (curv[1] < 0) | (curv[2] < 0) | (curv[3] < 0)
    some_in = ia | ib | ic | idd
    all_in = ia & ib & ic & idd
    candidates = finite & some_in & ~all_in & curved

    segments = []
    for i, j in np.argwhere(candidates):
        segs = _cell_segments(
            ax0[i], ax0[i + 1], ax1[j], ax1[j + 1],
            sa[i, j], sb[i, j], sc[i, j], sd[i, j])
        for p, q in segs:
            pts = np.array([p, q])
            if np.any(_bilinear(mu_min, (ax0, ax1), pts) >= 0.0):
                continue
            if np.any(_bilinear(lam, (ax0, ax1), pts) < min_value):
                continue
            gaps = _bilinear(np.where(grid.valid, grid.gap, np.nan), (ax0, ax1), pts)
            if np.any(~np.isfinite(gaps)) or np.any(gaps < min_gap):
                continue
            segments.append((p, q))
    chains = _chain_segments(segments, float(np.max(grid.cell)))
    polylines = []
    for pl in _make_polylines(chains, grid, lam, g0, g1):
        # on a crest the eigenvalue gradient vanishes; use the transverse
        # Hessian direction as the normal estimate instead
        ii, jj = _nearest_index((ax0, ax1), pl.points)
        tv = np.stack([vx[ii, jj], vy[ii, jj]], axis=1)
        ang = line_angle(tv, grid.xi1[ii, jj])
        polylines.append(Polyline(points=pl.points, lambda1=pl.lambda1,
                                  normal=tv, angle=ang, gap=pl.gap))
    return RidgeSet(polylines=polylines, extraction_mode="ridge",
                    window=grid.window, cell=tuple(grid.cell),
                    min_gap=min_gap, min_value=min_value)


# ---------------------------------------------------------------------------
# distances


def points_to_ridges_distance(points: np.ndarray, ridges: RidgeSet) -> np.ndarray:
    """Distance from each query point to the closest ridge segment."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    best = np.full(len(points), np.inf)
    for pl in ridges.polylines:
        pts = pl.points
        if len(pts) == 1:
            d = np.linalg.norm(points - pts[0], axis=1)
            best = np.minimum(best, d)
            continue
        a = pts[:-1]
        ab = pts[1:] - a
        ab2 = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
        ap = points[:, None, :] - a[None, :, :]
        t = np.clip(np.einsum("pij,ij->pi", ap, ab) / ab2, 0.0, 1.0)
        closest = a[None, :, :] + t[:, :, None] * ab[None, :, :]
        d = np.linalg.norm(points[:, None, :] - closest, axis=2).min(axis=1)
        best = np.minimum(best, d)
    return best


def directed_hausdorff(points: np.ndarray, ridges: RidgeSet) -> float:
    """max over points of the distance to the ridge set."""
    d = points_to_ridges_distance(points, ridges)
    return float(d.max()) if d.size else math.inf


def dominant_polyline(ridges: RidgeSet) -> Optional[Polyline]:
    """Longest polyline by arc length (None when the set is empty)."""
    if not ridges.polylines:
        return None
    return max(ridges.polylines, key=lambda p: p.arclength)


# ---------------------------------------------------------------------------
# verification of the two defining properties


@dataclass(frozen=True)
class AlignmentReport:
    """Distribution of angles between structure normals and the dominant
    stretch direction, over ridge points with a reliable spectrum."""

    n_points: int
    n_used: int
    mean_rad: float
    median_rad: float
    p95_rad: float
    min_rel_gap: float
    threshold_rad: float
    passed: bool

    @property
    def median_deg(self) -> float:
        return math.degrees(self.median_rad)

    @property
    def mean_deg(self) -> float:
        return math.degrees(self.mean_rad)

    @property
    def p95_deg(self) -> float:
        return math.degrees(self.p95_rad)


def verify_alignment(ridges: RidgeSet, min_rel_gap: float = 1e-8,
                     max_median_rad: float = math.radians(10.0)) -> AlignmentReport:
    """Measure how well structure normals align with the dominant direction.

    Points whose relative spectral gap falls below ``min_rel_gap`` are
    excluded (the dominant direction is meaningless at degeneracies); the
    report passes when the median angle is at most ``max_median_rad``.

    Raises
    ------
    EmptyInputError
        If the ridge set has no points at all.
    """
    if ridges.n_points == 0:
        raise EmptyInputError("cannot measure alignment on an empty ridge set")
    ang = ridges.concatenated("angle")
    gap = ridges.concatenated("gap")
    lam = ridges.concatenated("lambda1")
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = gap / lam
    use = np.isfinite(ang) & np.isfinite(rel) & (rel >= min_rel_gap)
    if not np.any(use):
        raise EmptyInputError("no ridge points with a usable spectral gap")
    a = ang[use]
    return AlignmentReport(
        n_points=int(ang.size), n_used=int(a.size),
        mean_rad=float(a.mean()), median_rad=float(np.median(a)),
        p95_rad=float(np.quantile(a, 0.95)),
        min_rel_gap=min_rel_gap, threshold_rad=max_median_rad,
        passed=bool(np.median(a) <= max_median_rad))


@dataclass(frozen=True)
class InvarianceReport:
    """Distance statistics from advected ridge points to the re-extracted set."""

    n_points: int
    n_exited: int
    mean_dist: float
    max_dist: float
    p95_dist: float
    cell_unit: float
    delta: float
    degenerate_empty: bool = False

    @property
    def mean_cells(self) -> float:
        return self.mean_dist / self.cell_unit

    @property
    def max_cells(self) -> float:
        return self.max_dist / self.cell_unit


def verify_invariance(ridges: RidgeSet, grid: FieldGrid, manifold: Manifold,
                      field: VectorFieldSpec, cfg: Optional[IntegratorConfig] = None,
                      delta: Optional[float] = None,
                      metric_eval: str = "two_point",
                      finsler: Optional[FinslerNorm] = None,
                      fallback_dir=None, threads: int = 1) -> InvarianceReport:
    """Advect ridge points by a short offset and re-extract at the shifted window.

    Every ridge point is carried from t0 to t0 + delta, the field and ridge
    set are recomputed for the window (t0 + delta, T), and the one-sided
    distance from the advected points to the new set is reported in chart
    units and grid-cell units.  ``delta`` defaults to T / 10.  A ridge set
    that is empty before or after the shift yields a degenerate-empty
    report (isometric flows have no ridges to track), not an error.
    """
    cfg = cfg or IntegratorConfig()
    if delta is None:
        delta = grid.T / 10.0
    cell_unit = float(np.mean(grid.cell))
    if ridges.n_points == 0:
        return InvarianceReport(0, 0, math.nan, math.nan, math.nan,
                                cell_unit, float(delta), degenerate_empty=True)

    pts = ridges.all_points()
    moved, exited, _, _ = advect_batch(pts, grid.t0, float(delta), field, cfg,
                                       manifold.domain)
    kept = moved[~exited]
    n_exited = int(exited.sum())

    grid2 = compute_field(manifold, field, grid.t0 + float(delta), grid.T,
                          grid.resolution, window=grid.window, regime=grid.regime,
                          cfg=cfg, metric_eval=metric_eval, finsler=finsler,
                          fallback_dir=fallback_dir, threads=threads)
    if ridges.extraction_mode == "level_set":
        new = extract_level_set(grid2, ridges.quantile)
    else:
        new = extract_ridges(grid2, min_gap=ridges.min_gap,
                             min_value=ridges.min_value)
    if new.n_points == 0 or kept.size == 0:
        return InvarianceReport(int(len(pts)), n_exited, math.nan, math.nan,
                                math.nan, cell_unit, float(delta),
                                degenerate_empty=True)
    d = points_to_ridges_distance(kept, new)
    return InvarianceReport(
        n_points=int(len(pts)), n_exited=n_exited,
        mean_dist=float(d.mean()), max_dist=float(d.max()),
        p95_dist=float(np.quantile(d, 0.95)),
        cell_unit=cell_unit, delta=float(delta))
