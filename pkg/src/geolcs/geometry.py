"""Chart-based manifolds and the three metric regimes.

A manifold is represented by a single global chart (a box in R^dim with
optional periodic identification per axis) carrying a Riemannian metric and,
optionally, a Finsler norm and a hypercomplex structure.  All evaluation maps
are pure functions vectorised over a leading batch axis: points have shape
``(..., dim)``, matrices ``(..., dim, dim)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError, MetricError, SingularityError

# Relative slack used when deciding whether a point is outside a
# non-periodic chart; absorbs round-off from trajectories sliding
# along an invariant boundary.
BOUNDARY_TOL = 1e-9


@dataclass(frozen=True)
class ChartDomain:
    """A box chart with optional wrap-around identification per axis."""

    bounds: tuple[tuple[float, float], ...]
    periodic: tuple[bool, ...]

    def __post_init__(self):
        if not (2 <= self.dim <= 4):
            raise DimensionError(f"chart dimension must be 2..4, got {self.dim}")
        if len(self.periodic) != self.dim:
            raise DimensionError("bounds and periodic flags must have equal length")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise DomainError(f"invalid axis interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lo(self) -> np.ndarray:
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self) -> np.ndarray:
        return np.array([b[1] for b in self.bounds])

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Map points into the chart on periodic axes; other axes untouched."""
        x = np.asarray(x, dtype=float)
        out = x.copy()
        lo, ext = self.lo, self.extent
        for i, per in enumerate(self.periodic):
            if per:
                xi = out[..., i]
                # only relabel coordinates that actually left the chart
                off = (xi < lo[i]) | (xi >= lo[i] + ext[i])
                if np.any(off):
                    wrapped = lo[i] + np.mod(xi - lo[i], ext[i])
                    out[..., i] = np.where(off, wrapped, xi)
        return out

    def outside(self, x: np.ndarray) -> np.ndarray:
        """Boolean mask of points outside the chart (periodic axes never are)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], dtype=bool)
        lo, hi, ext = self.lo, self.hi, self.extent
        for i, per in enumerate(self.periodic):
            if per:
                continue
            tol = BOUNDARY_TOL * ext[i]
            out |= (x[..., i] < lo[i] - tol) | (x[..., i] > hi[i] + tol)
        return out

    def contains(self, x: np.ndarray) -> bool:
        return not bool(np.any(self.outside(x)))


@dataclass(frozen=True)
class RiemannianMetric:
    """Position-dependent symmetric positive definite tangent metric."""

    name: str
    dim: int
    matrix: Callable[[np.ndarray], np.ndarray]  # (..., dim) -> (..., dim, dim)


@dataclass(frozen=True)
class FinslerNorm:
    """Positively 1-homogeneous tangent norm, smooth away from y = 0.

    ``fundamental`` is the optional analytic direction-dependent metric
    (the y-Hessian of F^2 / 2); when absent it is obtained by central
    second differences of F^2.
    """

    name: str
    dim: int
    norm: Callable[[np.ndarray, np.ndarray], np.ndarray]  # (x, y) -> (...,)
    fundamental: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None


@dataclass(frozen=True, eq=False)
class HypercomplexStructure:
    """Three anticommuting tangent operators satisfying quaternion relations."""

    name: str
    I: np.ndarray = field(repr=False, default=None)
    J: np.ndarray = field(repr=False, default=None)
    K: np.ndarray = field(repr=False, default=None)

    @property
    def operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.I, self.J, self.K)


@dataclass(frozen=True)
class Manifold:
    """A chart, its metric, and the optional extra structures living on it."""

    name: str
    domain: ChartDomain
    metric: RiemannianMetric
    finsler: Optional[FinslerNorm] = None
    hypercomplex: Optional[HypercomplexStructure] = None
    default_regime: str = "riemannian"

    @property
    def dim(self) -> int:
        return self.domain.dim


# ---------------------------------------------------------------------------
# metric evaluation


def check_spd(G: np.ndarray, what: str = "metric") -> None:
    """Raise MetricError unless every matrix in G is symmetric positive definite."""
    G = np.asarray(G, dtype=float)
    asym = np.abs(G - np.swapaxes(G, -1, -2)).max()
    if asym > 1e-10 * max(1.0, np.abs(G).max()):
        raise MetricError(f"{what} is not symmetric (max asymmetry {asym:.3e})")
    try:
        np.linalg.cholesky(0.5 * (G + np.swapaxes(G, -1, -2)))
    except np.linalg.LinAlgError as exc:
        raise MetricError(f"{what} is not positive definite") from exc


def metric_at(metric: RiemannianMetric, x: np.ndarray,
              domain: Optional[ChartDomain] = None) -> np.ndarray:
    """Evaluate a Riemannian metric at a chart point (wrapped into ``domain``).

    Parameters
    ----------
    metric : RiemannianMetric
    x : array, shape (dim,) or (..., dim)
    domain : ChartDomain, optional
        When given, x is wrapped on periodic axes and must lie inside
        non-periodic ones.

    Returns
    -------
    G : array, shape (..., dim, dim), symmetric positive definite.
    """
    x = np.asarray(x, dtype=float)
    if domain is not None:
        if np.any(domain.outside(x)):
            raise DomainError(f"point {x} outside chart of '{metric.name}'")
        x = domain.wrap(x)
    G = np.asarray(metric.matrix(x), dtype=float)
    check_spd(G, f"metric '{metric.name}'")
    return G


def fundamental_tensor(finsler: FinslerNorm, x: np.ndarray, y: np.ndarray,
                       rel_step: float = 1e-4) -> np.ndarray:
    """Direction-dependent metric induced by a Finsler norm at (x, y).

    Uses the analytic map when the norm carries one, otherwise central
    second differences of F^2 in y with per-sample step ``rel_step * |y|``.

    Raises
    ------
    SingularityError
        If any y is (numerically) the zero vector; the norm is not smooth
        at the zero section.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ynorm = np.linalg.norm(y, axis=-1)
    if np.any(ynorm <= 0.0) or not np.all(np.isfinite(ynorm)):
        raise SingularityError("fundamental tensor undefined at y = 0")
    if finsler.fundamental is not None:
        g = np.asarray(finsler.fundamental(x, y), dtype=float)
    else:
        g = _fundamental_fd(finsler.norm, x, y, rel_step)
    return g


def _fundamental_fd(norm, x, y, rel_step):
    """Half the y-Hessian of F^2 by central differences."""
    d = y.shape[-1]
    delta = rel_step * np.linalg.norm(y, axis=-1)  # (...,)

    def f2(yy):
        v = norm(x, yy)
        return v * v

    g = np.empty(y.shape[:-1] + (d, d))
    eye = np.eye(d)
    for i in range(d):
        ei = delta[..., None] * eye[i]
        gii = (f2(y + ei) - 2.0 * f2(y) + f2(y - ei)) / (delta * delta)
        g[..., i, i] = 0.5 * gii
        for j in range(i + 1, d):
            ej = delta[..., None] * eye[j]
            gij = (f2(y + ei + ej) - f2(y + ei - ej)
                   - f2(y - ei + ej) + f2(y - ei - ej)) / (4.0 * delta * delta)
            g[..., i, j] = 0.5 * gij
            g[..., j, i] = 0.5 * gij
    return g


# ---------------------------------------------------------------------------
# hypercomplex structures


@dataclass(frozen=True)
class HypercomplexReport:
    """Deviations of a candidate structure from the quaternion identities."""

    passed: bool
    deviations: dict[str, float]
    tol: float

    def __str__(self):
        worst = max(self.deviations.values())
        status = "pass" if self.passed else "FAIL"
        return f"hypercomplex check {status} (worst deviation {worst:.3e}, tol {self.tol:.1e})"


def hypercomplex_check(H: HypercomplexStructure,
                       metric: Optional[np.ndarray] = None,
                       tol: float = 1e-12,
                       ortho_tol: float = 1e-10) -> HypercomplexReport:
    """Verify the quaternion identities and metric orthogonality of I, J, K.

    ``metric`` is the (constant) metric matrix the operators should be
    orthogonal for; identity when omitted.
    """
    ops = H.operators
    if any(Q is None for Q in ops):
        raise DimensionError("structure must define all of I, J, K")
    for Q in ops:
        Q = np.asarray(Q)
        if Q.shape != (4, 4):
            raise DimensionError("hypercomplex structures require dim = 4 operators")
    I, J, K = (np.asarray(Q, dtype=float) for Q in ops)
    eye = np.eye(4)
    dev = {
        "I^2 = -Id": np.abs(I @ I + eye).max(),
        "J^2 = -Id": np.abs(J @ J + eye).max(),
        "K^2 = -Id": np.abs(K @ K + eye).max(),
        "IJ = K": np.abs(I @ J - K).max(),
        "JK = I": np.abs(J @ K - I).max(),
        "KI = J": np.abs(K @ I - J).max(),
    }
    passed = all(v <= tol for v in dev.values())
    G = eye if metric is None else np.asarray(metric, dtype=float)
    for nm, Q in zip("IJK", (I, J, K)):
        dev[f"{nm}^T G {nm} = G"] = np.abs(Q.T @ G @ Q - G).max()
        passed = passed and dev[f"{nm}^T G {nm} = G"] <= ortho_tol
    return HypercomplexReport(passed=passed, deviations=dev, tol=tol)


def standard_quaternion_structure() -> HypercomplexStructure:
    """Left multiplication by the quaternion units on coordinates (w, x, y, z)."""
    I = np.array([[0., -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]])
    J = np.array([[0., 0, -1, 0], [0, 0, 0, 1], [1, 0, 0, 0], [0, -1, 0, 0]])
    K = np.array([[0., 0, 0, -1], [0, 0, -1, 0], [0, 1, 0, 0], [1, 0, 0, 0]])
    return HypercomplexStructure(name="standard", I=I, J=J, K=K)


def right_quaternion_matrix(q: np.ndarray) -> np.ndarray:
    """Matrix of right quaternion multiplication p -> p*q on (w, x, y, z).

    Right multiplications span the commutant of the standard structure, so
    they are the generators of structure-preserving linear flows.
    """
    w, x, y, z = (float(c) for c in q)
    return np.array([
        [w, -x, -y, -z],
        [x,  w,  z, -y],
        [y, -z,  w,  x],
        [z,  y, -x,  w],
    ])


HYPERCOMPLEX_STRUCTURES = {
    "standard": standard_quaternion_structure,
}


# ---------------------------------------------------------------------------
# Randers norms (the simplest non-Riemannian Finsler family)


def randers_norm(metric: RiemannianMetric, b: np.ndarray,
                 name: Optional[str] = None) -> FinslerNorm:
    """F(x, y) = sqrt(y^T a(x) y) + b . y with a the given Riemannian metric.

    The closed-form fundamental tensor is attached, so catalog norms never
    pay the finite-difference fallback.  The drift must satisfy
    |b|_{a^{-1}} < 1 for F to be positive; this is checked lazily at
    evaluation points.
    """
    b = np.asarray(b, dtype=float)
    if b.shape != (metric.dim,):
        raise DimensionError(f"drift vector must have length {metric.dim}")

    def norm(x, y):
        a = metric.matrix(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        quad = np.einsum("...ij,...i,...j->...", a, y, y)
        return np.sqrt(quad) + y @ b

    def fundamental(x, y):
        a = metric.matrix(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float)
        ay = np.einsum("...ij,...j->...i", a, y)
        alpha = np.sqrt(np.einsum("...i,...i->...", ay, y))
        ell = ay / alpha[..., None]
        F = alpha + y @ b
        ratio = (F / alpha)[..., None, None]
        lb = ell + b
        g = ratio * (a - ell[..., :, None] * ell[..., None, :]) \
            + lb[..., :, None] * lb[..., None, :]
        return g

    return FinslerNorm(
        name=name or f"randers({metric.name}, b={tuple(b)})",
        dim=metric.dim, norm=norm, fundamental=fundamental,
    )


# ---------------------------------------------------------------------------
# catalog metrics and manifolds


def _flat_matrix(dim):
    def matrix(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(dim), x.shape[:-1] + (dim, dim)).copy()
    return matrix


def _bump_matrix(amplitude):
    # conformal factor exp(2 f), f = amplitude * sin(x1) * cos(x2)
    def matrix(x):
        x = np.asarray(x, dtype=float)
        f = amplitude * np.sin(x[..., 0]) * np.cos(x[..., 1])
        scale = np.exp(2.0 * f)
        return scale[..., None, None] * np.eye(2)
    return matrix


TWO_PI = 2.0 * math.pi


def flat_torus2() -> Manifold:
    dom = ChartDomain(bounds=((0.0, TWO_PI), (0.0, TWO_PI)), periodic=(True, True))
    return Manifold("flat_torus2", dom,
                    RiemannianMetric("flat_torus2", 2, _flat_matrix(2)))


def bump_torus2(amplitude: float = 0.3) -> Manifold:
    dom = ChartDomain(bounds=((0.0, TWO_PI), (0.0, TWO_PI)), periodic=(True, True))
    return Manifold("bump_torus2", dom,
                    RiemannianMetric("bump_torus2", 2, _bump_matrix(amplitude)))


def rect_dg() -> Manifold:
    # the classical double-gyre box
    dom = ChartDomain(bounds=((0.0, 2.0), (0.0, 1.0)), periodic=(False, False))
    return Manifold("rect_dg", dom, RiemannianMetric("rect_dg", 2, _flat_matrix(2)))


def plane2() -> Manifold:
    # origin-centred flat chart for the linear benchmark flows
    dom = ChartDomain(bounds=((-8.0, 8.0), (-8.0, 8.0)), periodic=(False, False))
    return Manifold("plane2", dom, RiemannianMetric("plane2", 2, _flat_matrix(2)))


def randers_torus2(b: tuple[float, float] = (0.2, 0.0)) -> Manifold:
    base = flat_torus2()
    fn = randers_norm(base.metric, np.asarray(b, dtype=float), name="randers_torus2")
    return Manifold("randers_torus2", base.domain, base.metric,
                    finsler=fn, default_regime="finsler")


def quat_torus4() -> Manifold:
    dom = ChartDomain(bounds=((-math.pi, math.pi),) * 4, periodic=(True,) * 4)
    return Manifold("quat_torus4", dom,
                    RiemannianMetric("quat_torus4", 4, _flat_matrix(4)),
                    hypercomplex=standard_quaternion_structure(),
                    default_regime="hypercomplex")


MANIFOLDS: dict[str, Callable[..., Manifold]] = {
    "flat_torus2": flat_torus2,
    "bump_torus2": bump_torus2,
    "rect_dg": rect_dg,
    "randers_torus2": randers_torus2,
    "quat_torus4": quat_torus4,
    "plane2": plane2,
}
