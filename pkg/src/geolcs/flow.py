"""Time-dependent vector fields and flow-map computation.

The flow map endpoint is wrapped into periodic axes, but the Jacobian is
always propagated in the universal cover: wrapping only relabels the point,
it never touches tangent data.  Two independent Jacobian routes are exposed,
the variational (tangent linear) system and centred finite differences of
the endpoint map; their agreement is one of the package's standing checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, DomainExitError, GeolcsError
from .geometry import ChartDomain, right_quaternion_matrix
from .integrators import BatchResult, integrate_rk4, integrate_rk45

FD_FIELD_STEP = 1e-5   # of chart extent, for d(field)/dx fallback
FD_FLOW_STEP = 1e-4    # of chart extent, default flow-map probe offset


@dataclass(frozen=True)
class VectorFieldSpec:
    """A time-dependent tangent field X(x, t) with optional analytic Jacobian.

    ``eval`` maps points (n, dim) and times (n,) to vectors (n, dim);
    ``jacobian`` maps the same arguments to (n, dim, dim).  When the
    Jacobian is omitted it is replaced by central differences of ``eval``.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobian: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    divergence_free: bool = False

    def at(self, x, t: float) -> np.ndarray:
        """Single-point field value."""
        x = np.asarray(x, dtype=float)
        return self.eval(x[None, :], np.array([float(t)]))[0]

    def jacobian_at(self, x, t: float, extent=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        tt = np.array([float(t)])
        if self.jacobian is not None:
            return self.jacobian(x[None, :], tt)[0]
        ext = np.ones(self.dim) if extent is None else np.asarray(extent, float)
        return _fd_field_jacobian(self, x[None, :], tt, ext)[0]


@dataclass(frozen=True)
class IntegratorConfig:
    """Time-stepping policy for all flow computations.

    ``step`` is the fixed step for ``rk4`` and the initial step for
    ``rk45``.
    """

    method: str = "rk45"
    step: float = 0.01
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.method not in ("rk4", "rk45"):
            raise GeolcsError(f"unknown integrator method '{self.method}'")
        if not self.step > 0:
            raise GeolcsError("integrator step must be positive")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise GeolcsError("integrator tolerances must be positive")
        if not self.max_steps > 0:
            raise GeolcsError("max_steps must be positive")


@dataclass(frozen=True)
class FlowMapResult:
    """Endpoint of the flow map together with its pushforward matrix."""

    endpoint: np.ndarray
    jacobian: np.ndarray
    steps_taken: int
    method_tag: str


# ---------------------------------------------------------------------------
# batched drivers


def _run(f, t0, T, y0, cfg: IntegratorConfig, exit_fn) -> BatchResult:
    if cfg.method == "rk4":
        return integrate_rk4(f, t0, T, y0, cfg.step, cfg.max_steps, exit_fn)
    return integrate_rk45(f, t0, T, y0, cfg.step, cfg.abs_tol, cfg.rel_tol,
                          cfg.max_steps, exit_fn)


def _exit_fn(domain: ChartDomain, dim: int):
    if not any(not p for p in domain.periodic):
        return None

    def check(y):
        return domain.outside(y[:, :dim])
    return check


def _fd_field_jacobian(field: VectorFieldSpec, x, t, extent) -> np.ndarray:
    """Central differences of the field in x, step FD_FIELD_STEP * extent."""
    d = field.dim
    out = np.empty(x.shape[:-1] + (d, d))
    for j in range(d):
        dj = FD_FIELD_STEP * extent[j]
        e = np.zeros(d)
        e[j] = dj
        out[..., :, j] = (field.eval(x + e, t) - field.eval(x - e, t)) / (2.0 * dj)
    return out


def _augmented_rhs(field: VectorFieldSpec, domain: ChartDomain):
    """Right-hand side of the coupled trajectory + tangent-linear system."""
    d = field.dim
    ext = domain.extent

    def rhs(t, y):
        x = y[:, :d]
        F = y[:, d:].reshape(-1, d, d)
        dx = field.eval(x, t)
        if field.jacobian is not None:
            DX = field.jacobian(x, t)
        else:
            DX = _fd_field_jacobian(field, x, t, ext)
        dF = DX @ F
        return np.concatenate([dx, dF.reshape(len(x), d * d)], axis=1)
    return rhs


def advect_batch(x, t0, T, field: VectorFieldSpec, cfg: IntegratorConfig,
                 domain: ChartDomain):
    """Advect a batch of points; returns (wrapped endpoints, exited, exit_time, steps)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(domain.outside(x)):
        raise DomainError("seed point outside a non-periodic chart")

    def rhs(t, y):
        return field.eval(y, t)

    res = _run(rhs, t0, T, x, cfg, _exit_fn(domain, field.dim))
    return domain.wrap(res.y), res.exited, res.exit_time, res.steps


def advect(x, t0: float, T: float, field: VectorFieldSpec,
           cfg: IntegratorConfig, domain: ChartDomain) -> np.ndarray:
    """Endpoint of the trajectory of x from t0 to t0 + T, wrapped into the chart.

    Raises
    ------
    DomainExitError
        If the trajectory leaves a non-periodic chart; carries the exit time.
    BudgetError
        If the step budget is exhausted first.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts, exited, exit_time, _ = advect_batch(x, t0, T, field, cfg, domain)
    if np.any(exited):
        t_exit = float(np.nanmin(exit_time))
        raise DomainExitError(
            f"trajectory left the chart at t = {t_exit:.6g}", exit_time=t_exit)
    return pts[0] if single else pts


def flow_jacobian_batch(x, t0, T, field: VectorFieldSpec, cfg: IntegratorConfig,
                        domain: ChartDomain):
    """Flow map + variational Jacobian for a batch of seeds.

    Returns (raw endpoints, jacobians (n, d, d), exited, exit_time, steps);
    endpoints are in the universal cover (not wrapped).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if np.any(domain.outside(x)):
        raise DomainError("seed point outside a non-periodic chart")
    d = field.dim
    n = x.shape[0]
    y0 = np.concatenate([x, np.broadcast_to(np.eye(d).ravel(), (n, d * d))], axis=1)
    res = _run(_augmented_rhs(field, domain), t0, T, y0, cfg, _exit_fn(domain, d))
    ends = res.y[:, :d]
    jacs = res.y[:, d:].reshape(n, d, d)
    return ends, jacs, res.exited, res.exit_time, res.steps


def flow_jacobian_variational(x, t0: float, T: float, field: VectorFieldSpec,
                              cfg: IntegratorConfig,
                              domain: ChartDomain) -> FlowMapResult:
    """Pushforward of the flow map by integrating dF/dt = DX(phi(x), t) F.

    The Jacobian rides along the trajectory in one augmented system; for
    T = 0 the result is exactly (x, Id).
    """
    x = np.asarray(x, dtype=float)
    ends, jacs, exited, exit_time, steps = flow_jacobian_batch(
        x, t0, T, field, cfg, domain)
    if np.any(exited):
        t_exit = float(np.nanmin(exit_time))
        raise DomainExitError(
            f"trajectory left the chart at t = {t_exit:.6g}", exit_time=t_exit)
    return FlowMapResult(endpoint=domain.wrap(ends[0]), jacobian=jacs[0],
                         steps_taken=int(steps[0]),
                         method_tag=f"{cfg.method}-variational")


def flow_jacobian_fd(x, t0: float, T: float, field: VectorFieldSpec,
                     cfg: IntegratorConfig, domain: ChartDomain,
                     delta=None) -> np.ndarray:
    """Centred-difference flow-map Jacobian, one probe pair per axis.

    Probe endpoints are taken in the universal cover so a wrap on one side
    of a pair cannot corrupt the difference.  ``delta`` may be a scalar or
    per-axis array; default is FD_FLOW_STEP * chart extent.
    """
    x = np.asarray(x, dtype=float)
    d = field.dim
    if delta is None:
        delta = FD_FLOW_STEP * domain.extent
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (d,))

    probes = np.empty((2 * d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = delta[j]
        probes[2 * j] = x + e
        probes[2 * j + 1] = x - e
    if np.any(domain.outside(probes)):
        raise DomainError("finite-difference probes leave the chart; "
                          "move the seed inward or shrink delta")

    def rhs(t, y):
        return field.eval(y, t)

    res = _run(rhs, t0, T, probes, cfg, _exit_fn(domain, d))
    if np.any(res.exited):
        t_exit = float(np.nanmin(res.exit_time))
        raise DomainExitError(
            f"probe trajectory left the chart at t = {t_exit:.6g}",
            exit_time=t_exit)
    jac = np.empty((d, d))
    for j in range(d):
        jac[:, j] = (res.y[2 * j] - res.y[2 * j + 1]) / (2.0 * delta[j])
    return jac


def flow_jacobian_fd_batch(x, t0: float, T: float, field: VectorFieldSpec,
                           cfg: IntegratorConfig, domain: ChartDomain,
                           delta=None) -> np.ndarray:
    """Centred-difference Jacobians for a batch of seeds in one integration."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    if delta is None:
        delta = FD_FLOW_STEP * domain.extent
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (d,))

    probes = np.repeat(x, 2 * d, axis=0)
    for j in range(d):
        probes[2 * j::2 * d, j] += delta[j]
        probes[2 * j + 1::2 * d, j] -= delta[j]
    if np.any(domain.outside(probes)):
        raise DomainError("finite-difference probes leave the chart")

    def rhs(t, y):
        return field.eval(y, t)

    res = _run(rhs, t0, T, probes, cfg, _exit_fn(domain, d))
    if np.any(res.exited):
        t_exit = float(np.nanmin(res.exit_time))
        raise DomainExitError(
            f"probe trajectory left the chart at t = {t_exit:.6g}",
            exit_time=t_exit)
    ends = res.y.reshape(n, d, 2, d)
    jac = (ends[:, :, 0, :] - ends[:, :, 1, :]) / (2.0 * delta[None, :, None])
    return np.swapaxes(jac, 1, 2)


def chart_distance(domain: ChartDomain, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Max-abs coordinate distance respecting periodic identification."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = np.abs(a - b)
    ext = domain.extent
    for i, per in enumerate(domain.periodic):
        if per:
            d = diff[..., i]
            diff[..., i] = np.minimum(d % ext[i], ext[i] - (d % ext[i]))
    return diff.max(axis=-1)


# ---------------------------------------------------------------------------
# catalog fields


def saddle(a: float = 1.0) -> VectorFieldSpec:
    """Linear strain flow (a x1, -a x2); volume preserving."""
    def ev(x, t):
        return np.stack([a * x[:, 0], -a * x[:, 1]], axis=1)

    def jac(x, t):
        J = np.zeros((x.shape[0], 2, 2))
        J[:, 0, 0] = a
        J[:, 1, 1] = -a
        return J
    return VectorFieldSpec("saddle", 2, ev, jac, divergence_free=True)


def nonlinear_saddle(a: float = 1.0) -> VectorFieldSpec:
    """Saddle with x1-dependent strain rate: (a sin x1, -a x2).

    The x2-axis {x1 = 0} is an invariant line on which the forward
    stretching is maximal, so the dominant-eigenvalue field has an exact
    vertical ridge there; used by the ridge verification scenarios.
    """
    def ev(x, t):
        return np.stack([a * np.sin(x[:, 0]), -a * x[:, 1]], axis=1)

    def jac(x, t):
        J = np.zeros((x.shape[0], 2, 2))
        J[:, 0, 0] = a * np.cos(x[:, 0])
        J[:, 1, 1] = -a
        return J
    return VectorFieldSpec("nonlinear_saddle", 2, ev, jac)


def rotation(omega: float = 1.0) -> VectorFieldSpec:
    """Rigid rotation about the origin at angular rate omega."""
    def ev(x, t):
        return np.stack([-omega * x[:, 1], omega * x[:, 0]], axis=1)

    def jac(x, t):
        J = np.zeros((x.shape[0], 2, 2))
        J[:, 0, 1] = -omega
        J[:, 1, 0] = omega
        return J
    return VectorFieldSpec("rotation", 2, ev, jac, divergence_free=True)


def double_gyre(A: float = 0.1, eps: float = 0.1,
                omega: float = math.pi / 5) -> VectorFieldSpec:
    """The standard periodically perturbed double gyre on [0,2] x [0,1]."""
    def _fparts(x1, t):
        s = np.sin(omega * t)
        at = eps * s
        bt = 1.0 - 2.0 * eps * s
        f = at * x1 * x1 + bt * x1
        fx = 2.0 * at * x1 + bt
        fxx = 2.0 * at
        return f, fx, fxx

    def ev(x, t):
        f, fx, _ = _fparts(x[:, 0], t)
        pf = math.pi * f
        py = math.pi * x[:, 1]
        u = -math.pi * A * np.sin(pf) * np.cos(py)
        v = math.pi * A * np.cos(pf) * fx * np.sin(py)
        return np.stack([u, v], axis=1)

    def jac(x, t):
        f, fx, fxx = _fparts(x[:, 0], t)
        pf = math.pi * f
        py = math.pi * x[:, 1]
        sin_pf, cos_pf = np.sin(pf), np.cos(pf)
        sin_py, cos_py = np.sin(py), np.cos(py)
        pA = math.pi * A
        J = np.empty((x.shape[0], 2, 2))
        J[:, 0, 0] = -math.pi * pA * cos_pf * fx * cos_py
        J[:, 0, 1] = math.pi * pA * sin_pf * sin_py
        J[:, 1, 0] = pA * sin_py * (cos_pf * fxx - math.pi * sin_pf * fx * fx)
        J[:, 1, 1] = math.pi * pA * cos_pf * fx * cos_py
        return J
    return VectorFieldSpec("double_gyre", 2, ev, jac, divergence_free=True)


def torus_shear(c0: float = 1.0, c1: float = 0.5) -> VectorFieldSpec:
    """Steady shear on the torus: (c0 + c1 cos x2, 0)."""
    def ev(x, t):
        return np.stack([c0 + c1 * np.cos(x[:, 1]), np.zeros(x.shape[0])], axis=1)

    def jac(x, t):
        J = np.zeros((x.shape[0], 2, 2))
        J[:, 0, 1] = -c1 * np.sin(x[:, 1])
        return J
    return VectorFieldSpec("torus_shear", 2, ev, jac, divergence_free=True)


def quat_torus_flow(omega: tuple[float, float, float] = (0.0, 0.0, 1.0),
                    scale: float = 0.0) -> VectorFieldSpec:
    """Linear T^4 field commuting with the standard quaternionic structure.

    The generator is scale * Id plus the right multiplication by the pure
    quaternion (0, omega); right multiplications span the commutant of the
    structure, so the induced flow preserves it exactly.
    """
    M = scale * np.eye(4)
    for w, unit in zip(omega, ((0, 1, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1))):
        M = M + w * right_quaternion_matrix(np.array(unit, dtype=float))

    def ev(x, t):
        return x @ M.T

    def jac(x, t):
        return np.broadcast_to(M, (x.shape[0], 4, 4)).copy()
    return VectorFieldSpec("quat_torus_flow", 4, ev, jac,
                           divergence_free=(scale == 0.0))


FIELDS: dict[str, Callable[..., VectorFieldSpec]] = {
    "saddle": saddle,
    "nonlinear_saddle": nonlinear_saddle,
    "rotation": rotation,
    "double_gyre": double_gyre,
    "torus_shear": torus_shear,
    "quat_torus_flow": quat_torus_flow,
}

# config-file parameter names accepted per catalog field
FIELD_PARAMS: dict[str, tuple[str, ...]] = {
    "saddle": ("a",),
    "nonlinear_saddle": ("a",),
    "rotation": ("omega",),
    "double_gyre": ("A", "eps", "omega"),
    "torus_shear": ("c0", "c1"),
    "quat_torus_flow": ("omega1", "omega2", "omega3", "scale"),
}


def make_field(field_id: str, params: dict[str, float]) -> VectorFieldSpec:
    """Instantiate a catalog field from config-file parameters."""
    if field_id not in FIELDS:
        raise GeolcsError(f"unknown flow id '{field_id}'")
    if field_id == "quat_torus_flow":
        omega = (params.get("omega1", 0.0), params.get("omega2", 0.0),
                 params.get("omega3", 1.0))
        return quat_torus_flow(omega=omega, scale=params.get("scale", 0.0))
    return FIELDS[field_id](**params)
