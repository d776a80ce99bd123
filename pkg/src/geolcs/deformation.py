"""Deformation tensors and their metric-weighted spectral decomposition.

In every regime the tensor is the pullback of an endpoint metric by the flow
Jacobian, posed as a generalized eigenproblem against the base-point metric:
with F the pushforward, G1 the metric at the trajectory endpoint and G0 the
metric at the seed,

    C = F^T G1 F,        C xi = lam G0 xi,

so that v^T C v is the squared stretched length of v and the eigenvalues are
squared principal stretch factors of unit-G0 vectors.  The hypercomplex
variant sums the pullbacks through each of the three structure operators,

    C = sum_Q (Q F)^T G1 (Q F),     Q in {I, J, K},

which is symmetric positive definite for every invertible F and reduces to
3 F^T G1 F when the operators are G1-orthogonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, MetricError, NumericsError
from .geometry import HypercomplexStructure, check_spd, hypercomplex_check

# relative spectral gap below which the dominant direction is unreliable
DEGENERATE_GAP = 1e-10


@dataclass(frozen=True, eq=False)
class CauchyGreenTensor:
    """Coordinate matrix of the pulled-back metric and its eigenproblem mass."""

    C: np.ndarray
    G0: np.ndarray
    regime: str

    @property
    def dim(self) -> int:
        return self.C.shape[-1]


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Descending generalized eigenvalues with G0-orthonormal eigenvectors.

    ``vectors[:, i]`` belongs to ``values[i]``; each vector's first
    significant component is positive.  ``gap`` = values[0] - values[1]
    flags near-degenerate spectra (dominant direction unreliable when
    gap <= DEGENERATE_GAP * values[0]).
    """

    values: np.ndarray
    vectors: np.ndarray
    gap: float

    @property
    def degenerate(self) -> bool:
        return self.gap <= DEGENERATE_GAP * self.values[0]


def _symmetrize(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def cauchy_green_riemannian(F: np.ndarray, G_start: np.ndarray,
                            G_end: np.ndarray) -> CauchyGreenTensor:
    """Pull back the endpoint metric by the flow Jacobian.

    Parameters
    ----------
    F : (dim, dim) flow-map Jacobian (invertible).
    G_start : SPD metric at the seed point; becomes the eigenproblem mass.
    G_end : SPD metric at the trajectory endpoint.
    """
    F = np.asarray(F, dtype=float)
    check_spd(G_start, "start metric")
    check_spd(G_end, "end metric")
    C = _symmetrize(F.T @ G_end @ F)
    return CauchyGreenTensor(C=C, G0=np.asarray(G_start, dtype=float),
                             regime="riemannian")


def cauchy_green_finsler(F: np.ndarray, g_start: np.ndarray,
                         g_end: np.ndarray) -> CauchyGreenTensor:
    """Same pullback with direction-dependent fundamental tensors.

    ``g_start``/``g_end`` are the fundamental tensors at the seed and
    endpoint, evaluated along the reference directions chosen by the
    caller (the instantaneous flow direction in the field pipeline).
    When the norm is Riemannian the result coincides with
    :func:`cauchy_green_riemannian`.
    """
    F = np.asarray(F, dtype=float)
    check_spd(g_start, "start fundamental tensor")
    check_spd(g_end, "end fundamental tensor")
    C = _symmetrize(F.T @ g_end @ F)
    return CauchyGreenTensor(C=C, G0=np.asarray(g_start, dtype=float),
                             regime="finsler")


def hypercomplex_pullback(F: np.ndarray, G: np.ndarray,
                          H: HypercomplexStructure) -> np.ndarray:
    """sum_Q (Q F)^T G (Q F) over the three structure operators."""
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float)
    total = np.zeros_like(np.swapaxes(F, -1, -2) @ G @ F)
    for Q in H.operators:
        QF = Q @ F
        total = total + np.swapaxes(QF, -1, -2) @ G @ QF
    return total


def cauchy_green_hypercomplex(F: np.ndarray, G: np.ndarray,
                              H: HypercomplexStructure,
                              G0: np.ndarray | None = None,
                              checked: bool = False) -> CauchyGreenTensor:
    """Structure-summed pullback tensor on a 4-dimensional chart.

    ``G`` is the metric at the trajectory endpoint; ``G0`` the eigenproblem
    mass at the seed (defaults to G, the constant-metric case).  Set
    ``checked`` when H is already known to satisfy the quaternion
    identities, e.g. inside grid sweeps.
    """
    F = np.asarray(F, dtype=float)
    if F.shape[-1] != 4:
        raise DimensionError("hypercomplex tensors require dim = 4")
    if not checked:
        report = hypercomplex_check(H, metric=np.asarray(G, dtype=float))
        if not report.passed:
            raise MetricError(f"invalid hypercomplex structure: {report}")
    check_spd(G, "metric")
    C = _symmetrize(hypercomplex_pullback(F, G, H))
    mass = np.asarray(G if G0 is None else G0, dtype=float)
    return CauchyGreenTensor(C=C, G0=mass, regime="hypercomplex")


def metric_adjoint(F: np.ndarray, G_start: np.ndarray,
                   G_end: np.ndarray) -> np.ndarray:
    """Adjoint of F for the metric pairing at the two trajectory endpoints.

    Satisfies g_start(F* v, w) = g_end(v, F w) for all tangent v, w.
    """
    return np.linalg.solve(np.asarray(G_start, dtype=float),
                           np.asarray(F, dtype=float).T @ np.asarray(G_end, dtype=float))


# ---------------------------------------------------------------------------
# generalized symmetric eigenproblem


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Make the first significant component of every eigenvector positive."""
    mags = np.abs(vecs)
    thr = 1e-12 * np.max(mags, axis=-2, keepdims=True)
    first = np.argmax(mags > thr, axis=-2)
    lead = np.take_along_axis(vecs, first[..., None, :], axis=-2)[..., 0, :]
    sgn = np.where(lead < 0.0, -1.0, 1.0)
    return vecs * sgn[..., None, :]


def gen_eigh_batch(C: np.ndarray, G0: np.ndarray):
    """Solve C xi = lam G0 xi for stacked SPD pairs by Cholesky reduction.

    Factor G0 = L L^T, solve the ordinary symmetric problem for
    L^-1 C L^-T and map the vectors back through L^-T; the returned
    vectors are G0-orthonormal, eigenvalues sorted descending, signs fixed.

    Parameters
    ----------
    C, G0 : arrays (..., d, d).

    Returns
    -------
    values : (..., d), descending.
    vectors : (..., d, d), columns matching ``values``.
    """
    C = np.asarray(C, dtype=float)
    G0 = np.asarray(G0, dtype=float)
    try:
        L = np.linalg.cholesky(G0)
    except np.linalg.LinAlgError as exc:
        raise MetricError("eigenproblem mass matrix is not positive definite") from exc
    B = np.linalg.solve(L, C)                       # L^-1 C
    A = np.linalg.solve(L, np.swapaxes(B, -1, -2))  # L^-1 C L^-T (as (A^T)^T)
    A = _symmetrize(A)
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericsError("eigenvalue iteration failed to converge") from exc
    w = w[..., ::-1]
    V = V[..., ::-1]
    vecs = np.linalg.solve(np.swapaxes(L, -1, -2), V)
    return w, _fix_signs(vecs)


def generalized_eigendecomp(t: CauchyGreenTensor) -> EigenDecomposition:
    """Spectral decomposition of a deformation tensor against its base metric.

    Raises
    ------
    MetricError
        If the base metric cannot be factored.
    NumericsError
        If the symmetric eigen-iteration does not converge; the message
        carries the residual of the best candidate when available.
    """
    w, V = gen_eigh_batch(t.C, t.G0)
    resid = np.abs(t.C @ V - t.G0 @ V * w[None, :]).max()
    scale = max(np.abs(t.C).max(), 1e-300)
    if not np.all(np.isfinite(w)) or resid > 1e-6 * scale:
        raise NumericsError(
            f"eigendecomposition residual {resid:.3e} exceeds 1e-6 * |C|")
    return EigenDecomposition(values=w, vectors=V, gap=float(w[0] - w[1]))


def ftle(lambda1, T: float):
    """Finite-time Lyapunov exponent ln(lambda1) / (2 |T|).

    Accepts scalars or arrays; T may be negative (backward-time window).
    """
    if T == 0.0:
        raise ZeroDivisionError("FTLE undefined for a zero-length window")
    lam = np.asarray(lambda1, dtype=float)
    if np.any(lam <= 0.0):
        raise DomainError("FTLE requires a positive dominant eigenvalue")
    out = np.log(lam) / (2.0 * abs(T))
    return float(out) if np.isscalar(lambda1) or out.ndim == 0 else out
