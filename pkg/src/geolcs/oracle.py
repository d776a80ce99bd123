"""Independent brute-force reference implementations.

Everything here exists to cross-check the production paths from a separate
set of elementary formulas: a hand-rolled scalar integrator, characteristic
polynomial eigenvalues by closed-form root finding, Rayleigh stretch-ratio
sampling with explicit index sums, and term-by-term assembly of the
hypercomplex tensor.  These routines share no numerical kernels with the
production code (no shared stepping logic, no LAPACK), so agreement between
the two routes is evidence rather than tautology.  They are used only by
the test suite and the ``validate`` subcommand, and they favour clarity
over speed.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, DomainError
from .flow import VectorFieldSpec
from .geometry import HypercomplexStructure


def reference_advect(x, t0: float, T: float, field: VectorFieldSpec,
                     step: float) -> np.ndarray:
    """Fixed-step classical 4th-order trajectory endpoint, scalar loop.

    Callers pass a small ``step`` (typically 1/100 of the production step)
    so this serves as the convergence target for the adaptive driver.
    """
    x = np.asarray(x, dtype=float).copy()
    if T == 0.0:
        return x
    nsteps = max(1, math.ceil(abs(T) / step - 1e-12))
    dt = T / nsteps
    t = t0
    for _ in range(nsteps):
        k1 = field.at(x, t)
        k2 = field.at(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = field.at(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = field.at(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t += dt
    return x


def reference_flow_jacobian(x, t0: float, T: float, field: VectorFieldSpec,
                            delta: float, step: float) -> np.ndarray:
    """Centred-difference flow-map Jacobian built on reference_advect only."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    jac = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = delta
        plus = reference_advect(x + e, t0, T, field, step)
        minus = reference_advect(x - e, t0, T, field, step)
        jac[:, j] = (plus - minus) / (2.0 * delta)
    return jac


# ---------------------------------------------------------------------------
# characteristic-polynomial eigenvalues


def _poly_mul(p, q):
    out = [0.0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _poly_add(p, q):
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else 0.0) + (q[i] if i < len(q) else 0.0)
            for i in range(n)]


def _det_poly(C, G0):
    """Coefficients (low to high) of det(C - lam G0), entries as linear polys."""
    d = C.shape[0]
    entry = [[[C[i, j], -G0[i, j]] for j in range(d)] for i in range(d)]
    if d == 1:
        return entry[0][0]
    if d == 2:
        return _poly_add(_poly_mul(entry[0][0], entry[1][1]),
                         [-c for c in _poly_mul(entry[0][1], entry[1][0])])
    if d == 3:
        total = [0.0]
        for perm, sign in ((( 0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                           ((0, 2, 1), -1), ((2, 1, 0), -1), ((1, 0, 2), -1)):
            term = [float(sign)]
            for i, j in enumerate(perm):
                term = _poly_mul(term, entry[i][j])
            total = _poly_add(total, term)
        return total
    raise DimensionError("characteristic-polynomial oracle supports dim <= 3")


def _quadratic_roots(c0, c1, c2):
    # c2 x^2 + c1 x + c0, real roots, numerically stable split
    disc = c1 * c1 - 4.0 * c2 * c0
    disc = max(disc, 0.0)
    sq = math.sqrt(disc)
    if c1 >= 0.0:
        q = -0.5 * (c1 + sq)
    else:
        q = -0.5 * (c1 - sq)
    roots = []
    if c2 != 0.0:
        roots.append(q / c2)
    if q != 0.0:
        roots.append(c0 / q)
    else:
        roots.append(0.0)
    return roots


def _cubic_roots(c0, c1, c2, c3):
    # monic reduction then the trigonometric form (three real roots)
    a = c2 / c3
    b = c1 / c3
    c = c0 / c3
    p = b - a * a / 3.0
    q = 2.0 * a ** 3 / 27.0 - a * b / 3.0 + c
    shift = -a / 3.0
    if p >= 0.0:
        # numerically (near-)triple root
        t = -np.cbrt(q) if q != 0 else 0.0
        roots = [t + shift] * 3
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        arg = min(1.0, max(-1.0, arg))
        theta = math.acos(arg) / 3.0
        roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift
                 for k in range(3)]
    # polish with two Newton steps on the original cubic
    out = []
    for x in roots:
        for _ in range(2):
            f = ((c3 * x + c2) * x + c1) * x + c0
            fp = (3.0 * c3 * x + 2.0 * c2) * x + c1
            if fp != 0.0:
                x = x - f / fp
        out.append(x)
    return out


def charpoly_eigs(C: np.ndarray, G0: np.ndarray) -> np.ndarray:
    """Generalized eigenvalues as roots of det(C - lam G0), dims 1..3.

    Sorted descending.  Implemented with explicit polynomial expansion and
    closed-form quadratic/cubic root formulas; no matrix factorisations.
    """
    C = np.asarray(C, dtype=float)
    G0 = np.asarray(G0, dtype=float)
    d = C.shape[0]
    coeffs = _det_poly(C, G0)
    if d == 1:
        roots = [-coeffs[0] / coeffs[1]]
    elif d == 2:
        roots = _quadratic_roots(*coeffs)
    else:
        roots = _cubic_roots(*coeffs)
    return np.array(sorted(roots, reverse=True))


# ---------------------------------------------------------------------------
# stretch-ratio sampling


def stretch_ratio_sample(F, G_start, G_end, v) -> float:
    """Squared stretched length of v relative to its seed length.

    |F v|^2 measured by the endpoint metric over |v|^2 by the seed metric.
    Over random v this samples the generalized Rayleigh quotient of the
    deformation pair, so every value lies between the extreme eigenvalues.
    """
    F = np.asarray(F, dtype=float)
    Gs = np.asarray(G_start, dtype=float)
    Ge = np.asarray(G_end, dtype=float)
    v = np.asarray(v, dtype=float)
    d = len(v)
    den = 0.0
    for i in range(d):
        for j in range(d):
            den += v[i] * Gs[i, j] * v[j]
    if den <= 0.0:
        raise DomainError("stretch ratio needs a vector of positive length")
    Fv = [sum(F[i][j] * v[j] for j in range(d)) for i in range(d)]
    num = 0.0
    for i in range(d):
        for j in range(d):
            num += Fv[i] * Ge[i, j] * Fv[j]
    return num / den


# ---------------------------------------------------------------------------
# hypercomplex assembly, one operator at a time


def _mat_mul(A, B):
    n = len(A)
    return [[sum(A[i][k] * B[k][j] for k in range(n)) for j in range(n)]
            for i in range(n)]


def _mat_T(A):
    n = len(A)
    return [[A[j][i] for j in range(n)] for i in range(n)]


def hypercomplex_terms(F, G, H: HypercomplexStructure) -> list[np.ndarray]:
    """The three summands (Q F)^T G (Q F), assembled by explicit loops."""
    F = [list(map(float, row)) for row in np.asarray(F)]
    G = [list(map(float, row)) for row in np.asarray(G)]
    terms = []
    for Q in H.operators:
        Ql = [list(map(float, row)) for row in np.asarray(Q)]
        QF = _mat_mul(Ql, F)
        terms.append(np.array(_mat_mul(_mat_T(QF), _mat_mul(G, QF))))
    return terms


def hypercomplex_tensor_oracle(F, G, H: HypercomplexStructure) -> np.ndarray:
    """Sum of the three pullback terms."""
    total = np.zeros((4, 4))
    for term in hypercomplex_terms(F, G, H):
        total += term
    return total
