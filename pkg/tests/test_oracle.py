import math

import numpy as np
import pytest

import geolcs as g
from geolcs import oracle
from geolcs.deformation import gen_eigh_batch


def random_spd(rng, d):
    Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return Q @ np.diag(np.exp(rng.uniform(-1.5, 1.5, d))) @ Q.T


class TestReferenceAdvect:
    def test_saddle_closed_form(self):
        f = g.FIELDS["saddle"]()
        end = oracle.reference_advect(np.array([1.0, 1.0]), 0.0, 1.0, f,
                                      step=1e-4)
        assert np.abs(end - [math.e, 1.0 / math.e]).max() < 1e-10

    def test_zero_field_returns_seed_exactly(self):
        def ev(x, t):
            return np.zeros_like(x)
        f = g.VectorFieldSpec("still", 2, ev)
        x = np.array([0.37, -1.2])
        assert np.array_equal(oracle.reference_advect(x, 0.0, 3.0, f, 0.01), x)

    def test_production_matches_reference_on_double_gyre(self, rect, icfg):
        f = g.FIELDS["double_gyre"]()
        x = np.array([1.3, 0.4])
        prod = g.advect(x, 0.0, 10.0, f, icfg, rect.domain)
        ref = oracle.reference_advect(x, 0.0, 10.0, f, step=icfg.step / 100.0)
        assert np.abs(prod - ref).max() < 1e-6

    def test_reference_jacobian_route(self, plane, icfg):
        f = g.FIELDS["nonlinear_saddle"]()
        x = np.array([0.5, 0.2])
        ref = oracle.reference_flow_jacobian(x, 0.0, 1.0, f, delta=1e-5,
                                             step=1e-3)
        var = g.flow_jacobian_variational(x, 0.0, 1.0, f, icfg, plane.domain)
        assert np.abs(ref - var.jacobian).max() < 1e-6


class TestCharpolyEigs:
    def test_diagonal_exact(self):
        lam = oracle.charpoly_eigs(np.diag([4.0, 1.0]), np.eye(2))
        assert np.abs(lam - [4.0, 1.0]).max() < 1e-12
        lam3 = oracle.charpoly_eigs(np.diag([2.0, 5.0, 1.0]), np.eye(3))
        assert np.abs(lam3 - [5.0, 2.0, 1.0]).max() < 1e-12

    def test_identity_mass_reduces_to_standard_problem(self):
        rng = np.random.default_rng(0)
        C = random_spd(rng, 3)
        lam = oracle.charpoly_eigs(C, np.eye(3))
        ref = np.sort(np.linalg.eigvalsh(C))[::-1]
        assert np.abs(lam - ref).max() <= 1e-10

    def test_agrees_with_production_solver(self):
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(200):
            d = int(rng.integers(2, 4))
            C, G0 = random_spd(rng, d), random_spd(rng, d)
            w, _ = gen_eigh_batch(C, G0)
            lam = oracle.charpoly_eigs(C, G0)
            worst = max(worst, np.abs(lam - w).max() / max(1.0, w[0]))
        assert worst <= 1e-8

    def test_scaled_mass(self):
        lam = oracle.charpoly_eigs(np.diag([4.0, 1.0]), 2.0 * np.eye(2))
        assert np.abs(lam - [2.0, 0.5]).max() < 1e-12

    def test_dim_four_unsupported(self):
        with pytest.raises(g.DimensionError):
            oracle.charpoly_eigs(np.eye(4), np.eye(4))


class TestStretchRatio:
    def test_eigenvector_gives_eigenvalue(self):
        rng = np.random.default_rng(2)
        F = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        Gs, Ge = random_spd(rng, 3), random_spd(rng, 3)
        t = g.cauchy_green_riemannian(F, Gs, Ge)
        e = g.generalized_eigendecomp(t)
        for i in range(3):
            r = oracle.stretch_ratio_sample(F, Gs, Ge, e.vectors[:, i])
            assert r == pytest.approx(e.values[i], rel=1e-10)

    def test_ratios_bounded_by_spectrum(self):
        rng = np.random.default_rng(3)
        F = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        Gs, Ge = random_spd(rng, 2), random_spd(rng, 2)
        t = g.cauchy_green_riemannian(F, Gs, Ge)
        e = g.generalized_eigendecomp(t)
        ratios = np.array([oracle.stretch_ratio_sample(F, Gs, Ge, v)
                           for v in rng.normal(size=(1000, 2))])
        assert ratios.min() >= e.values[-1] - 1e-10
        assert ratios.max() <= e.values[0] + 1e-10

    def test_identity_everything_is_one(self):
        rng = np.random.default_rng(4)
        for v in rng.normal(size=(50, 2)):
            assert oracle.stretch_ratio_sample(
                np.eye(2), np.eye(2), np.eye(2), v) == pytest.approx(1.0)

    def test_zero_vector_rejected(self):
        with pytest.raises(g.DomainError):
            oracle.stretch_ratio_sample(np.eye(2), np.eye(2), np.eye(2),
                                        np.zeros(2))


class TestHypercomplexTerms:
    def test_three_terms_identity_flow(self):
        H = g.standard_quaternion_structure()
        terms = oracle.hypercomplex_terms(np.eye(4), np.eye(4), H)
        assert len(terms) == 3
        for term in terms:
            assert np.abs(term - np.eye(4)).max() < 1e-14

    def test_sum_matches_production(self):
        from geolcs.deformation import hypercomplex_pullback
        rng = np.random.default_rng(5)
        H = g.standard_quaternion_structure()
        F = rng.normal(size=(4, 4)) + 2 * np.eye(4)
        G = random_spd(rng, 4)
        total = oracle.hypercomplex_tensor_oracle(F, G, H)
        prod = hypercomplex_pullback(F, G, H)
        assert np.abs(total - prod).max() <= 1e-12 * max(1.0, np.abs(prod).max())
