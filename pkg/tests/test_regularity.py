import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import growth_bound, identity_annulus_lhs, identity_annulus_rhs, power_map_phi
from twistreg.errors import HypothesisViolated, InvalidParams, TooFewRadii
from twistreg.grid import make_mesh
from twistreg.regularity import (GrowthLemmaCase, caccioppoli_ratio, dirichlet_growth, fit_exponent,
                                 growth_constant, growth_lemma_check, poincare_annulus_check, power_case,
                                 radius_ladder, random_field, recursive_case)


@pytest.fixture(scope="module")
def mesh():
    return make_mesh("square", 128)


def power_map(points, beta):
    R = np.hypot(*points.T)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = points * np.where(R > 0, R ** (beta - 1), 0.0)[:, None]
    return u


class TestDirichletGrowth:
    def test_identity_exponent(self, mesh):
        prof = dirichlet_growth(mesh, mesh.points, (0.1, -0.2), 0.6)
        assert 1.9 <= prof.alpha <= 2.1
        assert np.allclose(prof.phi, 2 * math.pi * prof.radii**2, rtol=0.05)

    def test_affine_exponent(self, mesh):
        u = mesh.points @ np.array([[1.3, -0.4], [0.2, 0.8]]).T
        assert dirichlet_growth(mesh, u, (0.0, 0.0), 0.5).alpha == pytest.approx(2.0, abs=0.05)

    def test_power_map_against_closed_form(self, mesh):
        prof = dirichlet_growth(mesh, power_map(mesh.points, 0.5), (0.0, 0.0), 0.5)
        assert np.allclose(prof.phi, power_map_phi(0.5, prof.radii), rtol=0.05)
        assert prof.alpha == pytest.approx(1.0, rel=0.1)

    def test_phi_nondecreasing(self, mesh):
        u = random_field(mesh.points, np.random.default_rng(2))
        prof = dirichlet_growth(mesh, u, (0.2, 0.2), 0.7)
        assert np.all(np.diff(prof.phi) >= 0)

    def test_ladder_shift_stability(self, mesh):
        u = power_map(mesh.points, 0.5)
        a = dirichlet_growth(mesh, u, (0.0, 0.0), 0.5).alpha
        b = dirichlet_growth(mesh, u, (0.0, 0.0), 0.5, shift=0.5).alpha
        assert abs(a - b) <= 0.05

    def test_ladder_floor(self, mesh):
        radii = radius_ladder(mesh, 0.5)
        assert radii[0] >= 4 * mesh.h
        assert np.allclose(radii[1:] / radii[:-1], 2.0)

    def test_zero_field(self, mesh):
        with pytest.raises(TooFewRadii):
            dirichlet_growth(mesh, np.zeros(mesh.n_points), (0.0, 0.0), 0.5)

    def test_ball_must_fit(self, mesh):
        with pytest.raises(InvalidParams):
            dirichlet_growth(mesh, mesh.points, (0.8, 0.0), 0.5)

    def test_fit_exponent_exact_power(self):
        r = np.geomspace(0.01, 1, 7)
        slope, res = fit_exponent(r, 3 * r**1.7)
        assert slope == pytest.approx(1.7, abs=1e-12)
        assert res < 1e-12


class TestCaccioppoli:
    def test_identity_ratio(self, mesh):
        rep = caccioppoli_ratio(mesh, mesh.points, (0.0, 0.0), 0.2)
        assert rep.d_in / rep.d_ann == pytest.approx(1 / 3, rel=0.05)

    def test_constant_gradient_closed_form(self, mesh):
        A = np.array([[2.0, 0.0], [0.5, 1.0]])
        rep = caccioppoli_ratio(mesh, mesh.points @ A.T, (0.1, 0.1), 0.15)
        assert rep.ratio == rep.d_in / (0.15**2 + rep.d_ann)
        assert rep.d_in == pytest.approx(np.sum(A * A) * math.pi * 0.15**2, rel=0.05)


class TestGrowthLemma:
    @pytest.mark.parametrize("mu, p", [(0.5, 1.0), (0.75, 2.0), (0.9, 2.0)])
    def test_power_case_bound(self, mu, p):
        case = power_case(mu, p)
        rep = growth_lemma_check(case)
        assert rep.alpha_prime == pytest.approx(math.log2(1 / mu), abs=1e-15)
        assert rep.min_slack >= 0
        assert np.allclose(rep.bound, growth_bound(case.c, mu, p, case.r1, rep.radii, 1.0), rtol=1e-12)

    def test_half_gives_unit_exponent(self):
        assert growth_lemma_check(power_case(0.5, 1.0)).alpha_prime == 1.0

    @pytest.mark.parametrize("mu, p", [(0.5, 1.0), (0.75, 2.0), (0.9, 2.0)])
    def test_recursion_decay(self, mu, p):
        rep = growth_lemma_check(recursive_case(mu, p))
        assert rep.min_slack >= 0
        assert rep.decay_exponent >= rep.guaranteed_exponent - 0.05

    def test_violated_hypothesis(self):
        case = GrowthLemmaCase(0.0, 0.5, 1.0, 1.0, lambda r: np.sqrt(r), "sqrt")
        with pytest.raises(HypothesisViolated):
            growth_lemma_check(case)

    def test_recursion_below_monotone_threshold(self):
        with pytest.raises(HypothesisViolated):
            growth_lemma_check(recursive_case(0.875, 1.0, phi1=1.0))

    def test_invalid_case(self):
        with pytest.raises(InvalidParams):
            GrowthLemmaCase(1.0, 1.5, 1.0, 1.0, lambda r: r)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(1.0, 4.0), st.floats(0.2, 2.0))
    def test_recursion_always_within_bound(self, mu, p, r1):
        rep = growth_lemma_check(recursive_case(mu, p, r1=r1))
        assert rep.min_slack >= -1e-12 * rep.bound.max()
        assert rep.c_tilde == growth_constant(1.0, mu, p, r1)


class TestPoincare:
    def test_constant_field(self, mesh):
        rep = poincare_annulus_check(mesh, np.full(mesh.n_points, 3.0), (0.0, 0.0), 0.2)
        assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.holds

    def test_identity_closed_form(self, mesh):
        r = 0.2
        rep = poincare_annulus_check(mesh, mesh.points, (0.0, 0.0), r)
        assert identity_annulus_lhs(r) == pytest.approx(7.5 * math.pi * r**4, rel=1e-14)
        assert identity_annulus_rhs(r) == pytest.approx(14 * math.pi * r**4, rel=1e-14)
        assert rep.lhs == pytest.approx(identity_annulus_lhs(r), rel=0.05)
        assert rep.rhs == pytest.approx(identity_annulus_rhs(r), rel=0.05)
        assert rep.holds

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_random_smooth_fields(self, seed):
        m = make_mesh("square", 64)
        rng = np.random.default_rng(seed)
        x0 = rng.uniform(-0.4, 0.4, size=2)
        rep = poincare_annulus_check(m, random_field(m.points, rng), x0, 0.2)
        assert rep.holds

    def test_bump_inside_inner_ball(self, mesh):
        # u varies only inside B(0, r): the annulus-only form fails, the weighted full-ball form holds
        r = 0.2
        u = np.maximum(1 - (np.hypot(*mesh.points.T) / (0.9 * r)) ** 2, 0.0)
        rep = poincare_annulus_check(mesh, u, (0.0, 0.0), r)
        assert rep.rhs == 0.0 and rep.lhs > 0
        assert not rep.holds
        assert rep.lhs <= rep.weighted_rhs
