import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twistreg.elastic import (CUTOFF_SLOPE, EnergyConfig, VariationSpec, build_variation, check_variation_bounds,
                              cutoff, cutoff_prime, element_energy, element_energy_delta, energy,
                              energy_gradient, variational_inequality_probe)
from twistreg.errors import BoundViolated, InfeasibleState, InvalidParams
from twistreg.grid import make_mesh
from twistreg.laws import preset_law
from twistreg.twist import fold_map


@pytest.fixture(scope="module")
def cfg():
    return EnergyConfig(1.0, preset_law("default"))


@pytest.fixture(scope="module")
def mesh():
    return make_mesh("square", 16)


def random_feasible(mesh, seed, amp=0.02):
    rng = np.random.default_rng(seed)
    u = mesh.points + amp * rng.normal(size=mesh.points.shape)
    u[mesh.dirichlet] = mesh.points[mesh.dirichlet]
    return u


def test_identity_energy(mesh, cfg):
    assert energy(mesh, mesh.points, cfg) == pytest.approx((2 + cfg.law.theta1) * 4, rel=1e-14)


def test_diagonal_energy(mesh, cfg):
    u = mesh.points @ np.diag([2.0, 0.5])
    assert energy(mesh, u, cfg) == pytest.approx((4.25 + cfg.law.eval(1.0)) * 4, rel=1e-14)


def test_inverted_element_gives_infinity(mesh, cfg):
    u = mesh.points.copy()
    u[mesh.triangles[40, 0]] += (0.5, 0.5)
    assert energy(mesh, u, cfg) == math.inf
    with pytest.raises(InfeasibleState):
        energy_gradient(mesh, u, cfg)


def test_lambda_must_be_positive():
    with pytest.raises(InvalidParams):
        EnergyConfig(0.0, preset_law())


@pytest.mark.parametrize("A", [np.eye(2), np.array([[2.0, 0.3], [0.0, 0.5]]), np.array([[0.8, -0.6], [0.6, 0.8]])])
def test_affine_maps_are_critical(mesh, cfg, A):
    g = energy_gradient(mesh, mesh.points @ A.T, cfg)
    assert np.abs(g).max() <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_gradient_matches_central_differences(mesh, cfg, seed):
    u = random_feasible(mesh, seed)
    rng = np.random.default_rng(100 + seed)
    v = rng.normal(size=u.shape)
    v[mesh.dirichlet] = 0.0
    t = 1e-6
    fd = (energy(mesh, u + t * v, cfg) - energy(mesh, u - t * v, cfg)) / (2 * t)
    dd = float(np.sum(energy_gradient(mesh, u, cfg) * v))
    assert dd == pytest.approx(fd, rel=1e-5)


def test_steepest_descent_decreases(mesh, cfg):
    u = random_feasible(mesh, 7)
    g = energy_gradient(mesh, u, cfg)
    assert energy(mesh, u - 1e-4 * g, cfg) < energy(mesh, u, cfg)


def test_translation_invariance(mesh, cfg):
    u = random_feasible(mesh, 3)
    assert energy(mesh, u + 0.25, cfg) == energy(mesh, u, cfg)


def test_energy_delta_matches_difference(mesh, cfg):
    u = random_feasible(mesh, 11)
    du = 1e-3 * np.random.default_rng(0).normal(size=u.shape)
    ref = element_energy(mesh, u + du, cfg) - element_energy(mesh, u, cfg)
    assert np.allclose(element_energy_delta(mesh, u, du, cfg), ref, rtol=1e-8, atol=1e-14)


class TestCutoff:
    def test_plateau_and_support(self):
        r = 0.2
        assert np.all(cutoff(np.linspace(0, r, 10), r) == 1.0)
        assert np.all(cutoff(np.linspace(2 * r, 1, 10), r) == 0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.0, 3.0), st.floats(0.01, 1.0))
    def test_slope_bound(self, R, r):
        fp = cutoff_prime(R * r, r)
        assert fp <= 0.0
        assert abs(fp) <= CUTOFF_SLOPE / r + 1e-12


class TestVariation:
    def test_zero_eps_is_identity(self, mesh):
        u = random_feasible(mesh, 1)
        assert np.array_equal(build_variation(mesh, u, VariationSpec((0.1, 0.0), 0.2, 0.0)), u)

    def test_unchanged_outside_support(self, mesh):
        u = random_feasible(mesh, 2)
        spec = VariationSpec((0.0, 0.0), 0.2, -0.3)
        ue = build_variation(mesh, u, spec)
        far = np.hypot(*mesh.points.T) >= 0.4
        assert np.array_equal(ue[far], u[far])

    def test_identity_on_plateau(self, mesh):
        x0 = np.array([0.125, -0.125])
        spec = VariationSpec(tuple(x0), 0.25, -0.3)
        ue = build_variation(mesh, mesh.points, spec)
        near = np.hypot(*(mesh.points - x0).T) <= 0.25
        assert np.allclose(ue[near], mesh.points[near] + spec.eps * (mesh.points[near] - x0), atol=1e-15)

    def test_ball_must_fit(self, mesh):
        with pytest.raises(InvalidParams):
            build_variation(mesh, mesh.points, VariationSpec((0.8, 0.0), 0.2, -0.1))

    @pytest.mark.parametrize("eps", [-0.4, -0.1, -0.01, 0.0])
    @pytest.mark.parametrize("A", [np.eye(2), np.array([[1.3, 0.4], [-0.2, 0.7]])])
    def test_bounds_on_linear_maps(self, mesh, eps, A):
        rep = check_variation_bounds(mesh, mesh.points @ A.T, VariationSpec((0.0, 0.0), 0.3, eps))
        assert rep.plateau_residual <= 1e-9
        assert rep.far_residual <= 1e-9
        assert rep.lower_margin >= -1e-9

    def test_eps_range(self, mesh):
        with pytest.raises(InvalidParams):
            check_variation_bounds(mesh, mesh.points, VariationSpec((0.0, 0.0), 0.3, -0.6))

    def test_negative_twist_rejected(self):
        m = make_mesh("square", 32)
        with pytest.raises(InvalidParams):
            check_variation_bounds(m, fold_map(m.points), VariationSpec((0.0, 0.0), 0.2, -0.1))

    def test_lower_bound_can_fail_without_positive_twist(self):
        # a swirl keeps det > 0 but rotates circles backwards near the ramp
        m = make_mesh("square", 48)
        x = m.points
        R = np.hypot(*x.T)
        ang = -4.0 * np.exp(-20 * R**2)
        c, s = np.cos(ang), np.sin(ang)
        u = np.column_stack([c * x[:, 0] - s * x[:, 1], s * x[:, 0] + c * x[:, 1]])
        try:
            rep = check_variation_bounds(m, u, VariationSpec((0.0, 0.0), 0.2, -0.4))
        except (BoundViolated, InvalidParams):
            return
        assert rep.min_twist >= 0


def test_probe_identity(mesh, cfg):
    rep = variational_inequality_probe(mesh, mesh.points, VariationSpec((0.0, 0.0), 0.2, 0.0), cfg)
    # continuum value: the integrand is div(eta^2 x), so LHS = 0 and RHS = 0
    assert rep.rhs == 0.0
    assert rep.lhs <= rep.rhs
    assert rep.slopes_ok
    assert set(rep.as_dict()) == {"lhs", "rhs", "slope_eps_-1e-02", "slope_eps_-1e-03",
                                  "slope_eps_-1e-04", "min_det_margin"}


def test_probe_identity_lhs_second_order(cfg):
    lhs = [variational_inequality_probe(m, m.points, VariationSpec((0.0, 0.0), 0.2, 0.0), cfg).lhs
           for m in (make_mesh("square", n) for n in (32, 64, 128))]
    rates = np.log2(np.abs(lhs[:-1]) / np.abs(lhs[1:]))
    assert np.all(rates > 1.9)


def test_probe_reports_non_minimizer(mesh, cfg):
    # a local dilation bump: shrinking it lowers the energy
    u = mesh.points * (1 + 0.3 * np.exp(-(mesh.points**2).sum(axis=1) / 0.02))[:, None]
    rep = variational_inequality_probe(mesh, u, VariationSpec((0.0, 0.0), 0.2, 0.0), cfg)
    assert rep.max_slope > rep.slope_tol
    assert not rep.slopes_ok
