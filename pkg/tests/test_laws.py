import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import law_moment_integrals
from twistreg.errors import DomainError, InfeasibleLaw, InvalidParams
from twistreg.laws import PRESETS, build_general_law, build_paper_law, law_table, preset_law


@pytest.fixture(scope="module")
def law():
    return preset_law("default")


def test_left_joint_value_and_slope(law):
    assert law.eval(0.5) == pytest.approx(math.log(2.0), abs=1e-15)
    assert law.eval_prime(0.5) == -2.0


def test_minimum_at_one(law):
    assert law.eval_prime(1.0) == 0.0
    assert law.eval(1.0) == law.theta1


def test_nonpositive_arguments(law):
    assert law.eval(-0.3) == math.inf
    assert law.eval(0.0) == math.inf
    with pytest.raises(DomainError):
        law.eval_prime(-0.3)
    with pytest.raises(DomainError):
        law.eval_second(0.0)


def test_log_and_linear_branches(law):
    assert law.eval(math.exp(-1.0)) == pytest.approx(1.0, rel=1e-15)
    assert law.eval(2 * law.c2) == pytest.approx(2 * law.l * law.c2 + law.m, rel=1e-15)
    assert law.branch("right", law.c2) == pytest.approx(law.l * law.c2 + law.m, abs=1e-12)


def test_moment_equations_by_quadrature(law):
    q = law_moment_integrals(law)
    assert q["dh_left"] == pytest.approx(1.0 / law.c1, abs=1e-12)
    assert q["dh_right"] == pytest.approx(law.l, abs=1e-12)
    assert q["h_left"] == pytest.approx(law.theta1 - abs(math.log(law.c1)), abs=1e-12)
    assert q["h_right"] == pytest.approx(law.l * law.c2 + law.m - law.theta1, abs=1e-12)


@pytest.mark.parametrize("name", sorted(set(PRESETS) - {"reference"}))
def test_presets_pass_invariants(name):
    checks = preset_law(name).invariant_report()["checks"]
    assert all(checks.values()), checks


def test_example_without_positive_connector():
    with pytest.raises(InfeasibleLaw):
        build_paper_law(0.5, 2.0, 1.0, 0.1, 2.2)
    with pytest.raises(InfeasibleLaw):
        preset_law("reference")


@pytest.mark.parametrize("args", [(1.2, 2, 0.1, 0.05, 0.2), (0.5, 0.9, 0.1, 0.05, 0.2),
                                  (0.5, 2, -0.1, 0.05, 0.2), (0.5, 2, 0.1, 0.05, 0.1)])
def test_invalid_constants(args):
    with pytest.raises(InvalidParams):
        build_paper_law(*args)


def test_chord_convexity_on_random_triples(law):
    rng = np.random.default_rng(1)
    s = np.sort(np.exp(rng.uniform(math.log(1e-6), math.log(1e3), size=(10_000, 3))), axis=1)
    t = rng.uniform(size=10_000)
    s2 = t * s[:, 0] + (1 - t) * s[:, 2]
    lhs = law.eval(s2)
    rhs = t * law.eval(s[:, 0]) + (1 - t) * law.eval(s[:, 2])
    assert np.all(lhs <= rhs + 1e-9 * np.abs(rhs))


def test_derivative_monotone_and_h_nonnegative(law):
    s = np.geomspace(1e-6, 1e3, 20_001)
    assert np.all(np.diff(law.eval_prime(s)) >= 0)
    assert np.all(law.eval(s) >= 0)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-4, 50.0), st.floats(-0.9, 3.0))
def test_delta_matches_difference(s, frac):
    law = preset_law("default")
    ds = frac * s
    ref = law.eval(s + ds) - law.eval(s)
    assert law.delta(np.array([s]), np.array([ds]))[0] == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_delta_past_zero_is_infinite(law):
    assert law.delta(np.array([0.5]), np.array([-0.6]))[0] == math.inf


def test_table_columns(law):
    tab = law_table(law, n=50)
    assert tab.shape == (50, 3)
    assert np.all(np.diff(tab[:, 0]) > 0)


class TestGeneralLaw:
    def test_minimum(self):
        g = build_general_law(1.0)
        assert g.eval(1.0) == 0.0
        assert g.eval_prime(1.0) == 0.0
        assert g.eval(-1.0) == math.inf

    @pytest.mark.parametrize("q1", [0.1, 1.0, 5.0])
    def test_growth_bound(self, q1):
        g = build_general_law(q1)
        assert g.growth_holds(np.geomspace(1.0001, 1e4, 5000))

    def test_doubling_ratio_sampled(self):
        g = build_general_law(1.0)
        s = np.geomspace(1e-8, g.s0, 5000)
        assert np.all(g.eval(s / 2) / g.eval(s) <= g.K)
        assert g.doubling_holds(s)

    def test_blowup_at_zero(self):
        g = build_general_law(1.0)
        s = np.array([1e-6, 1e-8])
        assert np.allclose(g.eval(s) / (g.b / s), 1.0, rtol=1e-4)

    def test_invalid_q1(self):
        with pytest.raises(InvalidParams):
            build_general_law(0.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-3, 20.0), st.floats(-0.9, 2.0))
    def test_delta(self, s, frac):
        g = build_general_law(1.0)
        ds = frac * s
        assert g.delta(np.array([s]), np.array([ds]))[0] == pytest.approx(
            g.eval(s + ds) - g.eval(s), rel=1e-9, abs=1e-12)

    def test_strict_convexity(self):
        g = build_general_law(0.5)
        assert np.all(g.eval_second(np.geomspace(1e-4, 1e4, 1000)) > 0)
