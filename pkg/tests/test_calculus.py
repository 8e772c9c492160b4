import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from properscore.calculus import (
    GK21_GAUSS_WEIGHTS,
    GK21_KRONROD_WEIGHTS,
    GK21_NODES,
    HalfAntiderivative,
    integrate_open,
    mean_reward,
    normalize_rule,
)
from properscore.errors import (
    CrossCheckError,
    DegenerateRuleError,
    NonConvergenceError,
    NonFiniteIntegrandError,
    NonNormalizableError,
)
from properscore.rules import Rule, build_rule, extend_half_derivative

from conftest import BUILTINS


class TestGaussKronrod:
    def test_weights_integrate_polynomials(self):
        # Kronrod part is exact to degree 31, Gauss part to degree 19
        for deg in range(0, 32):
            exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
            assert GK21_KRONROD_WEIGHTS @ GK21_NODES ** deg == pytest.approx(exact, abs=1e-14)
        for deg in range(0, 20):
            exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
            assert GK21_GAUSS_WEIGHTS @ GK21_NODES ** deg == pytest.approx(exact, abs=1e-14)

    def test_nodes_interior(self):
        assert np.all(np.abs(GK21_NODES) < 1)


class TestIntegrateOpen:
    def test_linear(self):
        assert integrate_open(lambda x: x, 0.0, 1.0).value == pytest.approx(0.5, abs=1e-15)

    def test_inverse_sqrt(self):
        res = integrate_open(lambda x: x ** -0.5, 0.0, 1.0, 1e-9)
        assert abs(res.value - 2.0) <= 1e-9 * 2

    def test_beta_integral(self):
        res = integrate_open(lambda x: x * (1 - x) ** 2, 0.0, 1.0)
        assert res.value == pytest.approx(1 / 12, rel=1e-13)

    def test_never_touches_endpoints(self):
        seen = []

        def fn(x):
            seen.append(x.copy())
            return np.log(x) + np.log1p(-x)

        res = integrate_open(fn, 0.0, 1.0, 1e-10)
        xs = np.concatenate(seen)
        assert np.all((xs > 0) & (xs < 1))
        assert res.value == pytest.approx(-2.0, rel=1e-10)

    def test_log_singularity_against_scipy(self):
        f = lambda x: np.log(x) ** 2 * np.sqrt(1 - x)  # noqa: E731
        ref = integrate.quad(f, 0, 1, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        assert integrate_open(f, 0.0, 1.0, 1e-11).value == pytest.approx(ref, rel=1e-10)

    def test_split_at_half_and_breakpoints(self):
        f = lambda x: np.abs(x - 0.3) ** 0.5  # noqa: E731
        exact = (0.3 ** 1.5 + 0.7 ** 1.5) * 2 / 3
        res = integrate_open(f, 0.0, 1.0, 1e-12, breakpoints=[0.3])
        assert res.value == pytest.approx(exact, rel=1e-12)
        assert res.subdivisions >= 3

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergent_integral_raises_with_estimate(self):
        with pytest.raises(NonConvergenceError) as info:
            integrate_open(lambda x: 1 / x, 0.0, 1.0, 1e-10, max_panels=2000)
        assert info.value.error_estimate > 0
        assert math.isfinite(info.value.value)

    def test_nonfinite_integrand(self):
        with pytest.raises(NonFiniteIntegrandError):
            integrate_open(lambda x: np.where(x > 0.7, np.nan, x), 0.0, 1.0)

    def test_bad_interval(self):
        with pytest.raises(ValueError):
            integrate_open(lambda x: x, 1.0, 0.0)

    def test_scalar_callable(self):
        res = integrate_open(lambda x: math.exp(x), 0.0, 1.0, vectorized=False)
        assert res.value == pytest.approx(math.e - 1, rel=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(0.05, 3.0), b=st.floats(0.75, 3.0))
    def test_beta_function_oracle(self, a, b):
        # mass within one ulp of x = 1 is unreachable in double precision, so
        # the exponent at 1 is kept where that tail is below 1e-12
        exact = math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))
        res = integrate_open(lambda x: x ** (a - 1) * (1 - x) ** (b - 1), 0.0, 1.0, 1e-10)
        assert res.value == pytest.approx(exact, rel=1e-8)


class TestHalfAntiderivative:
    def test_polynomial(self):
        F = HalfAntiderivative(lambda x: 3 * x ** 2)
        x = np.array([1e-9, 0.1, 0.5, 0.77, 1 - 1e-12])
        np.testing.assert_allclose(F(x), x ** 3 - 0.125, rtol=0, atol=1e-15)

    def test_endpoint_power(self):
        F = HalfAntiderivative(lambda x: (1 - x) ** -0.5)
        x = np.array([0.3, 0.9, 1 - 1e-10])
        np.testing.assert_allclose(F(x), 2 * np.sqrt(0.5) - 2 * np.sqrt(1 - x), rtol=1e-13)

    def test_log_derivative(self):
        F = HalfAntiderivative(lambda x: 1 / x)
        x = np.array([1e-300, 1e-5, 0.25, 0.99])
        np.testing.assert_allclose(F(x), np.log(2 * x), rtol=1e-13)


class TestMeanReward:
    def test_quad(self):
        assert mean_reward(build_rule("quad")).value == pytest.approx(2 / 3, rel=1e-12)

    def test_log(self):
        r = build_rule("log")
        assert mean_reward(r).value == pytest.approx(-0.5, rel=1e-12)
        assert r.f(0.5) == pytest.approx(-math.log(2), rel=1e-15)

    @pytest.mark.parametrize("spec", BUILTINS + ("tsallis:1.5", "tsallis:3"))
    def test_three_forms_agree(self, spec):
        m = mean_reward(build_rule(spec))
        assert m.spread <= 1e-8

    def test_disagreement_detected(self):
        r = build_rule("quad")
        with pytest.raises(CrossCheckError):
            mean_reward(r, agreement=0.0 - 1.0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_normalizable(self):
        class Steep(Rule):
            # R(x) = -1/x - 1/(1-x) is not integrable
            def _f(self, x):
                return -1 / x ** 2

            def _fp(self, x):
                return 2 / x ** 3

        with pytest.raises(NonNormalizableError):
            mean_reward(Steep(None, label="steep"))


class TestNormalize:
    def test_quad(self):
        _, rep = normalize_rule(build_rule("quad"))
        assert rep.a == pytest.approx(6, rel=1e-12)
        assert rep.b == pytest.approx(-3, rel=1e-12)

    def test_log(self):
        _, rep = normalize_rule(build_rule("log"))
        a = 1 / (math.log(2) - 0.5)
        assert rep.a == pytest.approx(a, rel=1e-11)
        assert rep.b == pytest.approx(a * math.log(2), rel=1e-11)

    def test_hs_closed_form(self):
        _, rep = normalize_rule(build_rule("hs"))
        assert rep.a == pytest.approx(1 / (1 - math.pi / 4), rel=1e-11)

    @pytest.mark.parametrize("spec", BUILTINS)
    def test_report_invariants_and_idempotence(self, spec):
        rule, rep = normalize_rule(build_rule(spec))
        assert rep.a * rep.f_half_raw + rep.b == pytest.approx(0, abs=1e-12)
        assert rep.a * (rep.mean_reward_raw - rep.f_half_raw) == pytest.approx(1, rel=1e-12)
        assert rule.normalized
        assert abs(rule.f(0.5)) < 1e-12
        assert mean_reward(rule).value == pytest.approx(1, rel=1e-9)
        _, again = normalize_rule(rule)
        assert abs(again.a - 1) < 1e-10 and abs(again.b) < 1e-10

    def test_r2_scales(self):
        raw = build_rule("sph")
        rule, rep = normalize_rule(raw)
        assert rule.R_second(0.3) == pytest.approx(rep.a * raw.R_second(0.3), rel=1e-14)

    def test_degenerate(self):
        r = extend_half_derivative(lambda y: np.zeros_like(y), "right", validate=False)
        with pytest.raises(DegenerateRuleError):
            normalize_rule(r)
