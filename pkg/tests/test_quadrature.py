import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from outagebounds import quadrature as quad
from outagebounds.quadrature import QuadratureConfig, QuadratureError


def brute_period(model, x, h, reducer, n=200001, spread=None):
    """Riemann oracle: dense midpoint grid over [0, h] and an explicit lattice."""
    phi = (np.arange(n) + 0.5) * (h / n)
    lo, hi = model.window(np.array([x]))
    lmin = int(math.floor((float(lo[0]) - h) / h)) - 1
    lmax = int(math.ceil(float(hi[0]) / h)) + 1
    ls = np.arange(lmin, lmax + 1)
    step = max(1, 2_000_000 // len(ls))
    total = 0.0
    for s in range(0, n, step):
        vals = model.pdf(x, phi[s : s + step, None] + ls * h)
        total += float(np.sum(reducer(vals)))
    return total * h / n


class TestIntegrate:
    def test_polynomial_exact(self):
        assert quad.integrate(lambda t: 3 * t**2 + 1, -1.0, 2.0) == pytest.approx(12.0, abs=1e-13)

    def test_reversed_limits(self):
        assert quad.integrate(np.exp, 1.0, 0.0) == pytest.approx(1.0 - math.e, abs=1e-13)

    def test_gaussian_against_erf(self):
        val = quad.integrate(lambda t: np.exp(-t * t), -3.0, 5.0)
        assert val == pytest.approx(math.sqrt(math.pi) / 2 * (special.erf(5) + special.erf(3)), abs=1e-12)

    def test_breakpoints_resolve_jump(self):
        f = lambda t: np.where(t < math.pi / 3, 1.0, 3.0)
        assert quad.integrate(f, 0.0, 2.0, breakpoints=[math.pi / 3]) == pytest.approx(
            math.pi / 3 + 3 * (2 - math.pi / 3), abs=1e-13
        )

    def test_budget_exhaustion_reports_partial(self):
        cfg = QuadratureConfig(rel_tol=1e-14, abs_tol=1e-300, max_subdivisions=4)
        with pytest.raises(QuadratureError) as err:
            quad.integrate(lambda t: np.sqrt(np.abs(np.sin(40 * t))), 0.0, 10.0, cfg)
        assert err.value.partial > 0

    def test_matches_scipy_on_oscillatory(self):
        f = lambda t: np.cos(7 * t) * np.exp(-0.3 * t)
        ref, _ = integrate.quad(lambda t: float(f(t)), 0, 12, limit=400, epsabs=1e-14)
        assert quad.integrate(f, 0.0, 12.0) == pytest.approx(ref, abs=1e-11)


class TestLattice:
    def test_max_picks_nearest_to_mean(self, gauss):
        # lattice {..., -0.7, 0.3, 1.3, ...} around a zero posterior mean
        val = quad.lattice_max(gauss, 0.0, 0.3, 1.0)
        assert float(val) == pytest.approx(float(gauss.pdf(0.0, 0.3)), rel=1e-14)

    def test_sum_q1_is_periodized_density(self, gauss):
        phi = 0.37
        ref = sum(float(gauss.pdf(0.4, phi + l * 0.5)) for l in range(-60, 61))
        assert float(quad.lattice_sum(gauss, 0.4, phi, 0.5, 1.0)) == pytest.approx(ref, rel=1e-12)

    def test_norm_large_q_tends_to_max(self, gauss):
        a = float(quad.lattice_norm(gauss, 0.0, 0.2, 0.7, 400.0))
        b = float(quad.lattice_max(gauss, 0.0, 0.2, 0.7))
        assert a == pytest.approx(b, rel=5e-3)

    def test_bounded_support_uses_exact_cover(self, intervals):
        # every lattice point of the residue class inside [-6, 6] contributes
        phi, h = 0.4, 1.0
        ref = sum(float(intervals.pdf(2.0, phi + l * h)) for l in range(-10, 11))
        assert float(quad.lattice_sum(intervals, 2.0, phi, h, 1.0)) == pytest.approx(ref, rel=1e-13)


class TestPeriodIntegrals:
    @pytest.mark.parametrize("h", [0.3, 2.0, 7.5])
    def test_max_integral_two_sided(self, two_sided, h):
        for x in (1.0, 2.0):
            got = float(quad.period_max_integral(two_sided, np.array([x]), h)[0])
            ref = brute_period(two_sided, x, h, lambda v: v.max(axis=1))
            assert got == pytest.approx(ref, abs=2e-6)

    @pytest.mark.parametrize("h", [0.8, 3.7, 6.0, 10.5])
    def test_max_integral_two_intervals(self, intervals, h):
        for x in (-8.0, 0.5, 4.0):
            got = float(quad.period_max_integral(intervals, np.array([x]), h)[0])
            ref = brute_period(intervals, x, h, lambda v: v.max(axis=1))
            assert got == pytest.approx(ref, abs=2e-5)

    @pytest.mark.parametrize("h", [0.5, 2.5, 9.5])
    def test_min_pair_integral(self, intervals, h):
        for x in (-3.0, 1.0):
            got = float(quad.period_min_pair_integral(intervals, np.array([x]), h)[0])
            ref = brute_period(intervals, x, h, lambda v: np.minimum(v[:, :-1], v[:, 1:]).sum(axis=1))
            assert got == pytest.approx(ref, abs=2e-5)

    @pytest.mark.parametrize("q", [1.5, 2.0, 5.0])
    def test_norm_integral_mixture(self, mixtures, q):
        mix = mixtures[0]
        x = mix.observation_law.values[0]
        got = float(quad.period_norm_integral(mix, np.array([x]), 1.3, q)[0])
        ref = brute_period(mix, x, 1.3, lambda v: np.sum(v**q, axis=1) ** (1 / q))
        assert got == pytest.approx(ref, rel=1e-6)

    def test_period_wider_than_posterior(self, gauss):
        # almost all mass sits in one narrow bump inside a huge period
        got = float(quad.period_max_integral(gauss, np.array([0.0]), 1e5)[0])
        assert got == pytest.approx(1.0, abs=1e-10)


class TestExpectations:
    def test_discrete_is_exact_sum(self, two_sided):
        val, se = quad.expect_over_x(two_sided, lambda xs: xs**2)
        assert val == pytest.approx(2.5) and se == 0.0

    def test_continuous_density_quadrature(self, intervals):
        val, _ = quad.expect_over_x(intervals, lambda xs: np.ones_like(xs))
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_monte_carlo_mode(self, gauss):
        val, se = quad.expect_over_x(gauss, lambda xs: xs**2, mc=(20000, 4))
        assert abs(val - 2.0) < 4 * se
        assert se > 0


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-5, 5),
    w=st.floats(0.01, 10),
    k=st.floats(0.1, 3),
)
def test_integrate_exponential_property(a, w, k):
    b = a + w
    ref = (math.exp(k * b) - math.exp(k * a)) / k
    assert quad.integrate(lambda t: np.exp(k * t), a, b) == pytest.approx(ref, rel=1e-11)
