import math

import numpy as np
import pytest

from outagebounds import estimators as est
from outagebounds import models, mse
from outagebounds import outage as ob
from outagebounds.mse import DistortionSpec, HIntegrationConfig, TruncationError


def gaussian_a_p(var, p):
    """(int f^q)^(1/q) for a N(., var) density, q = p/(p-1)."""
    q = p / (p - 1.0)
    return (2.0 * math.pi * var) ** ((1.0 - q) / (2.0 * q)) * q ** (-1.0 / (2.0 * q))


def two_sided_mmse(l1=1.0, l2=10.0, atoms=(1.0, 2.0)):
    # posterior: exponential with mean l1/x on theta > 0 and l2/x on theta < 0, equal weight
    out = 0.0
    for x in atoms:
        second = (l1**2 + l2**2) / x**2
        mean = (l1 - l2) / (2.0 * x)
        out += 0.5 * (second - mean**2)
    return out


class TestIdentities:
    def test_zero_distortion(self, gauss):
        assert mse.distortion_bound(gauss, DistortionSpec.zero()) == 0.0

    def test_absolute_equals_first_moment(self, two_sided):
        curve = mse.bound_curve(two_sided, ob.BoundKind.TIGHTEST)
        a = mse.distortion_bound(two_sided, DistortionSpec.absolute(), curve=curve)
        b = mse.moment_bound(two_sided, 1, curve=curve)
        assert a == pytest.approx(b, abs=1e-14)

    def test_squared_equals_cp(self, two_sided):
        curve = mse.bound_curve(two_sided, ob.BoundKind.TIGHTEST_P, 2.0)
        a = mse.distortion_bound(two_sided, DistortionSpec.squared(), curve=curve)
        b = mse.mse_bound_cp(two_sided, 2.0, curve=curve)
        c = mse.moment_bound(two_sided, 2, curve=curve)
        assert a == pytest.approx(b, abs=1e-12) and b == pytest.approx(c, abs=1e-12)

    def test_negative_derivative_rejected(self):
        with pytest.raises(ValueError):
            DistortionSpec(lambda t: -t).weights(np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            DistortionSpec.power(0)


class TestGaussian:
    def test_tightest_and_zzlb_are_mmse(self, gauss):
        assert mse.mse_bound_tightest(gauss) == pytest.approx(0.5, abs=1e-3)
        assert mse.zzlb_mse(gauss) == pytest.approx(0.5, abs=1e-3)

    def test_first_moment(self, gauss):
        # E|e| for e ~ N(0, 1/2) is sqrt(1/pi)
        assert mse.moment_bound(gauss, 1) <= math.sqrt(1.0 / math.pi) + 1e-3
        assert mse.moment_bound(gauss, 1) == pytest.approx(math.sqrt(1.0 / math.pi), abs=1e-3)

    def test_cp_approaches_tightest(self, gauss):
        assert mse.mse_bound_cp(gauss, 1.01) == pytest.approx(mse.mse_bound_tightest(gauss), abs=5e-3)
        assert mse.mse_bound_cp(gauss, 8.0) <= mse.mse_bound_cp(gauss, 2.0) + 1e-9

    def test_auto_range_for_point_mass(self):
        m = models.LinearGaussian(0.0, 1.0, 1e-6)
        res = mse.mse_bound_tightest_result(m)
        assert res.value <= 1e-5
        assert res.h_max < 1.0


class TestSingleCoefficient:
    def test_unit_constant(self):
        assert mse.single_coeff_mse_closed(1.0, 2.0) == pytest.approx(1.0 / 20.0, abs=1e-15)

    def test_gaussian_p2(self, gauss):
        assert mse.single_coeff_mse_bound(gauss, 2.0) == pytest.approx(math.pi / 10.0, abs=1e-10)

    @pytest.mark.parametrize("p", [1.2, 2.0, 3.5, 8.0])
    def test_a_p_oracle(self, gauss, p):
        a_p, _ = ob.single_coeff_constant(gauss, p)
        assert a_p == pytest.approx(gaussian_a_p(0.5, p), rel=1e-10)

    @pytest.mark.parametrize("a_p,p", [(0.3, 1.1), (1.0, 2.0), (2.5, 4.0), (0.9, 7.5)])
    def test_closed_vs_direct(self, a_p, p):
        assert mse.single_coeff_mse_closed(a_p, p) == pytest.approx(
            mse.single_coeff_mse_direct(a_p, p), abs=1e-10
        )

    def test_below_tightest(self, gauss, two_sided):
        for model in (gauss, two_sided):
            tight = mse.mse_bound_tightest(model)
            for p in (1.5, 2.0, 5.0):
                assert mse.single_coeff_mse_bound(model, p) <= tight + 1e-9

    def test_bad_constant(self):
        with pytest.raises(ArithmeticError):
            mse.single_coeff_mse_closed(0.0, 2.0)


class TestTruncation:
    def test_too_small_range_raises(self, two_sided):
        with pytest.raises(TruncationError) as info:
            mse.mse_bound_tightest(two_sided, hcfg=HIntegrationConfig(H_max=5.0))
        assert info.value.tail_estimate > 1e-10 and info.value.h_max == 5.0

    def test_doubling_range_is_stable(self, two_sided):
        base = mse.mse_bound_tightest_result(two_sided)
        wide = mse.mse_bound_tightest(
            two_sided, hcfg=HIntegrationConfig(H_max=2 * base.h_max, h_points=2 * 400 - 1)
        )
        assert abs(wide - base.value) < 1e-6

    def test_config_validation(self):
        with pytest.raises(ValueError):
            HIntegrationConfig(H_max=0.0)
        with pytest.raises(ValueError):
            HIntegrationConfig(h_points=1)


class TestOrdering:
    def test_two_sided(self, two_sided):
        tight = mse.mse_bound_tightest(two_sided)
        zz = mse.zzlb_mse(two_sided)
        assert zz <= tight + 1e-7
        assert tight <= two_sided_mmse() + 1e-7

    def test_mixtures(self, mixtures):
        for model in mixtures:
            res = mse.mse_bound_tightest_result(model)
            zz = mse.zzlb_mse(model, hcfg=HIntegrationConfig(H_max=res.h_max))
            assert zz <= res.value + 1e-7
            emp = est.empirical_mse(model, "mmse", 4000, 1)
            assert res.value <= emp.value + 3.0 * emp.stderr

    def test_two_intervals_shared_samples(self, intervals):
        mc = (16, 4)
        hcfg = HIntegrationConfig(H_max=32.0, h_points=257)
        tight = mse.mse_bound_tightest_result(intervals, mc=mc, hcfg=hcfg)
        zz = mse.zzlb_mse(intervals, mc=mc, hcfg=hcfg)
        assert zz <= tight.value + 1e-7
        assert tight.mc_stderr is not None and tight.mc_stderr > 0
