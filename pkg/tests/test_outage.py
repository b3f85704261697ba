import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from outagebounds import models, outage as ob
from outagebounds._validation import CapabilityError
from outagebounds.outage import BoundCurve, BoundKind, CoefficientValidationError, FourierCoefficientSet

SUPPORT = ((-6.0, -3.0), (3.0, 6.0))


def gauss_outage(h, var):
    return 1.0 - special.erf(h / (2.0 * math.sqrt(2.0 * var)))


def ex3_tightest_voronoi(h, var=100.0):
    """Raw tightest bound of the two-interval example from Voronoi cells.

    For equal-variance Gaussian kernels at sorted points, the integral over x
    of their maximum is 1 + sum over neighbour gaps of erf(gap / (2 s)).
    """
    s = math.sqrt(2.0 * var)
    ls = np.arange(-int(12 / h) - 2, int(12 / h) + 3)

    def inner(phi):
        pts = phi + h * ls
        pts = pts[(np.abs(pts) >= 3.0) & (np.abs(pts) <= 6.0)]
        if len(pts) == 0:
            return 0.0
        return (1.0 + float(np.sum(special.erf(np.diff(np.sort(pts)) / (2.0 * s))))) / 6.0

    edges = sorted({e % h for e in (-6.0, -3.0, 3.0, 6.0)})
    val, _ = integrate.quad(inner, 0.0, h, points=edges or None, limit=400, epsabs=1e-13)
    return 1.0 - val


def overlap_length(h):
    total = 0.0
    for a, b in SUPPORT:
        for c, d in SUPPORT:
            total += max(0.0, min(b, d - h) - max(a, c - h))
    return total


def ex3_zzlb_overlap(h, var=100.0):
    """Raw ZZLB outage: only pairs inside the support overlap, each by 1 - erf."""
    return overlap_length(h) / 6.0 * (1.0 - special.erf(h / (2.0 * math.sqrt(2.0 * var))))


class TestGaussian:
    @pytest.mark.parametrize("h", [0.25, 0.5, 1.0, 2.0, 4.0])
    def test_tightest_is_minimum_outage(self, gauss, h):
        assert ob.tightest_bound(gauss, h) == pytest.approx(gauss_outage(h, 0.5), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(
        var_theta=st.floats(0.05, 20.0),
        var_noise=st.floats(0.05, 20.0),
        h=st.floats(0.01, 12.0),
    )
    def test_tightest_property(self, var_theta, var_noise, h):
        m = models.LinearGaussian(0.0, var_theta, var_noise)
        assert ob.tightest_bound(m, h) == pytest.approx(gauss_outage(h, m.post_var), abs=1e-9)

    @pytest.mark.parametrize("h", [0.3, 1.0, 3.0])
    def test_zzlb_equals_tightest_for_symmetric_unimodal(self, gauss, h):
        assert ob.zzlb_outage(gauss, h) == pytest.approx(ob.tightest_bound(gauss, h), abs=1e-10)

    def test_supremum_consistency(self, gauss):
        for h in (0.5, 1.0, 2.0):
            assert abs(ob.tightest_subclass_bound(gauss, h, 1.001) - ob.tightest_bound(gauss, h)) <= 1e-3

    def test_single_coefficient_closed_form(self, gauss):
        for p in (1.5, 2.0, 5.0):
            for h in (0.5, 2.0):
                assert ob.single_coeff_bound(gauss, h, p) == pytest.approx(
                    gauss.single_coeff_closed(h, p), abs=1e-10
                )

    def test_tightest_dominates_single_coefficient(self, gauss):
        for p in (1.01, 1.5, 5.0):
            grid = np.linspace(0.0, 6.0, 50)
            single = ob.outage_curve(gauss, BoundKind.SINGLE_COEFF, grid, p=p)
            tight = ob.outage_curve(gauss, BoundKind.TIGHTEST, grid)
            assert np.all(tight.values >= single.values - 1e-10)

    def test_zero_width(self, gauss):
        assert ob.tightest_bound(gauss, 0.0) == 1.0
        assert ob.zzlb_outage(gauss, 0.0) == 1.0
        assert ob.min_outage_oracle(gauss, 2.0) == pytest.approx(1.0 - special.erf(1.0), abs=1e-15)


class TestTwoSidedExponential:
    @staticmethod
    def closed(h, l1=1.0, l2=10.0, atoms=(1.0, 2.0)):
        out = 0.0
        for x in atoms:
            c = (math.log(l2 / l1) + x * h / l2) * l1 * l2 / (x * (l1 + l2))
            d = min(max(c, 0.0), h)
            out += 0.25 * (math.exp((d - h) * x / l2) + math.exp(-d * x / l1))
        return out

    @pytest.mark.parametrize("h", [1.0, 5.0, 10.0, 20.0, 30.0])
    def test_closed_form(self, two_sided, h):
        assert ob.tightest_bound(two_sided, h) == pytest.approx(self.closed(h), abs=1e-8)

    def test_tightest_equals_minimum_outage(self, two_sided):
        for h in np.linspace(0.0, 60.0, 25):
            assert abs(ob.tightest_bound(two_sided, h) - ob.min_outage_oracle(two_sided, h)) <= 1e-6

    def test_zero_width_oracle(self, two_sided):
        assert ob.min_outage_oracle(two_sided, 0.0) == 1.0


class TestTwoIntervals:
    @pytest.mark.parametrize("h", [0.7, 1.3, 2.5, 4.0, 5.5, 7.3, 10.5])
    def test_raw_tightest_vs_voronoi(self, intervals, h):
        assert ob.tightest_bound(intervals, h) == pytest.approx(ex3_tightest_voronoi(h), abs=1e-8)

    @pytest.mark.parametrize("h", [0.7, 2.0, 4.0, 7.0, 9.0, 10.5, 13.0])
    def test_raw_zzlb_vs_overlap(self, intervals, h):
        assert ob.zzlb_outage(intervals, h) == pytest.approx(ex3_zzlb_overlap(h), abs=1e-8)

    def test_zzlb_constant_branch(self, intervals):
        s = math.sqrt(200.0)
        grid = np.array([3.0, 5.0, 8.0, 9.0, 12.0, 14.0])
        curve = ob.outage_curve(intervals, BoundKind.ZZLB_OUTAGE, grid, valley=True)
        want = 0.5 * (1.0 - special.erf(9.0 / (2.0 * s)))
        np.testing.assert_allclose(curve.values[:3], want, atol=1e-8)
        assert curve.values[-1] == 0.0

    def test_valley_filled_displays(self, intervals):
        hs = [1.0, 2.0, 4.0, 7.0, 10.0, 13.0]
        grid = np.unique(np.concatenate([np.linspace(0, 15, 31), hs]))
        tight = ob.outage_curve(intervals, BoundKind.TIGHTEST, grid, valley=True)
        idx = np.searchsorted(grid, hs)
        for i, h in zip(idx, hs):
            assert tight.values[i] == pytest.approx(intervals.tightest_closed(h), abs=1e-6)

    def test_min_outage_closed_pieces_match_numeric(self, intervals):
        from outagebounds.estimators import min_outage_numeric

        for h in (1.0, 4.0, 10.0):
            assert min_outage_numeric(intervals, h, grid_points=512) == pytest.approx(
                intervals.min_outage(h), abs=1e-6
            )
        assert intervals.min_outage(12.0) == 0.0 and intervals.min_outage(20.0) == 0.0

    def test_printed_six_to_nine_piece_is_not_a_minimum(self, intervals):
        # a wider window can only help, yet the printed piece jumps upward at 6
        assert intervals.min_outage_printed(6.0) > intervals.min_outage(5.9) + 0.1
        with pytest.raises(CapabilityError):
            intervals.min_outage(7.0)
        oracle = ob.min_outage_oracle(intervals, 7.0)
        assert oracle <= intervals.min_outage(5.9) + 1e-9
        assert oracle >= intervals.tightest_closed(7.0) - 1e-9

    def test_validity_against_oracle(self, intervals):
        for h in (0.5, 2.0, 4.0, 10.0, 12.5):
            assert ob.tightest_bound(intervals, h) <= ob.min_outage_oracle(intervals, h) + 1e-7


class TestGeneralClass:
    def test_constant_weight_is_single_coefficient(self, gauss):
        coeffs = FourierCoefficientSet({0: lambda x, h: np.ones_like(np.asarray(x, float))})
        for p in (1.5, 3.0):
            assert ob.general_class_bound(gauss, coeffs, 1.0, p) == pytest.approx(
                ob.single_coeff_bound(gauss, 1.0, p), abs=1e-9
            )

    def test_suboptimal_weights_never_beat_tightest_p(self, two_sided):
        coeffs = FourierCoefficientSet(
            {0: lambda x, h: np.ones_like(np.asarray(x, float)), 1: lambda x, h: 0.3 + 0.2j + 0 * np.asarray(x, float)}
        )
        for h, p in [(2.0, 1.5), (8.0, 2.0), (20.0, 4.0)]:
            assert ob.general_class_bound(two_sided, coeffs, h, p) <= ob.tightest_subclass_bound(two_sided, h, p) + 1e-7

    def test_rejects_non_positive_weight(self, gauss):
        bad = FourierCoefficientSet(
            {0: lambda x, h: np.ones_like(np.asarray(x, float)), 1: lambda x, h: 0.8 + 0 * np.asarray(x, float)}
        )
        with pytest.raises(CoefficientValidationError):
            ob.general_class_bound(gauss, bad, 1.0, 2.0)

    def test_requires_a0(self):
        with pytest.raises(CoefficientValidationError):
            FourierCoefficientSet({1: lambda x, h: x})


class TestOrdering:
    def test_p_monotone(self, two_sided, mixtures):
        for model in [two_sided, *mixtures]:
            for h in (0.5, 3.0, 12.0):
                vals = [ob.tightest_subclass_bound(model, h, p) for p in (1.01, 1.5, 2.0, 5.0, 8.0)]
                assert np.all(np.diff(vals) <= 1e-7)

    def test_zzlb_below_tightest(self, two_sided, mixtures):
        for model in [two_sided, *mixtures]:
            for h in np.linspace(0.1, 20.0, 12):
                assert ob.zzlb_outage(model, h) <= ob.tightest_bound(model, h) + 1e-7

    def test_mixture_has_no_oracle(self, mixtures):
        with pytest.raises(CapabilityError):
            ob.min_outage_oracle(mixtures[0], 1.0)


class TestCurves:
    def test_valley_fill_example(self):
        c = BoundCurve(np.array([0.0, 1.0, 2.0, 3.0]), np.array([1.0, 0.2, 0.5, 0.1]), BoundKind.TIGHTEST)
        np.testing.assert_array_equal(ob.valley_fill(c).values, [1.0, 0.5, 0.5, 0.1])

    def test_monotone_input_unchanged(self):
        c = BoundCurve(np.array([0.0, 1.0, 2.0]), np.array([0.9, 0.4, 0.0]), BoundKind.TIGHTEST)
        np.testing.assert_array_equal(ob.valley_fill(c).values, c.values)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40))
    def test_valley_fill_properties(self, values):
        grid = np.arange(len(values), dtype=float)
        c = BoundCurve(grid, np.array(values), BoundKind.TIGHTEST)
        once = ob.valley_fill(c)
        assert np.all(np.diff(once.values) <= 0)
        assert np.all(once.values >= c.values)
        np.testing.assert_array_equal(ob.valley_fill(once).values, once.values)

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            BoundCurve(np.array([0.0, 2.0, 1.0]), np.array([1.0, 0.5, 0.2]), BoundKind.TIGHTEST)
        with pytest.raises(ValueError):
            BoundCurve(np.array([0.0, 1.0]), np.array([1.0, 1.5]), BoundKind.TIGHTEST)
        with pytest.raises(ValueError):
            BoundCurve(
                np.array([0.0, 1.0]), np.array([0.5, 0.7]), BoundKind.TIGHTEST, valley_filled=True
            )

    def test_one_plus_token_maps_to_tightest(self, two_sided):
        grid = np.array([1.0, 5.0])
        a = ob.outage_curve(two_sided, BoundKind.TIGHTEST_P, grid, p=ob.P_ONE_PLUS)
        b = ob.outage_curve(two_sided, BoundKind.TIGHTEST, grid)
        assert a.kind is BoundKind.TIGHTEST
        np.testing.assert_array_equal(a.values, b.values)

    def test_threads_do_not_change_values(self, two_sided):
        grid = np.linspace(0.0, 30.0, 9)
        a = ob.outage_curve(two_sided, BoundKind.TIGHTEST_P, grid, p=2.0, threads=1)
        b = ob.outage_curve(two_sided, BoundKind.TIGHTEST_P, grid, p=2.0, threads=3)
        np.testing.assert_array_equal(a.values, b.values)

    def test_argument_errors(self, gauss):
        with pytest.raises(ValueError):
            ob.tightest_subclass_bound(gauss, 1.0, 1.0)
        with pytest.raises(ValueError):
            ob.tightest_bound(gauss, -1.0)
