import math

import numpy as np
import pytest
from scipy import integrate
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from outagebounds import estimators as est
from outagebounds import outage as ob
from outagebounds.estimators import (
    ConstantEstimator,
    EstimatorSpec,
    HMAPEstimator,
    MAPEstimator,
    MMSEEstimator,
)


class TestSklearnProtocol:
    def test_get_params_and_clone(self, gauss):
        e = HMAPEstimator(gauss, h=2.0, grid_points=64)
        params = e.get_params()
        assert params["h"] == 2.0 and params["grid_points"] == 64
        c = clone(e)
        assert c.get_params()["h"] == 2.0 and not hasattr(c, "model_")

    def test_set_params(self, gauss):
        e = HMAPEstimator(gauss).set_params(h=3.0)
        assert e.h == 3.0

    def test_not_fitted(self, gauss):
        with pytest.raises(NotFittedError):
            MMSEEstimator(gauss).predict([0.0])

    def test_fit_validates(self, gauss):
        with pytest.raises(TypeError):
            MMSEEstimator("not a model").fit()
        with pytest.raises(ValueError):
            HMAPEstimator(gauss, h=-1.0).fit()

    def test_score_is_negative_mse(self, gauss):
        e = ConstantEstimator(gauss, value=1.0).fit()
        assert e.score([0.0, 5.0], [0.0, 2.0]) == pytest.approx(-1.0)

    def test_outage_fraction(self, gauss):
        e = ConstantEstimator(gauss, value=0.0).fit()
        assert e.outage([0.0, 0.0, 0.0], [0.1, 0.6, -2.0], 1.0) == pytest.approx(2.0 / 3.0)

    def test_2d_column_input(self, gauss):
        e = MMSEEstimator(gauss, use_closed_form=True).fit()
        np.testing.assert_allclose(e.predict(np.array([[2.0], [4.0]])), [1.0, 2.0])


class TestEstimates:
    def test_gaussian_estimators_coincide(self, gauss):
        x = np.linspace(-4.0, 4.0, 9)
        want = x / 2.0
        np.testing.assert_allclose(est.h_map_estimate(gauss, x, 1.5), want, atol=1e-7)
        np.testing.assert_allclose(est.map_estimate(gauss, x), want, atol=1e-7)
        np.testing.assert_allclose(est.mmse_estimate(gauss, x), want, atol=1e-10)

    @pytest.mark.parametrize("h", [0.5, 5.0, 20.0, 40.0])
    def test_two_sided_h_map_closed_form(self, two_sided, h):
        x = np.array([1.0, 2.0])
        np.testing.assert_allclose(
            est.h_map_estimate(two_sided, x, h), two_sided.d_x(x, h) - h / 2.0, atol=1e-7
        )

    def test_two_sided_mmse(self, two_sided):
        x = np.array([1.0, 2.0])
        np.testing.assert_allclose(est.mmse_estimate(two_sided, x), two_sided.posterior_mean(x), atol=1e-9)
        np.testing.assert_allclose(est.map_estimate(two_sided, x), 0.0, atol=1e-6)

    def test_two_intervals_tie_break(self, intervals):
        # every centre in [4, 5] covers all of [3, 6]; the smallest one wins
        t = float(est.h_map_estimate(intervals, np.array([4.0]), 4.0)[0])
        assert t == pytest.approx(4.0, abs=1e-6)

    def test_two_intervals_mmse_by_quadrature(self, intervals):
        for x in (-7.0, 0.5, 4.0, 20.0):
            num = integrate.quad(lambda t: t * float(intervals.pdf(np.array([x]), t)[0]), -6, 6, points=[-3, 3])[0]
            den = integrate.quad(lambda t: float(intervals.pdf(np.array([x]), t)[0]), -6, 6, points=[-3, 3])[0]
            assert float(est.mmse_estimate(intervals, np.array([x]))[0]) == pytest.approx(num / den, abs=1e-8)
            assert float(intervals.posterior_mean(np.array([x]))[0]) == pytest.approx(num / den, abs=1e-8)

    @pytest.mark.parametrize("h", [1.0, 4.0, 7.0])
    def test_maximizer_certified(self, mixtures, intervals, h):
        rng = np.random.default_rng(7)
        for model in [intervals, *mixtures]:
            x = model.reference_observation()
            x = np.atleast_1d(np.asarray(x, float))[:1]
            t_hat = est.h_map_estimate(model, x, h)
            best = float(est.window_mass(model, x, t_hat, h)[0])
            lo, hi = model.window(x)
            ts = rng.uniform(float(np.min(lo)) - h, float(np.max(hi)) + h, 1000)
            masses = est.window_mass(model, np.repeat(x, len(ts)), ts, h)
            assert best >= float(np.max(masses)) - 1e-9

    def test_min_outage_numeric_gaussian(self, gauss):
        for h in (0.5, 2.0):
            assert est.min_outage_numeric(gauss, h, grid_points=256) == pytest.approx(
                gauss.min_outage(h), abs=1e-9
            )


class TestMonteCarlo:
    def test_deterministic(self, two_sided):
        a = est.estimation_errors(two_sided, "mmse", 5000, 3)
        b = est.estimation_errors(two_sided, "mmse", 5000, 3)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, est.estimation_errors(two_sided, "mmse", 5000, 4))

    def test_chunking_does_not_change_samples(self, two_sided, monkeypatch):
        whole = est.estimation_errors(two_sided, "map", 3000, 11)
        monkeypatch.setattr(est, "_BATCH", 700)
        np.testing.assert_array_equal(est.estimation_errors(two_sided, "map", 3000, 11), whole)

    def test_h_map_near_tightest(self, two_sided):
        h = 20.0
        r = est.empirical_outage(two_sided, EstimatorSpec("closed_form", h=h, name="h_map"), h, 20000, 5)
        bound = ob.tightest_bound(two_sided, h)
        assert abs(r.value - bound) <= 3.0 * r.stderr_under(bound)

    @pytest.mark.parametrize("h", [2.0, 10.0])
    def test_map_outage_closed_form(self, two_sided, h):
        r = est.empirical_outage(two_sided, "map", h, 20000, 2)
        want = two_sided.map_outage(h)
        assert abs(r.value - want) <= 4.0 * r.stderr_under(want)

    @pytest.mark.parametrize("h", [2.0, 10.0, 30.0])
    def test_mmse_outage_row(self, two_sided, h):
        r = est.empirical_outage(two_sided, EstimatorSpec("closed_form", name="mmse"), h, 20000, 9)
        want = two_sided.mmse_outage(h)
        assert abs(r.value - want) <= 4.0 * r.stderr_under(want)

    def test_mmse_outage_direct_form(self, two_sided):
        # posterior given x: rate x/l1 on theta > 0 and x/l2 on theta < 0, equal weights
        def direct(h):
            out = 0.0
            for x in (1.0, 2.0):
                a = (1.0 - 10.0) / (2.0 * x)
                hi, lo = a + h / 2, a - h / 2
                def mass(u):
                    if u >= 0:
                        return 1.0 - 0.5 * math.exp(-u * x / 1.0)
                    return 0.5 * math.exp(u * x / 10.0)
                out += 0.5 * (1.0 - (mass(hi) - mass(lo)))
            return out

        for h in (1.0, 5.0, 15.0, 40.0):
            assert two_sided.mmse_outage(h) == pytest.approx(direct(h), abs=1e-14)

    def test_h_map_outage_design(self, two_sided):
        assert two_sided.h_map_outage(20.0, 20.0) == pytest.approx(two_sided.min_outage(20.0), abs=1e-12)
        assert two_sided.h_map_outage(20.0, 5.0) >= two_sided.min_outage(20.0) - 1e-12

    def test_empirical_curve_matches_pointwise(self, gauss):
        hs = [0.5, 1.0, 2.0]
        curve = est.empirical_outage_curve(gauss, "mmse", hs, 4000, 1)
        for h, r in zip(hs, curve):
            assert r.value == est.empirical_outage(gauss, "mmse", h, 4000, 1).value

    def test_empirical_mse_gaussian(self, gauss):
        r = est.empirical_mse(gauss, "mmse", 20000, 0)
        assert abs(r.value - 0.5) <= 4.0 * r.stderr

    def test_stderr_under(self):
        r = est.EmpiricalPerformance(0.0, 0.0, 100, 0)
        assert r.stderr_under(0.5) == pytest.approx(0.05)
        with pytest.raises(ValueError):
            est.EmpiricalPerformance(0.1, -1.0, 10, 0)


class TestSpec:
    @pytest.mark.parametrize(
        "text,label",
        [
            ("mmse", "mmse"),
            ("map", "map"),
            ("h_map:5", "h_map:5"),
            ("h_map", "h_map"),
            ("closed_form:h_map:2.5", "closed_form:h_map:2.5"),
            ("closed_form:mmse", "closed_form:mmse"),
        ],
    )
    def test_parse_label(self, text, label):
        assert EstimatorSpec.parse(text).label == label

    def test_adaptive(self, gauss):
        spec = EstimatorSpec.parse("h_map")
        assert spec.adaptive
        with pytest.raises(ValueError):
            spec.build(gauss)
        built = spec.at(2.0).build(gauss)
        assert isinstance(built, HMAPEstimator) and built.h == 2.0
        assert EstimatorSpec.parse("mmse").at(3.0) == EstimatorSpec("mmse")

    def test_build_types(self, gauss):
        assert isinstance(EstimatorSpec.parse("map").build(gauss), MAPEstimator)
        assert EstimatorSpec.parse("closed_form:mmse").build(gauss).use_closed_form

    @pytest.mark.parametrize("text", ["bogus", "closed_form", "closed_form:median", "h_map:-1"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            EstimatorSpec.parse(text)
