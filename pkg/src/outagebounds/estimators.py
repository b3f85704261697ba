"""h-MAP, MAP and MMSE estimators and their Monte-Carlo performance.

The h-MAP estimate maximizes the window mass W(t) = F(t + h/2 | x) - F(t - h/2 | x).
It is located by a coarse grid over the posterior window (seeded with the
model's breakpoints shifted by h/2), then refined by bisection on the sign
of W'(t) = f(t + h/2) - f(t - h/2), with golden-section search as the
fallback. Ties resolve to the smallest maximizer. The estimators follow the
scikit-learn estimator protocol so they can be cloned and inspected like any
other regressor.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import quadrature as quad
from ._validation import CapabilityError, as_1d, check_h, check_trials
from .models import PosteriorModel, sample_joint_batch

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_GOLDEN_STEPS = 90
_BISECT_STEPS = 64
_TIE_TOL = 1e-13
_BATCH = 20000
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# numeric search


def window_mass(model, x, t, h):
    """W(t) = posterior mass of [t - h/2, t + h/2] given x."""
    t = np.asarray(t, dtype=float)
    return quad.posterior_mass(model, x, t - h / 2.0, t + h / 2.0)


def _golden_max(objective, x, lo, hi):
    """Vectorized golden-section maximization; ties keep the left part."""
    for _ in range(_GOLDEN_STEPS):
        c = hi - _GOLDEN * (hi - lo)
        d = lo + _GOLDEN * (hi - lo)
        left = objective(x, c) >= objective(x, d)
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
    return 0.5 * (lo + hi)


def _slope_change(rising, x, lo, hi):
    """Bisection for the point where ``rising`` turns false; lo rising, hi not."""
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        up = rising(x, mid)
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    return hi


def _grid_argmax(objective, rising, x, grid):
    """Smallest global maximizer of ``objective(x, t)`` for each row of ``grid``.

    ``rising(x, t)`` reports a strictly positive slope at t. The best grid
    point is refined by bisection on the slope sign inside its neighbouring
    cells, falling back to golden-section search when the sign pattern does
    not bracket a maximum.
    """
    n, m = grid.shape
    rows = np.arange(n)
    vals = objective(x[:, None], grid)
    best = vals.max(axis=1)
    i0 = np.argmax(vals >= (best - _TIE_TOL)[:, None], axis=1)
    t0 = grid[rows, i0]
    left = grid[rows, np.maximum(i0 - 1, 0)]
    right = grid[rows, np.minimum(i0 + 1, m - 1)]
    up0 = rising(x, t0)
    lo = np.where(up0, t0, left)
    hi = np.where(up0, right, t0)
    ok = rising(x, lo) & ~rising(x, hi) & (hi > lo)
    refined = t0.copy()
    if ok.any():
        refined[ok] = _slope_change(rising, x[ok], lo[ok], hi[ok])
    bad = ~ok & (right > left)
    if bad.any():
        refined[bad] = _golden_max(objective, x[bad], left[bad], right[bad])
    # never return anything worse than the best grid point
    keep = objective(x, refined) >= objective(x, t0) - _TIE_TOL
    return np.where(keep, refined, t0)


def _search_grid(model, x, half_width, points):
    lo, hi = model.window(x)
    lo = np.asarray(lo, dtype=float) - half_width
    hi = np.asarray(hi, dtype=float) + half_width
    base = np.linspace(0.0, 1.0, int(points))
    grid = lo[:, None] + (hi - lo)[:, None] * base
    bps = model.breakpoints(x)
    if bps.shape[1]:
        extra = [bps]
        if half_width > 0:
            extra += [bps - half_width, bps + half_width]
        extra = np.clip(np.concatenate(extra, axis=1), lo[:, None], hi[:, None])
        grid = np.sort(np.concatenate([grid, extra], axis=1), axis=1)
    return grid


def _unique_apply(func, x):
    """Evaluate ``func`` once per distinct observation."""
    x = as_1d(x)
    uniq, inverse = np.unique(x, return_inverse=True)
    return func(uniq)[inverse]


def h_map_estimate(model, x, h, cfg=None, grid_points=2048):
    """Smallest maximizer of the window mass W(t) for each observation."""
    h = check_h(h)
    scalar = np.ndim(x) == 0

    def solve(xs):
        out = np.empty(len(xs))
        step = max(1, quad._cfg(cfg).cell_budget // (4 * grid_points))
        for s in range(0, len(xs), step):
            xc = xs[s : s + step]
            grid = _search_grid(model, xc, h / 2.0, grid_points)
            out[s : s + step] = _grid_argmax(
                lambda xx, t: window_mass(model, xx, t, h),
                lambda xx, t: model.pdf(xx, t + h / 2.0) > model.pdf(xx, t - h / 2.0),
                xc,
                grid,
            )
        return out

    est = _unique_apply(solve, x)
    return float(est[0]) if scalar else est


def map_estimate(model, x, cfg=None, grid_points=2048):
    """Smallest global maximizer of the posterior density for each observation."""
    scalar = np.ndim(x) == 0

    def solve(xs):
        out = np.empty(len(xs))
        step = max(1, quad._cfg(cfg).cell_budget // (4 * grid_points))
        for s in range(0, len(xs), step):
            xc = xs[s : s + step]
            grid = _search_grid(model, xc, 0.0, grid_points)
            # a symmetric difference much finer than the grid gives the slope sign
            lo, hi = model.window(xc)
            delta = 1e-4 * float(np.min(np.asarray(hi) - np.asarray(lo))) / (grid_points - 1)
            out[s : s + step] = _grid_argmax(
                lambda xx, t: model.pdf(xx, t),
                lambda xx, t: model.pdf(xx, t + delta) > model.pdf(xx, t - delta),
                xc,
                grid,
            )
        return out

    est = _unique_apply(solve, x)
    return float(est[0]) if scalar else est


def mmse_estimate(model, x, cfg=None, panels=32):
    """Posterior mean by composite Gauss-Legendre quadrature over the window.

    Panels are split at the model's breakpoints so each piece is smooth.
    """
    scalar = np.ndim(x) == 0

    def solve(xs):
        lo, hi = model.window(xs)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        bps = np.clip(model.breakpoints(xs), lo[:, None], hi[:, None])
        edges = np.sort(np.concatenate([lo[:, None], bps, hi[:, None]], axis=1), axis=1)
        frac = np.linspace(0.0, 1.0, panels + 1)
        a = edges[:, :-1, None] + (edges[:, 1:] - edges[:, :-1])[..., None] * frac[:-1]
        b = edges[:, :-1, None] + (edges[:, 1:] - edges[:, :-1])[..., None] * frac[1:]
        half = 0.5 * (b - a)
        pts = (0.5 * (a + b))[..., None] + half[..., None] * _GL_NODES
        dens = model.pdf(xs[:, None, None, None], pts)
        w = half[..., None] * _GL_WEIGHTS
        mass = np.sum(w * dens, axis=(1, 2, 3))
        first = np.sum(w * dens * pts, axis=(1, 2, 3))
        return first / mass

    est = _unique_apply(solve, x)
    return float(est[0]) if scalar else est


def min_outage_numeric(model, h, cfg=None, mc=None, grid_points=2048):
    """1 - E[max_t W(t)], the outage of the numeric h-MAP estimator."""
    h = check_h(h, allow_zero=True)
    if h == 0.0:
        return 1.0

    def best_mass(xs):
        t = h_map_estimate(model, xs, h, cfg, grid_points)
        return window_mass(model, xs, t, h)

    val, _ = quad.expect_over_x(model, best_mass, cfg, mc)
    return float(min(1.0, max(0.0, 1.0 - val)))


# ---------------------------------------------------------------------------
# scikit-learn style estimators


def _observations(X):
    arr = check_array(X, ensure_2d=False, dtype=float)
    return as_1d(arr)


class _PosteriorEstimator(BaseEstimator):
    """Shared fit/predict/score plumbing; fitting only validates parameters."""

    def fit(self, X=None, y=None):
        if not isinstance(self.model, PosteriorModel):
            raise TypeError("model must be a PosteriorModel")
        self._check_params()
        self.model_ = self.model
        return self

    def _check_params(self):
        pass

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self._estimate(_observations(X))

    def score(self, X, y):
        """Negative mean squared error (larger is better)."""
        err = self.predict(X) - as_1d(y, "y")
        return -float(np.mean(err * err))

    def outage(self, X, y, h):
        """Fraction of samples with |estimate - y| > h/2."""
        h = check_h(h, allow_zero=True)
        return float(np.mean(np.abs(self.predict(X) - as_1d(y, "y")) > h / 2.0))


class HMAPEstimator(_PosteriorEstimator):
    """Maximizer of the posterior mass in a window of width ``h``."""

    def __init__(self, model=None, h=1.0, grid_points=2048, use_closed_form=False):
        self.model = model
        self.h = h
        self.grid_points = grid_points
        self.use_closed_form = use_closed_form

    def _check_params(self):
        check_h(self.h)
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")

    def _estimate(self, x):
        if self.use_closed_form:
            return np.asarray(self.model_.h_map_closed(x, self.h), dtype=float) * np.ones_like(x)
        return h_map_estimate(self.model_, x, self.h, grid_points=self.grid_points)


class MAPEstimator(_PosteriorEstimator):
    """Posterior mode."""

    def __init__(self, model=None, grid_points=2048, use_closed_form=False):
        self.model = model
        self.grid_points = grid_points
        self.use_closed_form = use_closed_form

    def _check_params(self):
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")

    def _estimate(self, x):
        if self.use_closed_form:
            return np.asarray(self.model_.posterior_mode(x), dtype=float) * np.ones_like(x)
        return map_estimate(self.model_, x, grid_points=self.grid_points)


class MMSEEstimator(_PosteriorEstimator):
    """Posterior mean."""

    def __init__(self, model=None, use_closed_form=False, panels=32):
        self.model = model
        self.use_closed_form = use_closed_form
        self.panels = panels

    def _check_params(self):
        if self.panels < 1:
            raise ValueError("panels must be >= 1")

    def _estimate(self, x):
        if self.use_closed_form:
            return np.asarray(self.model_.posterior_mean(x), dtype=float) * np.ones_like(x)
        return mmse_estimate(self.model_, x, panels=self.panels)


class ConstantEstimator(_PosteriorEstimator):
    """Ignores the observation and always returns ``value``."""

    def __init__(self, model=None, value=0.0):
        self.model = model
        self.value = value

    def _estimate(self, x):
        return np.full(len(x), float(self.value))


# ---------------------------------------------------------------------------
# Monte-Carlo performance


_KINDS = ("h_map", "map", "mmse", "closed_form")


@dataclass(frozen=True)
class EstimatorSpec:
    """Declarative description of an estimator.

    ``kind`` is one of ``h_map``, ``map``, ``mmse`` or ``closed_form``; the
    latter uses the model's analytic estimator named by ``name`` (one of
    ``h_map``, ``map``, ``mmse``). An h-MAP spec without ``h`` adapts its
    window to whatever h it is evaluated at; pin it with ``at``.
    """

    kind: str
    h: Optional[float] = None
    name: Optional[str] = None
    grid_points: int = 2048

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        target = self.name if self.kind == "closed_form" else self.kind
        if self.kind == "closed_form" and target not in ("h_map", "map", "mmse"):
            raise ValueError(f"unknown closed-form estimator {self.name!r}")
        if target == "h_map" and self.h is not None:
            object.__setattr__(self, "h", check_h(self.h))
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")

    @classmethod
    def parse(cls, text):
        """Parse ``mmse``, ``map``, ``h_map:5`` or ``closed_form:h_map:5``."""
        parts = [p.strip() for p in str(text).strip().split(":")]
        if parts[0] == "closed_form":
            if len(parts) < 2:
                raise ValueError("closed_form needs an estimator name")
            h = float(parts[2]) if len(parts) > 2 else None
            return cls("closed_form", h=h, name=parts[1])
        h = float(parts[1]) if len(parts) > 1 else None
        return cls(parts[0], h=h)

    @property
    def adaptive(self):
        target = self.name if self.kind == "closed_form" else self.kind
        return target == "h_map" and self.h is None

    def at(self, h):
        """This spec with an adaptive h-MAP window pinned to ``h``."""
        return replace(self, h=h) if self.adaptive else self

    @property
    def label(self):
        base = self.name if self.kind == "closed_form" else self.kind
        text = f"{base}:{self.h:.17g}" if base == "h_map" and self.h is not None else base
        return f"closed_form:{text}" if self.kind == "closed_form" else text

    def build(self, model):
        closed = self.kind == "closed_form"
        target = self.name if closed else self.kind
        if target == "h_map":
            if self.h is None:
                raise ValueError("adaptive h_map spec has no window; call at(h) first")
            est = HMAPEstimator(model, h=self.h, grid_points=self.grid_points, use_closed_form=closed)
        elif target == "map":
            est = MAPEstimator(model, grid_points=self.grid_points, use_closed_form=closed)
        else:
            est = MMSEEstimator(model, use_closed_form=closed)
        return est.fit()


@dataclass(frozen=True)
class EmpiricalPerformance:
    """Monte-Carlo estimate with its standard error."""

    value: float
    stderr: float
    trials: int
    seed: int

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be non-negative")

    def stderr_under(self, p0):
        """Binomial standard error if the true rate were ``p0``.

        Unlike the plug-in stderr it does not collapse to zero when no
        outage was observed, which matters when comparing a small rate
        with a reference value.
        """
        p0 = min(max(float(p0), 0.0), 1.0)
        return math.sqrt(p0 * (1.0 - p0) / self.trials)


def _as_estimator(model, est):
    if isinstance(est, EstimatorSpec):
        return est.build(model)
    if isinstance(est, str):
        return EstimatorSpec.parse(est).build(model)
    if hasattr(est, "predict"):
        try:
            check_is_fitted(est)
        except Exception:
            est = est.fit()
        return est
    raise TypeError("est must be an EstimatorSpec, a spec string or a fitted estimator")


def estimation_errors(model, est, trials, seed):
    """theta_hat(x) - theta over the first ``trials`` joint samples of ``seed``."""
    trials = check_trials(trials)
    est = _as_estimator(model, est)
    errors = np.empty(trials)
    for start in range(0, trials, _BATCH):
        count = min(_BATCH, trials - start)
        x, theta = sample_joint_batch(model, seed, count, start=start)
        errors[start : start + count] = est.predict(x) - theta
    return errors


def _outage_from_errors(errors, h, seed):
    n = len(errors)
    rate = float(np.mean(np.abs(errors) > h / 2.0))
    return EmpiricalPerformance(rate, math.sqrt(rate * (1.0 - rate) / n), n, int(seed))


def empirical_outage(model, est, h, trials, seed):
    """Fraction of joint samples with |theta_hat - theta| > h/2, binomial stderr."""
    h = check_h(h, allow_zero=True)
    return _outage_from_errors(estimation_errors(model, est, trials, seed), h, seed)


def empirical_outage_curve(model, est, h_grid, trials, seed):
    """Empirical outage at every h of ``h_grid`` from one shared sample."""
    errors = estimation_errors(model, est, trials, seed)
    return [_outage_from_errors(errors, check_h(h, allow_zero=True), seed) for h in h_grid]


def empirical_mse(model, est, trials, seed):
    """Sample mean of (theta_hat - theta)^2 with its standard error."""
    sq = estimation_errors(model, est, trials, seed) ** 2
    n = len(sq)
    stderr = float(sq.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EmpiricalPerformance(float(sq.mean()), stderr, n, int(seed))


__all__ = [
    "CapabilityError",
    "ConstantEstimator",
    "EmpiricalPerformance",
    "EstimatorSpec",
    "HMAPEstimator",
    "MAPEstimator",
    "MMSEEstimator",
    "empirical_mse",
    "empirical_outage",
    "empirical_outage_curve",
    "estimation_errors",
    "h_map_estimate",
    "map_estimate",
    "min_outage_numeric",
    "mmse_estimate",
    "window_mass",
]
