"""Scalar Bayesian estimation problems.

A model bundles a posterior density f(phi | x), the law of the observation x
and a joint sampler. Densities are evaluated with numpy broadcasting between
``x`` and ``phi`` so that whole (observation, lattice, grid) blocks can be
computed in one call.

Three worked examples are provided along with their closed-form oracles, plus
a two-component Gaussian-mixture posterior used for randomized checks and a
callable-based model for user-defined problems.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import special

from . import rng
from ._validation import CapabilityError, as_1d, check_h, check_positive

_GAUSS_WINDOW_SDS = 7.5  # two-sided tail mass below 1e-13
_EXP_WINDOW_RATES = 30.0  # one-sided exponential tail mass 0.5 e^-30


# ---------------------------------------------------------------------------
# observation laws


@dataclass(frozen=True)
class DiscreteAtoms:
    """Observation law with finitely many atoms; expectations are exact sums."""

    values: Tuple[float, ...]
    probs: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        if len(values) == 0 or len(values) != len(probs):
            raise ValueError("atoms need matching, non-empty values and probs")
        if len(set(values)) != len(values):
            raise ValueError("atom values must be distinct")
        if any(p <= 0 or not math.isfinite(p) for p in probs):
            raise ValueError("atom probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError(f"atom probabilities sum to {math.fsum(probs)!r}, not 1")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)

    def sample(self, u):
        cum = np.cumsum(self.probs)
        idx = np.searchsorted(cum, u, side="right")
        return np.asarray(self.values)[np.minimum(idx, len(self.values) - 1)]


@dataclass(frozen=True)
class ContinuousSampler:
    """Observation law known only through a sampler mapping uniforms to draws."""

    sampler: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ContinuousDensity:
    """Observation law with a marginal density, integrable by quadrature.

    ``window`` must carry all but 1e-12 of the mass. The sampler maps a
    ``(n, 4)`` block of uniforms to observations.
    """

    pdf: Callable[[np.ndarray], np.ndarray]
    window: Tuple[float, float]
    sampler: Optional[Callable[[np.ndarray], np.ndarray]] = None
    breakpoints: Tuple[float, ...] = ()


# ---------------------------------------------------------------------------
# helpers


def _normal_pdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def _interval_mass(lo, hi, mean, sd):
    """Gaussian mass of [lo, hi] computed without cancellation in the tails."""
    a = (np.asarray(lo, dtype=float) - mean) / sd
    b = (np.asarray(hi, dtype=float) - mean) / sd
    a, b = np.broadcast_arrays(a, b)
    right = a > 0
    out = special.ndtr(b) - special.ndtr(a)
    # mirror intervals lying right of the mean into the accurate left tail
    out = np.where(right, special.ndtr(-a) - special.ndtr(-b), out)
    return np.maximum(out, 0.0)


class PosteriorModel:
    """Base class for posterior models.

    Subclasses implement ``pdf``, ``window`` and ``_joint_from_uniforms``.
    ``cdf``, ``breakpoints`` and the closed-form hooks are optional.
    """

    observation_law = None
    bounded = False
    location_family = False
    support: Tuple[Tuple[float, float], ...] = ((-math.inf, math.inf),)

    def pdf(self, x, phi):
        raise NotImplementedError

    def cdf(self, x, phi):
        raise CapabilityError(f"{type(self).__name__} has no analytic cdf")

    @property
    def has_cdf(self):
        return type(self).cdf is not PosteriorModel.cdf

    def window(self, x):
        """Return ``(lo, hi)`` arrays bounding all but 1e-12 of the posterior mass."""
        raise NotImplementedError

    def breakpoints(self, x):
        """Return a ``(len(x), k)`` array of posterior discontinuities or kinks."""
        return np.empty((np.size(x), 0))

    def reference_observation(self):
        """Observation used when the posterior shape does not depend on x."""
        law = self.observation_law
        if isinstance(law, DiscreteAtoms):
            return law.values[0]
        if isinstance(law, ContinuousDensity):
            return 0.5 * (law.window[0] + law.window[1])
        return 0.0

    def _joint_from_uniforms(self, u):
        raise CapabilityError(f"{type(self).__name__} has no joint sampler")

    # closed-form hooks; overridden where the model provides them
    def posterior_mean(self, x):
        raise CapabilityError(f"{type(self).__name__} has no closed-form posterior mean")

    def posterior_mode(self, x):
        raise CapabilityError(f"{type(self).__name__} has no closed-form posterior mode")

    def h_map_closed(self, x, h):
        raise CapabilityError(f"{type(self).__name__} has no closed-form h-MAP estimator")

    def min_outage(self, h):
        raise CapabilityError(f"{type(self).__name__} has no minimum-outage oracle")


def posterior_pdf(model, x, phi):
    """Evaluate f(phi | x); exactly zero outside the parameter support."""
    return model.pdf(np.asarray(x, dtype=float), np.asarray(phi, dtype=float))


def sample_joint_batch(model, seed, trials, start=0):
    """Draw ``(x, theta)`` arrays for trials ``start .. start + trials - 1``."""
    u = rng.trial_uniforms(seed, start, trials)
    return model._joint_from_uniforms(u)


def sample_joint(model, seed, trial_index):
    """Draw the ``(x, theta)`` pair of a single trial."""
    x, theta = sample_joint_batch(model, seed, 1, start=trial_index)
    return float(x[0]), float(theta[0])


# ---------------------------------------------------------------------------
# linear Gaussian


class LinearGaussian(PosteriorModel):
    """theta ~ N(mu, var_theta), x = theta + N(0, var_noise)."""

    location_family = True

    def __init__(self, mu_theta=0.0, var_theta=1.0, var_noise=1.0):
        self.mu_theta = float(mu_theta)
        self.var_theta = check_positive("var_theta", var_theta)
        self.var_noise = check_positive("var_noise", var_noise)
        self.post_var = self.var_theta * self.var_noise / (self.var_theta + self.var_noise)
        self.post_sd = math.sqrt(self.post_var)
        self._gain = self.var_theta / (self.var_theta + self.var_noise)
        sd_x = math.sqrt(self.var_theta + self.var_noise)
        half = _GAUSS_WINDOW_SDS * sd_x
        self.observation_law = ContinuousDensity(
            pdf=lambda x: _normal_pdf((np.asarray(x) - self.mu_theta) / sd_x) / sd_x,
            window=(self.mu_theta - half, self.mu_theta + half),
            sampler=lambda u: self._joint_from_uniforms(u)[0],
        )

    def __repr__(self):
        return (
            f"LinearGaussian(mu_theta={self.mu_theta!r}, var_theta={self.var_theta!r}, "
            f"var_noise={self.var_noise!r})"
        )

    def posterior_mean(self, x):
        return self.mu_theta + self._gain * (np.asarray(x, dtype=float) - self.mu_theta)

    posterior_mode = posterior_mean

    def h_map_closed(self, x, h):
        return self.posterior_mean(x)

    def pdf(self, x, phi):
        z = (phi - self.posterior_mean(x)) / self.post_sd
        return _normal_pdf(z) / self.post_sd

    def cdf(self, x, phi):
        return special.ndtr((phi - self.posterior_mean(x)) / self.post_sd)

    def window(self, x):
        m = self.posterior_mean(x)
        half = _GAUSS_WINDOW_SDS * self.post_sd
        return m - half, m + half

    def _joint_from_uniforms(self, u):
        theta = self.mu_theta + math.sqrt(self.var_theta) * special.ndtri(u[:, 0])
        x = theta + math.sqrt(self.var_noise) * special.ndtri(u[:, 1])
        return x, theta

    def min_outage(self, h):
        h = check_h(h, allow_zero=True)
        return float(special.erfc(h / (2.0 * math.sqrt(2.0 * self.post_var))))

    def single_coeff_closed(self, h, p):
        """Closed-form single-coefficient outage bound for a Gaussian posterior."""
        h = check_h(h, allow_zero=True)
        p = float(p)
        val = (
            h ** (1.0 / p)
            * (2.0 * math.pi * self.post_var) ** (-1.0 / (2.0 * p))
            * ((p - 1.0) / p) ** ((p - 1.0) / (2.0 * p))
        )
        return max(0.0, 1.0 - val)


# ---------------------------------------------------------------------------
# two-sided exponential posterior


class TwoSidedExponential(PosteriorModel):
    """Posterior with rate x/lambda1 on theta >= 0 and x/lambda2 on theta < 0.

    Each half-line carries mass 1/2. The observation takes finitely many
    positive values.
    """

    def __init__(self, lambda1=1.0, lambda2=10.0, atoms=(1.0, 2.0), probs=(0.5, 0.5)):
        self.lambda1 = check_positive("lambda1", lambda1)
        self.lambda2 = check_positive("lambda2", lambda2)
        if not self.lambda1 < self.lambda2:
            raise ValueError("TwoSidedExponential requires lambda1 < lambda2")
        self.observation_law = DiscreteAtoms(tuple(atoms), tuple(probs))
        if any(v <= 0 for v in self.observation_law.values):
            raise ValueError("observations must be positive")

    def __repr__(self):
        law = self.observation_law
        return (
            f"TwoSidedExponential(lambda1={self.lambda1!r}, lambda2={self.lambda2!r}, "
            f"atoms={law.values!r}, probs={law.probs!r})"
        )

    def pdf(self, x, phi):
        x = np.asarray(x, dtype=float)
        phi = np.asarray(phi, dtype=float)
        right = x / (2.0 * self.lambda1) * np.exp(-np.maximum(phi, 0.0) * x / self.lambda1)
        left = x / (2.0 * self.lambda2) * np.exp(np.minimum(phi, 0.0) * x / self.lambda2)
        return np.where(phi >= 0.0, right, left)

    def cdf(self, x, phi):
        x = np.asarray(x, dtype=float)
        phi = np.asarray(phi, dtype=float)
        right = 1.0 - 0.5 * np.exp(-np.maximum(phi, 0.0) * x / self.lambda1)
        left = 0.5 * np.exp(np.minimum(phi, 0.0) * x / self.lambda2)
        return np.where(phi >= 0.0, right, left)

    def window(self, x):
        x = np.asarray(x, dtype=float)
        return -_EXP_WINDOW_RATES * self.lambda2 / x, _EXP_WINDOW_RATES * self.lambda1 / x

    def breakpoints(self, x):
        return np.zeros((np.size(x), 1))

    def _joint_from_uniforms(self, u):
        x = self.observation_law.sample(u[:, 0])
        v = u[:, 1]
        theta = np.where(
            v < 0.5,
            self.lambda2 / x * np.log(2.0 * np.minimum(v, 0.5)),
            -self.lambda1 / x * np.log(2.0 * (1.0 - np.maximum(v, 0.5))),
        )
        return x, theta

    def _expect(self, func):
        law = self.observation_law
        return math.fsum(p * float(func(x)) for x, p in zip(law.values, law.probs))

    def posterior_mean(self, x):
        return (self.lambda1 - self.lambda2) / (2.0 * np.asarray(x, dtype=float))

    def posterior_mode(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def c_x(self, x, h):
        """Unclipped left window edge offset of the optimal interval."""
        l1, l2 = self.lambda1, self.lambda2
        x = np.asarray(x, dtype=float)
        return (math.log(l2 / l1) + x * h / l2) * l1 * l2 / (x * (l1 + l2))

    def d_x(self, x, h):
        """Optimal interval's right edge: c_x(h) clipped to [0, h]."""
        return np.clip(self.c_x(x, h), 0.0, h)

    def h_map_closed(self, x, h):
        h = check_h(h)
        return self.d_x(x, h) - h / 2.0

    def min_outage(self, h):
        h = check_h(h, allow_zero=True)
        if h == 0.0:
            return 1.0
        l1, l2 = self.lambda1, self.lambda2

        def term(x):
            d = float(self.d_x(x, h))
            return 0.5 * (math.exp((d - h) * x / l2) + math.exp(-d * x / l1))

        return self._expect(term)

    def map_outage(self, h):
        """Outage of the MAP estimator (theta_hat = 0)."""
        l1, l2 = self.lambda1, self.lambda2
        return self._expect(
            lambda x: 0.5 * (math.exp(-h * x / (2 * l1)) + math.exp(-h * x / (2 * l2)))
        )

    def mmse_outage(self, h):
        """Outage of the MMSE estimator from the posterior cdf.

        The printed table form drops the factor x from the exponents and has
        the wrong sign on its first term; this is the direct evaluation of
        Pr(|theta_hat - theta| > h/2 | x) with theta_hat the posterior mean.
        """

        def term(x):
            a = float(self.posterior_mean(x))
            hi = float(self.cdf(x, a + h / 2.0))
            lo = float(self.cdf(x, a - h / 2.0))
            return 1.0 - (hi - lo)

        return self._expect(term)

    def h_map_outage(self, h, h_design):
        """Outage at threshold h of the h-MAP estimator designed for h_design."""

        def term(x):
            t = float(self.h_map_closed(x, h_design))
            return 1.0 - float(self.cdf(x, t + h / 2.0) - self.cdf(x, t - h / 2.0))

        return self._expect(term)


# ---------------------------------------------------------------------------
# uniform prior on two intervals, Gaussian noise


class UniformIntervalsGaussian(PosteriorModel):
    """theta uniform on [-6, -3] U [3, 6], x = theta + N(0, var_noise)."""

    bounded = True
    support = ((-6.0, -3.0), (3.0, 6.0))

    def __init__(self, var_noise=100.0):
        self.var_noise = check_positive("var_noise", var_noise)
        self.sd = math.sqrt(self.var_noise)
        self.s = math.sqrt(2.0 * self.var_noise)
        half = 6.0 + _GAUSS_WINDOW_SDS * self.sd
        self.observation_law = ContinuousDensity(
            pdf=lambda x: self.c(x) / 12.0,
            window=(-half, half),
            sampler=lambda u: self._joint_from_uniforms(u)[0],
        )

    def __repr__(self):
        return f"UniformIntervalsGaussian(var_noise={self.var_noise!r})"

    def c(self, x):
        """Normalizer: twice the Gaussian mass of the prior support around x."""
        x = np.asarray(x, dtype=float)
        return 2.0 * (
            _interval_mass(-6.0, -3.0, x, self.sd) + _interval_mass(3.0, 6.0, x, self.sd)
        )

    def c_erf(self, x):
        """The normalizer written as the erf combination (unstable for large |x|)."""
        x = np.asarray(x, dtype=float)
        s = self.s
        return (
            special.erf((x + 6) / s)
            - special.erf((x - 6) / s)
            + special.erf((x - 3) / s)
            - special.erf((x + 3) / s)
        )

    def _in_support(self, phi):
        a = np.abs(phi)
        return (a >= 3.0) & (a <= 6.0)

    def pdf(self, x, phi):
        x = np.asarray(x, dtype=float)
        phi = np.asarray(phi, dtype=float)
        dens = 2.0 * _normal_pdf((phi - x) / self.sd) / (self.sd * self.c(x))
        return np.where(self._in_support(phi), dens, 0.0)

    def cdf(self, x, phi):
        x = np.asarray(x, dtype=float)
        phi = np.asarray(phi, dtype=float)
        # use upper Gaussian tails when the support lies mostly above x, lower
        # tails otherwise; the orientation sign cancels in the ratio
        s = np.where(x <= 0.0, -1.0, 1.0)

        def tail(t):
            return special.ndtr(s * (t - x) / self.sd)

        t1, t2, t3, t4 = tail(-6.0), tail(-3.0), tail(3.0), tail(6.0)
        num = tail(np.clip(phi, -6.0, -3.0)) - t1 + tail(np.clip(phi, 3.0, 6.0)) - t3
        return np.clip(num / (t2 - t1 + t4 - t3), 0.0, 1.0)

    def window(self, x):
        shape = np.shape(x)
        return np.full(shape, -6.0), np.full(shape, 6.0)

    def breakpoints(self, x):
        return np.tile(np.array([-6.0, -3.0, 3.0, 6.0]), (np.size(x), 1))

    def reference_observation(self):
        return 0.0

    def _joint_from_uniforms(self, u):
        v = u[:, 0]
        theta = np.where(v < 0.5, -6.0 + 6.0 * v, 3.0 + 6.0 * (v - 0.5))
        x = theta + self.sd * special.ndtri(u[:, 1])
        return x, theta

    def posterior_mean(self, x):
        x = np.asarray(x, dtype=float)
        v2 = 2.0 * self.var_noise
        bracket = (
            np.exp(-((x + 6) ** 2) / v2)
            - np.exp(-((x + 3) ** 2) / v2)
            - np.exp(-((x - 6) ** 2) / v2)
            + np.exp(-((x - 3) ** 2) / v2)
        )
        return x + math.sqrt(v2 / math.pi) * bracket / self.c(x)

    def posterior_mode(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        sgn = np.where(x >= 0, 1.0, -1.0)
        return np.where(a > 6.0, 6.0 * sgn, np.where(a < 3.0, 3.0 * sgn, x))

    def _erf(self, z):
        return special.erf(z / self.s)

    def b(self, h):
        return 6.0 - h - (6.0 - 2.0 * h) * self._erf(h / 2.0)

    def g(self, h):
        """Root of 2 erf(h/(2s)) = erf((g+3)/s) - erf((g-6)/s) with g >= 1.5.

        The right side is symmetric about 1.5, so the equation also has the
        mirror root 3 - g. The root is continuous with g(9) = 1.5.
        """
        h = check_h(h)
        target = 2.0 * self._erf(h / 2.0)

        def resid(t):
            return self._erf(t + 3.0) - self._erf(t - 6.0) - target

        lo, hi = 1.5, 1.5 + 20.0 * self.s
        if resid(lo) < 0.0 or resid(hi) > 0.0:
            raise ValueError(f"g(h) has no root above 1.5 for h={h!r}")
        # bisection to 1e-12
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if resid(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def min_outage(self, h):
        h = check_h(h, allow_zero=True)
        if h == 0.0:
            return 1.0
        erf = self._erf
        k = math.sqrt(2.0 * self.var_noise / math.pi)
        v2 = 2.0 * self.var_noise
        if h < 3.0:
            val = (
                self.b(h)
                - (3.0 + h) * erf(3.0 + h)
                + 3.0 * erf(3.0)
                + k * (math.exp(-9.0 / v2) - math.exp(-((3.0 + h) ** 2) / v2))
            )
            return float(val / 6.0)
        if h < 6.0:
            val = 3.0 - 6.0 * erf(6.0) + 3.0 * erf(3.0) + k * (
                math.exp(-9.0 / v2) - math.exp(-36.0 / v2)
            )
            return float(val / 6.0)
        if h < 9.0:
            raise CapabilityError(
                "no reliable closed form for 6 <= h < 9; use the numeric h-MAP minimum"
            )
        if h < 12.0:
            return float((12.0 - h) / 6.0 * (1.0 - erf(h / 2.0)))
        return 0.0

    def min_outage_printed(self, h):
        """The printed 6 <= h < 9 piece of the minimum outage, kept for comparison.

        It is not a minimum: with the g >= 1.5 root it exceeds the 3 <= h < 6
        value although the minimum cannot grow with h, and with the mirror
        root 3 - g it falls below the tightest lower bound.
        """
        h = check_h(h)
        if not 6.0 <= h < 9.0:
            return self.min_outage(h)
        erf = self._erf
        k = math.sqrt(2.0 * self.var_noise / math.pi)
        v2 = 2.0 * self.var_noise
        g = self.g(h)
        val = 3.0 + 3.0 * erf(g + 3.0) - 6.0 * erf(6.0 - g) + k * (
            math.exp(-((g + 3.0) ** 2) / v2) - math.exp(-((6.0 - g) ** 2) / v2)
        )
        return float(val / 6.0)

    def tightest_closed(self, h):
        """Piecewise valley-filled tightest outage bound.

        The first branch is exact when h divides 6.
        """
        h = check_h(h, allow_zero=True)
        erf = self._erf
        if h < 3.0:
            return float((self.b(h) - h * erf(h / 2.0 + 3.0)) / 6.0)
        if h < 9.0:
            return float(0.5 * (1.0 - erf(4.5)))
        if h < 12.0:
            return float((12.0 - h) / 6.0 * (1.0 - erf(h / 2.0)))
        return 0.0

    def zzlb_closed(self, h):
        """Piecewise valley-filled ZZLB outage curve."""
        h = check_h(h, allow_zero=True)
        erf = self._erf
        if h < 3.0:
            return float(max(self.b(h) - h, 3.0 - 3.0 * erf(4.5)) / 6.0)
        if h < 9.0:
            return float(0.5 * (1.0 - erf(4.5)))
        if h < 12.0:
            return float((12.0 - h) / 6.0 * (1.0 - erf(h / 2.0)))
        return 0.0

    def h_map_printed(self, x, h):
        """The piecewise h-MAP rule as printed, kept for comparison only.

        Its ``g(h) < |x| < 1.5`` branch is dimensionally doubtful; the numeric
        maximizer is authoritative.
        """
        h = check_h(h)
        a = abs(float(x))
        sgn = 1.0 if x >= 0 else -1.0
        if h >= 12.0:
            return 0.0
        if a > 6.0 - h / 2.0:
            return (6.0 - h / 2.0) * sgn
        if 6.0 < h <= 9.0:
            try:
                g = self.g(h)
            except ValueError:
                g = None
            if g is not None and g < a < 1.5:
                return (6.0 - h / 2.0) * sgn
        if a < 3.0 + h / 2.0 and h <= 6.0:
            return (3.0 + h / 2.0) * sgn
        return float(x)


# ---------------------------------------------------------------------------
# Gaussian-mixture posteriors for randomized checks


class GaussianMixturePosterior(PosteriorModel):
    """Posterior given by a per-atom Gaussian mixture.

    ``weights``, ``means`` and ``sds`` have one row per observation atom and
    one column per mixture component.
    """

    def __init__(self, atoms, probs, weights, means, sds):
        self.observation_law = DiscreteAtoms(tuple(atoms), tuple(probs))
        self.weights = np.atleast_2d(np.asarray(weights, dtype=float))
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.sds = np.atleast_2d(np.asarray(sds, dtype=float))
        n = len(self.observation_law.values)
        for name, arr in (("weights", self.weights), ("means", self.means), ("sds", self.sds)):
            if arr.shape[0] != n or arr.shape != self.weights.shape:
                raise ValueError(f"{name} must have one row per atom and equal shapes")
        if np.any(self.weights <= 0) or np.any(np.abs(self.weights.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("mixture weights must be positive and sum to 1 per atom")
        if np.any(self.sds <= 0) or not np.all(np.isfinite(self.means)):
            raise ValueError("mixture sds must be positive and means finite")
        self._atoms = np.asarray(self.observation_law.values)
        self._order = np.argsort(self._atoms)

    @classmethod
    def random(cls, seed, n_atoms=2, n_components=2):
        """Draw a random two-component mixture model from ``seed``."""
        gen = np.random.default_rng(seed)
        atoms = np.sort(gen.uniform(-2.0, 2.0, n_atoms))
        probs = gen.dirichlet(np.ones(n_atoms))
        probs[-1] = 1.0 - probs[:-1].sum()
        weights = gen.dirichlet(np.ones(n_components), size=n_atoms)
        weights[:, -1] = 1.0 - weights[:, :-1].sum(axis=1)
        means = gen.uniform(-4.0, 4.0, (n_atoms, n_components))
        sds = gen.uniform(0.3, 2.0, (n_atoms, n_components))
        return cls(atoms, probs, weights, means, sds)

    def __repr__(self):
        return f"GaussianMixturePosterior(atoms={self.observation_law.values!r})"

    def _index(self, x):
        x = np.asarray(x, dtype=float)
        sorted_atoms = self._atoms[self._order]
        pos = np.clip(np.searchsorted(sorted_atoms, x), 0, len(sorted_atoms) - 1)
        if not np.all(sorted_atoms[pos] == x):
            raise ValueError("observation is not an atom of the observation law")
        return self._order[pos]

    def pdf(self, x, phi):
        x, phi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(phi, dtype=float))
        idx = self._index(x)
        out = np.zeros(phi.shape)
        for k in range(self.weights.shape[1]):
            w, m, s = self.weights[idx, k], self.means[idx, k], self.sds[idx, k]
            out += w * _normal_pdf((phi - m) / s) / s
        return out

    def cdf(self, x, phi):
        x, phi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(phi, dtype=float))
        idx = self._index(x)
        out = np.zeros(phi.shape)
        for k in range(self.weights.shape[1]):
            w, m, s = self.weights[idx, k], self.means[idx, k], self.sds[idx, k]
            out += w * special.ndtr((phi - m) / s)
        return out

    def window(self, x):
        idx = self._index(x)
        lo = np.min(self.means[idx] - _GAUSS_WINDOW_SDS * self.sds[idx], axis=-1)
        hi = np.max(self.means[idx] + _GAUSS_WINDOW_SDS * self.sds[idx], axis=-1)
        return lo, hi

    def posterior_mean(self, x):
        idx = self._index(x)
        return np.sum(self.weights[idx] * self.means[idx], axis=-1)

    def _joint_from_uniforms(self, u):
        x = self.observation_law.sample(u[:, 0])
        idx = self._index(x)
        cum = np.cumsum(self.weights[idx], axis=1)
        comp = np.minimum((u[:, [1]] > cum).sum(axis=1), self.weights.shape[1] - 1)
        theta = self.means[idx, comp] + self.sds[idx, comp] * special.ndtri(u[:, 2])
        return x, theta


# ---------------------------------------------------------------------------
# user-defined models


class CallableModel(PosteriorModel):
    """Posterior model assembled from user callables.

    ``pdf(x, phi)`` and the optional ``cdf(x, phi)`` must broadcast. ``window``
    is either a fixed ``(lo, hi)`` pair or a callable of x. ``sampler`` maps a
    ``(n, 4)`` block of uniforms to ``(x, theta)`` arrays.
    """

    def __init__(
        self,
        pdf,
        window,
        observation_law,
        cdf=None,
        breakpoints=(),
        sampler=None,
        support=None,
        bounded=False,
    ):
        self._pdf = pdf
        self._cdf = cdf
        self._window = window
        self._breakpoints = np.asarray(breakpoints, dtype=float).reshape(-1)
        self._sampler = sampler
        self.observation_law = observation_law
        self.bounded = bool(bounded)
        if support is not None:
            self.support = tuple((float(a), float(b)) for a, b in support)
        if cdf is not None:
            self.cdf = lambda x, phi: np.asarray(self._cdf(x, phi), dtype=float)

    @property
    def has_cdf(self):
        return self._cdf is not None

    def pdf(self, x, phi):
        return np.asarray(self._pdf(x, phi), dtype=float)

    def window(self, x):
        if callable(self._window):
            lo, hi = self._window(x)
        else:
            lo, hi = self._window
        shape = np.shape(x)
        return np.broadcast_to(lo, shape).astype(float), np.broadcast_to(hi, shape).astype(float)

    def breakpoints(self, x):
        return np.tile(self._breakpoints, (np.size(x), 1))

    def _joint_from_uniforms(self, u):
        if self._sampler is None:
            raise CapabilityError("CallableModel was built without a sampler")
        x, theta = self._sampler(u)
        return np.asarray(x, dtype=float), np.asarray(theta, dtype=float)


def observations_of(model, x):
    """Validate observations as a flat float array."""
    return as_1d(x, "x")
