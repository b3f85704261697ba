"""Lower bounds on the h-outage error probability Pr(|theta_hat - theta| > h/2).

Every bound is one minus an expectation over x of a period integral of the
posterior lattice f(phi + l h | x), l in Z:

* general class: a user-chosen positive Fourier series g_h(x, phi) weights
  the lattice sum of f^(p/(p-1)) (Hoelder's inequality),
* single coefficient: the best constant g,
* tightest subclass at p: the optimal series, giving the l_q norm of the
  lattice with q = p/(p-1),
* tightest bound: the p -> 1+ limit, giving the lattice maximum,
* ZZLB outage curve: the sum of pairwise minima of neighbouring terms.

Values are clamped to [0, 1] after the expectation.
"""

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, Optional

import numpy as np

from . import quadrature as quad
from ._validation import CapabilityError, check_h, check_p

P_ONE_PLUS = "1+"


class BoundKind(str, enum.Enum):
    GENERAL = "general"
    SINGLE_COEFF = "single_coeff"
    TIGHTEST_P = "tightest_p"
    TIGHTEST = "tightest"
    ZZLB_OUTAGE = "zzlb_outage"
    MIN_OUTAGE_ORACLE = "min_outage_oracle"
    EMPIRICAL = "empirical"


class BoundUndefinedError(ArithmeticError):
    """The bound's inner integral diverges or cannot be evaluated."""


class CoefficientValidationError(ValueError):
    """A Fourier coefficient set fails the positivity or symmetry checks."""


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class BoundCurve:
    """Bound values sampled on an ascending grid of thresholds h."""

    h_grid: np.ndarray
    values: np.ndarray
    kind: BoundKind
    p: Optional[float] = None
    valley_filled: bool = False
    mc_stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        h = np.asarray(self.h_grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if h.ndim != 1 or h.shape != v.shape or len(h) == 0:
            raise ValueError("h_grid and values must be non-empty 1-D arrays of equal length")
        if np.any(h < 0) or np.any(np.diff(h) <= 0):
            raise ValueError("h_grid must be non-negative and strictly ascending")
        if np.any(v < 0) or np.any(v > 1):
            raise ValueError("bound values must lie in [0, 1]")
        object.__setattr__(self, "h_grid", h)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "kind", BoundKind(self.kind))
        if self.mc_stderr is not None:
            err = np.asarray(self.mc_stderr, dtype=float)
            if err.shape != v.shape or np.any(err < 0):
                raise ValueError("mc_stderr must be non-negative and match values")
            object.__setattr__(self, "mc_stderr", err)
        if self.valley_filled and np.any(np.diff(v) > 0):
            raise ValueError("a valley-filled curve must be non-increasing")

    def __len__(self):
        return len(self.h_grid)


@dataclass(frozen=True)
class FourierCoefficientSet:
    """Coefficients a_k(x, h) of the positive periodic weight g_h(x, phi).

    ``coefficients`` maps k in [-K, K] to callables of ``(x, h)`` returning
    (complex) arrays shaped like ``x``. Missing negative indices are filled
    in as conjugates of the positive ones; a_0 is required.
    """

    coefficients: Dict[int, Callable]
    validation_points: int = 1024

    def __post_init__(self):
        coeffs = {int(k): f for k, f in dict(self.coefficients).items()}
        if 0 not in coeffs:
            raise CoefficientValidationError("a_0 is required")
        for k in [k for k in coeffs if k > 0]:
            if -k not in coeffs:
                f = coeffs[k]
                coeffs[-k] = lambda x, h, f=f: np.conj(f(x, h))
        for k in [k for k in coeffs if k < 0]:
            if -k not in coeffs:
                f = coeffs[k]
                coeffs[-k] = lambda x, h, f=f: np.conj(f(x, h))
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self):
        return max(abs(k) for k in self.coefficients)

    def a0(self, x, h):
        return np.real(np.asarray(self.coefficients[0](x, h), dtype=complex))

    def weight(self, x, phi, h):
        """g_h(x, phi) = sum_k a_k(x, h) exp(i 2 pi k phi / h), real part."""
        x = np.asarray(x, dtype=float)
        phi = np.asarray(phi, dtype=float)
        total = np.zeros(np.broadcast(x, phi).shape, dtype=complex)
        for k, f in self.coefficients.items():
            total = total + np.asarray(f(x, h), dtype=complex) * np.exp(2j * math.pi * k * phi / h)
        return total.real

    def validate(self, x, h):
        """Check conjugate symmetry, a_0 > 0 and g > 0 on a grid over [0, h]."""
        x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
        for k in self.coefficients:
            if k > 0:
                ak = np.asarray(self.coefficients[k](x, h), dtype=complex)
                amk = np.asarray(self.coefficients[-k](x, h), dtype=complex)
                if not np.allclose(amk, np.conj(ak), rtol=1e-12, atol=1e-15):
                    raise CoefficientValidationError(f"a_{-k} is not the conjugate of a_{k}")
        if np.any(self.a0(x, h) <= 0):
            raise CoefficientValidationError("a_0(x, h) must be positive")
        grid = np.linspace(0.0, h, self.validation_points, endpoint=False)
        g = self.weight(x[:, None], grid[None, :], h)
        if not np.all(g > 0):
            raise CoefficientValidationError("g_h(x, phi) is not positive on the validation grid")


# ---------------------------------------------------------------------------
# bounds at a single h


def _clamp(value):
    return float(min(1.0, max(0.0, value)))


def _tightest(model, h, cfg, mc):
    if h == 0.0:
        return 1.0, 0.0
    val, err = quad.expect_shift_invariant(
        model, lambda xs: quad.period_max_integral(model, xs, h, cfg), cfg, mc
    )
    return _clamp(1.0 - val), err


def _tightest_p(model, h, p, cfg, mc):
    p = check_p(p)
    if h == 0.0:
        return 1.0, 0.0
    q = p / (p - 1.0)
    val, err = quad.expect_shift_invariant(
        model, lambda xs: quad.period_norm_integral(model, xs, h, q, cfg), cfg, mc
    )
    return _clamp(1.0 - val), err


def _zzlb(model, h, cfg, mc):
    if h == 0.0:
        return 1.0, 0.0
    val, err = quad.expect_shift_invariant(
        model, lambda xs: quad.period_min_pair_integral(model, xs, h, cfg), cfg, mc
    )
    return _clamp(val), err


def tightest_bound(model, h, cfg=None, mc=None):
    """1 - E[integral over [0, h] of max_l f(phi + l h | x)]."""
    return _tightest(model, check_h(h, allow_zero=True), cfg, mc)[0]


def tightest_subclass_bound(model, h, p, cfg=None, mc=None):
    """1 - E[integral over [0, h] of (sum_l f^q(phi + l h | x))^(1/q)], q = p/(p-1)."""
    return _tightest_p(model, check_h(h, allow_zero=True), p, cfg, mc)[0]


def zzlb_outage(model, h, cfg=None, mc=None):
    """Raw ZZLB outage curve E[integral over [0, h] of sum_l min(f_l, f_{l+1})]."""
    return _zzlb(model, check_h(h, allow_zero=True), cfg, mc)[0]


def _power_integral(model, x, q, cfg):
    """Integral over the real line of f(phi | x)^q."""
    lo, hi = model.window(np.asarray([x], dtype=float))
    bps = model.breakpoints(np.asarray([x], dtype=float))[0]
    try:
        val = quad.integrate(lambda t: model.pdf(x, t) ** q, lo[0], hi[0], cfg, bps)
    except quad.QuadratureError as exc:
        raise BoundUndefinedError(f"integral of f^{q:g} did not converge") from exc
    if not math.isfinite(val):
        raise BoundUndefinedError(f"integral of f^{q:g} is not finite")
    return val


def single_coeff_constant(model, p, cfg=None, mc=None):
    """A_p = E[(integral of f^(p/(p-1)))^((p-1)/p)], returned as ``(value, stderr)``."""
    p = check_p(p)
    q = p / (p - 1.0)

    def inner(xs):
        return np.array([_power_integral(model, x, q, cfg) ** (1.0 / q) for x in xs])

    return quad.expect_shift_invariant(model, inner, cfg, mc)


def single_coeff_bound(model, h, p, cfg=None, mc=None):
    """max{0, 1 - h^(1/p) A_p}."""
    h = check_h(h, allow_zero=True)
    p = check_p(p)
    a_p, _ = single_coeff_constant(model, p, cfg, mc)
    return _clamp(1.0 - h ** (1.0 / p) * a_p)


def general_class_bound(model, coeffs, h, p, cfg=None, mc=None):
    """Bound from a positive periodic weight given by Fourier coefficients.

    1 - h^(1/p) E[a_0]^(1/p) E[integral of g^(1/(1-p)) f^(p/(p-1))]^((p-1)/p).
    """
    h = check_h(h)
    p = check_p(p)
    q = p / (p - 1.0)

    def a0(xs):
        coeffs.validate(xs, h)
        return coeffs.a0(xs, h)

    def inner(xs):
        coeffs.validate(xs, h)

        def integrand(vals, x, phi):
            weight = coeffs.weight(x, phi, h) ** (1.0 / (1.0 - p))
            return weight * quad._norm_from_values(vals, q) ** q

        return quad.period_lattice_integral(model, xs, h, integrand, cfg, split_at_switches=False)

    e_a0, _ = quad.expect_over_x(model, a0, cfg, mc)
    e_inner, _ = quad.expect_over_x(model, inner, cfg, mc)
    if not (math.isfinite(e_inner) and e_inner >= 0):
        raise BoundUndefinedError("the weighted lattice integral is not finite")
    return _clamp(1.0 - h ** (1.0 / p) * e_a0 ** (1.0 / p) * e_inner ** ((p - 1.0) / p))


def min_outage_oracle(model, h, cfg=None):
    """Minimum h-outage probability of a built-in example.

    Closed forms are used where the model has one. Where the model declines
    (the 6 <= h < 9 range of the two-interval example) the minimum is
    computed by integrating the numeric h-MAP window mass over x.
    """
    h = check_h(h, allow_zero=True)
    if not hasattr(model, "min_outage"):
        raise CapabilityError(f"{type(model).__name__} has no minimum-outage oracle")
    try:
        return float(model.min_outage(h))
    except CapabilityError:
        if not hasattr(model, "min_outage_printed"):
            raise
    from .estimators import min_outage_numeric

    return min_outage_numeric(model, h, cfg)


# ---------------------------------------------------------------------------
# curves


def valley_fill(curve):
    """Suffix maximum of the curve, treating values beyond the grid as 0."""
    filled = np.maximum.accumulate(curve.values[::-1])[::-1]
    return replace(curve, values=filled, valley_filled=True)


def bound_value(model, kind, h, p=None, cfg=None, mc=None, coeffs=None):
    """Evaluate one bound kind at one h as ``(value, stderr)``."""
    kind = BoundKind(kind)
    h = check_h(h, allow_zero=True)
    if kind is BoundKind.TIGHTEST or (kind is BoundKind.TIGHTEST_P and p == P_ONE_PLUS):
        return _tightest(model, h, cfg, mc)
    if kind is BoundKind.TIGHTEST_P:
        return _tightest_p(model, h, p, cfg, mc)
    if kind is BoundKind.ZZLB_OUTAGE:
        return _zzlb(model, h, cfg, mc)
    if kind is BoundKind.SINGLE_COEFF:
        return single_coeff_bound(model, h, p, cfg, mc), 0.0
    if kind is BoundKind.MIN_OUTAGE_ORACLE:
        return min_outage_oracle(model, h, cfg), 0.0
    if kind is BoundKind.GENERAL:
        if coeffs is None:
            raise ValueError("the general bound needs a FourierCoefficientSet")
        if h == 0.0:
            return 1.0, 0.0
        return general_class_bound(model, coeffs, h, p, cfg, mc), 0.0
    raise ValueError(f"{kind.value} is not a computable bound kind")


def outage_curve(
    model, kind, h_grid, p=None, cfg=None, mc=None, valley=False, coeffs=None, threads=1
):
    """Evaluate a bound on a grid of h values, optionally valley-filled."""
    kind = BoundKind(kind)
    h_grid = np.asarray(h_grid, dtype=float)
    if kind is BoundKind.SINGLE_COEFF:
        # A_p does not depend on h
        p = check_p(p)
        a_p, _ = single_coeff_constant(model, p, cfg, mc)
        results = [(_clamp(1.0 - h ** (1.0 / p) * a_p), 0.0) for h in h_grid]
    else:

        def one(h):
            return bound_value(model, kind, h, p, cfg, mc, coeffs)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=int(threads)) as pool:
                results = list(pool.map(one, h_grid))
        else:
            results = [one(h) for h in h_grid]
    values = np.array([r[0] for r in results])
    stderr = np.array([r[1] for r in results]) if mc is not None else None
    if kind is BoundKind.TIGHTEST or p == P_ONE_PLUS:
        kind, p = BoundKind.TIGHTEST, None
    curve = BoundCurve(h_grid, values, kind, p=p, mc_stderr=stderr)
    return valley_fill(curve) if valley else curve
