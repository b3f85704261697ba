"""Distortion, moment and MSE bounds obtained by integrating outage bounds over h.

For a non-decreasing distortion D with derivative D', any outage bound B(h)
gives E[D(|e|)] >= D(0) + 1/2 int_0^inf D'(h/2) B(h) dh. Every bound here
integrates a valley-filled outage curve with the trapezoid rule on a shared
h grid, so the squared-error distortion, the second moment and C_p all go
through the same arithmetic.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import outage as ob
from . import quadrature as quad
from ._validation import check_p

_PROBE_START = 1.0
_PROBE_MIN = 1e-9


class TruncationError(ArithmeticError):
    """The h-integral could not be truncated with a negligible tail."""

    def __init__(self, message, value, tail_estimate, h_max):
        super().__init__(message)
        self.value = value
        self.tail_estimate = tail_estimate
        self.h_max = h_max


@dataclass(frozen=True)
class DistortionSpec:
    """Distortion measure given by its derivative D'(t) for t >= 0."""

    derivative: Callable[[np.ndarray], np.ndarray]
    description: str = "custom"

    @classmethod
    def squared(cls):
        return cls(lambda t: 2.0 * t, "squared")

    @classmethod
    def absolute(cls):
        return cls(lambda t: np.ones_like(t), "absolute")

    @classmethod
    def power(cls, n):
        n = int(n)
        if n < 1:
            raise ValueError("power distortion needs n >= 1")
        return cls(lambda t: n * t ** (n - 1), f"power({n})")

    @classmethod
    def zero(cls):
        return cls(lambda t: np.zeros_like(t), "zero")

    def weights(self, t):
        t = np.asarray(t, dtype=float)
        d = np.asarray(self.derivative(t), dtype=float) * np.ones_like(t)
        if np.any(~np.isfinite(d)) or np.any(d[t > 0] < 0):
            raise ValueError(f"distortion {self.description!r} has a negative or non-finite derivative")
        return d


@dataclass(frozen=True)
class HIntegrationConfig:
    """Truncation and sampling of the h-integral.

    With ``H_max`` unset the range doubles until the outage bound stays below
    ``tail_threshold`` on the last ``tail_run`` grid points of both the range
    and its double, up to ``h_cap``.
    """

    H_max: Optional[float] = None
    h_points: int = 400
    tail_threshold: float = 1e-10
    tail_run: int = 10
    h_cap: float = 1e6

    def __post_init__(self):
        if self.H_max is not None and not self.H_max > 0:
            raise ValueError("H_max must be positive")
        if self.h_points < 2:
            raise ValueError("h_points must be >= 2")
        if not 1 <= self.tail_run < self.h_points:
            raise ValueError("tail_run must be in [1, h_points)")
        if not self.tail_threshold > 0 or not self.h_cap > 0:
            raise ValueError("tail_threshold and h_cap must be positive")


DEFAULT_HCONFIG = HIntegrationConfig()


@dataclass(frozen=True)
class MSEBound:
    """A bound value together with the outage curve it was integrated from."""

    value: float
    curve: ob.BoundCurve = field(repr=False)
    mc_stderr: Optional[float] = None

    @property
    def h_max(self):
        return float(self.curve.h_grid[-1])


def _grid(h_max, hcfg):
    return np.linspace(0.0, h_max, hcfg.h_points)


def choose_h_max(model, kind, p=None, cfg=None, mc=None, hcfg=None):
    """Smallest doubling of the probe range whose tail bound is negligible.

    Raw bounds can vanish on an interior valley and rise again, so a range is
    accepted only when the tail of the doubled range is negligible as well.
    """
    hcfg = hcfg or DEFAULT_HCONFIG
    if hcfg.H_max is not None:
        return float(hcfg.H_max)

    def tail_max(h_max):
        tail = _grid(h_max, hcfg)[-hcfg.tail_run :]
        return max(ob.bound_value(model, kind, h, p, cfg, mc)[0] for h in tail)

    h_max = _PROBE_START
    current = tail_max(h_max)
    while True:
        if h_max * 2.0 > hcfg.h_cap:
            raise TruncationError(
                f"outage bound still {current:.3g} near h={h_max:.6g}; raise h_cap",
                value=float("nan"),
                tail_estimate=float(current),
                h_max=h_max,
            )
        doubled = tail_max(2.0 * h_max)
        if current < hcfg.tail_threshold and doubled < hcfg.tail_threshold:
            break
        h_max, current = 2.0 * h_max, doubled
    if h_max == _PROBE_START:
        # narrow posteriors: shrink so the grid still resolves the bound
        while h_max > _PROBE_MIN and tail_max(h_max / 2.0) < hcfg.tail_threshold:
            h_max /= 2.0
    return h_max


def bound_curve(model, kind, p=None, cfg=None, mc=None, hcfg=None, threads=1):
    """Valley-filled outage curve on the shared h grid."""
    hcfg = hcfg or DEFAULT_HCONFIG
    h_max = choose_h_max(model, kind, p, cfg, mc, hcfg)
    return ob.outage_curve(
        model, kind, _grid(h_max, hcfg), p=p, cfg=cfg, mc=mc, valley=True, threads=threads
    )


def _kind_for(p):
    if p is None or p == ob.P_ONE_PLUS:
        return ob.BoundKind.TIGHTEST, None
    return ob.BoundKind.TIGHTEST_P, check_p(p)


def integrate_curve(curve, weight, hcfg=None):
    """Trapezoid value of int weight(h) B(h) dh on the curve's grid.

    Raises TruncationError when the last grid value of B is not negligible.
    """
    hcfg = hcfg or DEFAULT_HCONFIG
    h = curve.h_grid
    integrand = weight(h) * curve.values
    value = float(np.trapezoid(integrand, h))
    if curve.values[-1] >= hcfg.tail_threshold:
        # the bound is non-increasing, so a rectangle of the last integrand
        # over another H_max is a rough size for what was cut off
        tail = float(integrand[-1] * h[-1])
        raise TruncationError(
            f"outage bound is {curve.values[-1]:.3g} at H_max={h[-1]:.6g}",
            value=value,
            tail_estimate=tail,
            h_max=float(h[-1]),
        )
    stderr = None
    if curve.mc_stderr is not None:
        # errors at different h share the same x samples, so add them linearly
        stderr = float(np.trapezoid(weight(h) * curve.mc_stderr, h))
    return value, stderr


def _distortion_weight(dist):
    return lambda h: 0.5 * dist.weights(h / 2.0)


def _moment_weight(n):
    return lambda h: (n / 2.0**n) * h ** (n - 1)


def _result(curve, weight, hcfg):
    value, stderr = integrate_curve(curve, weight, hcfg)
    return MSEBound(value, curve, stderr)


def distortion_bound(model, dist, p=None, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    """1/2 int D'(h/2) B(h) dh for the tightest (p=None or '1+') or order-p bound."""
    kind, p = _kind_for(p)
    if curve is None:
        curve = bound_curve(model, kind, p, cfg, mc, hcfg, threads)
    return _result(curve, _distortion_weight(dist), hcfg).value


def moment_bound(model, n, p=None, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    """Lower bound on E|e|^n: n/2^n int B(h) h^(n-1) dh."""
    n = int(n)
    if n < 1:
        raise ValueError("moment order must be >= 1")
    kind, p = _kind_for(p)
    if curve is None:
        curve = bound_curve(model, kind, p, cfg, mc, hcfg, threads)
    return _result(curve, _moment_weight(n), hcfg).value


def mse_bound_cp_result(model, p, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    kind, p = _kind_for(p)
    if curve is None:
        curve = bound_curve(model, kind, p, cfg, mc, hcfg, threads)
    return _result(curve, _moment_weight(2), hcfg)


def mse_bound_cp(model, p, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    """C_p = 1/2 int B_p(h) h dh with the valley-filled order-p bound."""
    return mse_bound_cp_result(model, p, cfg, hcfg, mc, curve, threads).value


def mse_bound_tightest_result(model, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    return mse_bound_cp_result(model, ob.P_ONE_PLUS, cfg, hcfg, mc, curve, threads)


def mse_bound_tightest(model, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    """1/2 int B(h) h dh with the valley-filled tightest outage bound."""
    return mse_bound_tightest_result(model, cfg, hcfg, mc, curve, threads).value


def zzlb_mse_result(model, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    if curve is None:
        curve = bound_curve(model, ob.BoundKind.ZZLB_OUTAGE, None, cfg, mc, hcfg, threads)
    return _result(curve, _moment_weight(2), hcfg)


def zzlb_mse(model, cfg=None, hcfg=None, mc=None, curve=None, threads=1):
    """Ziv-Zakai MSE bound: 1/2 int V[I_ZZLB](h) h dh."""
    return zzlb_mse_result(model, cfg, hcfg, mc, curve, threads).value


def single_coeff_mse_closed(a_p, p):
    """1 / (4 (2p+1) A_p^(2p))."""
    p = check_p(p)
    if not (a_p > 0 and math.isfinite(a_p)):
        raise ArithmeticError(f"A_p must be finite and positive, got {a_p!r}")
    return 1.0 / (4.0 * (2.0 * p + 1.0) * a_p ** (2.0 * p))


def single_coeff_mse_direct(a_p, p, cfg=None):
    """1/2 int_0^{A_p^-p} (1 - h^(1/p) A_p) h dh by adaptive quadrature."""
    p = check_p(p)
    if not (a_p > 0 and math.isfinite(a_p)):
        raise ArithmeticError(f"A_p must be finite and positive, got {a_p!r}")
    top = a_p ** (-p)
    tight = quad.QuadratureConfig(rel_tol=1e-13, abs_tol=1e-15)
    val = quad.integrate(lambda h: (1.0 - h ** (1.0 / p) * a_p) * h, 0.0, top, cfg or tight)
    return 0.5 * val


def single_coeff_mse_bound(model, p, cfg=None, mc=None):
    """Closed-form MSE bound of the single-coefficient outage bound."""
    p = check_p(p)
    a_p, _ = ob.single_coeff_constant(model, p, cfg, mc)
    if not math.isfinite(a_p) or a_p <= 0:
        raise ArithmeticError(f"A_p diverges for p={p!r}")
    return single_coeff_mse_closed(a_p, p)


__all__ = [
    "DEFAULT_HCONFIG",
    "DistortionSpec",
    "HIntegrationConfig",
    "MSEBound",
    "TruncationError",
    "bound_curve",
    "choose_h_max",
    "distortion_bound",
    "integrate_curve",
    "moment_bound",
    "mse_bound_cp",
    "mse_bound_cp_result",
    "mse_bound_tightest",
    "mse_bound_tightest_result",
    "single_coeff_mse_bound",
    "single_coeff_mse_closed",
    "single_coeff_mse_direct",
    "zzlb_mse",
    "zzlb_mse_result",
]
