"""Argument checks shared across the package."""

import math

import numpy as np


class CapabilityError(RuntimeError):
    """Raised when a model lacks a feature an operation needs."""


class ConfigurationError(ValueError):
    """Raised for missing or inconsistent configuration."""


def check_positive(name, value, allow_zero=False):
    value = float(value)
    if not math.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        bound = "non-negative" if allow_zero else "positive"
        raise ValueError(f"{name} must be finite and {bound}, got {value!r}")
    return value


def check_h(h, allow_zero=False):
    return check_positive("h", h, allow_zero=allow_zero)


def check_p(p):
    p = float(p)
    if not math.isfinite(p) or p <= 1.0:
        raise ValueError(f"p must be finite and > 1, got {p!r}")
    return p


def conjugate_exponent(p):
    """Return q = p / (p - 1)."""
    p = check_p(p)
    return p / (p - 1.0)


def check_trials(trials):
    trials = int(trials)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    return trials


def check_seed(seed):
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def as_1d(values, name="x"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    elif arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    elif arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr
