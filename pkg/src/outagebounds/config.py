"""Scenario files for the command-line front end.

A scenario is a flat INI file::

    [model]
    family = two_sided_exponential
    lambda1 = 1
    lambda2 = 10
    atoms = 1, 2
    probs = 0.5, 0.5

    [grid]
    h_min = 0
    h_max = 40
    points = 81

    [bounds]
    kinds =
        tightest
        tightest_p p=2
        min_outage_oracle
        empirical estimator=h_map:5
    valley_fill = true

    [run]
    trials = 100000
    seed = 1
    x_samples = 0

One task per line under ``kinds``; ``p=1+`` selects the tightest bound.
"""

import configparser
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from . import models
from ._validation import ConfigurationError, check_seed
from .estimators import EstimatorSpec
from .outage import P_ONE_PLUS, BoundKind

FAMILIES = {
    "linear_gaussian": (models.LinearGaussian, ("mu_theta", "var_theta", "var_noise")),
    "two_sided_exponential": (
        models.TwoSidedExponential,
        ("lambda1", "lambda2", "atoms", "probs"),
    ),
    "uniform_intervals": (models.UniformIntervalsGaussian, ("var_noise",)),
    "gaussian_mixture": (models.GaussianMixturePosterior.random, ("seed", "n_atoms", "n_components")),
}
_TUPLE_PARAMS = {"atoms", "probs"}
_INT_PARAMS = {"seed", "n_atoms", "n_components"}

_BOUND_KINDS = {k.value for k in BoundKind}
_MSE_KINDS = {"tightest", "cp", "zzlb", "moment", "single_coeff"}


def _floats(text, key):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigurationError(f"{key}: expected numbers, got {text!r}") from exc


def _number(section, key, cast=float, default=None):
    if key not in section:
        if default is None:
            raise ConfigurationError(f"missing key {section.name}.{key}")
        return default
    try:
        return cast(section[key])
    except ValueError as exc:
        raise ConfigurationError(f"{section.name}.{key}: cannot parse {section[key]!r}") from exc


@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: Tuple[Tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(
                f"model.family: unknown family {self.family!r}; choose from {sorted(FAMILIES)}"
            )
        allowed = FAMILIES[self.family][1]
        for key, _ in self.params:
            if key not in allowed:
                raise ConfigurationError(f"model.{key}: not a parameter of {self.family}")

    def with_param(self, key, value):
        allowed = FAMILIES[self.family][1]
        if key not in allowed:
            raise ConfigurationError(f"sweep.parameter: {key!r} is not a parameter of {self.family}")
        params = dict(self.params)
        params[key] = value
        return replace(self, params=tuple(sorted(params.items())))

    def build(self):
        factory, _ = FAMILIES[self.family]
        try:
            return factory(**dict(self.params))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"model: {exc}") from exc


@dataclass(frozen=True)
class Task:
    """One requested curve: a bound kind, an MSE kind or an empirical estimator."""

    kind: str
    p: Optional[object] = None
    estimator: Optional[EstimatorSpec] = None
    n: Optional[int] = None

    @property
    def p_label(self):
        if self.p is None:
            return ""
        return P_ONE_PLUS if self.p == P_ONE_PLUS else f"{self.p:.17g}"

    @property
    def label(self):
        if self.estimator is not None:
            return f"empirical:{self.estimator.label}"
        if self.n is not None:
            return f"{self.kind}:{self.n}"
        return self.kind


def _parse_p(text, where):
    if text == P_ONE_PLUS:
        return P_ONE_PLUS
    try:
        p = float(text)
    except ValueError as exc:
        raise ConfigurationError(f"{where}: bad p {text!r}") from exc
    if not (math.isfinite(p) and p > 1.0):
        raise ConfigurationError(f"{where}: p must exceed 1 or be 1+, got {text!r}")
    return p


def _parse_task(line, where, allowed):
    words = line.split()
    kind, opts = words[0], {}
    for word in words[1:]:
        if "=" not in word:
            raise ConfigurationError(f"{where}: expected key=value, got {word!r}")
        key, value = word.split("=", 1)
        opts[key] = value
    if kind not in allowed:
        raise ConfigurationError(f"{where}: unknown kind {kind!r}")
    unknown = set(opts) - {"p", "estimator", "n"}
    if unknown:
        raise ConfigurationError(f"{where}: unknown option(s) {sorted(unknown)}")
    p = _parse_p(opts["p"], where) if "p" in opts else None
    if kind == "empirical":
        if "estimator" not in opts:
            raise ConfigurationError(f"{where}: empirical needs estimator=...")
        try:
            est = EstimatorSpec.parse(opts["estimator"])
        except ValueError as exc:
            raise ConfigurationError(f"{where}: {exc}") from exc
        return Task(kind, estimator=est)
    if kind in ("tightest_p", "single_coeff", "cp") and p is None:
        raise ConfigurationError(f"{where}: {kind} needs p=...")
    if kind in ("tightest_p", "cp") and p == P_ONE_PLUS:
        # p -> 1+ is the tightest bound
        return Task("tightest", p=P_ONE_PLUS)
    if kind == "tightest":
        if p not in (None, P_ONE_PLUS):
            raise ConfigurationError(f"{where}: tightest takes no finite p")
        return Task("tightest", p=P_ONE_PLUS)
    if kind == "single_coeff" and p == P_ONE_PLUS:
        raise ConfigurationError(f"{where}: single_coeff needs a finite p > 1")
    n = None
    if kind == "moment":
        try:
            n = int(opts.get("n", "2"))
        except ValueError as exc:
            raise ConfigurationError(f"{where}: bad n {opts['n']!r}") from exc
        if n < 1:
            raise ConfigurationError(f"{where}: moment needs n >= 1")
        if p is None:
            p = P_ONE_PLUS
    return Task(kind, p=p, n=n)


def _parse_tasks(section, allowed):
    if section is None or "kinds" not in section:
        return ()
    lines = [ln.strip() for ln in section["kinds"].replace(";", "\n").splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ConfigurationError(f"{section.name}.kinds: at least one task is required")
    return tuple(_parse_task(ln, f"{section.name}.kinds", allowed) for ln in lines)


@dataclass(frozen=True)
class HGrid:
    h_min: float = 0.0
    h_max: float = 10.0
    points: int = 51

    def __post_init__(self):
        if not self.h_min >= 0:
            raise ConfigurationError("grid.h_min must be >= 0")
        if not self.h_max > self.h_min:
            raise ConfigurationError("grid.h_max must exceed grid.h_min")
        if self.points < 2:
            raise ConfigurationError("grid.points must be >= 2")

    def values(self):
        return np.linspace(self.h_min, self.h_max, self.points)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: Tuple[float, ...]
    h: float

    @property
    def model_key(self):
        return self.parameter[4:] if self.parameter.startswith("inv_") else self.parameter

    def model_value(self, v):
        return 1.0 / v if self.parameter.startswith("inv_") else v


def _parse_sweep_values(text):
    text = text.strip()
    if text.startswith(("logspace:", "linspace:")):
        parts = text.split(":")
        if len(parts) != 4:
            raise ConfigurationError("sweep.values: use logspace:start:stop:count")
        lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
        if n < 1:
            raise ConfigurationError("sweep.values: count must be >= 1")
        if parts[0] == "logspace":
            if not (lo > 0 and hi > 0):
                raise ConfigurationError("sweep.values: logspace needs positive ends")
            return tuple(np.geomspace(lo, hi, n)) if n > 1 else (lo,)
        return tuple(np.linspace(lo, hi, n)) if n > 1 else (lo,)
    return _floats(text, "sweep.values")


@dataclass(frozen=True)
class ScenarioConfig:
    model: ModelSpec
    grid: HGrid = field(default_factory=HGrid)
    bounds: Tuple[Task, ...] = ()
    mse: Tuple[Task, ...] = ()
    sweep: Optional[SweepSpec] = None
    valley_fill: bool = False
    trials: int = 10000
    seed: int = 0
    x_samples: int = 0
    threads: int = 1
    h_points: int = 400
    H_max: Optional[float] = None

    @property
    def mc(self):
        """Observation sampling for bound expectations; None means quadrature."""
        return (self.x_samples, self.seed) if self.x_samples > 0 else None

    def override(self, seed=None, trials=None, threads=None):
        changes = {}
        if seed is not None:
            changes["seed"] = check_seed(seed)
        if trials is not None:
            if trials < 1:
                raise ConfigurationError("--trials must be >= 1")
            changes["trials"] = int(trials)
        if threads is not None:
            if threads < 1:
                raise ConfigurationError("--threads must be >= 1")
            changes["threads"] = int(threads)
        return replace(self, **changes)


def _model_spec(parser):
    if not parser.has_section("model"):
        raise ConfigurationError("missing section [model]")
    sec = parser["model"]
    if "family" not in sec:
        raise ConfigurationError("missing key model.family")
    family = sec["family"].strip()
    if family not in FAMILIES:
        raise ConfigurationError(f"model.family: unknown family {family!r}")
    params = []
    for key, value in sec.items():
        if key == "family":
            continue
        if key in _TUPLE_PARAMS:
            params.append((key, _floats(value, f"model.{key}")))
        elif key in _INT_PARAMS:
            params.append((key, _number(sec, key, int)))
        else:
            params.append((key, _number(sec, key)))
    return ModelSpec(family, tuple(sorted(params)))


def parse_config(text):
    """Parse scenario text into a ScenarioConfig."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config: {exc}") from exc
    model = _model_spec(parser)
    grid = HGrid()
    if parser.has_section("grid"):
        sec = parser["grid"]
        grid = HGrid(
            _number(sec, "h_min", float, 0.0),
            _number(sec, "h_max", float, 10.0),
            _number(sec, "points", int, 51),
        )
    bounds_sec = parser["bounds"] if parser.has_section("bounds") else None
    bounds = _parse_tasks(bounds_sec, _BOUND_KINDS | {"empirical"})
    mse_sec = parser["mse"] if parser.has_section("mse") else None
    mse_tasks = _parse_tasks(mse_sec, _MSE_KINDS)
    if bounds_sec is not None and "kinds" in bounds_sec and not bounds:
        raise ConfigurationError("bounds.kinds: at least one task is required")
    valley = False
    if bounds_sec is not None:
        try:
            valley = bounds_sec.getboolean("valley_fill", fallback=False)
        except ValueError as exc:
            raise ConfigurationError(f"bounds.valley_fill: {exc}") from exc
    sweep = None
    if parser.has_section("sweep"):
        sec = parser["sweep"]
        if "parameter" not in sec or "values" not in sec:
            raise ConfigurationError("sweep needs parameter and values")
        sweep = SweepSpec(sec["parameter"].strip(), _parse_sweep_values(sec["values"]), _number(sec, "h"))
        model.with_param(sweep.model_key, 1.0)  # validates the name
    run = parser["run"] if parser.has_section("run") else {}
    get = (lambda k, c, d: _number(run, k, c, d)) if run else (lambda k, c, d: d)
    h_max = None
    if mse_sec is not None and "h_max" in mse_sec:
        h_max = _number(mse_sec, "h_max")
    cfg = ScenarioConfig(
        model=model,
        grid=grid,
        bounds=bounds,
        mse=mse_tasks,
        sweep=sweep,
        valley_fill=valley,
        trials=get("trials", int, 10000),
        seed=check_seed(get("seed", int, 0)),
        x_samples=get("x_samples", int, 0),
        threads=get("threads", int, 1),
        h_points=_number(mse_sec, "h_points", int, 400) if mse_sec is not None else 400,
        H_max=h_max,
    )
    if not (cfg.bounds or cfg.mse):
        raise ConfigurationError("config requests no tasks; add [bounds] or [mse] kinds")
    if cfg.trials < 1 or cfg.x_samples < 0 or cfg.threads < 1:
        raise ConfigurationError("run: trials and threads must be >= 1, x_samples >= 0")
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text)
