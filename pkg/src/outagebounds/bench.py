"""Scenario runners that turn a ScenarioConfig into CSV rows."""

import csv
import io

import numpy as np

from . import estimators as est
from . import mse
from . import outage as ob
from ._validation import ConfigurationError

BOUNDS_HEADER = ("h", "kind", "p", "value", "valley_filled", "mc_stderr")
SWEEP_HEADER = ("sweep_value", "kind", "p", "value", "mc_stderr")
MSE_HEADER = ("kind", "p", "value", "mc_stderr", "h_max")


def fmt(value):
    """Round-trip text for a float; empty for missing values."""
    if value is None:
        return ""
    return "%.17g" % value


def to_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _bound_kind(task):
    if task.kind == "general":
        raise ConfigurationError("bounds.kinds: general needs coefficient callables; use the Python API")
    return ob.BoundKind(task.kind)


def _curve_p(task):
    return None if task.p == ob.P_ONE_PLUS else task.p


def _empirical_at(model, spec, h, trials, seed):
    if spec.adaptive and h == 0.0:
        # the zero-width window is the MAP limit
        spec = est.EstimatorSpec("map", grid_points=spec.grid_points)
    return est.empirical_outage(model, spec.at(h), h, trials, seed)


def _empirical_curve(model, spec, h_grid, trials, seed):
    if spec.adaptive:
        return [_empirical_at(model, spec, h, trials, seed) for h in h_grid]
    return est.empirical_outage_curve(model, spec, h_grid, trials, seed)


def task_curve(model, task, h_grid, config):
    """``(values, stderr or None, valley_filled)`` of one bounds task."""
    if task.kind == "empirical":
        perf = _empirical_curve(model, task.estimator, h_grid, config.trials, config.seed)
        return [r.value for r in perf], [r.stderr for r in perf], False
    kind = _bound_kind(task)
    if kind is ob.BoundKind.MIN_OUTAGE_ORACLE:
        return [ob.min_outage_oracle(model, h) for h in h_grid], None, False
    if kind is ob.BoundKind.EMPIRICAL:
        raise ConfigurationError("bounds.kinds: use 'empirical estimator=...'")
    curve = ob.outage_curve(
        model,
        kind,
        h_grid,
        p=_curve_p(task),
        mc=config.mc,
        valley=config.valley_fill,
        threads=config.threads,
    )
    stderr = None if curve.mc_stderr is None else list(curve.mc_stderr)
    return list(curve.values), stderr, curve.valley_filled


def run_bounds(config):
    """CSV text with one row per (h, task), h-major in config task order."""
    if not config.bounds:
        raise ConfigurationError("bounds.kinds: at least one task is required")
    model = config.model.build()
    h_grid = config.grid.values()
    results = [task_curve(model, task, h_grid, config) for task in config.bounds]
    rows = []
    for i, h in enumerate(h_grid):
        for task, (values, stderr, filled) in zip(config.bounds, results):
            se = None if stderr is None else stderr[i]
            rows.append(
                (fmt(h), task.label, task.p_label, fmt(values[i]), "true" if filled else "false", fmt(se))
            )
    return to_csv(BOUNDS_HEADER, rows)


def task_value(model, task, h, config):
    """``(value, stderr or None)`` of one task at one h."""
    if task.kind == "empirical":
        r = _empirical_at(model, task.estimator, h, config.trials, config.seed)
        return r.value, r.stderr
    kind = _bound_kind(task)
    if kind is ob.BoundKind.MIN_OUTAGE_ORACLE:
        return ob.min_outage_oracle(model, h), None
    value, stderr = ob.bound_value(model, kind, h, _curve_p(task), mc=config.mc)
    return value, (stderr if config.mc is not None else None)


def run_sweep(config):
    """CSV text of every task at the sweep's fixed h for each swept value."""
    sweep = config.sweep
    if sweep is None:
        raise ConfigurationError("missing section [sweep]")
    if not config.bounds:
        raise ConfigurationError("bounds.kinds: at least one task is required")
    rows = []
    for v in sweep.values:
        spec = config.model.with_param(sweep.model_key, sweep.model_value(v))
        model = spec.build()
        for task in config.bounds:
            value, stderr = task_value(model, task, sweep.h, config)
            rows.append((fmt(v), task.label, task.p_label, fmt(value), fmt(stderr)))
    return to_csv(SWEEP_HEADER, rows)


def mse_value(model, task, config):
    """``(value, stderr or None, h_max or None)`` of one MSE task."""
    hcfg = mse.HIntegrationConfig(H_max=config.H_max, h_points=config.h_points)
    kw = dict(hcfg=hcfg, mc=config.mc, threads=config.threads)
    if task.kind == "single_coeff":
        return mse.single_coeff_mse_bound(model, task.p, mc=config.mc), None, None
    if task.kind == "zzlb":
        res = mse.zzlb_mse_result(model, **kw)
    elif task.kind in ("tightest", "cp"):
        p = ob.P_ONE_PLUS if task.kind == "tightest" else task.p
        res = mse.mse_bound_cp_result(model, p, **kw)
    elif task.kind == "moment":
        kind, p = mse._kind_for(task.p)
        curve = mse.bound_curve(model, kind, p, mc=config.mc, hcfg=hcfg, threads=config.threads)
        value, stderr = mse.integrate_curve(curve, mse._moment_weight(task.n), hcfg)
        return value, stderr, float(curve.h_grid[-1])
    else:
        raise ConfigurationError(f"mse.kinds: unknown kind {task.kind!r}")
    return res.value, res.mc_stderr, res.h_max


def run_mse(config):
    if not config.mse:
        raise ConfigurationError("mse.kinds: at least one task is required")
    model = config.model.build()
    rows = []
    for task in config.mse:
        value, stderr, h_max = mse_value(model, task, config)
        rows.append((task.label, task.p_label, fmt(value), fmt(stderr), fmt(h_max)))
    return to_csv(MSE_HEADER, rows)


def h_grid_with(base, extra):
    """Sorted union of two h grids."""
    return np.unique(np.concatenate([np.asarray(base, float), np.asarray(extra, float)]))
