"""Integration primitives: adaptive quadrature, lattice sums, period integrals
and expectations over the observation law.

The period integrals of lattice maxima and of pairwise lattice minima are
computed cell by cell. On each cell of a fine grid over [0, h] the active
lattice term is fixed except at isolated switch points, which are located by
bisection, so the integral reduces to differences of the posterior cdf (or a
Gauss-Legendre rule when no cdf is available). Everything is vectorized over
observations, cells and lattice offsets.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import ConfigurationError, check_h
from .models import ContinuousDensity, DiscreteAtoms, sample_joint_batch

# Gauss-Kronrod 7/15 abscissae and weights
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES15 = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK15 = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[[9, 11, 13]] = _WG[2::-1]
_WG15[7] = _WG[3]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_BISECTION_STEPS = 60
_WINDOW_CELLS = 64


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not converge; ``partial`` holds the last estimate."""

    def __init__(self, message, partial, error):
        super().__init__(f"{message} (partial={partial!r}, error={error!r})")
        self.partial = partial
        self.error = error


class LatticeDivergenceError(RuntimeError):
    """Lattice tail terms did not fall below the truncation threshold."""


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and truncation controls for every integral.

    ``lattice_half_width`` fixes the lattice truncation at ``|l - c| <= L``
    around the window centre; when ``None`` the window is taken from the model
    and widened until both boundary terms fall below ``lattice_eps``.
    The grid used to locate switch points of the lattice maximum has
    ``cells_per_period`` cells, reduced when the lattice is long so that cells
    times lattice points stays near ``resolution_points``; ``cell_budget``
    caps the size of evaluation blocks. Integrands handled by Gauss-Legendre
    on each cell use the coarser ``smooth_cells_per_period``.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 2**16
    lattice_half_width: Optional[int] = None
    lattice_eps: float = 1e-13
    cells_per_period: int = 256
    smooth_cells_per_period: int = 64
    resolution_points: int = 8192
    cell_budget: int = 2**21
    max_lattice_points: int = 2**20

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "lattice_eps"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value!r}")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if self.lattice_half_width is not None and self.lattice_half_width < 1:
            raise ValueError("lattice_half_width must be >= 1")
        if self.cells_per_period < 4:
            raise ValueError("cells_per_period must be >= 4")


DEFAULT_CONFIG = QuadratureConfig()


def _cfg(cfg):
    return DEFAULT_CONFIG if cfg is None else cfg


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = mid[:, None] + half[:, None] * _NODES15[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    kron = half * (vals @ _WK15)
    gauss = half * (vals @ _WG15)
    mean = kron / np.where(half != 0, 2.0 * half, 1.0)
    resasc = np.abs(half) * (np.abs(vals - mean[:, None]) @ _WK15)
    err = np.abs(kron - gauss)
    # QUADPACK's rescaling of the raw Kronrod-Gauss difference
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & np.isfinite(scaled), scaled, err)
    return kron, err


def integrate(f, a, b, cfg=None, breakpoints=()):
    """Adaptive Gauss-Kronrod integral of a vectorized ``f`` over [a, b].

    Interior ``breakpoints`` seed the subdivision so jumps and kinks sit on
    interval edges.
    """
    cfg = _cfg(cfg)
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0
    pts = np.asarray(breakpoints, dtype=float).reshape(-1)
    pts = np.unique(pts[(pts > a) & (pts < b)])
    edges = np.concatenate([[a], pts, [b]])
    lo, hi = edges[:-1], edges[1:]
    length = b - a
    done_val = 0.0
    done_err = 0.0
    count = len(lo)
    while True:
        kron, err = _gk15(f, lo, hi)
        total = done_val + kron.sum()
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total))
        total_err = done_err + err.sum()
        if total_err <= tol:
            return sign * float(total)
        # settle intervals whose error is below their share of the budget
        keep = err > 0.5 * tol * (hi - lo) / length
        keep &= (hi - lo) > 4.0 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        if not keep.any():
            return sign * float(total)
        done_val += kron[~keep].sum()
        done_err += err[~keep].sum()
        lo, hi = lo[keep], hi[keep]
        count += len(lo)
        if count > cfg.max_subdivisions:
            raise QuadratureError("adaptive quadrature did not converge", sign * total, total_err)
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])


def integrate_period(f, h, cfg=None, breakpoints=()):
    """Integrate ``f`` over one period [0, h]; breakpoints are reduced mod h."""
    h = check_h(h)
    pts = np.mod(np.asarray(breakpoints, dtype=float).reshape(-1), h)
    return integrate(f, 0.0, h, cfg, pts)


def gauss_legendre_mass(model, x, a, b):
    """Posterior mass of [a, b] from an 8-point Gauss-Legendre rule."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[..., None] + half[..., None] * _GL_NODES
    vals = model.pdf(np.asarray(x)[..., None], pts)
    return half * (vals @ _GL_WEIGHTS)


def posterior_mass(model, x, a, b):
    """Posterior mass of [a, b] given x, elementwise over broadcast arrays."""
    x, a, b = np.broadcast_arrays(np.asarray(x, float), np.asarray(a, float), np.asarray(b, float))
    if model.has_cdf:
        return model.cdf(x, b) - model.cdf(x, a)
    return gauss_legendre_mass(model, x, a, b)


# ---------------------------------------------------------------------------
# lattice sums


def lattice_offsets(model, x, h, cfg=None):
    """Initial integer offsets l covering the posterior window of every x."""
    cfg = _cfg(cfg)
    lo, hi = model.window(np.asarray(x, dtype=float))
    lo = float(np.min(lo))
    hi = float(np.max(hi))
    if cfg.lattice_half_width is not None:
        centre = round(0.5 * (lo + hi) / h)
        half = cfg.lattice_half_width
        return np.arange(centre - half, centre + half + 1)
    return np.arange(math.floor(lo / h) - 1, math.floor(hi / h) + 2)


def _lattice_block(model, x, phi, h, cfg, offsets=None):
    """Evaluate f(phi + l h | x) with a lattice axis appended.

    Without a fixed half-width the lattice grows until both boundary terms
    drop below ``lattice_eps``.
    """
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    ls = lattice_offsets(model, x, h, cfg) if offsets is None else offsets
    while True:
        vals = model.pdf(x[..., None], phi[..., None] + ls * h)
        if cfg.lattice_half_width is not None or model.bounded:
            return vals, ls
        grow_lo = np.max(vals[..., 0]) >= cfg.lattice_eps
        grow_hi = np.max(vals[..., -1]) >= cfg.lattice_eps
        if not (grow_lo or grow_hi):
            return vals, ls
        step = max(1, len(ls) // 2)
        if len(ls) + 2 * step > cfg.max_lattice_points:
            raise LatticeDivergenceError(
                f"lattice terms stay above {cfg.lattice_eps!r} after {len(ls)} points"
            )
        if grow_lo:
            ls = np.concatenate([np.arange(ls[0] - step, ls[0]), ls])
        if grow_hi:
            ls = np.concatenate([ls, np.arange(ls[-1] + 1, ls[-1] + 1 + step)])


def _norm_from_values(vals, q):
    """(sum_l f_l^q)^(1/q) along the last axis, scaled by the maximum term."""
    top = vals.max(axis=-1)
    safe = np.where(top > 0, top, 1.0)
    ratio = vals / safe[..., None]
    with np.errstate(divide="ignore", under="ignore"):
        # q log(f/M) in log space; zeros contribute exactly zero
        powered = np.where(ratio > 0, np.exp(q * np.log(np.where(ratio > 0, ratio, 1.0))), 0.0)
    return np.where(top > 0, top * powered.sum(axis=-1) ** (1.0 / q), 0.0)


def lattice_sum(model, x, phi, h, q, cfg=None):
    """Sum over l of f(phi + l h | x)^q on the truncated lattice."""
    cfg = _cfg(cfg)
    h = check_h(h)
    if q < 1:
        raise ValueError("q must be >= 1")
    vals, _ = _lattice_block(model, x, phi, h, cfg)
    if q == 1:
        return vals.sum(axis=-1)
    return _norm_from_values(vals, q) ** q


def lattice_norm(model, x, phi, h, q, cfg=None):
    """(sum_l f(phi + l h | x)^q)^(1/q), computed without underflow."""
    cfg = _cfg(cfg)
    h = check_h(h)
    vals, _ = _lattice_block(model, x, phi, h, cfg)
    return _norm_from_values(vals, q)


def lattice_max(model, x, phi, h, cfg=None):
    """Maximum over l of f(phi + l h | x) on the same truncated lattice."""
    cfg = _cfg(cfg)
    h = check_h(h)
    vals, _ = _lattice_block(model, x, phi, h, cfg)
    return vals.max(axis=-1)


# ---------------------------------------------------------------------------
# period integrals over [0, h], vectorized over observations


def _chunks(model, xs, h, cfg, per_x_factor, max_cells=None):
    """Yield (x chunk, phi grid, lattice offsets) blocks within the cell budget."""
    ls = lattice_offsets(model, xs, h, cfg)
    max_cells = cfg.cells_per_period if max_cells is None else max_cells
    n_cells = int(np.clip(-(-cfg.resolution_points // len(ls)), 16, max(16, max_cells)))
    base = np.linspace(0.0, h, n_cells + 1)
    extra = model.breakpoints(xs)
    lo, hi = model.window(xs)
    lo = np.asarray(lo, dtype=float) * np.ones(len(xs))
    hi = np.asarray(hi, dtype=float) * np.ones(len(xs))
    if np.any(hi - lo < h):
        # a posterior much narrower than the period would fall between the
        # uniform cells, so resolve its window separately
        frac = np.linspace(0.0, 1.0, _WINDOW_CELLS + 1)
        extra = np.concatenate([extra, lo[:, None] + (hi - lo)[:, None] * frac], axis=1)
    per_x = per_x_factor * len(ls) * (n_cells + 1 + extra.shape[1])
    step = max(1, cfg.cell_budget // per_x)
    for start in range(0, len(xs), step):
        xc = xs[start : start + step]
        grid = np.broadcast_to(base, (len(xc), len(base)))
        if extra.shape[1]:
            pts = np.mod(extra[start : start + step], h)
            grid = np.sort(np.concatenate([grid, pts], axis=1), axis=1)
        yield xc, grid, ls


def _bisect(pred, lo, hi):
    """Vectorized bisection keeping ``pred(lo)`` true and ``pred(hi)`` false."""
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        ok = pred(mid)
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    return 0.5 * (lo + hi)


def _cell_masses(model, xc, grid, ls, h):
    """Posterior mass of every (cell, lattice shift) pair, shape (nx, cells, nl)."""
    pts = grid[..., None] + ls * h
    xb = xc[:, None, None]
    if model.has_cdf:
        return np.diff(model.cdf(xb, pts), axis=1)
    return gauss_legendre_mass(model, xb, pts[:, :-1], pts[:, 1:])


def _max_switches(model, xc, grid, h, vals, ls):
    """Per cell: leading lattice index at each end and the switch point between."""
    lab = vals.argmax(axis=-1)
    a, b = grid[:, :-1], grid[:, 1:]
    la, lb = lab[:, :-1], lab[:, 1:]
    r = b.copy()
    sw = la != lb
    if sw.any():
        xs_sw = np.broadcast_to(xc[:, None], a.shape)[sw]
        s1, s2 = ls[la[sw]] * h, ls[lb[sw]] * h
        r[sw] = _bisect(
            lambda t: model.pdf(xs_sw, t + s1) > model.pdf(xs_sw, t + s2), a[sw], b[sw]
        )
    return a, b, r, la, lb, sw


def period_max_integral(model, xs, h, cfg=None):
    """For each x, the integral over [0, h] of max_l f(phi + l h | x)."""
    cfg = _cfg(cfg)
    h = check_h(h)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = []
    for xc, grid, ls in _chunks(model, xs, h, cfg, 3):
        vals, ls = _lattice_block(model, xc[:, None], grid, h, cfg, ls)
        a, b, r, la, lb, sw = _max_switches(model, xc, grid, h, vals, ls)
        sa, sb = ls[la] * h, ls[lb] * h
        xb = np.broadcast_to(xc[:, None], a.shape)
        if model.has_cdf:
            # away from switches the piece is F(b + s) - F(a + s) for one shift
            piece = model.cdf(xb, b + sb) - model.cdf(xb, a + sa)
            if sw.any():
                xs_sw, r_sw = xb[sw], r[sw]
                piece[sw] += model.cdf(xs_sw, r_sw + sa[sw]) - model.cdf(xs_sw, r_sw + sb[sw])
        else:
            piece = gauss_legendre_mass(model, xb, a + sa, r + sa)
            piece += gauss_legendre_mass(model, xb, r + sb, b + sb)
        out.append(piece.sum(axis=1))
    return np.concatenate(out)


def period_min_pair_integral(model, xs, h, cfg=None):
    """For each x, the integral over [0, h] of sum_l min(f_l, f_{l+1}).

    Here f_l = f(phi + l h | x); the sum is the ZZLB outage integrand.
    """
    cfg = _cfg(cfg)
    h = check_h(h)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = []
    for xc, grid, ls in _chunks(model, xs, h, cfg, 4):
        vals, ls = _lattice_block(model, xc[:, None], grid, h, cfg, ls)
        masses = _cell_masses(model, xc, grid, ls, h)
        diff = vals[..., :-1] - vals[..., 1:]
        pos_l = diff[:, :-1] > 0
        pos_r = diff[:, 1:] > 0
        # the smaller of each pair is the upper neighbour where the difference is positive
        pair = np.arange(len(ls) - 1)
        piece = np.take_along_axis(masses, pair + pos_l, axis=-1)
        sw = pos_l != pos_r
        if sw.any():
            shape = pos_l.shape
            xs_sw = np.broadcast_to(xc[:, None, None], shape)[sw]
            a = np.broadcast_to(grid[:, :-1, None], shape)[sw]
            b = np.broadcast_to(grid[:, 1:, None], shape)[sw]
            s0 = np.broadcast_to(ls[:-1] * h, shape)[sw]
            start_pos = pos_l[sw]
            r = _bisect(
                lambda t: (model.pdf(xs_sw, t + s0) > model.pdf(xs_sw, t + s0 + h)) == start_pos,
                a,
                b,
            )
            left = s0 + start_pos * h
            right = s0 + pos_r[sw] * h
            piece[sw] = posterior_mass(model, xs_sw, a + left, r + left) + posterior_mass(
                model, xs_sw, r + right, b + right
            )
        out.append(piece.sum(axis=(1, 2)))
    return np.concatenate(out)


def period_lattice_integral(model, xs, h, integrand, cfg=None, split_at_switches=True):
    """For each x, integrate ``integrand(vals, x, phi)`` over [0, h].

    ``vals`` carries the lattice axis last. Each cell is split at the switch
    point of the lattice maximum and integrated with 8-point Gauss-Legendre.
    """
    cfg = _cfg(cfg)
    h = check_h(h)
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    npts = len(_GL_NODES)
    out = []
    for xc, grid, ls in _chunks(model, xs, h, cfg, 2 * npts + 1, cfg.smooth_cells_per_period):
        vals, ls = _lattice_block(model, xc[:, None], grid, h, cfg, ls)
        if split_at_switches:
            a, b, r, _, _, _ = _max_switches(model, xc, grid, h, vals, ls)
        else:
            a, b = grid[:, :-1], grid[:, 1:]
            r = b
        lo = np.stack([a, r], axis=-1)
        hi = np.stack([r, b], axis=-1)
        half = 0.5 * (hi - lo)
        phi = (0.5 * (hi + lo))[..., None] + half[..., None] * _GL_NODES
        xb = xc[:, None, None, None]
        block, _ = _lattice_block(model, xb, phi, h, cfg, ls)
        vals_int = integrand(block, xb, phi)
        out.append(np.sum(half * (vals_int @ _GL_WEIGHTS), axis=(1, 2)))
    return np.concatenate(out)


def period_norm_integral(model, xs, h, q, cfg=None):
    """For each x, the integral over [0, h] of (sum_l f_l^q)^(1/q)."""
    return period_lattice_integral(model, xs, h, lambda v, x, phi: _norm_from_values(v, q), cfg)


# ---------------------------------------------------------------------------
# expectations over the observation law


def expect_over_x(model, g, cfg=None, mc=None):
    """E[g(x)] under the observation law, returned as ``(value, stderr)``.

    ``g`` takes an array of observations. Discrete laws are summed exactly,
    laws with a marginal density are integrated adaptively (stderr 0), and
    ``mc=(trials, seed)`` switches to a Monte-Carlo mean over joint samples.
    """
    cfg = _cfg(cfg)
    law = model.observation_law
    if mc is not None:
        trials, seed = mc
        xs, _ = sample_joint_batch(model, seed, int(trials))
        vals = np.asarray(g(xs), dtype=float)
        if len(vals) < 2:
            return float(vals.mean()), 0.0
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))
    if isinstance(law, DiscreteAtoms):
        vals = np.asarray(g(np.asarray(law.values)), dtype=float)
        return math.fsum(p * v for p, v in zip(law.probs, vals)), 0.0
    if isinstance(law, ContinuousDensity):
        lo, hi = law.window

        def weighted(x):
            dens = law.pdf(x)
            out = np.zeros_like(x)
            live = dens > 0
            if live.any():
                out[live] = dens[live] * np.asarray(g(x[live]), dtype=float)
            return out

        return integrate(weighted, lo, hi, cfg, law.breakpoints), 0.0
    raise ConfigurationError(
        "the observation law has no density; pass mc=(trials, seed) for a Monte-Carlo expectation"
    )


def expect_shift_invariant(model, g, cfg=None, mc=None):
    """Expectation of a functional that is invariant to shifting the posterior.

    For location families such a functional does not depend on x, so a single
    evaluation is exact.
    """
    if model.location_family and mc is None:
        x0 = np.array([model.reference_observation()], dtype=float)
        return float(np.asarray(g(x0), dtype=float)[0]), 0.0
    return expect_over_x(model, g, cfg, mc)
