"""Densities for the inverse Gaussian (stable-1/2) case of the base point.

The inverse Gaussian process ``I`` is the hitting-time process of the
two-sided running maximum of standard Brownian motion in space direction.
Throughout, the standard-Brownian-motion scaling is used:

    f_I(t)(v) = t / sqrt(2 pi) * v^(-3/2) * exp(-t^2 / (2 v)),   t, v > 0,

mirrored for negative times.  Building blocks:

* ``triple_density``       joint density of hitting time, undershoot and
                           overshoot at a level ``x > 0``,
* ``hit_under_density``    joint density of hitting time and undershoot
                           (overshoot integrated out; for ``x < 0`` this is a
                           one-dimensional quadrature),
* ``bridge_density``       density of the process pinned to ``I(s) = y``,
* ``conditional_past_density``  law of ``I(s - t)`` given hitting data, split
                           into the bridge / independent-copy / negative-side
                           regions,
* ``basepoint_density``    total-probability assembly of the base-point law
                           ``I(I*(x) - t)`` by nested quadrature: adaptive
                           passes in the hitting time ``s`` (split at ``s = t``
                           and at the small-``|z|`` boundary layer of width
                           ``~sqrt(|z|)``) around an inner pass in the
                           undershoot ``y`` with a square-root endpoint.

The base-point density has an integrable ``|z|^(-1/2)`` spike at the origin
and vanishes identically above ``x``.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erfcinv

from .quadrature import (
    QuadratureError,
    QuadratureSpec,
    integrate_adaptive,
    integrate_semi_infinite,
    integrate_sqrt_endpoint,
)

__all__ = [
    "IGQuery",
    "DensityCurve",
    "ig_marginal_density",
    "triple_density",
    "hit_under_density",
    "hit_under_y_mass",
    "running_max_density",
    "bridge_density",
    "conditional_past_density",
    "basepoint_density",
    "basepoint_cdf",
    "cdf_from_curve",
    "default_z_grid",
    "write_density_csv",
    "write_cdf_csv",
    "write_query_json",
]

_LOG_2PI = float(np.log(2.0 * np.pi))
_LOG_PI = float(np.log(np.pi))

# exp(-s^2/(2y)) underflows for y below s^2 / _EXP_UNDERFLOW_SCALE
_EXP_UNDERFLOW_SCALE = 1490.0

#: relative mass kept outside truncated outer integrals
_TAIL_BUDGET = 1e-6

#: break the outer integral at these multiples of the boundary-layer width
_LAYER_LADDER = (0.03, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0)


@dataclass(frozen=True, eq=False)
class IGQuery:
    """Base-point density query: level ``x``, elapsed time ``t > 0``, and an
    increasing grid of evaluation points ``z_grid``."""

    x: float
    t: float
    z_grid: np.ndarray

    def __post_init__(self) -> None:
        if not self.t > 0.0:
            raise ValueError(f"t must be positive, got {self.t}")
        z = np.asarray(self.z_grid, dtype=float)
        if z.ndim != 1 or z.size < 2 or not np.all(np.diff(z) > 0.0):
            raise ValueError("z_grid must be a strictly increasing 1-d sequence")


@dataclass(frozen=True, eq=False)
class DensityCurve:
    """Tabulated density with per-point quadrature error estimates.

    ``err`` is NaN at points where the quadrature failed to converge (the
    best available value is still stored in ``f``).  ``mass`` is the
    trapezoid integral of ``f`` over ``z``.
    """

    z: np.ndarray
    f: np.ndarray
    err: np.ndarray
    mass: float


def _log_ig(t: float, v) -> np.ndarray:
    """``log f_I(t)(v)`` for ``t > 0`` on ``v > 0`` (callers guard supports)."""
    v = np.asarray(v, dtype=float)
    return np.log(t) - 0.5 * _LOG_2PI - 1.5 * np.log(v) - t * t / (2.0 * v)


def ig_marginal_density(t: float, v):
    """Marginal density of ``I(t)``, ``t != 0``.

    Positive times are supported on ``v > 0``, negative times mirror onto
    ``v < 0``.  The distribution degenerates at ``t = 0``.
    """
    if t == 0.0:
        raise ValueError("the marginal at t=0 is degenerate at the origin")
    v_arr = np.asarray(v, dtype=float)
    out = np.zeros_like(v_arr)
    if t > 0.0:
        mask = v_arr > 0.0
        if mask.any():
            out[mask] = np.exp(_log_ig(t, v_arr[mask]))
    else:
        mask = v_arr < 0.0
        if mask.any():
            out[mask] = np.exp(_log_ig(-t, -v_arr[mask]))
    return float(out) if np.isscalar(v) else out


def triple_density(x: float, s, a, b):
    """Joint density of (hitting time, undershoot, overshoot) at level ``x > 0``:

        1{s>=0, 0<=a<=x<=b} * s / (2 pi sqrt(a^3 (b-a)^3)) * exp(-s^2/(2a))
    """
    if not x > 0.0:
        raise ValueError(f"x must be positive, got {x}")
    s_arr, a_arr, b_arr = np.broadcast_arrays(
        np.asarray(s, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    out = np.zeros(s_arr.shape)
    # the factor s makes the density vanish at s = 0, so the open condition
    # s > 0 below matches the closed indicator s >= 0 pointwise
    mask = (s_arr > 0.0) & (a_arr > 0.0) & (a_arr <= x) & (b_arr >= x) & (b_arr > a_arr)
    if mask.any():
        sm, am, bm = s_arr[mask], a_arr[mask], b_arr[mask]
        log_val = (
            np.log(sm)
            - np.log(2.0 * np.pi)
            - 1.5 * (np.log(am) + np.log(bm - am))
            - sm * sm / (2.0 * am)
        )
        out[mask] = np.exp(log_val)
    if np.isscalar(s) and np.isscalar(a) and np.isscalar(b):
        return float(out)
    return out


def _log_hit_under_pos(x: float, s, y) -> np.ndarray:
    """log of the hitting-time/undershoot joint density on its positive-side
    support ``s >= 0, 0 < y < x``."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.log(s) - 1.5 * np.log(y) - 0.5 * np.log(x - y) - _LOG_PI - s * s / (2.0 * y)


def hit_under_density(x: float, s: float, y: float, spec: QuadratureSpec | None = None) -> float:
    """Joint density of hitting time ``s`` and undershoot ``y`` at level ``x``.

    For ``x > 0`` the overshoot has been integrated out in closed form; for
    ``x < 0`` the value is a one-dimensional quadrature over the overshoot
    location of the mirrored level (the undershoot at ``x < 0`` is the
    negative overshoot at ``-x``).  Zero outside the supports; the boundary
    ``y == x`` carries an integrable blow-up and evaluates to ``inf``.
    """
    if x > 0.0:
        if s < 0.0 or y < 0.0 or y > x:
            return 0.0
        if y == x:
            return np.inf
        if y == 0.0 or s == 0.0:
            return 0.0
        return float(np.exp(_log_hit_under_pos(x, s, y)))
    if x < 0.0:
        if s >= 0.0 or y > x:
            return 0.0
        if y == x:
            return np.inf
        if spec is None:
            spec = QuadratureSpec()
        # integrand dies at a -> 0-; drop the dead zone where exp underflows
        a_hi = -s * s / _EXP_UNDERFLOW_SCALE
        if a_hi <= x:
            return 0.0
        def f(a):
            return (-s) / (
                2.0 * np.pi * np.sqrt(np.abs(a) ** 3 * np.abs(y - a) ** 3)
            ) * np.exp(s * s / (2.0 * a))

        return integrate_adaptive(f, x, a_hi, spec).value
    return 0.0


def running_max_density(x: float, s) -> np.ndarray | float:
    """Half-normal density of the running maximum of Brownian motion over
    ``[0, x]``: ``sqrt(2/(pi x)) exp(-s^2/(2x))`` for ``s >= 0``."""
    if not x > 0.0:
        raise ValueError(f"x must be positive, got {x}")
    s_arr = np.asarray(s, dtype=float)
    out = np.where(s_arr >= 0.0, np.sqrt(2.0 / (np.pi * x)) * np.exp(-s_arr * s_arr / (2.0 * x)), 0.0)
    return float(out) if np.isscalar(s) else out


def hit_under_y_mass(x: float, s: float, spec: QuadratureSpec | None = None) -> float:
    """Quadrature of the hitting/undershoot density over the undershoot,
    ``int_0^x f(s, y) dy`` for ``x > 0``.

    The integrand is steep near ``y ~ s^2`` (where the exponential turns on)
    and has a square-root singularity at ``y = x``; the pass is split
    accordingly.  Equals the running-maximum density of ``s`` analytically.
    """
    if not x > 0.0:
        raise ValueError(f"x must be positive, got {x}")
    if spec is None:
        spec = QuadratureSpec()
    if s == 0.0:
        # removable discontinuity: the y-integral vanishes at s = 0 exactly
        return 0.0
    lo = s * s / _EXP_UNDERFLOW_SCALE
    if lo >= x:
        return 0.0

    def f(y):
        return np.exp(_log_hit_under_pos(x, s, y))

    mid = 0.5 * x
    total = 0.0
    if lo < mid:
        total += integrate_adaptive(f, lo, mid, spec).value
        total += integrate_sqrt_endpoint(f, mid, x, "right", spec).value
    else:
        total += integrate_sqrt_endpoint(f, lo, x, "right", spec).value
    return total


def bridge_density(r: float, s: float, y: float, z):
    """Density at time ``r`` of the process pinned to ``I(s) = y``:

        f_I(r)(z) * f_I(s-r)(y - z) / f_I(s)(y),   0 < z < y,

    for ``s > r > 0`` and ``y > 0``; zero outside ``(0, y)``.
    """
    if not (s > r > 0.0):
        raise ValueError(f"need s > r > 0, got r={r}, s={s}")
    if not y > 0.0:
        raise ValueError(f"need y > 0, got y={y}")
    log_denom = _log_ig(s, y)
    if not np.isfinite(log_denom) or np.exp(log_denom) == 0.0:
        raise ValueError(
            f"conditioning on a numerically null event: f_I({s})({y}) underflows"
        )
    z_arr = np.asarray(z, dtype=float)
    out = np.zeros_like(z_arr)
    mask = (z_arr > 0.0) & (z_arr < y)
    if mask.any():
        zm = z_arr[mask]
        out[mask] = np.exp(_log_ig(r, zm) + _log_ig(s - r, y - zm) - log_denom)
    return float(out) if np.isscalar(z) else out


def conditional_past_density(x: float, t: float, s: float, y: float, z):
    """Density of the characteristic base point given hitting data.

    Regions (for ``t > 0``):

    * ``x >= y > 0`` and ``s >= t``: bridge pinned at ``(s, y)`` evaluated at
      time ``s - t`` (at the measure-zero boundary ``s == t`` the limit value
      0 is returned for ``z != 0``),
    * ``x >= 0`` and ``0 <= s < t``: an independent copy run backwards,
      ``f_I(t-s)(-z)``, supported on ``z < 0``,
    * ``x < 0`` and ``s < 0``: ``f_I(t)(-y - z)``.

    Inputs outside all regions raise, naming the offending combination.
    """
    if not t > 0.0:
        raise ValueError(f"t must be positive, got {t}")
    z_arr = np.asarray(z, dtype=float)
    scalar = np.isscalar(z)
    if x >= 0.0 and s >= t and x >= y > 0.0:
        if s == t:
            out = np.zeros_like(z_arr)
            return float(out) if scalar else out
        return bridge_density(s - t, s, y, z)
    if x >= 0.0 and 0.0 <= s < t and 0.0 <= y <= x:
        return ig_marginal_density(t - s, -z_arr) if not scalar else ig_marginal_density(t - s, -float(z_arr))
    if x < 0.0 and s < 0.0 and y <= x:
        val = ig_marginal_density(t, -y - z_arr)
        return float(val) if scalar else val
    raise ValueError(
        f"inputs match no conditional region: x={x}, t={t}, s={s}, y={y}"
    )


# ---------------------------------------------------------------------------
# base-point density assembly


def _outer_upper_limit(x: float, t: float, z: float) -> float:
    """Truncation point of the outer hitting-time integral: beyond it both
    the hitting-time marginal tail and the shifted-time factor tail are
    below the tail budget."""
    u = float(erfcinv(_TAIL_BUDGET)) * np.sqrt(2.0)  # one-sided normal quantile
    s_hi = u * np.sqrt(x)
    if z > 0.0:
        # the shifted-time factor decays like exp(-(s-t)^2 / (2z))
        v = np.sqrt(2.0 * np.log(1.0 / _TAIL_BUDGET))
        s_hi = max(s_hi, t + v * np.sqrt(z))
    return max(s_hi, 1.5 * t)


def _segments(points: list[float]) -> list[tuple[float, float]]:
    pts = sorted(set(points))
    return [(lo, hi) for lo, hi in zip(pts[:-1], pts[1:]) if hi > lo]


def _case2_point(x: float, t: float, z: float, spec: QuadratureSpec) -> tuple[float, float]:
    """Positive-z branch: bridge conditional against the hitting/undershoot
    density, ``s`` over ``(t, s_hi)``, ``y`` over ``(z, x)``.

    The full integrand is evaluated through one fused log expression, which
    cancels the exponential underflow between the undershoot density and the
    bridge denominator.
    """
    s_hi = _outer_upper_limit(x, t, z)
    inner_err = 0.0

    def inner(s: float) -> float:
        nonlocal inner_err

        def g(y):
            log_val = (
                _log_ig(s - t, z)
                + _log_ig(t, y - z)
                + _log_hit_under_pos(x, s, y)
                - _log_ig(s, y)
            )
            return np.exp(log_val)

        res = integrate_sqrt_endpoint(g, z, x, "right", spec)
        inner_err = max(inner_err, res.error_estimate)
        return res.value

    def outer(s_values):
        return np.array([inner(float(s)) for s in np.atleast_1d(s_values)])

    layer = np.sqrt(z)
    points = [t, s_hi] + [t + layer * c for c in _LAYER_LADDER if t + layer * c < s_hi]
    value = 0.0
    error = 0.0
    for lo, hi in _segments(points):
        res = integrate_adaptive(outer, lo, hi, spec)
        value += res.value
        error += res.error_estimate
    # truncated outer tail, relative to the exact shifted-time mass
    tail = np.exp(-((s_hi - t) ** 2) / (2.0 * z))
    error += abs(value) * tail / max(1.0 - tail, 0.5)
    error += inner_err * (s_hi - t)
    return value, error


def _case3_point(x: float, t: float, z: float, spec: QuadratureSpec) -> tuple[float, float]:
    """Negative-z branch: independent-copy conditional; the undershoot
    integral reduces to the same inner pass for every ``z``."""
    az = -z

    def outer(s_values):
        s_values = np.atleast_1d(s_values)
        out = np.empty(s_values.shape)
        for i, s in enumerate(s_values):
            out[i] = np.exp(_log_ig(t - s, az)) * hit_under_y_mass(x, float(s), spec)
        return out

    layer = np.sqrt(az)
    points = [0.0, t] + [t - layer * c for c in _LAYER_LADDER if 0.0 < t - layer * c < t]
    value = 0.0
    error = 0.0
    for lo, hi in _segments(points):
        res = integrate_adaptive(outer, lo, hi, spec)
        value += res.value
        error += res.error_estimate
    return value, error


def _case4_point(x: float, t: float, z: float, spec: QuadratureSpec) -> tuple[float, float]:
    """Negative-level branch (``x < 0``): triple-nested quadrature over the
    hitting time (negative), the undershoot (below ``x``) and, inside the
    undershoot density itself, the mirrored overshoot location."""
    u = float(erfcinv(_TAIL_BUDGET)) * np.sqrt(2.0)
    s_lo = -u * np.sqrt(-x)

    def mid(s: float) -> float:
        def g(w):
            w = np.atleast_1d(w)
            out = np.empty(w.shape)
            for i, wi in enumerate(w):
                y = x - float(wi)
                out[i] = ig_marginal_density(t, -y - z) * hit_under_density(x, s, y, spec)
            return out

        return integrate_semi_infinite(g, 0.0, spec).value

    def outer(s_values):
        return np.array([mid(float(s)) for s in np.atleast_1d(s_values)])

    res = integrate_adaptive(outer, s_lo, 0.0, spec)
    return res.value, res.error_estimate


def _basepoint_point(args: tuple[float, float, float, QuadratureSpec]) -> tuple[float, float]:
    x, t, z, spec = args
    try:
        if x > 0.0:
            if z == 0.0:
                return 0.0, 0.0  # integrable spike; pointwise limit is 0
            if z > 0.0:
                if z >= x:
                    return 0.0, 0.0  # bridge support empty above the level
                return _case2_point(x, t, z, spec)
            return _case3_point(x, t, z, spec)
        if x == 0.0:
            # hitting is immediate: the base point is an independent copy
            # run backwards from the origin
            return ig_marginal_density(t, -z), 0.0
        return _case4_point(x, t, z, spec)
    except QuadratureError as exc:
        best = exc.best.value if exc.best is not None else np.nan
        return best, np.nan


def basepoint_density(
    query: IGQuery,
    spec: QuadratureSpec | None = None,
    workers: int = 1,
) -> DensityCurve:
    """Density of the base point ``I(I*(x) - t)`` on ``query.z_grid``.

    Per-point evaluations are independent; ``workers > 1`` distributes them
    over processes with a deterministic, order-preserving reduction.  Points
    where the quadrature fails carry ``err = NaN`` and the best available
    value.
    """
    if spec is None:
        spec = QuadratureSpec()
    z_grid = np.asarray(query.z_grid, dtype=float)
    tasks = [(query.x, query.t, float(z), spec) for z in z_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_basepoint_point, tasks, chunksize=8))
    else:
        results = [_basepoint_point(task) for task in tasks]
    f = np.array([r[0] for r in results])
    err = np.array([r[1] for r in results])
    mass = float(np.trapezoid(f, z_grid))
    return DensityCurve(z_grid, f, err, mass)


def cdf_from_curve(curve: DensityCurve) -> np.ndarray:
    """Running trapezoid integral of a density curve, clipped to [0, 1].

    Returns an ``(n, 2)`` array of ``(z, F)`` rows.
    """
    dz = np.diff(curve.z)
    increments = 0.5 * (curve.f[1:] + curve.f[:-1]) * dz
    cdf = np.concatenate([[0.0], np.cumsum(increments)])
    return np.column_stack([curve.z, np.clip(cdf, 0.0, 1.0)])


def basepoint_cdf(
    query: IGQuery,
    spec: QuadratureSpec | None = None,
    workers: int = 1,
) -> np.ndarray:
    """CDF of the base point on ``query.z_grid`` as ``(z, F)`` rows."""
    return cdf_from_curve(basepoint_density(query, spec, workers))


def default_z_grid(
    x: float,
    n: int = 512,
    z_neg_far: float = -1e6,
    rel_inner: float = 1e-5,
) -> np.ndarray:
    """Two-sided evaluation grid for a positive level ``x``.

    Geometric refinement toward the integrable spike at 0 on both sides, a
    linear band across the density cutoff at ``z = x``, and a geometric far
    negative tail (the negative side is heavy-tailed)."""
    if not x > 0.0:
        raise ValueError(f"x must be positive, got {x}")
    if n < 64:
        raise ValueError("need at least 64 grid points")
    inner = rel_inner * x
    n_neg = int(0.45 * n)
    n_pos_geo = int(0.40 * n)
    n_band = n - n_neg - n_pos_geo
    neg = -np.geomspace(-z_neg_far, inner, n_neg)
    pos_geo = np.geomspace(inner, 0.9 * x, n_pos_geo)
    band = np.linspace(0.9 * x + 1e-9, 1.1 * x, n_band)
    return np.unique(np.concatenate([neg, [0.0], pos_geo, band]))


def write_density_csv(curve: DensityCurve, out: Path | str) -> None:
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("z,f,err\n")
        for z, f, e in zip(curve.z, curve.f, curve.err):
            fh.write(f"{z:.17g},{f:.17g},{e:.17g}\n")


def write_cdf_csv(cdf: np.ndarray, out: Path | str) -> None:
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("z,F\n")
        for z, F in cdf:
            fh.write(f"{z:.17g},{F:.17g}\n")


def write_query_json(
    query: IGQuery, spec: QuadratureSpec, mass: float, out: Path | str
) -> None:
    payload = {
        "x": query.x,
        "t": query.t,
        "convention": "standard-brownian-motion",
        "z_min": float(query.z_grid[0]),
        "z_max": float(query.z_grid[-1]),
        "n_points": int(np.asarray(query.z_grid).size),
        "abs_tol": spec.abs_tol,
        "rel_tol": spec.rel_tol,
        "max_subdivisions": spec.max_subdivisions,
        "mass": mass,
    }
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
