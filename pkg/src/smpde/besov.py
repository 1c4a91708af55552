"""Discrete smoothness functionals: Besov norms, scaling fits, dyadic bound.

The second-moment modulus of continuity of a sampled function g on [c, d] is

    w2(g, r) = sup_{0 <= h <= r} ( int_c^{d-h} |g(y+h) - g(y)|^2 dy )^(1/2)

with shifts restricted to the cell lattice (sub-grid shifts are not
interpolated, so the estimator is a pure function of the samples).  The
norm adds the L2 part to the r-integral of ``w2^2 r^(-2a-1)`` over
``(0, d-c]``, evaluated by the midpoint rule on the same shift lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DegenerateInputError, MeasureError
from .grid import Field
from .measures import MeasureSample, dyadic_energy, integrate_cellwise, measure_of

__all__ = [
    "BesovEstimate",
    "besov_norm",
    "holder_fit",
    "verify_dyadic_bound",
    "required_dyadic_constant",
]


@dataclass(frozen=True)
class BesovEstimate:
    """Decomposed discrete Besov norm on one interval."""

    alpha: float
    c: float
    d: float
    l2_part: float
    modulus_part: float

    @property
    def total(self) -> float:
        return self.l2_part + self.modulus_part


def besov_norm(g: Field, alpha: float, interval: tuple | None = None) -> BesovEstimate:
    """Discrete Besov norm of a field restricted to an aligned interval.

    Parameters
    ----------
    g : Field
        Samples at cell centers; the piecewise-constant extension is the
        function being measured.
    alpha : float
        Smoothness index in (0, 1).
    interval : (c, d), optional
        Cell-aligned subinterval; defaults to the full box.  Must span at
        least four cells.
    """
    if not (0.0 < alpha < 1.0):
        raise MeasureError(f"alpha must lie in (0, 1), got {alpha}")
    grid = g.grid
    if interval is None:
        c, d = grid.x_min, grid.x_max
    else:
        c, d = interval
    ia = grid.boundary_index(c)
    ib = grid.boundary_index(d)
    m = ib - ia
    if m < 4:
        raise AlignmentError(f"interval [{c}, {d}] spans {m} cells; need >= 4")
    v = g.values[ia:ib]
    dx = grid.dx

    l2_part = math.sqrt(dx * float(np.sum(v**2)))

    # w2 at integer shifts; running sup gives w2 over "any shift <= r".
    w2_sq = np.zeros(m)
    for k in range(1, m):
        diff = v[k:] - v[:-k]
        w2_sq[k] = dx * float(np.sum(diff**2))
    w2_sup_sq = np.maximum.accumulate(w2_sq)

    # midpoint rule on [0, d-c] with the shift lattice: node r = (k+1/2)dx
    # sees shifts up to k*dx.
    k = np.arange(m)
    r_mid = (k + 0.5) * dx
    modulus_sq = float(np.sum(dx * w2_sup_sq * r_mid ** (-2.0 * alpha - 1.0)))
    return BesovEstimate(alpha=alpha, c=c, d=d, l2_part=l2_part, modulus_part=math.sqrt(modulus_sq))


def holder_fit(values, lags, spacing: float = 1.0, axis: int = -1):
    """Scaling exponent of mean absolute increments, with standard error.

    Fits ``log E|v(. + l) - v(.)|`` against ``log(l * spacing)`` by least
    squares over the given integer lags.  ``values`` may be 2-d, in which
    case increments along ``axis`` are averaged over the other axis as well.

    Returns ``(exponent, stderr)``.  Raises ``DegenerateInputError`` when an
    increment level vanishes (e.g. constant input), which is distinct from a
    fit near zero.
    """
    v = np.asarray(values, dtype=np.float64)
    v = np.moveaxis(v, axis, -1)
    lags = np.asarray(list(lags), dtype=np.int64)
    if lags.size < 2:
        raise MeasureError("need at least two lags")
    if np.any(lags < 1) or np.any(lags >= v.shape[-1]):
        raise MeasureError("lags must be >= 1 and shorter than the axis")
    if v.shape[-1] < 16:
        raise MeasureError("need at least 16 samples along the fitted axis")
    span = float(lags.max()) / float(lags.min())
    if span < 10.0 - 1e-12:
        raise MeasureError(f"lags span a factor {span:.2f}; need >= one decade")

    means = np.empty(lags.size)
    for i, l in enumerate(lags):
        inc = np.abs(v[..., l:] - v[..., :-l])
        means[i] = float(np.mean(inc))
    if np.any(means <= 0.0):
        raise DegenerateInputError("vanishing increments; exponent undefined")

    x = np.log(lags * spacing)
    y = np.log(means)
    n = x.size
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    resid = y - (ybar + slope * (x - xbar))
    dof = max(n - 2, 1)
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx)
    return slope, stderr


def required_dyadic_constant(
    q: Field, sample: MeasureSample, alpha: float, interval: tuple
) -> float:
    """Smallest C making the dyadic estimate hold for this (q, mu) pair.

    The estimate bounds ``|int q dmu|`` over a unit interval by
    ``|q(left) mu| + C * besov_norm(q) * sqrt(dyadic_energy)``.
    """
    c, d = interval
    grid = q.grid
    ia = grid.boundary_index(c)
    ib = grid.boundary_index(d)
    mask = np.zeros(grid.nx)
    mask[ia:ib] = 1.0
    restricted = q.with_values(q.values * mask)
    lhs = abs(integrate_cellwise(sample, restricted))
    term1 = abs(q.values[ia] * measure_of(sample, (c, d)))
    norm = besov_norm(q, alpha, (c, d)).total
    energy = dyadic_energy(sample, c, alpha)
    denom = norm * math.sqrt(energy)
    if denom <= 0.0:
        return 0.0 if lhs <= term1 else math.inf
    return max(0.0, (lhs - term1) / denom)


def verify_dyadic_bound(
    q: Field,
    sample: MeasureSample,
    alpha: float,
    c_const: float,
    interval: tuple | None = None,
):
    """Check the pathwise dyadic estimate for one (q, mu) pair.

    Returns ``(holds, slack)`` where ``slack = lhs / rhs`` (0 when both
    sides vanish).  ``interval`` defaults to the unit interval at the left
    edge of the box.
    """
    if not (0.5 < alpha < 1.0):
        raise MeasureError(f"alpha must lie in (1/2, 1), got {alpha}")
    grid = q.grid
    if interval is None:
        interval = (grid.x_min, grid.x_min + 1.0)
    c, d = interval
    if abs((d - c) - 1.0) > 1e-9:
        raise AlignmentError("the dyadic estimate applies to unit intervals")
    ia = grid.boundary_index(c)
    ib = grid.boundary_index(d)
    mask = np.zeros(grid.nx)
    mask[ia:ib] = 1.0
    restricted = q.with_values(q.values * mask)
    lhs = abs(integrate_cellwise(sample, restricted))
    term1 = abs(q.values[ia] * measure_of(sample, (c, d)))
    norm = besov_norm(q, alpha, (c, d)).total
    energy = dyadic_energy(sample, c, alpha)
    rhs = term1 + c_const * norm * math.sqrt(energy)
    if rhs == 0.0:
        return lhs == 0.0, 0.0
    return lhs <= rhs * (1.0 + 1e-12), lhs / rhs
