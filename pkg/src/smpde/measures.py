"""Sampling of stochastic measures on the grid's cell structure.

A measure realization is stored as one increment per finest spatial cell.
The value of the measure on any aligned interval is the sum of the contained
cell increments, so additivity holds exactly by construction.  The dyadic
energy and tail functionals consume unit-interval blocks of cells; blocks are
exact whenever the number of cells per unit interval is itself a power of
two, and snap to the nearest cell edge otherwise.

Supported generators:

* ``wiener``                  independent centered Gaussians, variance dx per cell
* ``weighted_wiener``         Gaussian with variance weight(y_c)^2 * dx per cell
* ``fbm``                     increments of one fractional Brownian path,
                              Hurst index in (1/2, 1), exact joint covariance
                              via a Cholesky factor of the increment covariance
* ``alpha_stable``            independent symmetric alpha-stable increments,
                              scale dx^(1/alpha), Chambers-Mallows-Stuck sampler
* ``deterministic_lebesgue``  increment = cell length (degenerate oracle)

Scale conventions: the alpha-stable variates follow the standard symmetric
parameterization with characteristic function exp(-|scale * t|^alpha), so
``alpha = 2`` reduces to a Gaussian with variance ``2 * dx`` per cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz

from .errors import AlignmentError, MeasureError
from .grid import Field, GridSpec

__all__ = [
    "MeasureSample",
    "DyadicPartition",
    "sample_wiener",
    "sample_weighted_wiener",
    "sample_fbm",
    "sample_alpha_stable",
    "sample_deterministic_lebesgue",
    "measure_of",
    "dyadic_energy",
    "tail_weight",
    "integrate_cellwise",
    "unit_blocks",
    "coarsen_sample",
    "WEIGHT_FAMILIES",
]

MEASURE_KINDS = (
    "wiener",
    "weighted_wiener",
    "fbm",
    "alpha_stable",
    "deterministic_lebesgue",
)


@dataclass(frozen=True)
class MeasureSample:
    """One realization of a stochastic measure on the finest cells."""

    grid: GridSpec
    kind: str
    params: dict
    seed: int
    increments: np.ndarray

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise MeasureError(f"unknown measure kind {self.kind!r}")
        inc = np.ascontiguousarray(self.increments, dtype=np.float64)
        if inc.shape != (self.grid.nx,):
            raise MeasureError("increments must hold one value per finest cell")
        if not np.all(np.isfinite(inc)):
            raise MeasureError("measure increments contain non-finite values")
        inc.flags.writeable = False
        object.__setattr__(self, "increments", inc)

    def total(self) -> float:
        return float(np.sum(self.increments))


@dataclass(frozen=True)
class DyadicPartition:
    """Binary subdivision of one unit block of cells.

    Depth-``n`` subintervals split the block into ``2**n`` pieces; the cell
    boundaries of piece ``k`` are ``round(k * m / 2**n)`` for a block of ``m``
    cells, which is an exact refinement chain whenever ``2**n`` divides ``m``.
    """

    j: float
    start: int
    stop: int
    n_max: int

    @property
    def n_cells(self) -> int:
        return self.stop - self.start

    def edges(self, n: int) -> np.ndarray:
        """Cell-boundary offsets (relative to ``start``) at depth ``n``."""
        if not (0 <= n <= self.n_max):
            raise MeasureError(f"depth {n} outside 0..{self.n_max}")
        m = self.n_cells
        k = np.arange(2**n + 1)
        return np.rint(k * m / 2**n).astype(np.int64)


# ---------------------------------------------------------------------------
# samplers


def sample_wiener(grid: GridSpec, seed: int) -> MeasureSample:
    """White-noise measure: independent N(0, dx) increments."""
    rng = np.random.default_rng(seed)
    inc = rng.standard_normal(grid.nx) * math.sqrt(grid.dx)
    return MeasureSample(grid, "wiener", {}, int(seed), inc)


WEIGHT_FAMILIES = ("constant", "gaussian")


def _weight_values(weight: dict, y: np.ndarray) -> np.ndarray:
    kind = weight.get("kind")
    if kind == "constant":
        return np.full_like(y, float(weight.get("value", 1.0)))
    if kind == "gaussian":
        scale = float(weight.get("scale", 1.0))
        return scale * np.exp(-(y**2))
    raise MeasureError(
        f"unsupported weight family {kind!r}; expected one of {WEIGHT_FAMILIES}"
    )


def sample_weighted_wiener(grid: GridSpec, weight: dict, seed: int) -> MeasureSample:
    """Gaussian measure with spatially varying intensity.

    The cell increment is ``N(0, weight(y_c)^2 * dx)``, the midpoint-rule
    approximation of the cell integral of the squared weight.
    """
    xi = _weight_values(weight, grid.x_centers())
    rng = np.random.default_rng(seed)
    inc = rng.standard_normal(grid.nx) * xi * math.sqrt(grid.dx)
    return MeasureSample(grid, "weighted_wiener", {"weight": dict(weight)}, int(seed), inc)


@lru_cache(maxsize=8)
def _fbm_cholesky(grid_key: tuple, hurst: float) -> np.ndarray:
    x_min, x_max, nx = grid_key
    dx = (x_max - x_min) / nx
    a = x_min + np.arange(nx) * dx
    b = a + dx

    def v(t):
        return np.abs(t) ** (2 * hurst)

    # Cov(B(b_i)-B(a_i), B(b_j)-B(a_j)) for a two-sided fractional path;
    # stationary in i-j, so one row/column determines the Toeplitz matrix.
    def cov_row(i):
        return 0.5 * (v(b[i] - a) + v(a[i] - b) - v(b[i] - b) - v(a[i] - a))

    cov = toeplitz(cov_row(0))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-12 * dx ** (2 * hurst)
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(nx))
        except np.linalg.LinAlgError as exc:
            raise MeasureError(
                f"fbm increment covariance not positive definite for H={hurst}"
            ) from exc


def sample_fbm(grid: GridSpec, hurst: float, seed: int) -> MeasureSample:
    """Increments of one fractional Brownian path with Hurst index H > 1/2.

    The joint law is exact: increments are ``L @ z`` with ``L`` the Cholesky
    factor of the stationary increment covariance and ``z`` standard normal.
    An aligned unit interval then has variance exactly 1.
    """
    if not (0.5 < hurst < 1.0):
        raise MeasureError(f"Hurst index must lie in (1/2, 1), got {hurst}")
    chol = _fbm_cholesky((grid.x_min, grid.x_max, grid.nx), float(hurst))
    rng = np.random.default_rng(seed)
    inc = chol @ rng.standard_normal(grid.nx)
    return MeasureSample(grid, "fbm", {"H": float(hurst)}, int(seed), inc)


def sample_alpha_stable(grid: GridSpec, alpha: float, seed: int) -> MeasureSample:
    """Independent symmetric alpha-stable increments, scale dx^(1/alpha)."""
    if not (0.0 < alpha <= 2.0) or alpha == 1.0:
        raise MeasureError(f"alpha must lie in (0,1) u (1,2], got {alpha}")
    rng = np.random.default_rng(seed)
    v = rng.uniform(-math.pi / 2, math.pi / 2, grid.nx)
    w = rng.standard_exponential(grid.nx)
    # Chambers-Mallows-Stuck, symmetric case.
    x = (np.sin(alpha * v) / np.cos(v) ** (1.0 / alpha)) * (
        np.cos((1.0 - alpha) * v) / w
    ) ** ((1.0 - alpha) / alpha)
    inc = grid.dx ** (1.0 / alpha) * x
    return MeasureSample(grid, "alpha_stable", {"alpha": float(alpha)}, int(seed), inc)


def sample_deterministic_lebesgue(grid: GridSpec) -> MeasureSample:
    """Degenerate oracle: the increment of every cell is its length."""
    inc = np.full(grid.nx, grid.dx)
    return MeasureSample(grid, "deterministic_lebesgue", {}, 0, inc)


# ---------------------------------------------------------------------------
# functionals


def measure_of(sample: MeasureSample, interval: tuple) -> float:
    """Measure of an aligned half-open interval ``(a, b]``.

    Endpoints must sit on cell boundaries; misalignment raises
    ``AlignmentError``.  The empty interval has measure 0.
    """
    a, b = interval
    if b < a:
        raise AlignmentError(f"interval endpoints out of order: ({a}, {b}]")
    try:
        ia = sample.grid.boundary_index(a)
        ib = sample.grid.boundary_index(b)
    except Exception as exc:
        raise AlignmentError(str(exc)) from exc
    return float(np.sum(sample.increments[ia:ib]))


def unit_blocks(grid: GridSpec) -> list[DyadicPartition]:
    """Consecutive unit-interval blocks covering the box.

    Block edges snap to the nearest cell boundary, so the blocks always
    partition the full cell range; they coincide with the exact unit
    intervals whenever those are cell-aligned.
    """
    width = grid.x_max - grid.x_min
    n_blocks = max(1, round(width))
    cells_per = grid.nx / n_blocks
    blocks = []
    for m in range(n_blocks):
        start = round(m * cells_per)
        stop = round((m + 1) * cells_per)
        n_max = max(0, int(math.floor(math.log2(stop - start))))
        blocks.append(
            DyadicPartition(j=grid.x_min + m * width / n_blocks, start=start, stop=stop, n_max=n_max)
        )
    return blocks


def _block_for(sample: MeasureSample, j: float) -> DyadicPartition:
    grid = sample.grid
    start = round((j - grid.x_min) / grid.dx)
    stop = round((j + 1.0 - grid.x_min) / grid.dx)
    if not (0 <= start < stop <= grid.nx):
        raise AlignmentError(f"unit interval ({j}, {j + 1}] is not inside the box")
    n_max = int(math.floor(math.log2(stop - start)))
    return DyadicPartition(j=j, start=start, stop=stop, n_max=n_max)


def dyadic_energy(
    sample: MeasureSample, j: float, alpha: float, n_max: int | None = None
) -> float:
    """Weighted dyadic second moment of the measure on ``(j, j+1]``.

    Computes ``sum_{n=1..n_max} 2^(n(1-2alpha)) * sum_k mu(subinterval_{k,n})^2``
    where depth ``n`` splits the unit block into ``2^n`` dyadic pieces.  The
    depth is capped by the grid resolution: subdividing below single cells
    would require increments the sample does not carry.
    """
    if not (0.5 < alpha < 1.0):
        raise MeasureError(f"alpha must lie in (1/2, 1), got {alpha}")
    block = _block_for(sample, j)
    depth = block.n_max if n_max is None else min(int(n_max), block.n_max)
    cs = np.concatenate([[0.0], np.cumsum(sample.increments[block.start : block.stop])])
    total = 0.0
    for n in range(1, depth + 1):
        edges = block.edges(n)
        sums = cs[edges[1:]] - cs[edges[:-1]]
        total += 2.0 ** (n * (1.0 - 2.0 * alpha)) * float(np.sum(sums**2))
    return total


def tail_weight(sample: MeasureSample, theta: float) -> float:
    """Polynomially weighted mass spread over unit intervals.

    ``sum_j (|j|+1)^theta * mu((j, j+1])^2`` over the unit blocks inside the
    truncated box, with ``j`` the left endpoint of each block.
    """
    if not (theta > 1.0):
        raise MeasureError(f"theta must exceed 1, got {theta}")
    cs = np.concatenate([[0.0], np.cumsum(sample.increments)])
    total = 0.0
    for block in unit_blocks(sample.grid):
        mass = cs[block.stop] - cs[block.start]
        total += (abs(block.j) + 1.0) ** theta * mass**2
    return total


def integrate_cellwise(sample: MeasureSample, f: Field) -> float:
    """Integral of a cell-aligned step function against the measure.

    The integrand is the Field's piecewise-constant extension, so the
    integral is exactly ``sum(values * increments)``.
    """
    if f.grid != sample.grid:
        raise AlignmentError("integrand and measure live on different grids")
    return float(np.dot(f.values, sample.increments))


def coarsen_sample(sample: MeasureSample, factor: int) -> MeasureSample:
    """Re-express the same measure on a grid with ``factor``-fold larger cells.

    Adjacent increments are summed, which preserves the measure of every
    interval aligned to the coarse cells exactly.
    """
    grid = sample.grid
    if factor < 1 or grid.nx % factor != 0:
        raise MeasureError(f"factor {factor} does not divide nx={grid.nx}")
    coarse = GridSpec(grid.x_min, grid.x_max, grid.nx // factor, grid.t_max, grid.nt)
    inc = sample.increments.reshape(-1, factor).sum(axis=1)
    return MeasureSample(coarse, sample.kind, dict(sample.params), sample.seed, inc)
