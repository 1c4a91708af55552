"""Cutoff Picard solver for the mild equation.

One Picard step applies

    (A u)(t) = p(t) * u0  +  J1[ f(s, y, P_N u) ](t)
             + J2[ -g(s, y, P_N u) ](t)  +  theta(t)

where ``P_N`` is the radial projection onto the L2 ball of radius N and the
nonlinearity is evaluated at the stored iterate's time levels.  With the
cutoff in place the step is a contraction in the exponentially weighted
time norm, so the iteration is run until the successive distance in that
norm drops below tolerance.  Whenever no iterate ever left the ball
(``cutoff_active`` false), the fixed point also solves the uncut equation;
the radius is chosen from the data by a margin heuristic and, optionally,
doubled and re-run if an iterate escapes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .coeffs import CoefficientSet
from .convolution import ThetaEngine
from .errors import ConvergenceError, GridError, SmpdeError
from .grid import Field, GridSpec, SpaceTimeField, l2_norm, l4_norm, sup_norm
from .heat import apply_semigroup, j1_all, j2_all
from .measures import MeasureSample

__all__ = [
    "SolverConfig",
    "SolveReport",
    "CutoffSelection",
    "project_pi_n",
    "weighted_norm",
    "weighted_distance",
    "select_N",
    "apply_A",
    "picard_solve",
    "compute_r1_r2",
]

# Norms within a few ulp of the radius count as inside the ball; this makes
# the projection exactly idempotent in floating point.
_PI_N_SLACK = 4.0 * np.finfo(np.float64).eps


def project_pi_n(v: Field, n_radius: float) -> Field:
    """Radial projection onto the L2 ball of radius N.

    Identity inside the ball; otherwise rescales to norm exactly N while
    preserving direction.
    """
    if not (n_radius > 0):
        raise SmpdeError(f"cutoff radius must be positive, got {n_radius}")
    norm = l2_norm(v)
    if norm <= n_radius * (1.0 + _PI_N_SLACK):
        return v
    return v.with_values(v.values * (n_radius / norm))


def _project_rows(values: np.ndarray, dx: float, n_radius: float) -> np.ndarray:
    """Row-wise cutoff projection of a space-time array."""
    norms = np.sqrt(dx * np.sum(values**2, axis=1))
    scale = np.ones_like(norms)
    over = norms > n_radius * (1.0 + _PI_N_SLACK)
    scale[over] = n_radius / norms[over]
    return values * scale[:, None]


def weighted_norm(u: SpaceTimeField, lambda_weight: float) -> float:
    """Exponentially weighted time norm of a space-time field.

    ``sqrt( int_0^T exp(-lambda t) ||u(t)||_L2^2 dt )`` by the trapezoid
    rule on the time levels.
    """
    if not (lambda_weight > 0):
        raise SmpdeError(f"lambda_weight must be positive, got {lambda_weight}")
    t = u.grid.t_levels()
    integrand = np.exp(-lambda_weight * t) * u.slice_norms() ** 2
    return math.sqrt(float(np.trapezoid(integrand, t)))


def _weighted_distance_values(
    a: np.ndarray, b: np.ndarray, grid: GridSpec, lambda_weight: float
) -> float:
    t = grid.t_levels()
    sq = grid.dx * np.sum((a - b) ** 2, axis=1)
    integrand = np.exp(-lambda_weight * t) * sq
    return math.sqrt(float(np.trapezoid(integrand, t)))


def weighted_distance(u: SpaceTimeField, v: SpaceTimeField, lambda_weight: float) -> float:
    if u.grid != v.grid:
        raise GridError("weighted_distance requires one grid")
    return _weighted_distance_values(u.values, v.values, u.grid, lambda_weight)


@dataclass(frozen=True)
class CutoffSelection:
    """Cutoff radius chosen from the data, with the a-priori diagnostics."""

    n_radius: float
    r1: float
    r2: float


def compute_r1_r2(zeta: SpaceTimeField) -> tuple[float, float]:
    """Suprema over time of the slice functionals used by the a-priori bound.

    ``R1 = sup_s ( ||z(s)||_L2^2 + ||z(s)||_L4^4 + ||z(s)||_sup^2 )`` and
    ``R2 = sup_s ||z(s)||_sup^2``.
    """
    r1 = 0.0
    r2 = 0.0
    for i in range(zeta.grid.nt + 1):
        s = zeta.slice_at(i)
        sup_sq = sup_norm(s) ** 2
        r1 = max(r1, l2_norm(s) ** 2 + l4_norm(s) ** 4 + sup_sq)
        r2 = max(r2, sup_sq)
    return r1, r2


def select_N(u0: Field, theta_field: SpaceTimeField, margin: float = 4.0) -> CutoffSelection:
    """Margin heuristic for the cutoff radius.

    ``N = margin * (||u0|| + sup_t ||theta(t)|| + 1)``.  The constants of
    the a-priori bound are not computable, so the radius is validated a
    posteriori instead: a solve reports whether any iterate escaped the
    ball, and the adaptive mode doubles N and retries when one did.
    """
    sup_theta = float(np.max(theta_field.slice_norms()))
    n_radius = margin * (l2_norm(u0) + sup_theta + 1.0)
    r1, r2 = compute_r1_r2(theta_field)
    return CutoffSelection(n_radius=n_radius, r1=r1, r2=r2)


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of one Picard solve."""

    grid: GridSpec
    n_cutoff: float | None = None  # None: select from the data
    lambda_weight: float | None = None  # None: 50 / t_max
    tol: float = 1e-7
    max_iter: int = 60
    adaptive_n: bool = True
    max_n_retries: int = 3
    n_margin: float = 4.0
    mode: str = "fft"

    def __post_init__(self):
        if self.n_cutoff is not None and not (self.n_cutoff > 0):
            raise SmpdeError("n_cutoff must be positive")
        if not (self.tol > 0):
            raise SmpdeError("tol must be positive")
        if self.max_iter < 1:
            raise SmpdeError("max_iter must be >= 1")

    @property
    def lam(self) -> float:
        return 50.0 / self.grid.t_max if self.lambda_weight is None else self.lambda_weight


@dataclass
class SolveReport:
    """Iteration trace of one solve."""

    iterations: int
    successive_distances: list[float]
    final_residual: float
    sup_t_l2_norm: float
    cutoff_active: bool
    n_used: float
    wall_time: float
    lambda_weight: float
    tol: float

    def to_dict(self, include_volatile: bool = True) -> dict:
        d = {
            "iterations": self.iterations,
            "successive_distances": list(self.successive_distances),
            "final_residual": self.final_residual,
            "sup_t_l2_norm": self.sup_t_l2_norm,
            "cutoff_active": self.cutoff_active,
            "n_used": self.n_used,
            "lambda_weight": self.lambda_weight,
            "tol": self.tol,
        }
        if include_volatile:
            d["wall_time"] = self.wall_time
        return d


def _apply_A_values(
    u_values: np.ndarray,
    coeffs: CoefficientSet,
    semigroup_term: np.ndarray,
    theta_values: np.ndarray,
    grid: GridSpec,
    n_radius: float | None,
    mode: str,
) -> np.ndarray:
    """One Picard step on raw arrays; ``n_radius=None`` skips the cutoff."""
    if n_radius is None:
        proj = u_values
    else:
        proj = _project_rows(u_values, grid.dx, n_radius)
    s = grid.t_levels()[:, None]
    y = grid.x_centers()[None, :]
    fv = np.asarray(coeffs.f(s, y, proj), dtype=np.float64)
    gv = np.asarray(coeffs.g(s, y, proj), dtype=np.float64)
    out = semigroup_term + theta_values
    if np.any(fv):
        out = out + j1_all(SpaceTimeField(grid, fv), mode=mode).values
    if np.any(gv):
        out = out + j2_all(SpaceTimeField(grid, -gv), mode=mode).values
    return out


def _semigroup_term(u0: Field, grid: GridSpec, mode: str) -> np.ndarray:
    rows = np.empty((grid.nt + 1, grid.nx))
    rows[0] = u0.values
    for i in range(1, grid.nt + 1):
        rows[i] = apply_semigroup(u0, i * grid.dt, mode=mode).values
    return rows


def apply_A(
    u: SpaceTimeField,
    coeffs: CoefficientSet,
    theta_field: SpaceTimeField,
    n_radius: float | None,
    mode: str = "fft",
) -> SpaceTimeField:
    """The solution operator of the auxiliary equation, applied once.

    ``n_radius=None`` applies the uncut operator (used to check that a
    solution of the cutoff equation solves the original one).
    """
    grid = u.grid
    if theta_field.grid != grid:
        raise GridError("theta field lives on a different grid")
    u0 = u.slice_at(0)
    semi = _semigroup_term(u0, grid, mode)
    vals = _apply_A_values(u.values, coeffs, semi, theta_field.values, grid, n_radius, mode)
    return SpaceTimeField(grid, vals)


def _zero_theta(grid: GridSpec) -> SpaceTimeField:
    return SpaceTimeField(grid, np.zeros((grid.nt + 1, grid.nx)))


def picard_solve(
    coeffs: CoefficientSet,
    sample: MeasureSample | None,
    config: SolverConfig,
    u0: Field,
    theta_field: SpaceTimeField | None = None,
    initial_guess: SpaceTimeField | None = None,
):
    """Fixed-point iteration for the mild equation.

    Returns ``(solution, report)``.  The first iterate is the semigroup
    term plus the noise term, which already matches the fixed point's
    deterministic part; pass ``initial_guess`` to start elsewhere (its row 0
    must equal ``u0``).  Raises ``ConvergenceError`` with the distance trace
    when ``max_iter`` is exhausted, or when adaptive radius doubling runs
    out of retries.
    """
    grid = config.grid
    if u0.grid != grid:
        raise GridError("u0 lives on a different grid")

    if theta_field is None:
        if coeffs.sigma.is_zero:
            theta_field = _zero_theta(grid)
        else:
            if sample is None:
                raise SmpdeError("a measure sample is required when sigma != 0")
            theta_field = ThetaEngine(grid, coeffs.sigma, mode=config.mode).theta_all(sample)
    if theta_field.grid != grid:
        raise GridError("theta field lives on a different grid")

    start = time.perf_counter()
    semi = _semigroup_term(u0, grid, config.mode)

    n_radius = config.n_cutoff
    selection = None
    if n_radius is None:
        selection = select_N(u0, theta_field, margin=config.n_margin)
        n_radius = selection.n_radius

    attempt = 0
    while True:
        u_vals, distances, cutoff_active = _iterate(
            coeffs, semi, theta_field, grid, n_radius, config, initial_guess
        )
        if not (cutoff_active and config.adaptive_n):
            break
        if attempt >= config.max_n_retries:
            raise ConvergenceError(
                f"adaptive radius doubling exhausted after {attempt} retries "
                f"(last N={n_radius})",
                distances,
            )
        attempt += 1
        n_radius *= 2.0

    solution = SpaceTimeField(grid, u_vals)
    residual_vals = _apply_A_values(
        u_vals, coeffs, semi, theta_field.values, grid, n_radius, config.mode
    )
    residual = _weighted_distance_values(residual_vals, u_vals, grid, config.lam)
    report = SolveReport(
        iterations=len(distances),
        successive_distances=[float(d) for d in distances],
        final_residual=float(residual),
        sup_t_l2_norm=float(np.max(solution.slice_norms())),
        cutoff_active=bool(cutoff_active),
        n_used=float(n_radius),
        wall_time=time.perf_counter() - start,
        lambda_weight=float(config.lam),
        tol=float(config.tol),
    )
    return solution, report


def _iterate(coeffs, semi, theta_field, grid, n_radius, config, initial_guess):
    """Run one Picard loop; returns (values, distances, cutoff_active).

    Raises ConvergenceError when max_iter is exhausted.  When the cutoff
    triggers and adaptive mode wants a retry, the caller restarts with a
    doubled radius; escaping iterates are still iterated to convergence
    here because the cutoff keeps them bounded.
    """
    if initial_guess is None:
        current = semi + theta_field.values
    else:
        if initial_guess.grid != grid:
            raise GridError("initial guess lives on a different grid")
        current = initial_guess.values.copy()

    def max_slice_norm(vals):
        return float(np.max(np.sqrt(grid.dx * np.sum(vals**2, axis=1))))

    cutoff_active = max_slice_norm(current) > n_radius * (1.0 + _PI_N_SLACK)
    distances: list[float] = []
    for _ in range(config.max_iter):
        nxt = _apply_A_values(
            current, coeffs, semi, theta_field.values, grid, n_radius, config.mode
        )
        distances.append(_weighted_distance_values(nxt, current, grid, config.lam))
        cutoff_active = cutoff_active or (
            max_slice_norm(nxt) > n_radius * (1.0 + _PI_N_SLACK)
        )
        current = nxt
        if distances[-1] < config.tol:
            return current, distances, cutoff_active
        if cutoff_active and config.adaptive_n:
            # hand control back so the caller can double the radius early
            return current, distances, cutoff_active
    raise ConvergenceError(
        f"Picard iteration did not reach tol={config.tol} in {config.max_iter} steps",
        distances,
    )
