"""Averaging of a fast-oscillating noise intensity.

Replacing ``sigma(s, y)`` by ``sigma(s/eps, y)`` and letting ``eps`` shrink,
the solutions converge pathwise to the solution driven by the time average
``sigma_bar(y) = lim (1/t) int_0^t sigma(s, y) ds``.  The experiment here
solves the averaged equation once and the fast equation for every ``eps`` on
the SAME measure realization, reporting the sup-in-time L2 distances, the
sup gap of the stochastic terms, and a fitted decay exponent.

``gronwall_series`` evaluates the comparison function of the generalized
Gronwall inequality with a (t-s)^(-3/4)-singular kernel,

    h(z) = sum_{n>=1} Gamma(1/4)^n / Gamma(n/4) * z^(n/4 - 1),

which diverges like ``z^(-3/4)`` as ``z -> 0`` and converges for every
``z > 0`` (the Gamma in the denominator eventually dominates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coeffs import CoefficientSet, SigmaSpec
from .convolution import ThetaEngine
from .errors import AveragingError, SmpdeError
from .grid import Field, SpaceTimeField
from .measures import MeasureSample
from .solver import SolverConfig, SolveReport, compute_r1_r2, picard_solve

__all__ = [
    "AveragingScenario",
    "ConvergenceTable",
    "sigma_bar",
    "g_sigma_sup",
    "averaging_experiment",
    "gronwall_series",
    "compute_r1_r2",
]

_PERIOD_QUAD_NODES = 4096
_PERIOD_DRIFT_TOL = 1e-9


def sigma_bar(sigma: SigmaSpec) -> SigmaSpec:
    """Time average of the intensity.

    Constant intensities are their own average.  For a separable periodic
    intensity the periodic factor is averaged over one period by the
    composite midpoint rule (spectrally accurate for smooth periodic
    factors); the averaged spec keeps the spatial factor and inherits the
    bound and Hoelder metadata unchanged.
    """
    if sigma.family == "constant":
        return sigma
    if sigma.family != "separable_periodic":
        raise AveragingError("time averaging needs a periodic or constant intensity")
    phi = sigma.phi
    if not phi.is_periodic:
        raise AveragingError(f"phi kind {phi.kind!r} has no time average")
    period = phi.effective_period
    s = (np.arange(_PERIOD_QUAD_NODES) + 0.5) * (period / _PERIOD_QUAD_NODES)
    mean = float(np.mean(phi(s)))
    new_phi = replace(phi, kind="constant", amplitude=mean, offset=0.0, speed=1.0)
    return replace(sigma, phi=new_phi, spot_check=False)


def g_sigma_sup(sigma: SigmaSpec, r_max: float, n_nodes: int = 4096) -> float:
    """Sup of the running primitive of ``sigma - sigma_bar``.

    ``G(r, y) = int_0^r (sigma(s, y) - sigma_bar(y)) ds`` must stay bounded
    for averaging to hold.  For a periodic factor the sup over one period is
    the global sup; this is detected by checking that ``G`` returns to zero
    at period ends.  Growth across periods raises ``AveragingError``.
    """
    if sigma.family == "constant" or sigma.is_time_constant:
        return 0.0
    if sigma.family != "separable_periodic":
        raise AveragingError("boundedness check needs a separable intensity")
    phi = sigma.phi
    if not phi.is_periodic:
        raise AveragingError(
            f"phi kind {phi.kind!r} drifts: the primitive of sigma - sigma_bar "
            "is unbounded, so the averaged-intensity assumption fails"
        )
    phi_mean = sigma_bar(sigma).phi.amplitude
    period = phi.effective_period

    c_sup = float(np.max(np.abs(sigma.c_values(np.linspace(-25.0, 25.0, 2001)))))

    span = min(float(r_max), 4.0 * period)
    n = max(n_nodes, 64)
    h = span / n
    s = (np.arange(n) + 0.5) * h
    primitive = np.concatenate([[0.0], np.cumsum((phi(s) - phi_mean) * h)])
    sup_phi = float(np.max(np.abs(primitive)))

    if phi.is_periodic and span >= period:
        # the primitive of a zero-mean periodic function is periodic; a
        # nonzero value at period ends signals drift (a mislabeled period)
        k_max = int(span / period)
        ends = np.rint(np.arange(1, k_max + 1) * period / h).astype(int)
        ends = ends[ends <= n]
        drift = float(np.max(np.abs(primitive[ends]))) if ends.size else 0.0
        scale = max(sup_phi, abs(phi_mean), 1e-30)
        if drift > 1e-6 * max(scale, 1.0) + _PERIOD_DRIFT_TOL:
            raise AveragingError(
                f"primitive of sigma - sigma_bar drifts by {drift:.3g} per period; "
                "the averaged-intensity assumption fails"
            )
    return sup_phi * c_sup


@dataclass(frozen=True)
class AveragingScenario:
    """Inputs of one averaging run: shared sample, eps ladder, coefficients."""

    coeffs: CoefficientSet
    sample: MeasureSample
    eps_list: tuple
    u0: Field
    solver: SolverConfig

    def __post_init__(self):
        if self.coeffs.time_dependent:
            raise AveragingError("averaging requires time-independent f and g")
        eps = tuple(float(e) for e in self.eps_list)
        if not eps or any(e <= 0 for e in eps):
            raise AveragingError("eps_list must hold positive values")
        object.__setattr__(self, "eps_list", eps)
        # A6: fail fast when the oscillation does not average out
        g_sigma_sup(self.coeffs.sigma, r_max=4.0 * self._period())

    def _period(self) -> float:
        sigma = self.coeffs.sigma
        if sigma.family == "separable_periodic":
            return sigma.phi.effective_period
        return 1.0


@dataclass(frozen=True)
class ConvergenceTable:
    """Per-eps distances of the averaging experiment."""

    eps: tuple
    sup_t_l2_distance: tuple
    xi_sup: tuple
    fitted_rate: float
    fitted_rate_stderr: float
    reports: tuple

    def rows(self):
        for e, d, x in zip(self.eps, self.sup_t_l2_distance, self.xi_sup):
            yield {
                "epsilon": e,
                "sup_t_l2_distance": d,
                "xi_sup": x,
                "fitted_rate": self.fitted_rate,
            }


def _sup_t_l2_distance(a: SpaceTimeField, b: SpaceTimeField) -> float:
    dx = a.grid.dx
    per_t = np.sqrt(dx * np.sum((a.values - b.values) ** 2, axis=1))
    return float(np.max(per_t))


def _loglog_rate(eps: np.ndarray, gaps: np.ndarray):
    x = np.log(eps)
    y = np.log(gaps)
    xbar, ybar = x.mean(), y.mean()
    sxx = float(np.sum((x - xbar) ** 2))
    slope = float(np.sum((x - xbar) * (y - ybar)) / sxx)
    resid = y - (ybar + slope * (x - xbar))
    dof = max(x.size - 2, 1)
    stderr = math.sqrt(float(np.sum(resid**2)) / dof / sxx)
    return slope, stderr


def averaging_experiment(scenario: AveragingScenario) -> ConvergenceTable:
    """Solve the averaged and the fast equations on one measure realization.

    All solves share the measure sample (the convergence statement is
    pathwise).  Per eps the table records ``sup_t ||u_eps(t) - u_bar(t)||``
    and the sup gap of the stochastic terms, plus the log-log slope of the
    gap against eps.
    """
    coeffs, sample, u0 = scenario.coeffs, scenario.sample, scenario.u0
    config = scenario.solver
    grid = config.grid

    bar_sigma = sigma_bar(coeffs.sigma)
    bar_coeffs = replace(coeffs, sigma=bar_sigma, spot_check=False)
    bar_theta = ThetaEngine(grid, bar_sigma, mode=config.mode).theta_all(sample)
    u_bar, bar_report = picard_solve(bar_coeffs, sample, config, u0, theta_field=bar_theta)

    distances, xi_sups, reports = [], [], [bar_report]
    for eps in scenario.eps_list:
        fast_sigma = coeffs.sigma.time_scaled(1.0 / eps)
        fast_coeffs = replace(coeffs, sigma=fast_sigma, spot_check=False)
        fast_theta = ThetaEngine(grid, fast_sigma, mode=config.mode).theta_all(sample)
        try:
            u_eps, rep = picard_solve(
                fast_coeffs, sample, config, u0, theta_field=fast_theta
            )
        except SmpdeError as exc:
            raise AveragingError(f"solve failed at eps={eps}: {exc}") from exc
        distances.append(_sup_t_l2_distance(u_eps, u_bar))
        xi_sups.append(float(np.max(np.abs(fast_theta.values - bar_theta.values))))
        reports.append(rep)

    eps_arr = np.asarray(scenario.eps_list)
    gaps = np.asarray(xi_sups)
    if np.all(gaps > 0) and eps_arr.size >= 2:
        rate, rate_se = _loglog_rate(eps_arr, gaps)
    else:
        rate, rate_se = 0.0, 0.0
    return ConvergenceTable(
        eps=tuple(scenario.eps_list),
        sup_t_l2_distance=tuple(distances),
        xi_sup=tuple(xi_sups),
        fitted_rate=rate,
        fitted_rate_stderr=rate_se,
        reports=tuple(reports),
    )


_GRONWALL_HARD_CAP = 200_000


def gronwall_series(z: float, tol: float = 1e-12, max_terms: int | None = None) -> float:
    """Comparison series of the generalized Gronwall inequality at lag ``z``.

    Terms are added until the next one falls below ``tol`` times the partial
    sum (the terms first grow for z of order one, so the stop rule only
    fires once the factorial decay has taken over).  ``max_terms`` caps the
    summation unconditionally, which is useful for comparing against a
    fixed-length reference sum.
    """
    if not (z > 0):
        raise SmpdeError(f"gronwall_series requires z > 0, got {z}")
    if not (tol > 0):
        raise SmpdeError(f"tol must be positive, got {tol}")
    log_c = math.lgamma(0.25)  # log Gamma(1/4)
    log_z = math.log(z)

    def log_term(n: int) -> float:
        return n * log_c + (n / 4.0 - 1.0) * log_z - math.lgamma(n / 4.0)

    cap = _GRONWALL_HARD_CAP if max_terms is None else int(max_terms)
    total = 0.0
    n = 1
    while n <= cap:
        total += math.exp(log_term(n))
        if max_terms is None and math.exp(log_term(n + 1)) < tol * abs(total):
            break
        n += 1
    else:
        if max_terms is None:
            raise SmpdeError(f"gronwall_series did not converge within {cap} terms")
    return total
