import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smpde.besov import besov_norm, holder_fit, required_dyadic_constant, verify_dyadic_bound
from smpde.errors import AlignmentError, DegenerateInputError, MeasureError
from smpde.grid import Field, GridSpec
from smpde.measures import sample_wiener
from smpde.seeding import seed_split


def _field_on(grid, fn):
    return Field(grid, fn(grid.x_centers()))


class TestBesovNorm:
    def test_constant_has_zero_modulus(self):
        grid = GridSpec(0.0, 1.0, 64, 0.01, 1)
        est = besov_norm(_field_on(grid, lambda x: 3.0 * np.ones_like(x)), 0.6)
        assert est.modulus_part == 0.0
        assert est.total == est.l2_part == pytest.approx(3.0, rel=1e-12)

    def test_linear_ramp_against_fine_oracle(self):
        # oracle: the same estimator at 16x resolution
        alpha = 0.6
        coarse = GridSpec(0.0, 1.0, 512, 0.01, 1)
        fine = GridSpec(0.0, 1.0, 8192, 0.01, 1)
        est_c = besov_norm(_field_on(coarse, lambda x: x), alpha)
        est_f = besov_norm(_field_on(fine, lambda x: x), alpha)
        assert est_c.total == pytest.approx(est_f.total, rel=0.02)

    def test_spike_scaling(self):
        # single-cell spike of height 1/sqrt(dx): modulus ~ dx^(-alpha)
        alpha = 0.75

        def modulus(nx):
            grid = GridSpec(0.0, 1.0, nx, 0.01, 1)
            vals = np.zeros(nx)
            vals[nx // 2] = 1.0 / math.sqrt(grid.dx)
            return besov_norm(Field(grid, vals), alpha).modulus_part

        ratio = modulus(512) / modulus(256)
        assert ratio == pytest.approx(2.0**alpha, rel=0.15)

    def test_alpha_range_and_short_interval(self):
        grid = GridSpec(0.0, 1.0, 64, 0.01, 1)
        f = _field_on(grid, lambda x: x)
        with pytest.raises(MeasureError):
            besov_norm(f, 1.2)
        with pytest.raises(AlignmentError):
            besov_norm(f, 0.6, (0.0, 2 * grid.dx))

    def test_modulus_monotone_in_alpha(self):
        # r <= d - c <= 1 makes every weight r^(-2a-1) non-decreasing in a
        grid = GridSpec(0.0, 1.0, 256, 0.01, 1)
        rng = np.random.default_rng(3)
        f = Field(grid, rng.normal(size=grid.nx))
        alphas = np.linspace(0.1, 0.9, 9)
        parts = [besov_norm(f, a).modulus_part for a in alphas]
        assert all(b >= a for a, b in zip(parts, parts[1:]))


_G64 = GridSpec(0.0, 1.0, 64, 0.01, 1)
_vals64 = arrays(
    np.float64, 64, elements=st.floats(min_value=-100, max_value=100, allow_nan=False)
)


class TestBesovNormProperties:
    @settings(max_examples=40, deadline=None)
    @given(a=_vals64, lam=st.floats(-50, 50, allow_nan=False))
    def test_homogeneity(self, a, lam):
        t1 = besov_norm(Field(_G64, a), 0.7).total
        t2 = besov_norm(Field(_G64, lam * a), 0.7).total
        assert t2 == pytest.approx(abs(lam) * t1, rel=1e-10, abs=1e-10)

    @settings(max_examples=40, deadline=None)
    @given(a=_vals64, b=_vals64)
    def test_triangle(self, a, b):
        na = besov_norm(Field(_G64, a), 0.7).total
        nb = besov_norm(Field(_G64, b), 0.7).total
        nab = besov_norm(Field(_G64, a + b), 0.7).total
        assert nab <= na + nb + 1e-10 * (1 + na + nb)


class TestHolderFit:
    def test_linear_ramp(self):
        grid = np.linspace(0.0, 1.0, 256)
        exponent, se = holder_fit(grid, lags=range(1, 32), spacing=1.0)
        assert exponent == pytest.approx(1.0, abs=0.01)

    def test_brownian_path(self):
        rng = np.random.default_rng(12)
        n = 4096
        path = np.cumsum(rng.normal(size=n)) / math.sqrt(n)
        exponent, se = holder_fit(path, lags=range(1, 33), spacing=1.0 / n)
        assert exponent == pytest.approx(0.5, abs=0.1)

    def test_constant_raises_degenerate(self):
        with pytest.raises(DegenerateInputError):
            holder_fit(np.ones(64), lags=range(1, 17))

    def test_preconditions(self):
        with pytest.raises(MeasureError):
            holder_fit(np.arange(8.0), lags=range(1, 4))  # too few samples
        with pytest.raises(MeasureError):
            holder_fit(np.arange(64.0), lags=range(4, 8))  # lags span < decade


def _smooth_q(grid, seed):
    rng = np.random.default_rng(seed)
    x = grid.x_centers()
    vals = rng.normal() * np.ones_like(x)
    for k in range(1, 6):
        a, b = rng.normal(size=2)
        vals += (a * np.cos(2 * np.pi * k * x) + b * np.sin(2 * np.pi * k * x)) / k**1.2
    return Field(grid, vals)


class TestDyadicBound:
    def test_zero_q(self, unit_grid):
        mu = sample_wiener(unit_grid, 1)
        holds, slack = verify_dyadic_bound(
            Field(unit_grid, np.zeros(unit_grid.nx)), mu, 0.75, 1.0
        )
        assert holds and slack == 0.0

    def test_constant_q_reduces_to_first_term(self, unit_grid):
        mu = sample_wiener(unit_grid, 2)
        holds, slack = verify_dyadic_bound(
            Field(unit_grid, np.full(unit_grid.nx, 2.5)), mu, 0.75, 0.0
        )
        assert holds
        assert slack == pytest.approx(1.0, rel=1e-12)

    def test_slack_invariant_under_scaling(self, unit_grid):
        mu = sample_wiener(unit_grid, 3)
        q = _smooth_q(unit_grid, 4)
        _, s1 = verify_dyadic_bound(q, mu, 0.75, 1.0)
        _, s2 = verify_dyadic_bound(q.with_values(137.0 * q.values), mu, 0.75, 1.0)
        assert s2 == pytest.approx(s1, rel=1e-12)

    def test_alpha_range(self, unit_grid):
        mu = sample_wiener(unit_grid, 3)
        with pytest.raises(MeasureError):
            verify_dyadic_bound(_smooth_q(unit_grid, 1), mu, 0.4, 1.0)

    def test_calibration_protocol(self, unit_grid):
        # fit the minimal constant on 100 pairs; the doubled constant must
        # hold on 100 fresh pairs
        alpha = 0.75
        interval = (0.0, 1.0)
        fitted = []
        for i in range(100):
            q = _smooth_q(unit_grid, seed_split(77, ("cal-q", i)))
            mu = sample_wiener(unit_grid, seed_split(77, ("cal-mu", i)))
            fitted.append(required_dyadic_constant(q, mu, alpha, interval))
        c_fit = max(fitted)
        assert 0 < c_fit < math.inf

        held = 0
        for i in range(100):
            q = _smooth_q(unit_grid, seed_split(78, ("val-q", i)))
            mu = sample_wiener(unit_grid, seed_split(78, ("val-mu", i)))
            holds, _ = verify_dyadic_bound(q, mu, alpha, 2.0 * c_fit, interval)
            held += holds
        assert held >= 99
