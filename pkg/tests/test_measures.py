import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smpde.errors import AlignmentError, MeasureError
from smpde.grid import Field, GridSpec
from smpde.measures import (
    MeasureSample,
    coarsen_sample,
    dyadic_energy,
    integrate_cellwise,
    measure_of,
    sample_alpha_stable,
    sample_deterministic_lebesgue,
    sample_fbm,
    sample_weighted_wiener,
    sample_wiener,
    tail_weight,
    unit_blocks,
)
from smpde.seeding import seed_split

_MASTER = 101


def _grid(x_min=0.0, x_max=4.0, nx=64):
    return GridSpec(x_min, x_max, nx, 0.01, 1)


class TestWiener:
    def test_cell_variance(self):
        # defining property: E[mu(cell)^2] = dx, pooled over 10^4 draws
        grid = _grid()
        sq = [
            sample_wiener(grid, seed_split(_MASTER, ("w", s))).increments ** 2
            for s in range(10_000)
        ]
        assert np.mean(sq) == pytest.approx(grid.dx, rel=0.05)

    def test_unit_interval_variance(self):
        grid = _grid()
        masses = [
            measure_of(sample_wiener(grid, seed_split(_MASTER, ("wu", s))), (0.0, 1.0))
            for s in range(10_000)
        ]
        assert np.var(masses) == pytest.approx(1.0, rel=0.05)

    def test_seed_determinism(self):
        grid = _grid()
        a = sample_wiener(grid, 7)
        b = sample_wiener(grid, 7)
        assert np.array_equal(a.increments, b.increments)


class TestWeightedWiener:
    def test_constant_weight_reduces_to_wiener(self):
        grid = _grid()
        sq = [
            sample_weighted_wiener(
                grid, {"kind": "constant", "value": 1.0}, seed_split(_MASTER, ("c", s))
            ).increments
            ** 2
            for s in range(4000)
        ]
        assert np.mean(sq) == pytest.approx(grid.dx, rel=0.05)

    def test_gaussian_weight_unit_interval_variance(self):
        # quadrature oracle: Var mu((0,1]) = int_0^1 exp(-2 t^2) dt
        from scipy.integrate import quad

        oracle = quad(lambda t: math.exp(-2.0 * t * t), 0.0, 1.0)[0]
        grid = _grid()
        masses = [
            measure_of(
                sample_weighted_wiener(grid, {"kind": "gaussian"}, seed_split(_MASTER, ("g", s))),
                (0.0, 1.0),
            )
            for s in range(10_000)
        ]
        assert np.var(masses) == pytest.approx(oracle, rel=0.05)
        assert oracle == pytest.approx(0.5981440066613041, rel=1e-12)

    def test_zero_weight(self):
        grid = _grid()
        s = sample_weighted_wiener(grid, {"kind": "constant", "value": 0.0}, 3)
        assert np.all(s.increments == 0.0)

    def test_unknown_family_rejected(self):
        with pytest.raises(MeasureError):
            sample_weighted_wiener(_grid(), {"kind": "sawtooth"}, 1)


class TestFbm:
    def test_adjacent_unit_covariance(self):
        # closed form: Cov of adjacent unit increments = (2^(2H) - 2) / 2
        hurst = 0.75
        oracle = (2.0 ** (2 * hurst) - 2.0) / 2.0
        assert oracle == pytest.approx(0.41421356237309515, rel=1e-12)
        grid = _grid()
        m1, m2 = [], []
        for s in range(8000):
            smp = sample_fbm(grid, hurst, seed_split(_MASTER, ("f", s)))
            m1.append(measure_of(smp, (0.0, 1.0)))
            m2.append(measure_of(smp, (1.0, 2.0)))
        m1, m2 = np.asarray(m1), np.asarray(m2)
        cov = np.mean(m1 * m2) - np.mean(m1) * np.mean(m2)
        assert cov == pytest.approx(oracle, rel=0.05)
        assert np.var(m1) == pytest.approx(1.0, rel=0.05)

    def test_hurst_range_enforced(self):
        for bad in (0.5, 0.3, 1.0, 1.2):
            with pytest.raises(MeasureError):
                sample_fbm(_grid(), bad, 1)

    def test_seed_determinism(self):
        grid = _grid()
        assert np.array_equal(
            sample_fbm(grid, 0.8, 5).increments, sample_fbm(grid, 0.8, 5).increments
        )


class TestAlphaStable:
    def test_alpha_two_is_gaussian(self):
        # scale convention: alpha = 2 gives variance 2 dx per cell
        grid = _grid()
        sq = [
            sample_alpha_stable(grid, 2.0, seed_split(_MASTER, ("a", s))).increments ** 2
            for s in range(4000)
        ]
        assert np.mean(sq) == pytest.approx(2.0 * grid.dx, rel=0.05)

    def test_median_scales_with_cell_size(self):
        # Monte Carlo scaling oracle: median |mu(cell)| ~ dx^(1/alpha)
        alpha = 1.5
        coarse, fine = _grid(nx=64), _grid(nx=256)
        med_c = np.median(
            np.abs(
                np.concatenate(
                    [
                        sample_alpha_stable(coarse, alpha, seed_split(_MASTER, ("s", s))).increments
                        for s in range(200)
                    ]
                )
            )
        )
        med_f = np.median(
            np.abs(
                np.concatenate(
                    [
                        sample_alpha_stable(fine, alpha, seed_split(_MASTER, ("t", s))).increments
                        for s in range(200)
                    ]
                )
            )
        )
        expected = 4.0 ** (1.0 / alpha)
        assert med_c / med_f == pytest.approx(expected, rel=0.10)

    def test_parameter_range(self):
        for bad in (1.0, 0.0, -0.5, 2.5):
            with pytest.raises(MeasureError):
                sample_alpha_stable(_grid(), bad, 1)

    def test_seed_determinism(self):
        grid = _grid()
        assert np.array_equal(
            sample_alpha_stable(grid, 1.5, 9).increments,
            sample_alpha_stable(grid, 1.5, 9).increments,
        )


class TestMeasureOf:
    def test_full_domain(self):
        grid = _grid()
        s = sample_wiener(grid, 1)
        assert measure_of(s, (0.0, 4.0)) == pytest.approx(float(np.sum(s.increments)))

    def test_empty_interval(self):
        s = sample_wiener(_grid(), 1)
        assert measure_of(s, (1.0, 1.0)) == 0.0

    def test_adjacent_additivity(self):
        grid = _grid()
        s = sample_wiener(grid, 2)
        dx = grid.dx
        a = measure_of(s, (0.0, dx))
        b = measure_of(s, (dx, 2 * dx))
        assert measure_of(s, (0.0, 2 * dx)) == pytest.approx(a + b, abs=1e-15)

    def test_misaligned_rejected(self):
        s = sample_wiener(_grid(), 1)
        with pytest.raises(AlignmentError):
            measure_of(s, (0.0, 1.03))

    def test_partition_additivity_compensated(self):
        # additivity is exact up to summation order; compare via fsum
        grid = _grid(nx=256)
        s = sample_wiener(grid, 11)
        total = measure_of(s, (0.0, 4.0))
        parts = [measure_of(s, (j, j + 0.5)) for j in np.arange(0.0, 4.0, 0.5)]
        assert abs(total - math.fsum(parts)) < 1e-12


class TestDyadicEnergy:
    def test_zero_measure(self, unit_grid):
        zero = MeasureSample(unit_grid, "wiener", {}, 0, np.zeros(unit_grid.nx))
        assert dyadic_energy(zero, 0.0, 0.75) == 0.0

    def test_lebesgue_geometric_series(self, unit_grid):
        # closed-form oracle: depth-n term is 2^(-2 n alpha); truncation at
        # n_max = log2(cells per unit interval) = 10
        alpha = 0.75
        oracle = sum(2.0 ** (-2 * n * alpha) for n in range(1, 11))
        value = dyadic_energy(sample_deterministic_lebesgue(unit_grid), 0.0, alpha)
        assert value == pytest.approx(oracle, rel=1e-12)
        assert oracle == pytest.approx(0.5469014700603307, rel=1e-12)

    def test_wiener_expectation(self, unit_grid):
        # E |mu(D)|^2 = |D| collapses each depth to 2^(n(1-2a)); truncated sum
        alpha = 0.75
        oracle = sum(2.0 ** (n * (1 - 2 * alpha)) for n in range(1, 11))
        vals = [
            dyadic_energy(sample_wiener(unit_grid, seed_split(_MASTER, ("d", s))), 0.0, alpha)
            for s in range(10_000)
        ]
        assert np.mean(vals) == pytest.approx(oracle, rel=0.05)

    def test_monotone_in_depth(self, unit_grid):
        s = sample_wiener(unit_grid, 21)
        values = [dyadic_energy(s, 0.0, 0.75, n_max=n) for n in range(1, 11)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_alpha_range(self, unit_grid):
        s = sample_wiener(unit_grid, 2)
        for bad in (0.5, 1.0, 0.2):
            with pytest.raises(MeasureError):
                dyadic_energy(s, 0.0, bad)


class TestTailWeight:
    def test_zero_measure(self, unit_grid):
        zero = MeasureSample(unit_grid, "wiener", {}, 0, np.zeros(unit_grid.nx))
        assert tail_weight(zero, 2.0) == 0.0

    def test_single_unit_increment(self):
        grid = _grid()
        inc = np.zeros(grid.nx)
        inc[3] = 1.0  # inside (0, 1]
        s = MeasureSample(grid, "wiener", {}, 0, inc)
        assert tail_weight(s, 2.0) == pytest.approx(1.0)

    def test_wiener_expectation_default_box(self):
        # direct sum oracle over the snapped unit blocks of [-10, 10]
        grid = GridSpec(-10.0, 10.0, 1024, 1.0, 1)
        oracle = sum(
            (abs(b.j) + 1.0) ** 2 * (b.stop - b.start) * grid.dx for b in unit_blocks(grid)
        )
        vals = [
            tail_weight(sample_wiener(grid, seed_split(_MASTER, ("tw", s))), 2.0)
            for s in range(4000)
        ]
        assert np.mean(vals) == pytest.approx(oracle, rel=0.05)

    def test_theta_range(self):
        with pytest.raises(MeasureError):
            tail_weight(sample_wiener(_grid(), 1), 1.0)

    def test_square_summability_proxy(self):
        # partial sums of (|j|+1)^theta mu_j^2 should have converged before
        # the box boundary for the gaussian-weighted measure
        grid = GridSpec(-10.0, 10.0, 1024, 1.0, 1)
        good = 0
        for s in range(100):
            smp = sample_weighted_wiener(grid, {"kind": "gaussian"}, seed_split(_MASTER, ("sq", s)))
            blocks = unit_blocks(grid)
            terms = []
            for b in sorted(blocks, key=lambda b: abs(b.j) + (0.5 if b.j >= 0 else 0)):
                mass = float(np.sum(smp.increments[b.start : b.stop]))
                terms.append((abs(b.j) + 1.0) ** 2 * mass**2)
            total = sum(terms)
            tail = sum(terms[-2:])  # outermost blocks
            good += tail < 0.01 * total
        assert good >= 95


class TestIntegrateCellwise:
    def test_constant_one(self):
        grid = _grid()
        s = sample_wiener(grid, 4)
        one = Field(grid, np.ones(grid.nx))
        assert integrate_cellwise(s, one) == pytest.approx(float(np.sum(s.increments)))

    def test_indicator_matches_measure_of(self):
        grid = _grid()
        s = sample_wiener(grid, 5)
        vals = ((grid.x_centers() > 1.0) & (grid.x_centers() < 2.0)).astype(float)
        ind = Field(grid, vals)
        assert integrate_cellwise(s, ind) == pytest.approx(measure_of(s, (1.0, 2.0)))

    @settings(max_examples=30, deadline=None)
    @given(
        a=st.floats(-10, 10, allow_nan=False),
        b=st.floats(-10, 10, allow_nan=False),
        seed=st.integers(0, 2**31),
    )
    def test_linearity_exact(self, a, b, seed):
        grid = _grid(nx=64)
        s = sample_wiener(grid, 6)
        rng = np.random.default_rng(seed)
        f = Field(grid, rng.normal(size=grid.nx))
        g = Field(grid, rng.normal(size=grid.nx))
        combo = Field(grid, a * f.values + b * g.values)
        lhs = integrate_cellwise(s, combo)
        rhs = a * integrate_cellwise(s, f) + b * integrate_cellwise(s, g)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_grid_mismatch(self):
        s = sample_wiener(_grid(), 1)
        other = Field(_grid(nx=128), np.zeros(128))
        with pytest.raises(AlignmentError):
            integrate_cellwise(s, other)


class TestCoarsen:
    def test_preserves_interval_masses(self):
        grid = _grid(nx=256)
        s = sample_wiener(grid, 12)
        c = coarsen_sample(s, 4)
        for interval in [(0.0, 1.0), (1.0, 3.0), (0.0, 4.0)]:
            assert measure_of(c, interval) == pytest.approx(
                measure_of(s, interval), abs=1e-12
            )
