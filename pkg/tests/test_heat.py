import math

import numpy as np
import pytest

from smpde.errors import GridError
from smpde.grid import Field, GridSpec, SpaceTimeField, l1_norm, l2_norm
from smpde.heat import (
    apply_semigroup,
    j1,
    j1_all,
    j2,
    j2_all,
    kernel,
    kernel_dx,
    tables_for,
)

from .conftest import random_field


class TestKernel:
    def test_peak_value(self):
        assert kernel(1.0, 0.0) == pytest.approx(1.0 / (2.0 * math.sqrt(math.pi)), rel=1e-14)
        assert kernel(1.0, 0.0) == pytest.approx(0.28209479177387814, rel=1e-14)

    def test_unit_mass_over_box(self, default_grid):
        x = default_grid.x_centers()
        for t in (0.01, 0.05, 0.25, 1.0):
            mass = default_grid.dx * float(np.sum(kernel(t, x)))
            assert mass == pytest.approx(1.0, abs=1e-8)

    def test_even_symmetry_exact(self):
        xs = np.linspace(0.1, 9.7, 57)
        assert np.array_equal(kernel(0.37, xs), kernel(0.37, -xs))

    def test_positive(self, default_grid):
        assert np.all(kernel(0.2, default_grid.x_centers()) > 0)

    def test_requires_positive_time(self):
        for t in (0.0, -1.0):
            with pytest.raises(GridError):
                kernel(t, 0.0)
            with pytest.raises(GridError):
                kernel_dx(t, 0.0)


class TestKernelDx:
    def test_odd_at_origin(self):
        assert kernel_dx(0.5, 0.0) == 0.0

    def test_formula_value(self):
        # cross-checked against a central finite difference of the kernel
        h = 1e-5
        fd = (kernel(1.0, 2.0 + h) - kernel(1.0, 2.0 - h)) / (2 * h)
        val = kernel_dx(1.0, 2.0)
        assert val == pytest.approx(fd, rel=1e-6)
        assert val == pytest.approx(-0.10377687435514868, rel=1e-12)

    def test_odd_symmetry(self):
        xs = np.linspace(0.05, 8.0, 33)
        assert np.allclose(kernel_dx(0.7, xs), -kernel_dx(0.7, -xs), rtol=0, atol=0)

    def test_exponential_bound_sweep(self):
        # |p_x(t,x)| <= C_lam / t * exp(-lam x^2 / t): fit C on one lattice,
        # verify with margin on a finer, shifted one (log space, the exp
        # weight overflows for x^2/t large)
        lam = 0.2

        def fit(ts, xs):
            tt, xx = np.meshgrid(ts, xs, indexing="ij")
            xx = np.where(xx == 0.0, 1e-300, xx)
            log_px = (
                np.log(np.abs(xx))
                - np.log(2.0 * tt)
                - xx**2 / (4.0 * tt)
                - np.log(2.0 * np.sqrt(np.pi * tt))
            )
            log_ratio = log_px + np.log(tt) + lam * xx**2 / tt
            return float(np.max(log_ratio))

        log_c_fit = fit(np.linspace(0.01, 1.0, 40), np.linspace(-10, 10, 201))
        log_c_check = fit(np.linspace(0.013, 0.97, 73), np.linspace(-9.7, 9.9, 401))
        assert math.isfinite(log_c_fit)
        assert log_c_check <= log_c_fit + math.log(1.05)


class TestSemigroup:
    def test_zero_initial(self, default_grid):
        z = Field(default_grid, np.zeros(default_grid.nx))
        assert np.all(apply_semigroup(z, 0.3).values == 0.0)

    def test_t_zero_is_identity(self, default_grid):
        f = random_field(default_grid, 5)
        out = apply_semigroup(f, 0.0)
        assert np.array_equal(out.values, f.values)

    def test_heat_kernel_evolution(self, default_grid):
        x = default_grid.x_centers()
        u0 = Field(default_grid, kernel(1.0, x))
        for t in (0.25, 1.0):
            out = apply_semigroup(u0, t)
            assert np.max(np.abs(out.values - kernel(1.0 + t, x))) < 1e-6

    def test_semigroup_composition(self, default_grid):
        x = default_grid.x_centers()
        u0 = Field(default_grid, kernel(1.0, x))
        once = apply_semigroup(u0, 0.75)
        twice = apply_semigroup(apply_semigroup(u0, 0.3), 0.45)
        assert np.max(np.abs(once.values - twice.values)) < 1e-6

    def test_indicator_closed_form(self):
        # error-function oracle for p(t, .) * 1_[0,1]; fine grid because the
        # cell-center rule resolves the jump at O(dx^2)
        from scipy.stats import norm as gauss

        grid = GridSpec(-3.0, 5.0, 8192, 0.2, 4)
        x = grid.x_centers()
        ind = Field(grid, ((x > 0.0) & (x < 1.0)).astype(float))
        t = 0.1
        out = apply_semigroup(ind, t)
        sd = math.sqrt(2.0 * t)
        oracle = gauss.cdf(x / sd) - gauss.cdf((x - 1.0) / sd)
        i_mid = np.argmin(np.abs(x - 0.5))
        assert out.values[i_mid] == pytest.approx(oracle[i_mid], rel=1e-6)
        assert np.max(np.abs(out.values - oracle)) / np.max(oracle) < 1e-6

    def test_l2_norm_power_law(self, default_grid):
        # ||p(t,.)||_L2^2 = t^(-1/2) / (2 sqrt(2 pi)): slope -1/2 on log-log
        x = default_grid.x_centers()
        ts = np.logspace(math.log10(0.01), 0.0, 25)
        sq = [l2_norm(Field(default_grid, kernel(t, x))) ** 2 for t in ts]
        slope = np.polyfit(np.log(ts), np.log(sq), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.01)
        c = sq[0] * math.sqrt(ts[0])
        assert c == pytest.approx(1.0 / (2.0 * math.sqrt(2.0 * math.pi)), rel=1e-6)

    def test_youngs_inequality_proxy(self, default_grid):
        tables = tables_for(default_grid)
        rng = np.random.default_rng(8)
        for t in (0.05, 0.4):
            w = Field(default_grid, rng.normal(size=default_grid.nx))
            conv = Field(default_grid, tables.convolve(t, w.values, "p"))
            bound = l2_norm(Field(default_grid, kernel(t, default_grid.x_centers()))) * l1_norm(w)
            assert l2_norm(conv) <= bound * (1.0 + 1e-10)


def _space_time(grid, fn):
    rows = np.stack([fn(s, grid.x_centers()) for s in grid.t_levels()])
    return SpaceTimeField(grid, rows)


class TestJ1:
    def test_zero(self, small_grid):
        z = SpaceTimeField(small_grid, np.zeros((small_grid.nt + 1, small_grid.nx)))
        assert np.all(j1_all(z).values == 0.0)

    def test_constant_integrates_to_t(self, default_grid):
        ones = SpaceTimeField(default_grid, np.ones((default_grid.nt + 1, default_grid.nx)))
        out = j1_all(ones)
        interior = np.abs(default_grid.x_centers()) < 5.0
        for i in (64, 256):
            t = i * default_grid.dt
            rel = np.max(np.abs(out.values[i][interior] - t)) / t
            assert rel < 1e-3

    def test_slice_matches_all(self, small_grid):
        v = _space_time(small_grid, lambda s, x: np.sin(x) * (1 + s))
        sliced = j1(v, 17)
        assert np.array_equal(sliced.values, j1_all(v).values[17])
        assert sliced.t_label == pytest.approx(17 * small_grid.dt)

    def test_time_continuity_fit_validate(self):
        # ||J1 v(t) - J1 v(r)|| <= C |t-r|^(1/3) (int_0^t ||v||^2 ds)^(1/2):
        # fit C on one configuration, verify with margin on another
        def max_ratio(grid, seed):
            rng = np.random.default_rng(seed)
            coef = rng.normal(size=4)
            v = _space_time(
                grid,
                lambda s, x: coef[0] * np.exp(-(x**2))
                + coef[1] * np.sin(x + coef[2] * s)
                + coef[3] * np.cos(s) * np.exp(-((x - 1) ** 2) / 4),
            )
            out = j1_all(v)
            norms_sq = grid.dx * np.sum(v.values**2, axis=1)
            cum = np.concatenate([[0.0], np.cumsum(norms_sq) * grid.dt])
            best = 0.0
            idx = range(0, grid.nt + 1, max(1, grid.nt // 16))
            for i in idx:
                for r in idx:
                    if i <= r:
                        continue
                    diff = math.sqrt(grid.dx * np.sum((out.values[i] - out.values[r]) ** 2))
                    denom = abs(i - r) * grid.dt
                    envelope = denom ** (1.0 / 3.0) * math.sqrt(cum[i])
                    if envelope > 0:
                        best = max(best, diff / envelope)
            return best

        c_fit = max_ratio(GridSpec(-10.0, 10.0, 256, 1.0, 64), seed=1)
        c_val = max_ratio(GridSpec(-10.0, 10.0, 512, 0.5, 48), seed=2)
        assert c_val <= 1.5 * c_fit


class TestJ2:
    def test_zero(self, small_grid):
        z = SpaceTimeField(small_grid, np.zeros((small_grid.nt + 1, small_grid.nx)))
        assert np.all(j2_all(z).values == 0.0)

    def test_constant_annihilated_in_interior(self, default_grid):
        ones = SpaceTimeField(default_grid, np.ones((default_grid.nt + 1, default_grid.nx)))
        out = j2_all(ones)
        interior = np.abs(default_grid.x_centers()) < 5.0
        assert np.max(np.abs(out.values[-1][interior])) < 1e-3

    def test_kernel_evolution_oracle(self):
        # for w(s, y) = p(s0 + s, y) the y-integral collapses through the
        # composition law, leaving -t * p_x(t + s0, x)
        grid = GridSpec(-8.0, 8.0, 512, 0.5, 1024)
        x = grid.x_centers()
        s0 = 0.5
        w = _space_time(grid, lambda s, xs: kernel(s0 + max(s, 0.0) + 1e-30, xs))
        out = j2_all(w)
        i = grid.nt
        t = i * grid.dt
        ref = -t * kernel_dx(t + s0, x)
        scale = np.max(np.abs(ref))
        assert np.max(np.abs(out.values[i] - ref)) / scale < 1e-3

    def test_slice_matches_all(self, small_grid):
        w = _space_time(small_grid, lambda s, x: np.cos(x) * (1 - s / 2))
        assert np.array_equal(j2(w, 9).values, j2_all(w).values[9])

    def test_first_order_convergence(self):
        # successive-difference ratio under dt halving stays near 2
        def run(nt):
            grid = GridSpec(-8.0, 8.0, 256, 0.5, nt)
            w = _space_time(grid, lambda s, x: kernel(0.3 + s + 1e-30, x) * (1.0 + s))
            return j2_all(w).values[-1]

        coarse, mid, fine = run(32), run(64), run(128)
        d1 = np.max(np.abs(coarse - mid))
        d2 = np.max(np.abs(mid - fine))
        assert 1.7 <= d1 / d2 <= 2.3


class TestFastPathAgreement:
    def test_semigroup_direct_vs_fft(self):
        grid = GridSpec(-10.0, 10.0, 128, 1.0, 8)
        f = random_field(grid, 3)
        a = apply_semigroup(f, 0.37, mode="fft").values
        b = apply_semigroup(f, 0.37, mode="direct").values
        assert np.max(np.abs(a - b)) < 1e-10

    def test_j1_direct_vs_fft(self):
        grid = GridSpec(-10.0, 10.0, 64, 1.0, 16)
        rng = np.random.default_rng(4)
        v = SpaceTimeField(grid, rng.normal(size=(grid.nt + 1, grid.nx)))
        assert np.max(np.abs(j1_all(v).values - j1_all(v, mode="direct").values)) < 1e-10

    def test_j2_direct_vs_fft(self):
        grid = GridSpec(-10.0, 10.0, 64, 1.0, 16)
        rng = np.random.default_rng(5)
        w = SpaceTimeField(grid, rng.normal(size=(grid.nt + 1, grid.nx)))
        assert np.max(np.abs(j2_all(w).values - j2_all(w, mode="direct").values)) < 1e-10
