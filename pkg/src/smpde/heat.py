"""Heat kernel, its spatial derivative, and the three convolution operators.

The kernel is ``p(t, x) = exp(-x^2 / (4t)) / (2 sqrt(pi t))`` with derivative
``p_x(t, x) = -x/(2t) * p(t, x)``.  Spatial convolutions sample the kernel on
the lag lattice ``(i - j) * dx`` (cell-center sampling, consistent with the
grid convention) and evaluate either by direct summation or through an FFT
fast path; the two paths agree to 1e-10 and the direct path is the
correctness reference.

Time integration of the Duhamel operators uses a composite rule over the
grid's time steps: on each step the kernel is evaluated at the midpoint lag
and the integrand field at the step's left level (explicit in the stored
iterate, first order).  The derivative kernel concentrates like
``(t-s)^(-1)`` as ``s -> t``, so the final step of the gradient operator is
integrated in the variable ``tau = sqrt(t - s)``, which removes the
quadrature blow-up without special-casing.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.fft import next_fast_len, rfft, irfft, fft, ifft

from .errors import GridError
from .grid import Field, GridSpec, SpaceTimeField

__all__ = [
    "kernel",
    "kernel_dx",
    "apply_semigroup",
    "j1",
    "j2",
    "j1_all",
    "j2_all",
    "KernelTables",
    "tables_for",
    "tau_nodes",
]

# Below this t the kernel is narrower than any representable cell; treat it
# as an exact Dirac (identity on the grid).
T_DIRAC = 1e-12

# Sub-nodes of the tau = sqrt(t-s) substitution on the singular final step.
MTAU_DEFAULT = 8


def kernel(t, x):
    """Heat kernel ``p(t, x)``; requires ``t > 0``."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0):
        raise GridError(f"heat kernel requires t > 0, got {t}")
    x_arr = np.asarray(x, dtype=np.float64)
    out = np.exp(-(x_arr**2) / (4.0 * t_arr)) / (2.0 * np.sqrt(np.pi * t_arr))
    return out if out.ndim else float(out)


def kernel_dx(t, x):
    """Spatial derivative of the heat kernel: ``-x/(2t) * p(t, x)``."""
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr <= 0):
        raise GridError(f"heat kernel derivative requires t > 0, got {t}")
    x_arr = np.asarray(x, dtype=np.float64)
    out = -x_arr / (2.0 * t_arr) * np.exp(-(x_arr**2) / (4.0 * t_arr)) / (
        2.0 * np.sqrt(np.pi * t_arr)
    )
    return out if out.ndim else float(out)


class KernelTables:
    """Kernel rows on a grid's lag lattice, with cached spectra.

    A row holds ``K(r, (k - (nx-1)) * dx)`` for ``k = 0 .. 2nx-2``.  The FFT
    path caches the padded real-FFT of each row keyed on the exact bit
    pattern of ``r``; the direct path reuses the same rows with
    ``np.convolve``.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        self.nx = grid.nx
        self.lags = (np.arange(2 * grid.nx - 1) - (grid.nx - 1)) * grid.dx
        self.nfft = next_fast_len(3 * grid.nx - 2)
        self._hat_cache: dict[tuple, np.ndarray] = {}

    def row(self, r: float, kind: str) -> np.ndarray:
        fn = kernel if kind == "p" else kernel_dx
        return fn(r, self.lags)

    def row_hat(self, r: float, kind: str) -> np.ndarray:
        key = (kind, float(r).hex())
        hat = self._hat_cache.get(key)
        if hat is None:
            hat = rfft(self.row(r, kind), n=self.nfft)
            hat.flags.writeable = False
            self._hat_cache[key] = hat
        return hat

    def convolve_hat(self, out_hat: np.ndarray) -> np.ndarray:
        """Inverse transform and extract the centered length-nx window."""
        full = irfft(out_hat, n=self.nfft)
        return full[self.nx - 1 : 2 * self.nx - 1] * self.grid.dx

    def field_hat(self, values: np.ndarray) -> np.ndarray:
        return rfft(values, n=self.nfft, axis=-1)

    def convolve(self, r: float, values: np.ndarray, kind: str, mode: str = "fft") -> np.ndarray:
        """``dx * sum_j K(r, x_i - y_j) values[j]`` for all cell centers i."""
        if mode == "direct":
            row = self.row(r, kind)
            return np.convolve(values, row)[self.nx - 1 : 2 * self.nx - 1] * self.grid.dx
        return self.convolve_hat(self.row_hat(r, kind) * self.field_hat(values))


@lru_cache(maxsize=8)
def _tables_for(grid: GridSpec) -> KernelTables:
    return KernelTables(grid)


def tables_for(grid: GridSpec) -> KernelTables:
    return _tables_for(grid)


def tau_nodes(h: float, mtau: int = MTAU_DEFAULT):
    """Midpoint nodes of ``int_0^h K(r) dr`` after ``r = tau^2``.

    Returns ``(r_nodes, weights)`` with ``r = tau_k^2`` and weight
    ``2 tau_k * dtau``; exact for the pure ``r^(-1/2)`` singularity.
    """
    dtau = math.sqrt(h) / mtau
    tau = (np.arange(mtau) + 0.5) * dtau
    return tau**2, 2.0 * tau * dtau


def apply_semigroup(u0: Field, t: float, mode: str = "fft") -> Field:
    """Convolve the initial slice with the heat kernel at time ``t``.

    ``t = 0`` (or below the Dirac clamp) returns the input unchanged.
    """
    if t < 0:
        raise GridError(f"apply_semigroup requires t >= 0, got {t}")
    if t <= T_DIRAC:
        return Field(u0.grid, u0.values, u0.t_label)
    tables = tables_for(u0.grid)
    out = tables.convolve(t, u0.values, "p", mode=mode)
    return Field(u0.grid, out, u0.t_label + t)


def _layered_fft(khat_rows: np.ndarray, level_hats: np.ndarray, n_out: int) -> np.ndarray:
    """All partial lag convolutions ``C[m] = sum_{l+j=m} K[l] * F[j]``.

    ``khat_rows`` and ``level_hats`` are ``(L, nf)`` stacks; returns the
    first ``n_out`` coefficient rows of their polynomial product along the
    time axis (one complex FFT per spectral column, zero-padded so no
    wrap-around reaches the kept rows).
    """
    L = khat_rows.shape[0]
    if L == 0:
        return np.zeros((n_out, level_hats.shape[1]), dtype=np.complex128)
    pad = next_fast_len(2 * L)
    ta = fft(khat_rows, n=pad, axis=0)
    tb = fft(level_hats, n=pad, axis=0)
    prod = ifft(ta * tb, axis=0)
    return prod[:n_out]


def _duhamel_direct(w: SpaceTimeField, kind: str, singular_tail: bool, mtau: int) -> np.ndarray:
    """Reference-path Duhamel sum: direct convolutions, explicit loops."""
    grid = w.grid
    nt, h = grid.nt, grid.dt
    tables = tables_for(grid)
    out = np.zeros_like(w.values)
    r_tail, wts = tau_nodes(h, mtau)
    for i in range(1, nt + 1):
        acc = np.zeros(grid.nx)
        mid_stop = i - 1 if singular_tail else i
        for j in range(mid_stop):
            r = (i - j - 0.5) * h
            acc += h * tables.convolve(r, w.values[j], kind, mode="direct")
        if singular_tail:
            for r, wt in zip(r_tail, wts):
                acc += wt * tables.convolve(r, w.values[i - 1], kind, mode="direct")
        out[i] = acc
    return out


def _duhamel_fft(w: SpaceTimeField, kind: str, singular_tail: bool, mtau: int) -> np.ndarray:
    grid = w.grid
    nt, h = grid.nt, grid.dt
    tables = tables_for(grid)
    level_hats = tables.field_hat(w.values[:nt])
    khat = np.stack([tables.row_hat((l + 0.5) * h, kind) for l in range(nt)])
    if singular_tail:
        khat = khat.copy()
        khat[0] = 0.0
    coeffs = h * _layered_fft(khat, level_hats, nt)
    if singular_tail:
        r_tail, wts = tau_nodes(h, mtau)
        tail_hat = np.zeros(khat.shape[1], dtype=np.complex128)
        for r, wt in zip(r_tail, wts):
            tail_hat = tail_hat + wt * tables.row_hat(r, kind)
        coeffs = coeffs + tail_hat[None, :] * level_hats
    out = np.zeros_like(w.values)
    for i in range(1, nt + 1):
        out[i] = tables.convolve_hat(coeffs[i - 1])
    return out


def j1_all(v: SpaceTimeField, mode: str = "fft") -> SpaceTimeField:
    """Smoothing Duhamel operator on every time level.

    ``(J1 v)(t, x) = int_0^t (p(t-s, .) * v(s, .))(x) ds`` with the composite
    rule described in the module docstring (bounded kernel, plain steps).
    """
    run = _duhamel_direct if mode == "direct" else _duhamel_fft
    return SpaceTimeField(v.grid, run(v, "p", False, MTAU_DEFAULT))


def j2_all(w: SpaceTimeField, mode: str = "fft", mtau: int = MTAU_DEFAULT) -> SpaceTimeField:
    """Gradient Duhamel operator on every time level.

    ``(J2 w)(t, x) = int_0^t int (d/dy p)(t-s, x-y) w(s, y) dy ds`` where the
    derivative is taken in the ``y`` argument of ``p(t-s, x-y)``; the
    convolution kernel is therefore ``-p_x``.  The final step of each time
    integral uses the ``tau = sqrt(t-s)`` substitution.
    """
    run = _duhamel_direct if mode == "direct" else _duhamel_fft
    return SpaceTimeField(w.grid, -run(w, "px", True, mtau))


def j1(v: SpaceTimeField, t_index: int, mode: str = "fft") -> Field:
    """One time slice of ``j1_all`` (same quadrature, same arithmetic path)."""
    if not (0 <= t_index <= v.grid.nt):
        raise GridError(f"t_index {t_index} outside 0..{v.grid.nt}")
    return j1_all(v, mode=mode).slice_at(t_index)


def j2(w: SpaceTimeField, t_index: int, mode: str = "fft", mtau: int = MTAU_DEFAULT) -> Field:
    """One time slice of ``j2_all``."""
    if not (0 <= t_index <= w.grid.nt):
        raise GridError(f"t_index {t_index} outside 0..{w.grid.nt}")
    return j2_all(w, mode=mode, mtau=mtau).slice_at(t_index)
