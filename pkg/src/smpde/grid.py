"""Space-time lattice and discrete field arithmetic.

The computational domain is a truncation of the real line, ``[x_min, x_max]``,
split into ``nx`` equal cells, crossed with the time interval ``[0, t_max]``
split into ``nt`` steps.  Fields are sampled at cell centers; the discrete
``L^p`` norms below use the rectangle rule, which is exact for functions that
are piecewise constant on cells.  That convention matches the cell structure
of measure samples, so field/measure pairings never interpolate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import GridError

__all__ = [
    "GridSpec",
    "Field",
    "SpaceTimeField",
    "l2_norm",
    "l4_norm",
    "sup_norm",
    "l1_norm",
    "l2_distance",
]

# Mass of the t_max heat kernel allowed to leak outside the box before the
# grid constructor warns that the truncation is too tight.
_BOX_MASS_TOL = 1e-8


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Truncated space-time lattice.

    Parameters
    ----------
    x_min, x_max : float
        Spatial box; ``x_min < x_max``.
    nx : int
        Number of spatial cells, a power of two (keeps dyadic partitions of
        cell blocks exact).
    t_max : float
        Time horizon, positive.
    nt : int
        Number of time steps.
    """

    x_min: float
    x_max: float
    nx: int
    t_max: float
    nt: int

    def __post_init__(self):
        if not (self.x_min < self.x_max):
            raise GridError(f"x_min must be < x_max, got [{self.x_min}, {self.x_max}]")
        if self.nx < 2 or not _is_power_of_two(self.nx):
            raise GridError(f"nx must be a power of two >= 2, got {self.nx}")
        if self.nt < 1:
            raise GridError(f"nt must be >= 1, got {self.nt}")
        if not (self.t_max > 0):
            raise GridError(f"t_max must be positive, got {self.t_max}")
        # Gaussian tail outside the box for the widest kernel used in a run.
        half = (self.x_max - self.x_min) / 2.0
        leaked = math.erfc(half / (2.0 * math.sqrt(self.t_max)))
        if leaked > _BOX_MASS_TOL:
            warnings.warn(
                f"heat kernel at t={self.t_max} leaks mass {leaked:.2e} outside "
                f"the box [{self.x_min}, {self.x_max}]; widen the box",
                stacklevel=2,
            )

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dt(self) -> float:
        return self.t_max / self.nt

    def x_centers(self) -> np.ndarray:
        """Cell-center coordinates, shape ``(nx,)``."""
        i = np.arange(self.nx)
        return self.x_min + (i + 0.5) * self.dx

    def t_levels(self) -> np.ndarray:
        """Time levels ``0, dt, ..., t_max``, shape ``(nt+1,)``."""
        return np.arange(self.nt + 1) * self.dt

    def boundary_index(self, x: float, tol_cells: float = 1e-6) -> int:
        """Cell-boundary index of coordinate ``x``.

        Raises ``GridError`` unless ``x`` sits within ``tol_cells`` cells of a
        cell boundary.
        """
        pos = (x - self.x_min) / self.dx
        idx = round(pos)
        if abs(pos - idx) > tol_cells:
            raise GridError(f"coordinate {x} is not aligned to a cell boundary")
        if not (0 <= idx <= self.nx):
            raise GridError(f"coordinate {x} lies outside the box")
        return int(idx)

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "nx": self.nx,
            "t_max": self.t_max,
            "nt": self.nt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(
            x_min=float(d["x_min"]),
            x_max=float(d["x_max"]),
            nx=int(d["nx"]),
            t_max=float(d["t_max"]),
            nt=int(d["nt"]),
        )


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Field:
    """One time slice of a solution: samples at cell centers."""

    grid: GridSpec
    values: np.ndarray
    t_label: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.nx,):
            raise GridError(f"field length {v.shape} != (nx,) = ({self.grid.nx},)")
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        object.__setattr__(self, "values", _freeze(v))

    def with_values(self, values: np.ndarray, t_label: float | None = None) -> "Field":
        return Field(self.grid, values, self.t_label if t_label is None else t_label)


@dataclass(frozen=True)
class SpaceTimeField:
    """Solution on the full lattice: row ``i`` is the slice at ``t = i*dt``.

    Row 0 is, by construction of every producer in this package, the initial
    condition of the run that made it.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        expected = (self.grid.nt + 1, self.grid.nx)
        if v.shape != expected:
            raise GridError(f"space-time field shape {v.shape} != {expected}")
        if not np.all(np.isfinite(v)):
            raise GridError("space-time field contains non-finite values")
        object.__setattr__(self, "values", _freeze(v))

    def slice_at(self, t_index: int) -> Field:
        if not (0 <= t_index <= self.grid.nt):
            raise GridError(f"t_index {t_index} outside 0..{self.grid.nt}")
        return Field(self.grid, self.values[t_index], t_index * self.grid.dt)

    def slice_norms(self) -> np.ndarray:
        """Discrete L2 norm of every time slice, shape ``(nt+1,)``."""
        dx = self.grid.dx
        return np.sqrt(dx * np.sum(self.values**2, axis=1))


def _check_field(f: Field):
    if not isinstance(f, Field):
        raise GridError(f"expected Field, got {type(f).__name__}")
    if not np.all(np.isfinite(f.values)):
        raise GridError("field contains non-finite values")


def l2_norm(f: Field) -> float:
    """Discrete L2 norm: ``sqrt(dx * sum(values^2))``."""
    _check_field(f)
    return float(np.sqrt(f.grid.dx * np.sum(f.values**2)))


def l4_norm(f: Field) -> float:
    """Discrete L4 norm: ``(dx * sum(values^4))^(1/4)``."""
    _check_field(f)
    return float((f.grid.dx * np.sum(f.values**4)) ** 0.25)


def sup_norm(f: Field) -> float:
    """Max of absolute values over the grid."""
    _check_field(f)
    return float(np.max(np.abs(f.values))) if f.grid.nx else 0.0


def l1_norm(f: Field) -> float:
    """Discrete L1 norm: ``dx * sum(|values|)``."""
    _check_field(f)
    return float(f.grid.dx * np.sum(np.abs(f.values)))


def l2_distance(f: Field, g: Field) -> float:
    """L2 norm of the difference; the operands must share a grid."""
    _check_field(f)
    _check_field(g)
    if f.grid != g.grid:
        raise GridError("l2_distance requires both fields on one grid")
    return float(np.sqrt(f.grid.dx * np.sum((f.values - g.values) ** 2)))
