"""Coefficient families for the equation and their declared bounds.

Every coefficient carries the growth/Lipschitz metadata the solver's theory
needs (bounding fields ``a_i``, ``b_i``, constants ``K``, ``L``, and for the
noise intensity the bound ``C_sigma``, the Hoelder constant ``L_sigma`` and
exponent ``beta``).  Declared bounds are spot-checked on a random lattice at
construction time, so a config that lies about its constants fails fast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import CoefficientError, GridError
from .grid import Field, GridSpec

__all__ = [
    "PhiSpec",
    "SigmaSpec",
    "CoefficientSet",
    "build_profile",
    "build_u0",
    "heat_coefficients",
    "burgers_coefficients",
    "custom_coefficients",
    "sigma_from_dict",
]

_SPOT_CHECK_TRIPLES = 1000
_SPOT_TOL = 1e-9


# ---------------------------------------------------------------------------
# scalar profiles c(y) used by sigma, drift scalings, and u0 presets

_PROFILES: dict[str, Callable] = {
    "one": lambda y, p: np.ones_like(y),
    "zero": lambda y, p: np.zeros_like(y),
    "constant": lambda y, p: np.full_like(y, float(p.get("value", 1.0))),
    "gaussian": lambda y, p: float(p.get("scale", 1.0))
    * np.exp(-((y - float(p.get("center", 0.0))) ** 2) / float(p.get("width", 1.0)) ** 2),
}


def build_profile(spec: dict | None) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized ``y -> c(y)`` from a small named family."""
    spec = spec or {"kind": "one"}
    kind = spec.get("kind")
    if kind not in _PROFILES:
        raise CoefficientError(f"unknown profile kind {kind!r}")
    fn = _PROFILES[kind]
    return lambda y, _fn=fn, _p=spec: _fn(np.asarray(y, dtype=np.float64), _p)


# ---------------------------------------------------------------------------
# periodic time factors phi(s)


@dataclass(frozen=True)
class PhiSpec:
    """Time factor of a separable noise intensity.

    ``kind`` one of ``one | constant | sin | cos | one_plus_sin | linear_drift``.
    ``linear_drift`` (phi(s) = s) is deliberately non-periodic; it exists to
    exercise the bounded-primitive check in the averaging module.
    """

    kind: str = "one"
    amplitude: float = 1.0
    period: float = 1.0
    offset: float = 0.0
    speed: float = 1.0

    def __post_init__(self):
        if self.kind not in ("one", "constant", "sin", "cos", "one_plus_sin", "linear_drift"):
            raise CoefficientError(f"unknown phi kind {self.kind!r}")
        if self.period <= 0:
            raise CoefficientError("phi period must be positive")

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64) * self.speed
        w = 2.0 * math.pi / self.period
        if self.kind in ("one", "constant"):
            out = np.full_like(s, self.offset + self.amplitude)
        elif self.kind == "sin":
            out = self.offset + self.amplitude * np.sin(w * s)
        elif self.kind == "cos":
            out = self.offset + self.amplitude * np.cos(w * s)
        elif self.kind == "one_plus_sin":
            out = self.offset + 1.0 + self.amplitude * np.sin(w * s)
        else:  # linear_drift
            out = self.offset + self.amplitude * s
        return out if out.ndim else float(out)

    @property
    def is_constant(self) -> bool:
        return self.kind in ("one", "constant") or self.amplitude == 0.0

    @property
    def is_periodic(self) -> bool:
        return self.kind != "linear_drift"

    @property
    def effective_period(self) -> float:
        """Period in absolute time, after any speed-up."""
        return self.period / self.speed

    def scaled(self, speed: float) -> "PhiSpec":
        """phi(speed * s): the fast-oscillation reparameterization."""
        return replace(self, speed=self.speed * float(speed))

    def mean_value(self) -> float:
        if self.kind in ("one", "constant"):
            return self.offset + self.amplitude
        if self.kind in ("sin", "cos"):
            return self.offset
        if self.kind == "one_plus_sin":
            return self.offset + 1.0
        raise CoefficientError(f"phi kind {self.kind!r} has no time average")


# ---------------------------------------------------------------------------
# noise intensity sigma(s, y)


@dataclass(frozen=True)
class SigmaSpec:
    """Noise intensity with declared bound and Hoelder metadata.

    families:
      constant            sigma = value
      separable_periodic  sigma(s, y) = phi(s) * c(y)
      custom_table        sigma sampled on the run's space-time lattice
    """

    family: str
    c_sigma: float
    l_sigma: float
    beta: float
    value: float = 0.0
    phi: PhiSpec | None = None
    c_profile_spec: dict | None = None
    table: np.ndarray | None = None
    table_grid: GridSpec | None = None
    spot_check: bool = True

    def __post_init__(self):
        if self.family not in ("constant", "separable_periodic", "custom_table"):
            raise CoefficientError(f"unknown sigma family {self.family!r}")
        if not (0.5 < self.beta < 1.0):
            raise CoefficientError(f"beta must lie in (1/2, 1), got {self.beta}")
        if self.c_sigma < 0 or self.l_sigma < 0:
            raise CoefficientError("C_sigma and L_sigma must be non-negative")
        if self.family == "separable_periodic" and self.phi is None:
            raise CoefficientError("separable_periodic sigma needs a phi spec")
        if self.family == "custom_table":
            if self.table is None or self.table_grid is None:
                raise CoefficientError("custom_table sigma needs table and table_grid")
            tab = np.ascontiguousarray(self.table, dtype=np.float64)
            expected = (self.table_grid.nt + 1, self.table_grid.nx)
            if tab.shape != expected:
                raise CoefficientError(f"sigma table shape {tab.shape} != {expected}")
            tab.flags.writeable = False
            object.__setattr__(self, "table", tab)
        if self.spot_check:
            self._spot_check_bounds()

    # -- evaluation -------------------------------------------------------

    def c_values(self, y: np.ndarray) -> np.ndarray:
        if self.family == "constant":
            return np.full_like(np.asarray(y, dtype=np.float64), self.value)
        if self.family == "separable_periodic":
            return build_profile(self.c_profile_spec)(y)
        raise CoefficientError("custom_table sigma has no spatial factor")

    def phi_values(self, s) -> np.ndarray:
        if self.family == "constant":
            return np.ones_like(np.asarray(s, dtype=np.float64))
        if self.family == "separable_periodic":
            return np.asarray(self.phi(s), dtype=np.float64)
        raise CoefficientError("custom_table sigma has no time factor")

    def _table_lookup(self, s, y):
        grid = self.table_grid
        s = np.asarray(s, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        si = np.clip(s / grid.dt, 0.0, grid.nt)
        lo = np.floor(si).astype(int)
        hi = np.minimum(lo + 1, grid.nt)
        frac = si - lo
        yi = np.clip(
            np.rint((y - grid.x_min) / grid.dx - 0.5).astype(int), 0, grid.nx - 1
        )
        return (1.0 - frac) * self.table[lo, yi] + frac * self.table[hi, yi]

    def __call__(self, s, y):
        if self.family == "constant":
            s_arr, y_arr = np.broadcast_arrays(np.asarray(s, float), np.asarray(y, float))
            return np.full_like(y_arr, self.value, dtype=np.float64)
        if self.family == "separable_periodic":
            return self.phi_values(s) * self.c_values(y)
        return self._table_lookup(s, y)

    # -- structure queries --------------------------------------------------

    @property
    def is_time_constant(self) -> bool:
        if self.family == "constant":
            return True
        if self.family == "separable_periodic":
            return self.phi.is_constant
        return bool(np.all(self.table == self.table[:1]))

    @property
    def is_zero(self) -> bool:
        if self.family == "constant":
            return self.value == 0.0
        return False

    def time_scaled(self, speed: float) -> "SigmaSpec":
        """``sigma(speed * s, y)``; bound metadata is unchanged."""
        if self.family == "constant" or self.is_time_constant:
            return self
        if self.family != "separable_periodic":
            raise CoefficientError("only separable sigma supports time scaling")
        return replace(self, phi=self.phi.scaled(speed), spot_check=False)

    # -- validation ---------------------------------------------------------

    def _spot_check_bounds(self):
        rng = np.random.default_rng(0)
        if self.family == "custom_table":
            g = self.table_grid
            s = rng.uniform(0.0, g.t_max, _SPOT_CHECK_TRIPLES)
            y1 = rng.uniform(g.x_min, g.x_max, _SPOT_CHECK_TRIPLES)
            y2 = rng.uniform(g.x_min, g.x_max, _SPOT_CHECK_TRIPLES)
        else:
            s = rng.uniform(0.0, 10.0, _SPOT_CHECK_TRIPLES)
            y1 = rng.uniform(-10.0, 10.0, _SPOT_CHECK_TRIPLES)
            y2 = y1 + rng.uniform(-2.0, 2.0, _SPOT_CHECK_TRIPLES)
        v1 = np.asarray(self(s, y1), dtype=np.float64)
        v2 = np.asarray(self(s, y2), dtype=np.float64)
        if np.any(np.abs(v1) > self.c_sigma + _SPOT_TOL):
            worst = float(np.max(np.abs(v1)))
            raise CoefficientError(
                f"|sigma| reaches {worst:.6g}, above declared C_sigma={self.c_sigma}"
            )
        gap = np.abs(v1 - v2) - self.l_sigma * np.abs(y1 - y2) ** self.beta
        if np.any(gap > _SPOT_TOL):
            raise CoefficientError(
                "sigma violates the declared Hoelder bound "
                f"(worst excess {float(np.max(gap)):.3g})"
            )


def sigma_from_dict(d: dict, grid: GridSpec | None = None) -> SigmaSpec:
    """Build a SigmaSpec from a config mapping."""
    family = d.get("family", "constant")
    common = {
        "c_sigma": float(d.get("c_sigma", 1.0)),
        "l_sigma": float(d.get("l_sigma", 0.0)),
        "beta": float(d.get("beta", 0.8)),
    }
    if family == "constant":
        return SigmaSpec(family="constant", value=float(d.get("value", 1.0)), **common)
    if family == "separable_periodic":
        phi_d = dict(d.get("phi", {"kind": "one"}))
        phi = PhiSpec(
            kind=phi_d.get("kind", "one"),
            amplitude=float(phi_d.get("amplitude", 1.0)),
            period=float(phi_d.get("period", 1.0)),
            offset=float(phi_d.get("offset", 0.0)),
        )
        return SigmaSpec(
            family="separable_periodic",
            phi=phi,
            c_profile_spec=d.get("c", {"kind": "gaussian"}),
            **common,
        )
    if family == "custom_table":
        if grid is None:
            raise CoefficientError("custom_table sigma needs the run grid")
        return SigmaSpec(
            family="custom_table",
            table=np.asarray(d["table"], dtype=np.float64),
            table_grid=grid,
            **common,
        )
    raise CoefficientError(f"unknown sigma family {family!r}")


# ---------------------------------------------------------------------------
# drift f and flux g = g1 + g2


def _as_xy_callable(kind: str, profile, scale: float):
    """(s, y, r) -> array for the small f/g1 families."""
    if kind == "zero":
        return lambda s, y, r: np.zeros(np.broadcast(y, r).shape)
    if kind == "field":
        return lambda s, y, r: (profile(y) * np.ones_like(r)) * scale
    if kind == "linear":
        return lambda s, y, r: scale * profile(y) * r
    raise CoefficientError(f"unknown drift/flux kind {kind!r}")


@dataclass(frozen=True)
class CoefficientSet:
    """The equation's coefficients plus their declared bound metadata.

    ``f`` obeys linear growth ``|f| <= a1(y) + K_f |r|``; ``g = g1 + g2``
    with ``|g1| <= b1(y) + b2(y) |r|`` and ``|g2| <= K_g r^2``.  The flux
    parts also carry Lipschitz data (``a2``/``b3`` fields and slope ``L``).
    """

    f: Callable
    g1: Callable
    g2: Callable
    sigma: SigmaSpec
    a1: Callable
    a2: Callable
    k_f: float
    l_f: float
    b1: Callable
    b2: Callable
    b3: Callable
    k_g: float
    l_g: float
    time_dependent: bool = False
    label: str = "custom"
    spot_check: bool = True

    def __post_init__(self):
        if self.spot_check:
            self._spot_check_bounds()

    def g(self, s, y, r):
        return self.g1(s, y, r) + self.g2(s, r)

    def _spot_check_bounds(self):
        rng = np.random.default_rng(1)
        s = rng.uniform(0.0, 10.0, _SPOT_CHECK_TRIPLES)
        y = rng.uniform(-10.0, 10.0, _SPOT_CHECK_TRIPLES)
        r1 = rng.normal(0.0, 3.0, _SPOT_CHECK_TRIPLES)
        r2 = rng.normal(0.0, 3.0, _SPOT_CHECK_TRIPLES)

        fv = np.asarray(self.f(s, y, r1), dtype=np.float64)
        if np.any(np.abs(fv) - (self.a1(y) + self.k_f * np.abs(r1)) > _SPOT_TOL):
            raise CoefficientError("f violates its declared linear growth bound")
        df = np.abs(np.asarray(self.f(s, y, r1)) - np.asarray(self.f(s, y, r2)))
        lip_f = (self.a2(y) + self.l_f * (np.abs(r1) + np.abs(r2))) * np.abs(r1 - r2)
        if np.any(df - lip_f > _SPOT_TOL):
            raise CoefficientError("f violates its declared Lipschitz bound")

        g1v = np.asarray(self.g1(s, y, r1), dtype=np.float64)
        if np.any(np.abs(g1v) - (self.b1(y) + self.b2(y) * np.abs(r1)) > _SPOT_TOL):
            raise CoefficientError("g1 violates its declared growth bound")
        g2v = np.asarray(self.g2(s, r1), dtype=np.float64)
        if np.any(np.abs(g2v) - self.k_g * r1**2 > _SPOT_TOL):
            raise CoefficientError("g2 violates its declared quadratic bound")
        dg = np.abs(
            np.asarray(self.g(s, y, r1)) - np.asarray(self.g(s, y, r2))
        )
        lip_g = (self.b3(y) + self.l_g * (np.abs(r1) + np.abs(r2))) * np.abs(r1 - r2)
        if np.any(dg - lip_g > _SPOT_TOL):
            raise CoefficientError("g violates its declared Lipschitz bound")


def _zero_profile(y):
    return np.zeros_like(np.asarray(y, dtype=np.float64))


def heat_coefficients(sigma: SigmaSpec | None = None, g_const: float = 0.0) -> CoefficientSet:
    """f = 0, g = const: the equation degenerates to the heat equation."""
    sigma = sigma or SigmaSpec(family="constant", value=0.0, c_sigma=0.0, l_sigma=0.0, beta=0.8)
    c = float(g_const)
    return CoefficientSet(
        f=_as_xy_callable("zero", None, 0.0),
        g1=lambda s, y, r: np.full(np.broadcast(y, r).shape, c),
        g2=lambda s, r: np.zeros_like(np.asarray(r, dtype=np.float64)),
        sigma=sigma,
        a1=_zero_profile,
        a2=_zero_profile,
        k_f=0.0,
        l_f=0.0,
        b1=lambda y: np.full_like(np.asarray(y, dtype=np.float64), abs(c)),
        b2=_zero_profile,
        b3=_zero_profile,
        k_g=0.0,
        l_g=0.0,
        label="heat",
    )


def burgers_coefficients(sigma: SigmaSpec | None = None) -> CoefficientSet:
    """f = 0, g2(r) = r^2 / 2: the Burgers nonlinearity."""
    sigma = sigma or SigmaSpec(family="constant", value=1.0, c_sigma=1.0, l_sigma=0.0, beta=0.8)
    return CoefficientSet(
        f=_as_xy_callable("zero", None, 0.0),
        g1=lambda s, y, r: np.zeros(np.broadcast(y, r).shape),
        g2=lambda s, r: 0.5 * np.asarray(r, dtype=np.float64) ** 2,
        sigma=sigma,
        a1=_zero_profile,
        a2=_zero_profile,
        k_f=0.0,
        l_f=0.0,
        b1=_zero_profile,
        b2=_zero_profile,
        b3=_zero_profile,
        k_g=0.5,
        l_g=0.5,
        label="burgers",
    )


def custom_coefficients(
    f_spec: dict | None,
    g1_spec: dict | None,
    g2_spec: dict | None,
    sigma: SigmaSpec,
) -> CoefficientSet:
    """Assemble a coefficient set from small named families.

    f/g1 specs: ``{kind: zero|field|linear, scale, profile: {...}}``;
    g2 spec: ``{kind: zero|quadratic, coefficient}``.
    """
    f_spec = f_spec or {"kind": "zero"}
    g1_spec = g1_spec or {"kind": "zero"}
    g2_spec = g2_spec or {"kind": "zero"}

    f_profile = build_profile(f_spec.get("profile"))
    f_scale = float(f_spec.get("scale", 1.0))
    f_kind = f_spec.get("kind", "zero")
    f = _as_xy_callable(f_kind, f_profile, f_scale)

    g1_profile = build_profile(g1_spec.get("profile"))
    g1_scale = float(g1_spec.get("scale", 1.0))
    g1_kind = g1_spec.get("kind", "zero")
    g1 = _as_xy_callable(g1_kind, g1_profile, g1_scale)

    g2_kind = g2_spec.get("kind", "zero")
    if g2_kind == "zero":
        k_g2 = 0.0
        g2 = lambda s, r: np.zeros_like(np.asarray(r, dtype=np.float64))
    elif g2_kind == "quadratic":
        k_g2 = float(g2_spec.get("coefficient", 0.5))
        g2 = lambda s, r: k_g2 * np.asarray(r, dtype=np.float64) ** 2
    else:
        raise CoefficientError(f"unknown g2 kind {g2_kind!r}")

    def abs_profile(profile, scale):
        return lambda y: np.abs(scale * profile(y))

    def profile_sup(profile, scale):
        lattice = np.linspace(-25.0, 25.0, 4001)
        return float(np.max(np.abs(scale * profile(lattice))))

    zero = _zero_profile
    a1 = abs_profile(f_profile, f_scale) if f_kind == "field" else zero
    a2 = abs_profile(f_profile, f_scale) if f_kind == "linear" else zero
    k_f = profile_sup(f_profile, f_scale) if f_kind == "linear" else 0.0
    b1 = abs_profile(g1_profile, g1_scale) if g1_kind == "field" else zero
    b2 = abs_profile(g1_profile, g1_scale) if g1_kind == "linear" else zero
    b3 = abs_profile(g1_profile, g1_scale) if g1_kind == "linear" else zero
    return CoefficientSet(
        f=f,
        g1=g1,
        g2=g2,
        sigma=sigma,
        a1=a1,
        a2=a2,
        k_f=k_f,
        l_f=0.0,
        b1=b1,
        b2=b2,
        b3=b3,
        k_g=abs(k_g2),
        l_g=abs(k_g2),
        label="custom",
    )


# ---------------------------------------------------------------------------
# initial conditions


def build_u0(spec: dict | np.ndarray | Field, grid: GridSpec) -> Field:
    """Initial slice from a named preset, raw samples, or a Field."""
    if isinstance(spec, Field):
        if spec.grid != grid:
            raise GridError("u0 field lives on a different grid")
        return spec
    if isinstance(spec, np.ndarray):
        return Field(grid, spec, 0.0)
    kind = spec.get("kind", "zero")
    x = grid.x_centers()
    if kind == "zero":
        return Field(grid, np.zeros(grid.nx), 0.0)
    if kind == "gaussian_bump":
        center = float(spec.get("center", 0.0))
        width = float(spec.get("width", 1.0))
        vals = np.exp(-((x - center) ** 2) / (2.0 * width**2))
        target = spec.get("l2_norm")
        if target is not None:
            norm = math.sqrt(grid.dx * float(np.sum(vals**2)))
            vals = vals * (float(target) / norm)
        else:
            vals = vals * float(spec.get("amplitude", 1.0))
        return Field(grid, vals, 0.0)
    if kind == "heat_kernel":
        t0 = float(spec.get("t0", 1.0))
        vals = np.exp(-(x**2) / (4.0 * t0)) / (2.0 * math.sqrt(math.pi * t0))
        return Field(grid, vals, 0.0)
    if kind == "indicator":
        a = float(spec.get("a", 0.0))
        b = float(spec.get("b", 1.0))
        vals = ((x > a) & (x < b)).astype(np.float64)
        return Field(grid, vals, 0.0)
    if kind == "table":
        return Field(grid, np.asarray(spec["values"], dtype=np.float64), 0.0)
    raise CoefficientError(f"unknown u0 kind {kind!r}")
