"""Experiment configuration: parse, validate, and resolve to run inputs.

Configs are nested key-value YAML.  Keys carry explicit units in their names
(``t_max``, not ``T``), so a config file doubles as greppable experiment
provenance.  Validation happens before any computation: every numeric range
below mirrors the precondition of the operation that will consume the value,
and an offending key is reported with its source line.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .coeffs import (
    CoefficientSet,
    SigmaSpec,
    burgers_coefficients,
    custom_coefficients,
    heat_coefficients,
    sigma_from_dict,
)
from .errors import ConfigError
from .grid import Field, GridSpec
from .measures import (
    MEASURE_KINDS,
    MeasureSample,
    WEIGHT_FAMILIES,
    sample_alpha_stable,
    sample_deterministic_lebesgue,
    sample_fbm,
    sample_weighted_wiener,
    sample_wiener,
)
from .seeding import seed_split
from .solver import SolverConfig

__all__ = ["ExperimentConfig", "load_config", "COMMANDS"]

COMMANDS = ("solve", "average", "regularity", "besov-check", "sm-sample", "kernel-table")

DEFAULT_GRID = {"x_min": -10.0, "x_max": 10.0, "nx": 1024, "t_max": 1.0, "nt": 256}


def _line_map(text: str) -> dict[str, int]:
    """Dotted key path -> 1-based source line, via the YAML node graph."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: dict[str, int] = {}

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
                lines[path] = key_node.start_mark.line + 1
                walk(value_node, path)

    if root is not None:
        walk(root, "")
    return lines


@dataclass
class ExperimentConfig:
    """Validated run description plus helpers that build the run inputs."""

    command: str
    raw: dict
    source: str
    text: str
    lines: dict = field(default_factory=dict)

    # -- error helpers ------------------------------------------------------

    def _where(self, path: str) -> str | None:
        line = self.lines.get(path)
        return f"{self.source}:{line}" if line else self.source

    def fail(self, path: str, message: str):
        raise ConfigError(message, location=self._where(path))

    # -- typed section accessors -------------------------------------------

    def section(self, name: str, default=None) -> dict:
        value = self.raw.get(name, default if default is not None else {})
        if not isinstance(value, dict):
            self.fail(name, f"section {name!r} must be a mapping")
        return value

    def grid(self) -> GridSpec:
        block = {**DEFAULT_GRID, **self.section("grid", DEFAULT_GRID)}
        try:
            return GridSpec.from_dict(block)
        except Exception as exc:
            self.fail("grid", str(exc))

    def master_seed(self, override: int | None = None) -> int:
        if override is not None:
            return int(override)
        return int(self.section("measure").get("seed", self.raw.get("seed", 0)))

    def build_measure(self, grid: GridSpec, seed_override: int | None = None) -> MeasureSample:
        from .serialize import read_measure_binary

        block = self.section("measure")
        sample_file = block.get("sample_file")
        if sample_file:
            path = Path(self.source).parent / sample_file if self.source != "<dict>" else Path(sample_file)
            return read_measure_binary(path)
        kind = block.get("kind", "wiener")
        seed = seed_split(self.master_seed(seed_override), "measure")
        if kind == "wiener":
            return sample_wiener(grid, seed)
        if kind == "weighted_wiener":
            return sample_weighted_wiener(grid, block.get("weight", {"kind": "gaussian"}), seed)
        if kind == "fbm":
            return sample_fbm(grid, float(block.get("hurst", 0.75)), seed)
        if kind == "alpha_stable":
            return sample_alpha_stable(grid, float(block.get("alpha", 1.5)), seed)
        if kind == "deterministic_lebesgue":
            return sample_deterministic_lebesgue(grid)
        self.fail("measure.kind", f"unknown measure kind {kind!r}")

    def build_sigma(self, grid: GridSpec) -> SigmaSpec:
        block = self.section("coefficients").get("sigma", {"family": "constant", "value": 1.0})
        return sigma_from_dict(block, grid)

    def build_coefficients(self, grid: GridSpec) -> CoefficientSet:
        block = self.section("coefficients")
        sigma = self.build_sigma(grid)
        preset = block.get("preset", "custom")
        if preset == "heat":
            return heat_coefficients(sigma=sigma, g_const=float(block.get("g_const", 0.0)))
        if preset == "burgers":
            return burgers_coefficients(sigma=sigma)
        if preset == "custom":
            return custom_coefficients(
                block.get("f"), block.get("g1"), block.get("g2"), sigma
            )
        self.fail("coefficients.preset", f"unknown preset {preset!r}")

    def build_u0(self, grid: GridSpec) -> Field:
        from .coeffs import build_u0

        spec = self.section("coefficients").get("u0", {"kind": "zero"})
        return build_u0(spec, grid)

    def build_solver(self, grid: GridSpec) -> SolverConfig:
        block = self.section("solver")
        n_cutoff = block.get("n_cutoff", "adaptive")
        if n_cutoff in ("adaptive", None):
            n_value = None
        else:
            n_value = float(n_cutoff)
        return SolverConfig(
            grid=grid,
            n_cutoff=n_value,
            lambda_weight=(
                float(block["lambda_weight"]) if "lambda_weight" in block else None
            ),
            tol=float(block.get("tol", 1e-7)),
            max_iter=int(block.get("max_iter", 60)),
            adaptive_n=bool(block.get("adaptive_n", True)),
            n_margin=float(block.get("n_margin", 4.0)),
            mode=str(block.get("mode", "fft")),
        )

    def output_dir(self, override=None) -> Path:
        if override is not None:
            return Path(override)
        return Path(self.section("output").get("directory", "out"))

    def slice_times(self, grid: GridSpec) -> list[int]:
        times = self.section("output").get("slice_times", [grid.t_max / 2, grid.t_max])
        indices = []
        for t in times:
            idx = round(float(t) / grid.dt)
            if not (0 <= idx <= grid.nt):
                self.fail("output.slice_times", f"slice time {t} outside [0, {grid.t_max}]")
            indices.append(idx)
        return indices

    def figures_enabled(self) -> bool:
        return bool(self.section("output").get("figures", True))

    def threads(self, cli_value: int | None = None) -> int:
        if cli_value is not None:
            return max(1, int(cli_value))
        env = os.environ.get("SMPDE_THREADS")
        if env:
            return max(1, int(env))
        return max(1, int(self.section("output").get("threads", 1)))


def _validate(cfg: ExperimentConfig):
    raw = cfg.raw
    command = raw.get("command")
    if command not in COMMANDS:
        cfg.fail("command", f"command must be one of {COMMANDS}, got {command!r}")

    grid_block = {**DEFAULT_GRID, **cfg.section("grid", DEFAULT_GRID)}
    nx = int(grid_block["nx"])
    if nx < 2 or nx & (nx - 1):
        cfg.fail("grid.nx", f"nx must be a power of two >= 2, got {nx}")
    if not (float(grid_block["x_min"]) < float(grid_block["x_max"])):
        cfg.fail("grid.x_min", "x_min must be below x_max")
    if not (float(grid_block["t_max"]) > 0):
        cfg.fail("grid.t_max", "t_max must be positive")
    if int(grid_block["nt"]) < 1:
        cfg.fail("grid.nt", "nt must be >= 1")

    measure = cfg.section("measure")
    kind = measure.get("kind", "wiener")
    if "sample_file" in measure:
        path = Path(cfg.source).parent / measure["sample_file"] if cfg.source != "<dict>" else Path(measure["sample_file"])
        if not path.exists():
            cfg.fail("measure.sample_file", f"sample file {path} does not exist")
    elif kind not in MEASURE_KINDS:
        cfg.fail("measure.kind", f"measure kind must be one of {MEASURE_KINDS}, got {kind!r}")
    if kind == "fbm":
        hurst = float(measure.get("hurst", 0.75))
        if not (0.5 < hurst < 1.0):
            cfg.fail("measure.hurst", f"Hurst index must lie in (1/2, 1), got {hurst}")
    if kind == "alpha_stable":
        alpha = float(measure.get("alpha", 1.5))
        if not (0 < alpha <= 2) or alpha == 1.0:
            cfg.fail("measure.alpha", f"alpha must lie in (0,1) u (1,2], got {alpha}")
    if kind == "weighted_wiener":
        wkind = measure.get("weight", {"kind": "gaussian"}).get("kind")
        if wkind not in WEIGHT_FAMILIES:
            cfg.fail(
                "measure.weight.kind",
                f"weight family must be one of {WEIGHT_FAMILIES}, got {wkind!r}",
            )

    sigma = cfg.section("coefficients").get("sigma")
    if sigma is not None:
        beta = float(sigma.get("beta", 0.8))
        if not (0.5 < beta < 1.0):
            cfg.fail("coefficients.sigma.beta", f"beta must lie in (1/2, 1), got {beta}")

    solver = cfg.section("solver")
    if "tol" in solver and not (float(solver["tol"]) > 0):
        cfg.fail("solver.tol", "tol must be positive")
    if "max_iter" in solver and int(solver["max_iter"]) < 1:
        cfg.fail("solver.max_iter", "max_iter must be >= 1")
    n_cutoff = solver.get("n_cutoff", "adaptive")
    if n_cutoff not in ("adaptive", None) and not (float(n_cutoff) > 0):
        cfg.fail("solver.n_cutoff", "n_cutoff must be positive or 'adaptive'")

    if command == "besov-check":
        block = cfg.section("besov")
        alpha = float(block.get("alpha", 0.75))
        if not (0.5 < alpha < 1.0):
            cfg.fail("besov.alpha", f"alpha must lie in (1/2, 1), got {alpha}")
        pairs = int(block.get("n_pairs", 100))
        if pairs < 1:
            cfg.fail("besov.n_pairs", "n_pairs must be >= 1")

    if command == "regularity":
        block = cfg.section("regularity", {})
        if "n_seeds" in block and int(block["n_seeds"]) < 1:
            cfg.fail("regularity.n_seeds", "n_seeds must be >= 1")
        theta_w = float(block.get("envelope_theta", 2.0))
        if not (theta_w > 1.0):
            cfg.fail("regularity.envelope_theta", f"theta must exceed 1, got {theta_w}")
        lam_tilde = float(block.get("lambda_tilde", 0.15))
        if not (0.0 < lam_tilde < 0.25):
            cfg.fail(
                "regularity.lambda_tilde",
                f"lambda_tilde must lie in (0, 1/4), got {lam_tilde}",
            )

    if command == "average":
        block = cfg.section("averaging")
        eps = block.get("eps_list", [1.0, 0.25, 0.0625, 0.015625])
        if not eps or any(float(e) <= 0 for e in eps):
            cfg.fail("averaging.eps_list", "eps_list must hold positive values")


def load_config(path_or_dict, command: str | None = None) -> ExperimentConfig:
    """Parse and validate a config file (or an equivalent dict).

    ``command`` (e.g. the CLI subcommand) fills in or must match the
    config's own ``command`` key.
    """
    if isinstance(path_or_dict, dict):
        raw = dict(path_or_dict)
        text = yaml.safe_dump(raw, sort_keys=True)
        source, lines = "<dict>", {}
    else:
        path = Path(path_or_dict)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        text = path.read_text()
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"config is not valid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        source, lines = str(path), _line_map(text)

    declared = raw.get("command")
    if command is not None:
        if declared is not None and declared != command:
            raise ConfigError(
                f"config declares command {declared!r} but {command!r} was requested",
                location=source,
            )
        raw["command"] = command
    cfg = ExperimentConfig(command=raw.get("command"), raw=raw, source=source, text=text, lines=lines)
    _validate(cfg)
    cfg.command = raw["command"]
    return cfg
