"""Command-line entry points.

``smpde <command> --config cfg.yaml [--seed N] [--threads N] [--out DIR]``

Every command validates its config up front, runs the numerical core, and
writes a deterministic artifact set (CSV / JSON / binary plus a rendered
PNG) under the configured output directory, listed in ``manifest.json``
with content hashes.  Timing data goes to a separate volatile file so the
hashed artifacts are reproducible bit-for-bit for a fixed config and seed.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import figures
from .averaging import AveragingScenario, averaging_experiment
from .besov import required_dyadic_constant, verify_dyadic_bound
from .config import COMMANDS, ExperimentConfig, load_config
from .convolution import ThetaEngine, regularity_report, theta_all
from .errors import ConfigError, SmpdeError
from .grid import Field, GridSpec
from .heat import kernel, kernel_dx
from .measures import measure_of, unit_blocks
from .seeding import seed_split
from .serialize import (
    Manifest,
    write_csv,
    write_field_csv,
    write_json,
    write_measure_binary,
    write_space_time_binary,
)
from .solver import picard_solve

__all__ = ["main", "run"]


def parallel_map(fn, items, threads: int):
    """Order-preserving map over an optional thread pool.

    Results come back in submission order regardless of completion order,
    so reductions over them are reproducible.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _cmd_solve(cfg: ExperimentConfig, out: Path, manifest: Manifest, seed, threads):
    grid = cfg.grid()
    coeffs = cfg.build_coefficients(grid)
    u0 = cfg.build_u0(grid)
    sample = None if coeffs.sigma.is_zero else cfg.build_measure(grid, seed)
    solver_cfg = cfg.build_solver(grid)
    solution, report = picard_solve(coeffs, sample, solver_cfg, u0)

    manifest.add(write_space_time_binary(solution, out / "solution.stf"))
    for idx in cfg.slice_times(grid):
        path = out / f"slice_t{idx * grid.dt:g}.csv"
        manifest.add(write_field_csv(solution.slice_at(idx), path))
    manifest.add(write_json(out / "report.json", report.to_dict(include_volatile=False)))
    manifest.add(
        write_json(out / "timings.json", {"wall_time": report.wall_time}), volatile=True
    )
    if cfg.figures_enabled():
        manifest.add(
            figures.render_solve(
                grid,
                solution.values,
                cfg.slice_times(grid),
                report.successive_distances,
                out / "solve.png",
            )
        )
    return 0


def _cmd_average(cfg: ExperimentConfig, out: Path, manifest: Manifest, seed, threads):
    grid = cfg.grid()
    coeffs = cfg.build_coefficients(grid)
    u0 = cfg.build_u0(grid)
    sample = cfg.build_measure(grid, seed)
    block = cfg.section("averaging")
    eps_list = tuple(float(e) for e in block.get("eps_list", [1.0, 0.25, 0.0625, 0.015625]))
    scenario = AveragingScenario(
        coeffs=coeffs, sample=sample, eps_list=eps_list, u0=u0, solver=cfg.build_solver(grid)
    )
    table = averaging_experiment(scenario)

    manifest.add(
        write_csv(
            out / "convergence.csv",
            ["epsilon", "sup_t_l2_distance", "xi_sup", "fitted_rate"],
            (
                [r["epsilon"], r["sup_t_l2_distance"], r["xi_sup"], r["fitted_rate"]]
                for r in table.rows()
            ),
        )
    )
    meta = {
        "eps_list": list(table.eps),
        "fitted_rate": table.fitted_rate,
        "fitted_rate_stderr": table.fitted_rate_stderr,
        "sup_t_l2_distance": list(table.sup_t_l2_distance),
        "xi_sup": list(table.xi_sup),
        "measure": {"kind": sample.kind, "seed": sample.seed},
        "grid": grid.to_dict(),
    }
    manifest.add(write_json(out / "averaging.json", meta))
    manifest.add(
        write_json(
            out / "timings.json",
            {"wall_times": [r.wall_time for r in table.reports]},
        ),
        volatile=True,
    )
    if cfg.figures_enabled():
        manifest.add(
            figures.render_average(
                table.eps, table.sup_t_l2_distance, table.xi_sup, table.fitted_rate,
                out / "averaging.png",
            )
        )
    return 0


def _cmd_regularity(cfg: ExperimentConfig, out: Path, manifest: Manifest, seed, threads):
    grid = cfg.grid()
    sigma = cfg.build_sigma(grid)
    sample = cfg.build_measure(grid, seed)
    report = regularity_report(sample, sigma)

    payload = {
        "gamma1_est": report.gamma1_est,
        "gamma1_stderr": report.gamma1_stderr,
        "gamma2_est": report.gamma2_est,
        "gamma2_stderr": report.gamma2_stderr,
        "sup_bound": report.sup_bound,
        "l2_trace": [float(v) for v in report.l2_trace],
    }
    manifest.add(write_json(out / "regularity.json", payload))
    field = theta_all(sample, sigma)
    for idx in cfg.slice_times(grid):
        manifest.add(
            write_field_csv(field.slice_at(idx), out / f"theta_t{idx * grid.dt:g}.csv")
        )
    if cfg.figures_enabled():
        manifest.add(
            figures.render_regularity(
                grid, report.l2_trace, field.values[-1], out / "regularity.png"
            )
        )
    return 0


def random_smooth_field(grid: GridSpec, seed: int, n_modes: int = 5) -> Field:
    """Low-order random trigonometric polynomial on the box (smooth in y)."""
    rng = np.random.default_rng(seed)
    x = grid.x_centers()
    rel = (x - grid.x_min) / (grid.x_max - grid.x_min)
    vals = rng.normal() * np.ones_like(x)
    for k in range(1, n_modes + 1):
        a, b = rng.normal(size=2)
        vals += (a * np.cos(2 * np.pi * k * rel) + b * np.sin(2 * np.pi * k * rel)) / k**1.2
    return Field(grid, vals)


def besov_pairs(grid: GridSpec, master: int, stream: str, n_pairs: int):
    """Deterministic (q, mu) pairs for the dyadic-estimate protocol."""
    from .measures import sample_wiener

    for i in range(n_pairs):
        pair_seed = seed_split(master, (stream, i))
        q = random_smooth_field(grid, seed_split(pair_seed, "q"))
        mu = sample_wiener(grid, seed_split(pair_seed, "mu"))
        yield q, mu


def _cmd_besov_check(cfg: ExperimentConfig, out: Path, manifest: Manifest, seed, threads):
    from .besov import besov_norm
    from .measures import dyadic_energy, integrate_cellwise

    block = cfg.section("besov")
    alpha = float(block.get("alpha", 0.75))
    n_pairs = int(block.get("n_pairs", 100))
    nx = int(block.get("nx", 1024))
    grid = GridSpec(0.0, 1.0, nx, 0.01, 1)
    interval = (0.0, 1.0)
    master = cfg.master_seed(seed)

    pairs = list(besov_pairs(grid, master, "besov-pair", n_pairs))
    c_fit = max(
        parallel_map(
            lambda qm: required_dyadic_constant(qm[0], qm[1], alpha, interval),
            pairs,
            threads,
        )
    )

    csv_rows = []
    for q, mu in pairs:
        _, slack = verify_dyadic_bound(q, mu, alpha, c_fit, interval)
        ia, ib = grid.boundary_index(interval[0]), grid.boundary_index(interval[1])
        mask = np.zeros(grid.nx)
        mask[ia:ib] = 1.0
        lhs = abs(integrate_cellwise(mu, q.with_values(q.values * mask)))
        term1 = abs(q.values[ia] * measure_of(mu, interval))
        rhs = term1 + c_fit * besov_norm(q, alpha, interval).total * np.sqrt(
            dyadic_energy(mu, interval[0], alpha)
        )
        csv_rows.append([interval[0], alpha, lhs, rhs, slack])

    manifest.add(write_csv(out / "besov_check.csv", ["j", "alpha", "lhs", "rhs", "slack"], csv_rows))
    manifest.add(
        write_json(
            out / "besov_fit.json",
            {"alpha": alpha, "n_pairs": n_pairs, "fitted_c": c_fit},
        )
    )
    if cfg.figures_enabled():
        fig_rows = [{"lhs": r[2], "rhs": r[3]} for r in csv_rows]
        manifest.add(figures.render_besov(fig_rows, out / "besov_check.png"))
    return 0


def _cmd_sm_sample(cfg: ExperimentConfig, out: Path, manifest: Manifest, seed, threads):
    grid = cfg.grid()
    sample = cfg.build_measure(grid, seed)
    manifest.add(write_measure_binary(sample, out / "sample.smm"))
    rows = []
    for block in unit_blocks(grid):
        mass = float(np.sum(sample.increments[block.start : block.stop]))
        rows.append([block.j, mass])
    manifest.add(write_csv(out / "unit_masses.csv", ["j", "mass"], rows))
    if cfg.figures_enabled():
        manifest.add(figures.render_sample(grid, sample.increments, out / "sample.png"))
    return 0


def _cmd_kernel_table(cfg: ExperimentConfig, out: Path, manifest: Manifest, seed, threads):
    grid = cfg.grid()
    block = cfg.section("kernel", {})
    times = [float(t) for t in block.get("times", [0.01, 0.1, 0.5, 1.0])]
    for t in times:
        if t <= 0:
            cfg.fail("kernel.times", f"kernel times must be positive, got {t}")
    x = grid.x_centers()
    rows = []
    p_rows, px_rows = [], []
    for t in times:
        p_row = kernel(t, x)
        px_row = kernel_dx(t, x)
        p_rows.append(p_row)
        px_rows.append(px_row)
        for xi, pv, dv in zip(x, p_row, px_row):
            rows.append([t, xi, pv, dv])
    manifest.add(write_csv(out / "kernel_table.csv", ["t", "x", "p", "dp_dx"], rows))
    if cfg.figures_enabled():
        manifest.add(
            figures.render_kernel_table(x, times, p_rows, px_rows, out / "kernel_table.png")
        )
    return 0


_HANDLERS = {
    "solve": _cmd_solve,
    "average": _cmd_average,
    "regularity": _cmd_regularity,
    "besov-check": _cmd_besov_check,
    "sm-sample": _cmd_sm_sample,
    "kernel-table": _cmd_kernel_table,
}


def run(config_path, command: str | None = None, seed=None, out=None, threads=None) -> int:
    """Execute one command; returns the process exit status.

    Exit codes: 0 success, 2 config validation failure, 1 numerical-core
    error.  All artifacts land inside the configured output directory.
    """
    try:
        cfg = load_config(config_path, command=command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_dir = cfg.output_dir(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(
        out_dir,
        cfg.command,
        cfg.master_seed(seed),
        cfg.text,
    )
    handler = _HANDLERS[cfg.command]
    try:
        status = handler(cfg, out_dir, manifest, seed, cfg.threads(threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SmpdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest.write()
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smpde",
        description="Mild-solution machinery for stochastic heat/Burgers equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=None, help="worker count")
        p.add_argument("--out", default=None, help="output directory override")
    args = parser.parse_args(argv)
    return run(args.config, command=args.command, seed=args.seed, out=args.out, threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())
