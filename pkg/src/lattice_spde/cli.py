"""CLI module for the lattice SPDE toolkit."""

from pathlib import Path
from typing import Annotated, Callable, Optional

import pandas as pd
import typer
from rich.console import Console

from . import __version__
from .config import RunConfig, load_config
from .convergence_lab import holder_structure, run_experiment
from .errors import LatticeSpdeError, NonConvergenceError
from .exporter import CSV_LIMIT, write_binary, write_field_csv, write_frame, write_json
from .green_kernel import kernel_norm_growth, kernel_norm_table, lattice_kernel, smoothing_error_rate, truncation_error_rate
from .lattice_core import GridSpec, LatticeField, thread_map
from .mollifier import describe as describe_mollifier
from .models import CommandResult
from .noise_field import (
    CHECK_SIGMAS,
    CHOLESKY_LIMIT,
    CovarianceTable,
    NoiseRealization,
    backend_agreement,
    check_integrability,
    check_passed,
    covariance_table,
    describe_sampler,
    integrate_kernel_field,
    noise_variance_check,
    sample,
)
from .spde_solver import make_g_n, solve, step_error
from .ui import configure_logging, sample_progress, show_completion, show_error, show_progress, show_table

app = typer.Typer(
    name="lspde",
    help="Lattice SPDE - mollified lattice scheme for elliptic equations driven by coloured noise.",
    no_args_is_help=True,
)
console = Console()

IO_EXIT_CODE = 4

ConfigOption = Annotated[
    Optional[Path],
    typer.Option("--config", "-c", help="JSON (or YAML) config document"),
]
SeedOption = Annotated[
    Optional[int],
    typer.Option("--seed", "-s", min=0, help="Master seed (unsigned 64-bit)"),
]
ThreadsOption = Annotated[
    Optional[int],
    typer.Option("--threads", "-t", min=1, help="Worker threads (default: available cores)"),
]
OutOption = Annotated[
    Optional[Path],
    typer.Option("--out", "-o", help="Output directory"),
]


def version_callback(value: bool) -> None:
    """Show version and exit."""
    if value:
        console.print(f"lattice-spde version {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[
        Optional[bool],
        typer.Option(
            "--version",
            "-v",
            callback=version_callback,
            is_eager=True,
            help="Show version and exit.",
        ),
    ] = None,
    verbose: Annotated[
        bool,
        typer.Option("--verbose", help="Debug logging."),
    ] = False,
) -> None:
    """Lattice SPDE toolkit."""
    configure_logging(verbose)


def _draw(cfg: RunConfig, grid: GridSpec, table: CovarianceTable, index: int) -> NoiseRealization:
    noise = sample(grid, table, cfg.seed, index, cfg.noise.backend)
    if cfg.noise.scale != 1.0:
        noise = NoiseRealization(grid, cfg.noise.scale * noise.values, noise.seed, noise.index, noise.backend)
    return noise


def cmd_noise(cfg: RunConfig) -> CommandResult:
    """Sample one realization and validate the covariance."""
    cfg.validate("noise")
    out = Path(cfg.out)
    grid = cfg.grid
    model = cfg.build_model()
    table = covariance_table(grid, model)
    noise = _draw(cfg, grid, table, 0)
    result = CommandResult("noise")
    result.outputs.append(write_binary(out / "noise.bin", noise.values, grid.d, grid.n, cfg.seed))
    if grid.cell_count <= CSV_LIMIT:
        result.outputs.append(write_field_csv(out / "noise.csv", noise.values))

    checks = noise_variance_check(table, cfg.seed, cfg.noise.validation_samples, backend=cfg.noise.backend)
    passed = check_passed(checks)
    report = {
        "model": model.describe(),
        "covariance": {"variance": table.variance, **table.metadata},
        "sampler": describe_sampler(table, cfg.noise.backend),
        "integrability": check_integrability(model, cfg.solver.alpha, cfg.solver.lam, grid.d).to_dict(),
        "variance_check": checks,
        "passed": passed,
        "config": cfg.to_dict(),
    }
    if grid.cell_count <= CSV_LIMIT:
        report["psd"] = table.psd_report()
    if grid.size <= CHOLESKY_LIMIT:
        agreement = backend_agreement(table, cfg.seed, cfg.noise.validation_samples)
        report["backend_agreement"] = {
            "tests": agreement,
            "passed": all(abs(row["z"]) <= CHECK_SIGMAS for row in agreement),
        }
    result.outputs.append(write_json(out / "covariance_report.json", report))
    return result


def cmd_solve(cfg: RunConfig) -> CommandResult:
    """Solve the lattice system once and write the field with diagnostics."""
    cfg.validate("solve")
    out = Path(cfg.out)
    grid = cfg.grid
    mollifier = cfg.build_mollifier()
    source = cfg.build_source()
    table = covariance_table(grid, cfg.build_model())
    noise = _draw(cfg, grid, table, 0)
    solve_cfg = cfg.build_solve_config()
    diagnostics: dict = {
        "config": cfg.to_dict(),
        "mollifier": describe_mollifier(mollifier, solve_cfg.theta),
        "gamma": solve_cfg.gamma(grid.d),
    }
    if grid.cell_count <= CSV_LIMIT:
        diagnostics["source_step_error"] = step_error(source, grid, p=solve_cfg.alpha_prime, order=4)
    result = CommandResult("solve")
    try:
        solution = solve(grid, cfg.build_drift(), make_g_n(source, grid), noise, solve_cfg, mollifier)
    except NonConvergenceError as e:
        diagnostics.update(
            converged=False,
            error=str(e),
            iterations=len(e.residual_history),
            residual_history=e.residual_history,
        )
        result.outputs.append(write_json(out / "diagnostics.json", diagnostics))
        for output in result.outputs:
            show_progress(output)
        raise
    values = solution.field.values
    result.outputs.append(write_binary(out / "solution.bin", values, grid.d, grid.n, cfg.seed))
    if grid.cell_count <= CSV_LIMIT:
        result.outputs.append(write_field_csv(out / "solution.csv", values, offset=1))
    diagnostics.update(solution.to_dict())
    result.outputs.append(write_json(out / "diagnostics.json", diagnostics))
    return result


def cmd_converge(cfg: RunConfig) -> CommandResult:
    """Run the coupled multi-resolution experiment."""
    cfg.validate("converge")
    out = Path(cfg.out)
    plan = cfg.build_plan()
    with sample_progress(plan.samples, "Coupled samples") as advance:
        report = run_experiment(plan, cfg.to_dict(), advance)
    frame = report.to_frame()
    show_table("Error moments", list(frame.columns), frame.itertuples(index=False))
    result = CommandResult("converge")
    result.outputs.append(write_frame(out / "report.csv", frame))
    result.outputs.append(write_json(out / "summary.json", report.summary()))
    return result


def cmd_kernel(cfg: RunConfig) -> CommandResult:
    """Kernel norm tables, truncation errors and the smoothing-rate proxy."""
    cfg.validate("kernel")
    out = Path(cfg.out)
    k = cfg.kernel
    d, theta = cfg.d, cfg.kernel_theta
    mollifier = cfg.build_mollifier()
    result = CommandResult("kernel")

    rows = kernel_norm_table(k.ns, theta, d, mollifier, k.eps_factors, k.n_points, cfg.seed, cfg.threads)
    result.outputs.append(write_frame(out / "kernel_norms.csv", pd.DataFrame([r.__dict__ for r in rows])))
    growth = kernel_norm_growth(k.ns, theta, d, mollifier, k.n_points, cfg.seed, k.growth_threshold, cfg.threads)

    truncation = truncation_error_rate(
        k.ns, theta, cfg.solver.lam, d, mollifier, k.truncation_points, cfg.seed, n_ref=k.n_ref, threads=cfg.threads
    )
    result.outputs.append(
        write_frame(out / "truncation.csv", pd.DataFrame([r.__dict__ for r in truncation.rows]))
    )
    summary: dict = {
        "growth": {
            "rows": [r.__dict__ for r in growth.rows],
            "ratio": growth.ratio,
            "threshold": growth.threshold,
            "bounded": growth.bounded,
            "empirical_constant": growth.empirical_constant,
        },
        "truncation": {
            "gamma": truncation.gamma,
            "fit": truncation.fit.__dict__ if truncation.fit else None,
        },
        "mollifier": describe_mollifier(mollifier, theta),
        "config": cfg.to_dict(),
    }
    if k.smoothing_eps and k.smoothing_samples > 0:
        smoothing = smoothing_error_rate(
            k.smoothing_eps, k.smoothing_alpha, k.smoothing_lam, d, mollifier, k.smoothing_samples, cfg.seed, cfg.threads
        )
        frame = pd.DataFrame({"eps": smoothing.eps, "proxy": smoothing.proxies, "stderr": smoothing.stderrs})
        result.outputs.append(write_frame(out / "smoothing.csv", frame))
        summary["smoothing"] = {
            "alpha": smoothing.alpha,
            "lam": smoothing.lam,
            "slope": smoothing.fit.slope,
            "intercept": smoothing.fit.intercept,
            "residual": smoothing.fit.residual,
        }
    show_table(
        "Kernel L2 norms, eps = eps(n)",
        ["n", "eps", "sup", "mean"],
        [(r.n, r.eps, r.sup_norm, r.mean_norm) for r in growth.rows],
    )
    result.outputs.append(write_json(out / "kernel_summary.json", summary))
    return result


def cmd_holder(cfg: RunConfig) -> CommandResult:
    """Structure functions of the Gaussian term and of the solution."""
    cfg.validate("holder")
    out = Path(cfg.out)
    grid = GridSpec(cfg.d, cfg.holder.n or cfg.n)
    mollifier = cfg.build_mollifier()
    solve_cfg = cfg.build_solve_config()
    drift, source = cfg.build_drift(), cfg.build_source()
    eps = solve_cfg.smoothing(grid)
    kernel = lattice_kernel(grid, eps, mollifier)
    table = covariance_table(grid, cfg.build_model())
    g_n = make_g_n(source, grid)

    def draw(index: int) -> tuple[LatticeField, LatticeField]:
        noise = _draw(cfg, grid, table, index)
        return integrate_kernel_field(noise, kernel), solve(grid, drift, g_n, noise, solve_cfg, mollifier).field

    pairs = thread_map(draw, range(cfg.holder.samples), cfg.threads)
    gaussian = [v for v, _ in pairs]
    solutions = [u for _, u in pairs]
    v_fit = holder_structure(gaussian, cfg.holder.lags)
    u_fit = holder_structure(solutions, cfg.holder.lags)

    result = CommandResult("holder")
    frame = pd.concat([v_fit.to_frame("gaussian"), u_fit.to_frame("solution")], ignore_index=True)
    result.outputs.append(write_frame(out / "structure.csv", frame))
    summary = {
        "gaussian_slope": v_fit.slope,
        "solution_slope": u_fit.slope,
        "target": 2.0 * solve_cfg.lam,
        "n": grid.n,
        "eps": eps,
        "samples": cfg.holder.samples,
        "config": cfg.to_dict(),
    }
    result.outputs.append(write_json(out / "holder.json", summary))
    return result


def _run(
    command: Callable[[RunConfig], CommandResult],
    config: Optional[Path],
    seed: Optional[int],
    threads: Optional[int],
    out: Optional[Path],
) -> None:
    """Load, override, run; map library errors to exit codes."""
    try:
        cfg = load_config(config).with_overrides(seed=seed, threads=threads, out=out)
        result = command(cfg)
    except LatticeSpdeError as e:
        show_error(str(e))
        raise typer.Exit(e.exit_code)
    except OSError as e:
        show_error(f"I/O failure: {e}")
        raise typer.Exit(IO_EXIT_CODE)
    for output in result.outputs:
        show_progress(output)
    show_completion(result.command, result.outputs, cfg.out)


@app.command()
def noise(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None, out: OutOption = None) -> None:
    """Sample a noise realization and write the covariance report."""
    _run(cmd_noise, config, seed, threads, out)


@app.command("solve")
def solve_command(
    config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None, out: OutOption = None
) -> None:
    """Solve the lattice system for one noise draw."""
    _run(cmd_solve, config, seed, threads, out)


@app.command()
def converge(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None, out: OutOption = None) -> None:
    """Run the coupled convergence experiment."""
    _run(cmd_converge, config, seed, threads, out)


@app.command()
def kernel(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None, out: OutOption = None) -> None:
    """Kernel norm, truncation and smoothing checks."""
    _run(cmd_kernel, config, seed, threads, out)


@app.command()
def holder(config: ConfigOption = None, seed: SeedOption = None, threads: ThreadsOption = None, out: OutOption = None) -> None:
    """Hoelder structure functions of the Gaussian term and the solution."""
    _run(cmd_holder, config, seed, threads, out)


if __name__ == "__main__":
    app()
