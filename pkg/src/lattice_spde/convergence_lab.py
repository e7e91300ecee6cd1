"""Coupled multi-resolution Monte Carlo experiments.

One noise realization is drawn at n_ref per sample index and summed down to
every coarser resolution, so the errors at different n compare the same
omega. The solution at n_ref is the stand-in for the continuum solution.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigurationError, NumericalError
from .green_kernel import LogLogFit, gamma_exponent, loglog_fit
from .lattice_core import CellField, GridSpec, LatticeField, worker_count
from .mollifier import build_psi
from .noise_field import (
    CorrelationModel,
    CovarianceTable,
    NoiseRealization,
    aggregate,
    covariance_table,
    get_sampler,
    sample,
)
from .spde_solver import (
    AprioriReport,
    ArrayFn,
    DriftSpec,
    Solution,
    SolveConfig,
    apriori_norm_check,
    make_g_n,
    make_source,
    solve,
)

logger = logging.getLogger(__name__)

MIN_SAMPLES = 30


def benchmark_drift() -> DriftSpec:
    return DriftSpec.from_terms("arctan", f2_slope=0.05)


def benchmark_model() -> CorrelationModel:
    return CorrelationModel("gaussian", 0.1, 4)


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """Resolution ladder, exponents and data of one convergence experiment."""

    d: int = 4
    ladder: tuple[int, ...] = (4, 8, 16)
    n_ref: int = 32
    theta: float = 12.0
    lam: float = 0.8
    alpha: float = 1.25
    samples: int = 100
    seed: int = 0
    drift: DriftSpec = field(default_factory=benchmark_drift)
    source: ArrayFn = field(default_factory=make_source)
    model: CorrelationModel = field(default_factory=benchmark_model)
    p_values: tuple[float, ...] = (2.0,)
    tolerance: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0
    kernel_gate: bool = True
    threads: Optional[int] = None
    half_width: float = 1.0
    backend: str = "auto"
    bootstrap: int = 1000
    noise_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "ladder", tuple(int(n) for n in self.ladder))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        if not self.ladder:
            raise ConfigurationError("The resolution ladder is empty")
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ConfigurationError(f"Ladder {list(self.ladder)} must be strictly increasing")
        if self.ladder[-1] > self.n_ref:
            raise ConfigurationError(f"n_ref={self.n_ref} must be >= every ladder entry")
        for n in self.ladder:
            if n < 2 or self.n_ref % n:
                raise ConfigurationError(f"Ladder entry {n} does not divide n_ref={self.n_ref}")
        if self.model.d != self.d:
            raise ConfigurationError(f"Correlation model dimension {self.model.d} does not match d={self.d}")
        if self.noise_scale < 0:
            raise ConfigurationError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.samples < 1:
            raise ConfigurationError(f"samples must be >= 1, got {self.samples}")
        for p in self.p_values:
            if not 1.0 <= p <= self.alpha_prime:
                raise ConfigurationError(f"p={p} must lie in [1, alpha'={self.alpha_prime:g}]")
        self.solve_config().validate(GridSpec(self.d, self.n_ref), self.drift)

    @property
    def alpha_prime(self) -> float:
        return self.alpha / (self.alpha - 1.0) if self.alpha > 1.0 else math.inf

    @property
    def gamma(self) -> float:
        return gamma_exponent(self.lam, self.theta, self.d)

    @property
    def predicted_rate(self) -> float:
        """r* = gamma alpha / (2 alpha')."""
        return self.gamma * self.alpha / (2.0 * self.alpha_prime)

    @property
    def resolutions(self) -> tuple[int, ...]:
        if self.ladder[-1] == self.n_ref:
            return self.ladder
        return self.ladder + (self.n_ref,)

    @property
    def compared(self) -> tuple[int, ...]:
        """Ladder entries strictly coarser than the reference grid."""
        return tuple(n for n in self.ladder if n < self.n_ref)

    def solve_config(self) -> SolveConfig:
        return SolveConfig(
            theta=self.theta,
            lam=self.lam,
            alpha=self.alpha,
            tolerance=self.tolerance,
            max_iter=self.max_iter,
            damping=self.damping,
            kernel_gate=self.kernel_gate,
        )


@dataclass(frozen=True, eq=False)
class CoupledExperiment:
    index: int
    solutions: dict[int, Solution]
    reference: Solution
    errors: dict[int, float]
    backend: str


class ExperimentContext:
    """Per-plan caches shared by all samples: covariance table, mollifier, g_n."""

    def __init__(self, plan: ExperimentPlan) -> None:
        self.plan = plan
        self.cfg = plan.solve_config()
        self.mollifier = build_psi(plan.half_width)
        self.fine_grid = GridSpec(plan.d, plan.n_ref)
        self.table: CovarianceTable = covariance_table(self.fine_grid, plan.model)
        self.g_n: dict[int, CellField] = {
            n: make_g_n(plan.source, GridSpec(plan.d, n)) for n in plan.resolutions
        }
        # build the sampler before worker threads start
        get_sampler(self.table, plan.backend)

    def run(self, index: int) -> CoupledExperiment:
        plan = self.plan
        fine = sample(self.fine_grid, self.table, plan.seed, index, plan.backend)
        if plan.noise_scale != 1.0:
            fine = NoiseRealization(fine.grid, plan.noise_scale * fine.values, fine.seed, fine.index, fine.backend)
        reference = solve(self.fine_grid, plan.drift, self.g_n[plan.n_ref], fine, self.cfg, self.mollifier)
        solutions: dict[int, Solution] = {}
        errors: dict[int, float] = {}
        for n in plan.ladder:
            if n == plan.n_ref:
                solutions[n], errors[n] = reference, 0.0
                continue
            noise = aggregate(fine, plan.n_ref // n)
            sol = solve(noise.grid, plan.drift, self.g_n[n], noise, self.cfg, self.mollifier)
            solutions[n] = sol
            errors[n] = l2_error(sol.field, reference.field)
        logger.debug("sample %d errors %s", index, errors)
        return CoupledExperiment(index, solutions, reference, errors, fine.backend)


def coupled_run(plan: ExperimentPlan, index: int, context: Optional[ExperimentContext] = None) -> CoupledExperiment:
    """Solve every resolution of ``plan`` on the noise keyed by (plan.seed, index)."""
    return (context or ExperimentContext(plan)).run(index)


def l2_error(u_coarse: LatticeField, u_ref: LatticeField) -> float:
    """Exact ||u_coarse - u_ref||_{L2(D)} of two nested step functions."""
    coarse, fine = u_coarse.grid, u_ref.grid
    if coarse.d != fine.d or fine.n % coarse.n:
        raise ConfigurationError(f"Grids are not nested: ({coarse}) vs ({fine})")
    factor = fine.n // coarse.n
    cells = u_coarse.to_cells()
    for axis in range(coarse.d):
        cells = np.repeat(cells, factor, axis=axis)
    diff = cells - u_ref.to_cells()
    return float(math.sqrt(fine.cell_volume * np.sum(diff**2)))


@dataclass(frozen=True)
class MomentRow:
    n: int
    p: float
    estimate: float
    stderr: float
    samples: int


@dataclass(frozen=True, eq=False)
class MomentTable:
    rows: list[MomentRow]
    boot: np.ndarray

    @property
    def ns(self) -> list[int]:
        return [r.n for r in self.rows]

    @property
    def estimates(self) -> list[float]:
        return [r.estimate for r in self.rows]


def mc_error_moment(
    errors: Mapping[int, Sequence[float]],
    p: float,
    alpha_prime: Optional[float] = None,
    n_boot: int = 1000,
    seed: int = 0,
) -> MomentTable:
    """(E ||u_ref - u_n||^p)^{1/p} per n with bootstrap standard errors.

    Bootstrap resamples the sample index jointly across n, so the resampled
    estimate matrix keeps the coupling and can feed ``fit_rate``.
    """
    if p < 1 or (alpha_prime is not None and p > alpha_prime):
        raise ConfigurationError(f"p={p} must lie in [1, alpha'={alpha_prime}]")
    ns = sorted(errors)
    if not ns:
        raise ConfigurationError("No error samples")
    matrix = np.column_stack([np.asarray(errors[n], dtype=float) for n in ns])
    count = matrix.shape[0]
    if count < MIN_SAMPLES:
        raise ConfigurationError(f"Insufficient samples: {count} < {MIN_SAMPLES}")
    powered = matrix**p
    estimates = np.mean(powered, axis=0) ** (1.0 / p)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, count, size=(n_boot, count))
    boot = np.mean(powered[idx], axis=1) ** (1.0 / p)
    rows = []
    for k, n in enumerate(ns):
        column = boot[:, k]
        stderr = 0.0 if np.ptp(column) == 0.0 else float(np.std(column, ddof=1))
        rows.append(MomentRow(n=int(n), p=float(p), estimate=float(estimates[k]), stderr=stderr, samples=count))
    return MomentTable(rows=rows, boot=boot)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    residual: float
    band: Optional[tuple[float, float]] = None

    @property
    def band_excludes_zero(self) -> bool:
        return self.band is not None and (self.band[1] < 0.0 or self.band[0] > 0.0)

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "band": list(self.band) if self.band is not None else None,
        }


def fit_rate(
    ns: Sequence[int],
    estimates: Sequence[float],
    boot: Optional[np.ndarray] = None,
    level: float = 0.95,
) -> RateFit:
    """Least squares on (log n, log error); percentile band from bootstrap rows."""
    fit: LogLogFit = loglog_fit(ns, estimates)
    band = None
    if boot is not None and len(boot):
        lx = np.log(np.asarray(ns, dtype=float))
        positive = np.all(boot > 0, axis=1)
        if not np.any(positive):
            raise NumericalError("Every bootstrap row contains a zero error")
        slopes = np.polyfit(lx, np.log(boot[positive]).T, 1)[0]
        tail = 50.0 * (1.0 - level)
        band = (float(np.percentile(slopes, tail)), float(np.percentile(slopes, 100.0 - tail)))
    return RateFit(slope=fit.slope, intercept=fit.intercept, residual=fit.residual, band=band)


def structure_function(field_: LatticeField, lags: Sequence[int]) -> np.ndarray:
    """Mean squared axis increments E|v(i + l e_k) - v(i)|^2 for each lag l."""
    values = field_.values
    m = field_.grid.n - 1
    out = np.empty(len(lags))
    for k, lag in enumerate(lags):
        if lag < 1 or lag >= m:
            raise ConfigurationError(f"Lag {lag} has no increments on {field_.grid}")
        total, count = 0.0, 0
        for axis in range(field_.grid.d):
            diff = np.take(values, range(lag, m), axis=axis) - np.take(values, range(0, m - lag), axis=axis)
            total += float(np.sum(diff**2))
            count += diff.size
        out[k] = total / count
    return out


@dataclass(frozen=True, eq=False)
class HolderFit:
    lags: np.ndarray
    radii: np.ndarray
    structure: np.ndarray
    slope: float
    intercept: float
    residual: float

    def to_frame(self, name: str) -> pd.DataFrame:
        return pd.DataFrame(
            {"field": name, "lag": self.lags, "radius": self.radii, "structure": self.structure}
        )


def holder_structure(fields: Sequence[LatticeField], lags: Sequence[int]) -> HolderFit:
    """Log-log slope of the structure function averaged over realizations.

    The slope estimates 2 lambda for a field with Hoelder exponent lambda.
    """
    if not fields:
        raise ConfigurationError("No fields for the structure function")
    grid = fields[0].grid
    lags_arr = np.asarray(sorted(int(l) for l in lags))
    radii = lags_arr / grid.n
    if radii[-1] > 10.0 * radii[0]:
        logger.warning("structure radii span more than one decade (%.3g to %.3g)", radii[0], radii[-1])
    structure = np.mean([structure_function(f, lags_arr) for f in fields], axis=0)
    if np.all(structure == 0.0):
        return HolderFit(lags_arr, radii, structure, 0.0, -math.inf, 0.0)
    fit = loglog_fit(radii, structure)
    return HolderFit(lags_arr, radii, structure, fit.slope, fit.intercept, fit.residual)


@dataclass(eq=False)
class ExperimentReport:
    """Per-n error moments, fitted slopes and run metadata."""

    rows: list[MomentRow]
    fits: dict[float, Optional[RateFit]]
    predicted_rate: float
    gamma: float
    errors: np.ndarray
    ladder: tuple[int, ...]
    n_ref: int
    seed: int
    samples: int
    wall_time: float
    apriori: Optional[AprioriReport] = None
    max_contraction: float = 0.0
    config: dict = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [{"n": r.n, "p": r.p, "estimate": r.estimate, "stderr": r.stderr} for r in self.rows],
            columns=["n", "p", "estimate", "stderr"],
        )

    def estimate(self, n: int, p: float = 2.0) -> MomentRow:
        for row in self.rows:
            if row.n == n and row.p == p:
                return row
        raise KeyError(f"No estimate for n={n}, p={p}")

    def summary(self) -> dict:
        fits = {f"{p:g}": (fit.to_dict() if fit else None) for p, fit in self.fits.items()}
        return {
            "fits": fits,
            "predicted_rate": self.predicted_rate,
            "gamma": self.gamma,
            "ladder": list(self.ladder),
            "n_ref": self.n_ref,
            "reference": f"finest-grid surrogate at n_ref={self.n_ref}",
            "seeds": {"seed": self.seed, "indices": [0, self.samples - 1]},
            "samples": self.samples,
            "max_contraction": self.max_contraction,
            "apriori": self.apriori.to_dict() if self.apriori else None,
            "config": self.config,
            "wall_time": self.wall_time,
        }


def run_experiment(
    plan: ExperimentPlan,
    config_echo: Optional[dict] = None,
    progress: Optional[Callable[[int], None]] = None,
) -> ExperimentReport:
    """Run every sample of ``plan`` in a thread pool and reduce the errors."""
    start = time.perf_counter()
    context = ExperimentContext(plan)
    workers = worker_count(plan.threads)
    results: list[CoupledExperiment] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for result in pool.map(context.run, range(plan.samples)):
            results.append(result)
            if progress:
                progress(result.index)

    errors = np.array([[r.errors[n] for n in plan.ladder] for r in results])
    by_n = {n: errors[:, k] for k, n in enumerate(plan.ladder)}
    rows: list[MomentRow] = []
    fits: dict[float, Optional[RateFit]] = {}
    for p in plan.p_values:
        table = mc_error_moment(by_n, p, plan.alpha_prime, plan.bootstrap, plan.seed)
        rows.extend(table.rows)
        cols = [k for k, n in enumerate(table.ns) if n in plan.compared]
        if len(cols) >= 3:
            fits[p] = fit_rate([table.ns[k] for k in cols], [table.estimates[k] for k in cols], table.boot[:, cols])
        else:
            fits[p] = None

    p_norm = min(plan.p_values[0], plan.alpha_prime)
    apriori = apriori_norm_check(
        {n: [r.solutions[n] for r in results] for n in plan.ladder},
        p_norm,
        plan.alpha_prime,
        plan.drift,
    )
    max_contraction = max(
        (s.max_contraction for r in results for s in list(r.solutions.values()) + [r.reference]),
        default=0.0,
    )
    return ExperimentReport(
        rows=rows,
        fits=fits,
        predicted_rate=plan.predicted_rate,
        gamma=plan.gamma,
        errors=errors,
        ladder=plan.ladder,
        n_ref=plan.n_ref,
        seed=plan.seed,
        samples=plan.samples,
        wall_time=time.perf_counter() - start,
        apriori=apriori,
        max_contraction=max_contraction,
        config=config_echo or {},
    )
