"""Smoothed and discrete Green kernels, their action on fields and norm audits.

Two truncations of the mollified Dirichlet kernel are supported:

* ``lattice``: G_{D,n}^eps(x, y) = sum_{beta in I^d_n} 2^d Psi_hat(eps beta) / lambda_beta
  v_beta(kappa_n x) v_beta(kappa_n y), the kernel of the lattice scheme;
* ``series``: G_D^eps truncated to beta in I^d_N with coefficients
  -2^d Psi_hat(eps beta) / (pi^2 |beta|^2) and no step map.

Lattice coefficients act on orthonormal sine coefficients through the
multiplier coefficient / 2^d, which is exactly the inverse of
A^eps = U^t D^eps U restricted to the interior.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sp_fft
from scipy.special import gamma as gamma_fn

from .errors import ConfigurationError, NumericalError
from .lattice_core import (
    GridSpec,
    IndexLike,
    LatticeField,
    SpectralCoeffs,
    apply_along_axes,
    as_multi_index,
    beta_norm_sq,
    contract_axes,
    eigenvalue,
    eigenvalues,
    from_spectral,
    kappa_n,
    kappa_points,
    sine_basis_points,
    sine_matrix,
    thread_map,
    to_spectral,
)
from .mollifier import MollifierTable, big_psi_hat, cutoff_frequency, epsilon_of_n, lattice_psi_hat

logger = logging.getLogger(__name__)

# Psi_hat below this is treated as an exact zero coefficient.
UNDERFLOW_GUARD = 1e-300


class Truncation(str, Enum):
    LATTICE = "lattice"
    SERIES = "series"


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A truncated mollified Green kernel on a fixed grid."""

    grid: GridSpec
    eps: float
    mollifier: MollifierTable
    truncation: Truncation = Truncation.LATTICE
    series_n: Optional[int] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.eps) or self.eps < 0:
            raise ConfigurationError(f"Smoothing parameter must be finite and >= 0, got {self.eps}")
        try:
            truncation = Truncation(self.truncation)
        except ValueError:
            raise ConfigurationError(
                f"Unknown truncation: {self.truncation}. Must be one of: lattice, series"
            ) from None
        object.__setattr__(self, "truncation", truncation)
        if truncation is Truncation.SERIES:
            if self.series_n is None:
                raise ConfigurationError("Series truncation needs series_n")
            if self.series_n < self.grid.n:
                raise ConfigurationError(
                    f"Series truncation N_ref={self.series_n} is below the grid resolution n={self.grid.n}"
                )

    @property
    def n_modes(self) -> int:
        if self.truncation is Truncation.LATTICE:
            return self.grid.n
        return int(self.series_n)

    @cached_property
    def psi_weights(self) -> np.ndarray:
        return lattice_psi_hat(self.eps, self.grid.d, self.n_modes, self.mollifier)

    @cached_property
    def coefficients(self) -> np.ndarray:
        d = self.grid.d
        weights = self.psi_weights
        if self.truncation is Truncation.LATTICE:
            coeff = 2.0**d * weights / eigenvalues(self.grid)
            coeff = np.where(np.abs(weights) < UNDERFLOW_GUARD, 0.0, coeff)
        else:
            coeff = -(2.0**d) * weights / (math.pi**2 * beta_norm_sq(self.grid, self.n_modes))
        coeff = np.array(coeff, dtype=float)
        coeff.setflags(write=False)
        return coeff

    @cached_property
    def multiplier(self) -> np.ndarray:
        """Spectral multiplier in the orthonormal basis."""
        return self.coefficients / 2.0**self.grid.d

    def axis_values(self, x: Sequence[float]) -> list[np.ndarray]:
        """Per-axis factors of v_beta at x (after kappa_n for lattice kernels)."""
        b = np.arange(1, self.n_modes)
        if self.truncation is Truncation.LATTICE:
            j = kappa_n(x, self.grid)
            return [np.sin(b * np.pi * jk / self.grid.n) for jk in j]
        arr = np.asarray(x, dtype=float).reshape(-1)
        if np.any((arr == 0.0) | (arr == 1.0)):
            return [np.zeros(b.shape[0]) for _ in arr]
        return [np.sin(b * np.pi * xk) for xk in arr]


def lattice_kernel(grid: GridSpec, eps: float, mollifier: MollifierTable) -> KernelSpec:
    return KernelSpec(grid, eps, mollifier, Truncation.LATTICE)


def series_kernel(grid: GridSpec, eps: float, mollifier: MollifierTable, n_ref: int) -> KernelSpec:
    return KernelSpec(grid, eps, mollifier, Truncation.SERIES, series_n=n_ref)


def smoothed_coefficient(beta: IndexLike, eps: float, mollifier: MollifierTable) -> float:
    """-2^d Psi_hat(eps beta) / (pi^2 |beta|^2) for any beta in I^d."""
    b = as_multi_index(beta)
    weight = float(big_psi_hat(eps * np.asarray(b.components, dtype=float), mollifier))
    return -(2.0**b.d) * weight / (math.pi**2 * b.norm_sq)


def discrete_coefficient(beta: IndexLike, eps: float, grid: GridSpec, mollifier: MollifierTable) -> float:
    """2^d Psi_hat(eps beta) / lambda_beta for beta in I^d_n."""
    b = as_multi_index(beta)
    lam = eigenvalue(b, grid)
    weight = float(big_psi_hat(eps * np.asarray(b.components, dtype=float), mollifier))
    if abs(weight) < UNDERFLOW_GUARD:
        return 0.0
    return 2.0**b.d * weight / lam


def _require_lattice(kernel: KernelSpec, grid: GridSpec) -> None:
    if kernel.truncation is not Truncation.LATTICE:
        raise ConfigurationError("Only lattice kernels act on lattice fields")
    if kernel.grid != grid:
        raise ConfigurationError(f"Kernel grid ({kernel.grid}) does not match field grid ({grid})")


def apply_green(kernel: KernelSpec, h: LatticeField, method: str = "auto") -> LatticeField:
    """x -> int G_{D,n}^eps(x, y) h(y) dy for a step field h."""
    _require_lattice(kernel, h.grid)
    coeffs = to_spectral(h, method)
    scaled = SpectralCoeffs(h.grid, kernel.multiplier * coeffs.coefficients)
    return from_spectral(scaled, method)


def eval_kernel(kernel: KernelSpec, x: Sequence[float], y: Sequence[float]) -> float:
    """Pointwise kernel value as a finite separable sum."""
    ax = kernel.axis_values(x)
    ay = kernel.axis_values(y)
    return contract_axes(kernel.coefficients, [a * b for a, b in zip(ax, ay)])


def l2_norm_in_y(kernel: KernelSpec, x: Sequence[float]) -> float:
    """||G(x, .)||_{L2(D)} by Parseval: 2^{-d} sum coeff^2 v_beta(x)^2."""
    ax = kernel.axis_values(x)
    value = contract_axes(kernel.coefficients**2, [a * a for a in ax])
    return math.sqrt(max(value, 0.0) / 2.0**kernel.grid.d)


def lattice_l2_norms(kernel: KernelSpec) -> np.ndarray:
    """||G(i/n, .)||_{L2} for every interior lattice point i."""
    _require_lattice(kernel, kernel.grid)
    squares = apply_along_axes(kernel.coefficients**2, sine_matrix(kernel.grid.n) ** 2)
    return np.sqrt(np.maximum(squares, 0.0) / 2.0**kernel.grid.d)


@dataclass(frozen=True)
class NormSummary:
    """Kernel L2 norms in y over a set of points x."""

    norms: np.ndarray = field(repr=False)
    sup: float
    mean: float


def sup_l2_norm(kernel: KernelSpec, points: Optional[np.ndarray] = None) -> NormSummary:
    """Sup of ||G(x, .)||_{L2} over all lattice points, or over ``points``."""
    if kernel.truncation is Truncation.LATTICE:
        table = lattice_l2_norms(kernel)
        if points is None:
            norms = table.reshape(-1)
        else:
            j = kappa_points(points, kernel.grid)
            inside = np.all(j > 0, axis=1)
            norms = np.zeros(j.shape[0])
            if np.any(inside):
                norms[inside] = table[tuple((j[inside] - 1).T)]
    else:
        if points is None:
            raise ConfigurationError("Series kernel norms need explicit sample points")
        norms = np.array([l2_norm_in_y(kernel, p) for p in np.atleast_2d(points)])
    return NormSummary(norms=norms, sup=float(np.max(norms)), mean=float(np.mean(norms)))


def gamma_exponent(lam: float, theta: float, d: int) -> float:
    """gamma = lambda (theta + 4 - 2d) / theta."""
    return lam * (theta + 4 - 2 * d) / theta


def admissible_alpha_bound(lam: float, d: int) -> float:
    """Upper end of the admissible alpha range d / max((d-2)(2-lambda), (d-1) lambda)."""
    denom = max((d - 2) * (2 - lam), (d - 1) * lam)
    return math.inf if denom <= 0 else d / denom


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    residual: float


def loglog_fit(x: Sequence[float], y: Sequence[float]) -> LogLogFit:
    """Least-squares line through (log x, log y)."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if xs.shape != ys.shape or xs.size < 3:
        raise ConfigurationError(f"A log-log fit needs at least 3 points, got {xs.size}")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(ys)):
        raise NumericalError("A log-log fit needs strictly positive finite values")
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return LogLogFit(slope=float(slope), intercept=float(intercept), residual=residual)


@dataclass(frozen=True)
class GrowthRow:
    n: int
    eps: float
    sup_norm: float
    mean_norm: float


@dataclass(frozen=True)
class GrowthReport:
    """Lattice kernel norm table with eps = eps(n)."""

    rows: list[GrowthRow]
    ratio: float
    threshold: float

    @property
    def bounded(self) -> bool:
        return self.ratio <= 1.0 + self.threshold

    @property
    def empirical_constant(self) -> float:
        return max(r.sup_norm for r in self.rows)


def kernel_norm_growth(
    ns: Sequence[int],
    theta: float,
    d: int,
    mollifier: MollifierTable,
    n_points: Optional[int] = None,
    seed: int = 0,
    threshold: float = 0.1,
    threads: Optional[int] = None,
) -> GrowthReport:
    """Sup norms of G_{D,n}^{eps(n)}(x, .) over n and their growth between the two largest n."""
    rng = np.random.default_rng(seed)
    points = None if n_points is None else rng.random((n_points, d))

    def row(n: int) -> GrowthRow:
        eps = epsilon_of_n(n, theta, d)
        summary = sup_l2_norm(lattice_kernel(GridSpec(d, n), eps, mollifier), points)
        logger.debug("kernel norm n=%d eps=%.4f sup=%.6f", n, eps, summary.sup)
        return GrowthRow(n=n, eps=eps, sup_norm=summary.sup, mean_norm=summary.mean)

    rows = thread_map(row, sorted(int(n) for n in ns), threads)
    ratio = rows[-1].sup_norm / rows[-2].sup_norm if len(rows) >= 2 else 1.0
    return GrowthReport(rows=rows, ratio=float(ratio), threshold=threshold)


@dataclass(frozen=True)
class NormRow:
    n: int
    eps_factor: float
    eps: float
    sup_norm: float
    mean_norm: float


def kernel_norm_table(
    ns: Sequence[int],
    theta: float,
    d: int,
    mollifier: MollifierTable,
    eps_factors: Sequence[float] = (1.0,),
    n_points: Optional[int] = None,
    seed: int = 0,
    threads: Optional[int] = None,
) -> list[NormRow]:
    """Kernel L2 norms over the (n, factor * eps(n)) grid."""
    rng = np.random.default_rng(seed)
    points = None if n_points is None else rng.random((n_points, d))
    cases = [(n, float(f)) for n in sorted(int(v) for v in ns) for f in eps_factors]

    def row(case: tuple[int, float]) -> NormRow:
        n, factor = case
        eps = factor * epsilon_of_n(n, theta, d)
        summary = sup_l2_norm(lattice_kernel(GridSpec(d, n), eps, mollifier), points)
        return NormRow(n, factor, eps, summary.sup, summary.mean)

    return thread_map(row, cases, threads)


def _cross_matrix(n: int, n_ref: int) -> np.ndarray:
    """m[b, g] = int_0^1 sin(b pi kappa_n(y)) sin(g pi y) dy, b < n, g < n_ref."""
    b = np.arange(1, n)[:, None, None]
    g = np.arange(1, n_ref)[None, :, None]
    j = np.arange(0, n)[None, None, :]
    cell = (np.cos(g * np.pi * j / n) - np.cos(g * np.pi * (j + 1) / n)) / (g * np.pi)
    return np.sum(np.sin(b * np.pi * j / n) * cell, axis=-1)


def truncation_error_norm(
    grid: GridSpec,
    eps: float,
    mollifier: MollifierTable,
    points: np.ndarray,
    n_ref: Optional[int] = None,
) -> np.ndarray:
    """||G_D^eps(x, .) - G_{D,n}^eps(x, .)||_{L2(D)} at each point x.

    The series kernel is truncated to I^d_{n_ref} (default 4n). The norm is
    computed exactly in y from ||S||^2 - 2 <S, K> + ||K||^2; the cross term
    integrates the smooth sines against the step basis cellwise.
    """
    n_ref = 4 * grid.n if n_ref is None else int(n_ref)
    if n_ref < grid.n:
        raise ConfigurationError(f"Series truncation N_ref={n_ref} is below the grid resolution n={grid.n}")
    lattice = lattice_kernel(grid, eps, mollifier)
    series = series_kernel(grid, eps, mollifier, n_ref)
    cross = _cross_matrix(grid.n, n_ref)
    scale = 2.0**grid.d
    out = []
    for x in np.atleast_2d(points):
        sx = series.axis_values(x)
        kx = lattice.axis_values(x)
        s_sq = contract_axes(series.coefficients**2, [a * a for a in sx]) / scale
        k_sq = contract_axes(lattice.coefficients**2, [a * a for a in kx]) / scale
        weighted = series.coefficients * _outer(sx)
        projected = apply_along_axes(weighted, cross)
        inner = contract_axes(lattice.coefficients * projected, kx)
        out.append(math.sqrt(max(s_sq - 2.0 * inner + k_sq, 0.0)))
    return np.asarray(out)


def _outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(())
    for vec in vectors:
        out = np.multiply.outer(out, vec)
    return out


@dataclass(frozen=True)
class TruncationRow:
    n: int
    eps: float
    n_ref: int
    sup_error: float
    mean_error: float


@dataclass(frozen=True)
class TruncationReport:
    rows: list[TruncationRow]
    gamma: float
    fit: Optional[LogLogFit]


def truncation_error_rate(
    ns: Sequence[int],
    theta: float,
    lam: float,
    d: int,
    mollifier: MollifierTable,
    n_points: int = 8,
    seed: int = 0,
    ref_factor: int = 4,
    n_ref: Optional[int] = None,
    threads: Optional[int] = None,
) -> TruncationReport:
    """Truncation errors with eps = eps(n) over ``ns`` and their fitted rate."""
    rng = np.random.default_rng(seed)
    points = rng.random((n_points, d))

    def row(n: int) -> TruncationRow:
        eps = epsilon_of_n(n, theta, d)
        ref = ref_factor * n if n_ref is None else int(n_ref)
        errors = truncation_error_norm(GridSpec(d, n), eps, mollifier, points, ref)
        logger.debug("truncation n=%d N_ref=%d sup=%.6e", n, ref, float(errors.max()))
        return TruncationRow(n=n, eps=eps, n_ref=ref, sup_error=float(errors.max()), mean_error=float(errors.mean()))

    rows = thread_map(row, sorted(int(v) for v in ns), threads)
    fit = None
    if len(rows) >= 3:
        fit = loglog_fit([r.n for r in rows], [r.sup_error for r in rows])
    return TruncationReport(rows=rows, gamma=gamma_exponent(lam, theta, d), fit=fit)


class SeriesKernelEvaluator:
    """Pointwise G_D^eps(x, y) summed over all of I^d.

    Uses 1/|beta|^2 = int_0^inf exp(-t |beta|^2) dt, which makes the summand
    separable:

        G^eps(x, y) = -(2^d / pi^2) int_0^inf prod_k h_k(t) dt,
        h_k(t) = (H(t, |x_k - y_k|) - H(t, x_k + y_k)) / 2,
        H(t, z) = sum_b psi_hat(eps b) exp(-t b^2) cos(b pi z).

    H is tabulated on a uniform z grid with a type-I DCT and read back with
    four-point Lagrange interpolation; the t integral is a trapezoid rule in
    log t.
    """

    def __init__(
        self,
        eps: float,
        d: int,
        mollifier: MollifierTable,
        tol: float = 1e-10,
        log_step: float = 0.2,
        max_modes: int = 8192,
    ) -> None:
        if eps <= 0:
            raise ConfigurationError(f"Pointwise series evaluation needs eps > 0, got {eps}")
        self.eps = eps
        self.d = d
        modes = int(math.ceil(cutoff_frequency(mollifier, tol) / eps))
        if modes > max_modes:
            logger.warning("Series kernel at eps=%.4g needs %d modes; capping at %d", eps, modes, max_modes)
            modes = max_modes
        self.modes = max(modes, 1)
        b = np.arange(1, self.modes + 1, dtype=float)
        weights = mollifier.psi_hat(eps * b)

        t_min = 1e-6 / self.modes**2
        t_max = 40.0 / d
        steps = int(math.ceil(math.log(t_max / t_min) / log_step))
        s = np.linspace(math.log(t_min), math.log(t_max), steps + 1)
        ds = s[1] - s[0]
        self.t = np.exp(s)
        self.t_weights = self.t * ds
        self.t_weights[0] *= 0.5
        self.t_weights[-1] *= 0.5
        # rectangle rule on (0, t_min)
        self.t_weights[0] += t_min

        m = 1 << max(10, int(math.ceil(math.log2(32 * self.modes))))
        self.mz = m
        coeffs = np.zeros((self.t.size, m + 1))
        coeffs[:, 1 : self.modes + 1] = 0.5 * weights[None, :] * np.exp(-np.outer(self.t, b**2))
        table = sp_fft.dct(coeffs, type=1, axis=-1)
        # even reflections at z = 0 and z = 1 for the interpolation stencil
        self.table = np.concatenate([table[:, 1:2], table, table[:, -2:-4:-1]], axis=1)
        logger.debug("Series evaluator eps=%.4g modes=%d t-nodes=%d z-grid=%d", eps, self.modes, self.t.size, m)

    def _h(self, z: np.ndarray) -> np.ndarray:
        """H(t, z) for z in [0, 2] on all t nodes, shape (T, P)."""
        z = np.where(z > 1.0, 2.0 - z, z)
        u = z * self.mz
        i = np.clip(np.floor(u).astype(np.int64), 0, self.mz - 1)
        f = u - i
        # table column c corresponds to grid index c - 1
        w0 = -f * (f - 1.0) * (f - 2.0) / 6.0
        w1 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0
        w2 = -(f + 1.0) * f * (f - 2.0) / 2.0
        w3 = (f + 1.0) * f * (f - 1.0) / 6.0
        tab = self.table
        return tab[:, i] * w0 + tab[:, i + 1] * w1 + tab[:, i + 2] * w2 + tab[:, i + 3] * w3

    def __call__(self, x: np.ndarray, y: np.ndarray, chunk: int = 2048) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.empty(x.shape[0])
        scale = -(2.0**self.d) / math.pi**2
        for start in range(0, x.shape[0], chunk):
            xs = x[start : start + chunk]
            ys = y[start : start + chunk]
            prod = np.ones((self.t.size, xs.shape[0]))
            for k in range(self.d):
                prod *= 0.5 * (self._h(np.abs(xs[:, k] - ys[:, k])) - self._h(xs[:, k] + ys[:, k]))
            out[start : start + chunk] = scale * (self.t_weights @ prod)
        return out


@dataclass(frozen=True)
class PairSample:
    """Importance sample of (x, y) in D x D with weights for int int F dx dy."""

    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray
    strata: np.ndarray
    n_strata: int


def sample_pairs(d: int, n_samples: int, seed: int, r_min: float = 1e-4, n_strata: int = 32) -> PairSample:
    """x uniform in D, y = x + r omega with log r stratified on [r_min, sqrt(d)]."""
    rng = np.random.default_rng(seed)
    r_max = math.sqrt(d)
    span = math.log(r_max / r_min)
    strata = np.arange(n_samples) % n_strata
    log_r = math.log(r_min) + (strata + rng.random(n_samples)) * span / n_strata
    r = np.exp(log_r)
    omega = rng.standard_normal((n_samples, d))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    x = rng.random((n_samples, d))
    y = x + r[:, None] * omega
    sphere = 2.0 * math.pi ** (d / 2) / gamma_fn(d / 2)
    weights = sphere * r**d * span
    inside = np.all((y > 0.0) & (y < 1.0), axis=1)
    weights = np.where(inside, weights, 0.0)
    y = np.clip(y, 0.0, 1.0)
    return PairSample(x=x, y=y, weights=weights, strata=strata, n_strata=n_strata)


def _stratified_mean(values: np.ndarray, strata: np.ndarray, n_strata: int) -> tuple[float, float]:
    means = np.zeros(n_strata)
    variances = np.zeros(n_strata)
    for k in range(n_strata):
        chunk = values[strata == k]
        means[k] = chunk.mean()
        variances[k] = chunk.var(ddof=1) / chunk.size if chunk.size > 1 else 0.0
    return float(means.mean()), float(math.sqrt(variances.sum()) / n_strata)


@dataclass(frozen=True)
class SmoothingReport:
    eps: list[float]
    proxies: list[float]
    stderrs: list[float]
    alpha: float
    lam: float
    fit: LogLogFit


def smoothing_proxy_norms(
    eps_list: Sequence[float],
    alpha: float,
    d: int,
    mollifier: MollifierTable,
    n_samples: int = 100_000,
    seed: int = 0,
    threads: Optional[int] = None,
) -> tuple[list[float], list[float]]:
    """||G^eps - G^{eps/2}||_{L^alpha(D x D)} with stratified standard errors."""
    pairs = sample_pairs(d, n_samples, seed)
    active = pairs.weights > 0
    needed = sorted({float(e) for e in eps_list} | {float(e) / 2 for e in eps_list})

    def evaluate(eps: float) -> np.ndarray:
        vals = np.zeros(n_samples)
        vals[active] = SeriesKernelEvaluator(eps, d, mollifier)(pairs.x[active], pairs.y[active])
        return vals

    values = dict(zip(needed, thread_map(evaluate, needed, threads)))
    proxies, stderrs = [], []
    for eps in eps_list:
        diff = np.abs(values[float(eps)] - values[float(eps) / 2]) ** alpha * pairs.weights
        mean, se = _stratified_mean(diff, pairs.strata, pairs.n_strata)
        norm = mean ** (1.0 / alpha) if mean > 0 else 0.0
        proxies.append(norm)
        stderrs.append(norm / (alpha * mean) * se if mean > 0 else 0.0)
    return proxies, stderrs


def smoothing_error_rate(
    eps_list: Sequence[float],
    alpha: float,
    lam: float,
    d: int,
    mollifier: MollifierTable,
    n_samples: int = 100_000,
    seed: int = 0,
    threads: Optional[int] = None,
) -> SmoothingReport:
    """Log-log slope of the self-difference proxy versus eps."""
    if len(eps_list) < 3:
        raise ConfigurationError(f"Smoothing rate needs at least 3 eps values, got {len(eps_list)}")
    bound = admissible_alpha_bound(lam, d)
    if not 0 < alpha < bound:
        raise ConfigurationError(f"alpha={alpha} is outside the admissible range (0, {bound:.4f}) for lambda={lam}, d={d}")
    proxies, stderrs = smoothing_proxy_norms(eps_list, alpha, d, mollifier, n_samples, seed, threads)
    fit = loglog_fit(eps_list, proxies)
    return SmoothingReport(
        eps=[float(e) for e in eps_list],
        proxies=proxies,
        stderrs=stderrs,
        alpha=alpha,
        lam=lam,
        fit=fit,
    )


def basis_lipschitz_ratio(d: int, max_beta: int, n_pairs: int = 1000, seed: int = 0) -> float:
    """max |v_beta(x) - v_beta(z)| / (pi |beta| |x - z|) over random samples (<= 1)."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        beta = tuple(int(v) for v in rng.integers(1, max_beta + 1, size=d))
        x = rng.random((1, d))
        z = rng.random((1, d))
        dist = float(np.linalg.norm(x - z))
        if dist == 0.0:
            continue
        gap = abs(sine_basis_points(beta, x)[0] - sine_basis_points(beta, z)[0])
        worst = max(worst, gap / (math.pi * math.sqrt(sum(c * c for c in beta)) * dist))
    return worst


def eigenvalue_gap_constant(grid: GridSpec) -> float:
    """max over I^d_n of |-1/(pi^2 |beta|^2) - 1/lambda_beta| |beta| n."""
    b2 = beta_norm_sq(grid)
    lam = eigenvalues(grid)
    gap = np.abs(-1.0 / (math.pi**2 * b2) - 1.0 / lam)
    return float(np.max(gap * np.sqrt(b2) * grid.n))
